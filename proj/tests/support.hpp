#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <random>
#include <vector>

#include "slosh/autodiff.hpp"
#include "slosh/conv_kernels.hpp"
#include "slosh/core_types.hpp"

namespace testing {

using slosh::Matrix;
using slosh::Vec3;

inline std::vector<Vec3> random_cloud(std::mt19937_64& rng, std::size_t n, double extent) {
  std::uniform_real_distribution<double> u(-extent, extent);
  std::vector<Vec3> pts(n);
  for (auto& p : pts) p = Vec3(u(rng), u(rng), u(rng));
  return pts;
}

inline Matrix random_matrix(std::mt19937_64& rng, Eigen::Index r, Eigen::Index c, double scale = 1.0) {
  std::normal_distribution<double> n(0.0, scale);
  Matrix m(r, c);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = n(rng);
  return m;
}

/// Independent transcription of Λ: r·‖r‖₂/‖r‖∞.
inline Vec3 scratch_lambda(const Vec3& r) {
  const double l2 = std::sqrt(r.x() * r.x() + r.y() * r.y() + r.z() * r.z());
  const double linf = std::max({std::abs(r.x()), std::abs(r.y()), std::abs(r.z())});
  if (linf == 0.0) return Vec3::Zero();
  return r * (l2 / linf);
}

/// Trilinear lookup on a 4³ grid of Cin×Cout blocks with cell centers at
/// -0.75, -0.25, 0.25, 0.75 and clamping outside the outer centers.
inline Matrix scratch_interp(const Matrix& kernel, int cout, const Vec3& u) {
  int lo[3];
  double f[3];
  for (int d = 0; d < 3; ++d) {
    double t = (u[d] + 0.75) / 0.5;
    t = std::min(std::max(t, 0.0), 3.0);
    lo[d] = std::min(static_cast<int>(t), 2);
    f[d] = t - lo[d];
  }
  Matrix out = Matrix::Zero(kernel.rows(), cout);
  for (int a = 0; a < 2; ++a)
    for (int b = 0; b < 2; ++b)
      for (int c = 0; c < 2; ++c) {
        const double w = (a ? f[0] : 1 - f[0]) * (b ? f[1] : 1 - f[1]) * (c ? f[2] : 1 - f[2]);
        const int cell = ((lo[0] + a) * 4 + (lo[1] + b)) * 4 + (lo[2] + c);
        out += w * kernel.middleCols(cell * cout, cout);
      }
  return out;
}

/// Eq. 1 by direct double loop: out(x) = Σ_i a(‖x_i − x‖) f_iᵀ g(Λ((x_i − x)/R)).
inline Matrix scratch_cconv(const Matrix& feats, const std::vector<Vec3>& src, const std::vector<Vec3>& qry,
                            const Matrix& kernel, int cout, double R) {
  Matrix out = Matrix::Zero(static_cast<Eigen::Index>(qry.size()), cout);
  for (std::size_t q = 0; q < qry.size(); ++q)
    for (std::size_t i = 0; i < src.size(); ++i) {
      const Vec3 d = src[i] - qry[q];
      const double dist = d.norm();
      if (dist >= R) continue;
      const double s = 1.0 - dist * dist / (R * R);
      const double a = s * s * s;
      const Matrix g = scratch_interp(kernel, cout, scratch_lambda(d / R));
      out.row(static_cast<Eigen::Index>(q)) += a * feats.row(static_cast<Eigen::Index>(i)) * g;
    }
  return out;
}

/// ASCC by direct double loop over a self set.
inline Matrix scratch_ascc(const Matrix& feats, const std::vector<Vec3>& pos, const Matrix& full_kernel, int cout,
                           double R) {
  Matrix out = Matrix::Zero(static_cast<Eigen::Index>(pos.size()), cout);
  for (std::size_t q = 0; q < pos.size(); ++q)
    for (std::size_t i = 0; i < pos.size(); ++i) {
      const Vec3 d = pos[i] - pos[q];
      const double dist = d.norm();
      if (dist >= R) continue;
      const double s = 1.0 - dist * dist / (R * R);
      const Matrix g = scratch_interp(full_kernel, cout, scratch_lambda(d / R));
      out.row(static_cast<Eigen::Index>(q)) +=
          s * s * s * (feats.row(static_cast<Eigen::Index>(q)) + feats.row(static_cast<Eigen::Index>(i))) * g;
    }
  return out;
}

struct GradCheck {
  double max_rel = 0.0;
  double max_abs = 0.0;
};

/// Central differences of a scalar function of one matrix argument, compared
/// with an analytic gradient. Relative error per entry is taken against
/// max(|a|, |n|, floor, 1e-3·max|a|) so near-zero entries do not measure
/// roundoff.
/// With `sample` > 0 only that many randomly chosen entries are checked.
inline GradCheck check_gradient(const std::function<double(const Matrix&)>& f, const Matrix& x,
                                const Matrix& analytic, double eps = 1e-6, double floor = 1e-6,
                                Eigen::Index sample = 0, std::mt19937_64* rng = nullptr) {
  GradCheck r;
  floor = std::max(floor, 1e-3 * analytic.cwiseAbs().maxCoeff());
  Matrix xp = x;
  std::vector<Eigen::Index> entries(static_cast<std::size_t>(x.size()));
  for (Eigen::Index i = 0; i < x.size(); ++i) entries[static_cast<std::size_t>(i)] = i;
  if (sample > 0 && sample < x.size() && rng) {
    std::shuffle(entries.begin(), entries.end(), *rng);
    entries.resize(static_cast<std::size_t>(sample));
  }
  for (Eigen::Index i : entries) {
    const double old = xp.data()[i];
    xp.data()[i] = old + eps;
    const double fp = f(xp);
    xp.data()[i] = old - eps;
    const double fm = f(xp);
    xp.data()[i] = old;
    const double num = (fp - fm) / (2 * eps);
    const double an = analytic.data()[i];
    const double err = std::abs(num - an);
    r.max_abs = std::max(r.max_abs, err);
    r.max_rel = std::max(r.max_rel, err / std::max({std::abs(num), std::abs(an), floor}));
  }
  return r;
}

}  // namespace testing
