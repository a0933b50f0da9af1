#include "slosh/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numeric>
#include <random>

#include "json.hpp"
#include "slosh/errors.hpp"
#include "slosh/parallel.hpp"
#include "slosh/sph.hpp"

namespace slosh {
namespace {

std::vector<double> nearest_distances(std::span<const Vec3> from, std::span<const Vec3> to) {
  std::vector<double> d(from.size());
  parallel_for(from.size(), [&](std::size_t i) {
    double best = std::numeric_limits<double>::infinity();
    for (const Vec3& t : to) best = std::min(best, (from[i] - t).squaredNorm());
    d[i] = std::sqrt(best);
  });
  return d;
}

double mean(const std::vector<double>& v) { return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size()); }

std::vector<Vec3> subsample(std::span<const Vec3> pts, std::size_t n, std::mt19937_64& rng) {
  std::vector<std::size_t> idx(pts.size());
  std::iota(idx.begin(), idx.end(), 0);
  for (std::size_t i = 0; i < n; ++i) {
    std::uniform_int_distribution<std::size_t> pick(i, idx.size() - 1);
    std::swap(idx[i], idx[pick(rng)]);
  }
  std::vector<Vec3> out(n);
  for (std::size_t i = 0; i < n; ++i) out[i] = pts[idx[i]];
  return out;
}

}  // namespace

double chamfer(std::span<const Vec3> a, std::span<const Vec3> b) {
  if (a.empty() || b.empty()) throw InputError("chamfer: point sets must be nonempty");
  return 0.5 * (mean(nearest_distances(a, b)) + mean(nearest_distances(b, a)));
}

std::vector<int> hungarian(const Matrix& cost) {
  const int n = static_cast<int>(cost.rows());
  if (cost.cols() != n) throw InputError("hungarian: cost matrix must be square");
  // Shortest augmenting paths with potentials; 1-based internally.
  const double inf = std::numeric_limits<double>::infinity();
  std::vector<double> u(n + 1, 0.0), v(n + 1, 0.0), minv(n + 1);
  std::vector<int> p(n + 1, 0), way(n + 1, 0);
  std::vector<char> used(n + 1);
  for (int i = 1; i <= n; ++i) {
    p[0] = i;
    int j0 = 0;
    std::fill(minv.begin(), minv.end(), inf);
    std::fill(used.begin(), used.end(), 0);
    do {
      used[j0] = 1;
      const int i0 = p[j0];
      double delta = inf;
      int j1 = 0;
      for (int j = 1; j <= n; ++j) {
        if (used[j]) continue;
        const double cur = cost(i0 - 1, j - 1) - u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (int j = 0; j <= n; ++j) {
        if (used[j]) {
          u[p[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (p[j0] != 0);
    do {
      const int j1 = way[j0];
      p[j0] = p[j1];
      j0 = j1;
    } while (j0);
  }
  std::vector<int> assignment(n, -1);
  for (int j = 1; j <= n; ++j)
    if (p[j] > 0) assignment[p[j] - 1] = j - 1;
  return assignment;
}

double emd(std::span<const Vec3> a, std::span<const Vec3> b, std::uint64_t seed) {
  if (a.size() != b.size()) throw InputError("emd: point sets must have equal cardinality");
  if (a.empty()) throw InputError("emd: point sets must be nonempty");
  std::vector<Vec3> sa(a.begin(), a.end()), sb(b.begin(), b.end());
  if (sa.size() > kEmdExactLimit) {
    std::mt19937_64 rng(seed);
    sa = subsample(a, kEmdExactLimit, rng);
    sb = subsample(b, kEmdExactLimit, rng);
  }
  const auto n = static_cast<Eigen::Index>(sa.size());
  Matrix cost(n, n);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < n; ++j)
      cost(i, j) = (sa[static_cast<std::size_t>(i)] - sb[static_cast<std::size_t>(j)]).norm();
  const auto match = hungarian(cost);
  double total = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) total += cost(i, match[static_cast<std::size_t>(i)]);
  return total / static_cast<double>(n);
}

double frame_sequence_error(const ParticleSet& pred, const ParticleSet& truth) {
  const auto t = truth.positions_of(Kind::Fluid);
  const auto p = pred.positions_of(Kind::Fluid);
  if (t.empty() || p.empty()) throw InputError("sequence_error: frames have no fluid particles");
  return mean(nearest_distances(t, p));
}

double sequence_error(const FrameSequence& pred, const FrameSequence& truth, std::size_t frame) {
  if (frame >= pred.size() || frame >= truth.size())
    throw InputError("sequence_error: frame " + std::to_string(frame) + " out of range");
  return frame_sequence_error(pred.frames[frame], truth.frames[frame]);
}

double max_density_error(const ParticleSet& pred, const ParticleSet& truth, const SimConfig& config) {
  if (pred.count(Kind::Fluid) == 0 || truth.count(Kind::Fluid) == 0)
    throw InputError("max_density_error: frames must contain fluid");
  const double denom = max_fluid_density(truth, config);
  if (!(denom > 0.0)) throw InputError("max_density_error: truth frame has zero peak density");
  return std::abs(1.0 - max_fluid_density(pred, config) / denom);
}

double inside_fraction(const ParticleSet& state, double margin) {
  const auto b = state.positions_of(Kind::Boundary);
  const auto f = state.positions_of(Kind::Fluid);
  if (f.empty()) return 1.0;
  if (b.empty()) return 1.0;
  const Aabb box = bounds_of(b);
  std::size_t inside = 0;
  for (const Vec3& p : f) inside += box.contains(p, margin) ? 1 : 0;
  return static_cast<double>(inside) / static_cast<double>(f.size());
}

void EvalReport::validate() const {
  auto ok = [](double v) { return std::isfinite(v) && v >= 0.0; };
  bool good = ok(cd_t1) && ok(cd_t2) && ok(emd_t1) && ok(emd_t2) && ok(max_density_error) &&
              ok(mean_density_error) && ok(max_density_error_gcc) && ok(seconds_per_frame) &&
              ok(truth_seconds_per_frame) && ok(inside_fraction);
  for (double d : d_n) good = good && ok(d);
  if (!good) throw NumericalError("eval report: entries must be finite and non-negative");
}

std::string EvalReport::to_json() const {
  nlohmann::json j{{"cd_t1", cd_t1},
                   {"cd_t2", cd_t2},
                   {"emd_t1", emd_t1},
                   {"emd_t2", emd_t2},
                   {"d_n", d_n},
                   {"max_density_error", max_density_error},
                   {"mean_density_error", mean_density_error},
                   {"max_density_error_gcc", max_density_error_gcc},
                   {"seconds_per_frame", seconds_per_frame},
                   {"truth_seconds_per_frame", truth_seconds_per_frame},
                   {"inside_fraction", inside_fraction},
                   {"frames", frames},
                   {"windows", windows}};
  return j.dump(2) + "\n";
}

EvalReport EvalReport::from_json(const std::string& text) {
  const auto j = nlohmann::json::parse(text);
  EvalReport r;
  r.cd_t1 = j.at("cd_t1");
  r.cd_t2 = j.at("cd_t2");
  r.emd_t1 = j.at("emd_t1");
  r.emd_t2 = j.at("emd_t2");
  r.d_n = j.at("d_n").get<std::vector<double>>();
  r.max_density_error = j.at("max_density_error");
  r.mean_density_error = j.at("mean_density_error");
  r.max_density_error_gcc = j.at("max_density_error_gcc");
  r.seconds_per_frame = j.at("seconds_per_frame");
  r.truth_seconds_per_frame = j.at("truth_seconds_per_frame");
  r.inside_fraction = j.at("inside_fraction");
  r.frames = j.at("frames");
  r.windows = j.at("windows");
  return r;
}

std::string EvalReport::table() const {
  char buf[512];
  const double dn = d_n.empty() ? 0.0 : d_n.back();
  std::snprintf(buf, sizeof buf,
                "%-10s %-10s %-10s %-10s %-12s %-12s %-12s\n"
                "%-10.3f %-10.3f %-10.3f %-10.3f %-12.3f %-12.4f %-12.4f\n",
                "CD t+1", "CD t+2", "EMD t+1", "EMD t+2", "d^n (mm)", "e (g/cm3)", "s/frame", cd_t1 * 1e3,
                cd_t2 * 1e3, emd_t1 * 1e3, emd_t2 * 1e3, dn * 1e3, max_density_error_gcc, seconds_per_frame);
  return std::string("(CD/EMD in mm)\n") + buf;
}

EvalReport evaluate(const FrameSequence& pred, const FrameSequence& truth, const SimConfig& config,
                    std::uint64_t seed) {
  if (pred.empty() || truth.empty()) throw InputError("evaluate: empty sequence");
  pred.validate();
  truth.validate();
  if (pred.frames[0].count(Kind::Fluid) != truth.frames[0].count(Kind::Fluid))
    throw InputError("evaluate: sequences have different fluid particle counts");
  const std::size_t n = std::min(pred.size(), truth.size());
  EvalReport r;
  r.frames = n;
  r.seconds_per_frame = pred.seconds_per_frame;
  r.truth_seconds_per_frame = truth.seconds_per_frame;
  for (std::size_t f = 0; f < n; ++f) r.d_n.push_back(frame_sequence_error(pred.frames[f], truth.frames[f]));
  auto at = [&](std::size_t f, auto metric) {
    const std::size_t k = std::min(f, n - 1);
    return metric(pred.frames[k].positions_of(Kind::Fluid), truth.frames[k].positions_of(Kind::Fluid));
  };
  auto cd = [](const std::vector<Vec3>& a, const std::vector<Vec3>& b) { return chamfer(a, b); };
  auto em = [seed](const std::vector<Vec3>& a, const std::vector<Vec3>& b) { return emd(a, b, seed); };
  r.cd_t1 = at(1, cd);
  r.cd_t2 = at(2, cd);
  r.emd_t1 = at(1, em);
  r.emd_t2 = at(2, em);
  r.windows = 1;
  double sum = 0.0;
  std::size_t count = 0;
  r.inside_fraction = 1.0;
  for (std::size_t f = std::min<std::size_t>(1, n - 1); f < n; ++f) {
    const double tmax = max_fluid_density(truth.frames[f], config);
    const double pmax = max_fluid_density(pred.frames[f], config);
    if (!(tmax > 0.0)) throw InputError("evaluate: degenerate truth density");
    const double e = std::abs(1.0 - pmax / tmax);
    r.max_density_error = std::max(r.max_density_error, e);
    r.max_density_error_gcc = std::max(r.max_density_error_gcc, std::abs(pmax - tmax) * 1e-3);
    sum += e;
    ++count;
    r.inside_fraction = std::min(r.inside_fraction, inside_fraction(pred.frames[f], 4.0 * config.particle_radius));
  }
  r.mean_density_error = count ? sum / static_cast<double>(count) : 0.0;
  r.validate();
  return r;
}

void evaluate_windows(EvalReport& report, const Network& net, const FrameSequence& truth, const SimConfig& config,
                      std::size_t stride, std::uint64_t seed) {
  if (stride == 0) throw InputError("evaluate_windows: stride must be positive");
  if (truth.size() < 3) throw InputError("evaluate_windows: need at least three truth frames");
  double cd1 = 0, cd2 = 0, em1 = 0, em2 = 0;
  std::size_t windows = 0;
  auto rotated = [&](std::size_t f) {
    return std::any_of(truth.rotations.begin(), truth.rotations.end(), [f](const auto& r) { return r.frame == f; });
  };
  for (std::size_t s = 0; s + 2 < truth.size(); s += stride) {
    if (rotated(s + 1) || rotated(s + 2)) continue;
    ParticleSet state = truth.frames[s];
    step(net, state, config);
    const auto p1 = state.positions_of(Kind::Fluid);
    const auto t1 = truth.frames[s + 1].positions_of(Kind::Fluid);
    step(net, state, config);
    const auto p2 = state.positions_of(Kind::Fluid);
    const auto t2 = truth.frames[s + 2].positions_of(Kind::Fluid);
    cd1 += chamfer(p1, t1);
    cd2 += chamfer(p2, t2);
    em1 += emd(p1, t1, seed);
    em2 += emd(p2, t2, seed);
    ++windows;
  }
  if (windows == 0) throw InputError("evaluate_windows: no rotation-free windows");
  const double w = static_cast<double>(windows);
  report.cd_t1 = cd1 / w;
  report.cd_t2 = cd2 / w;
  report.emd_t1 = em1 / w;
  report.emd_t2 = em2 / w;
  report.windows = windows;
}

}  // namespace slosh
