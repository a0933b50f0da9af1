#include "slosh/conv_kernels.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "slosh/errors.hpp"
#include "slosh/parallel.hpp"

namespace slosh::conv {

Vec3 ball_to_cube(const Vec3& r) {
  double n2 = r.norm();
  if (!(n2 <= 1.0 + 1e-9)) throw InputError("ball_to_cube: offset outside the unit ball");
  if (n2 == 0.0) return Vec3::Zero();
  Vec3 v = r;
  if (n2 > 1.0) {
    v /= n2;
    n2 = 1.0;
  }
  const double ninf = v.cwiseAbs().maxCoeff();
  return v * (n2 / ninf);
}

Mat3 ball_to_cube_jacobian(const Vec3& r) {
  const double n2 = r.norm();
  if (n2 == 0.0) return Mat3::Zero();
  int k = 0;
  for (int i = 1; i < 3; ++i)
    if (std::abs(r[i]) > std::abs(r[k])) k = i;
  const double ninf = std::abs(r[k]);
  const double sgn = r[k] > 0.0 ? 1.0 : -1.0;
  Mat3 j = Mat3::Identity() * (n2 / ninf);
  j += r * (r.transpose() / (n2 * ninf));
  j.col(k) -= r * (n2 * sgn / (ninf * ninf));
  return j;
}

double window(double d, double radius) {
  if (d >= radius) return 0.0;
  const double q = 1.0 - (d * d) / (radius * radius);
  return q * q * q;
}

namespace {

struct AxisWeights {
  int base;
  double frac;
  double dfrac;  // ∂frac/∂u
};

AxisWeights axis_weights(double u) {
  const double t = 2.0 * u + 1.5;
  if (t <= 0.0) return {0, 0.0, 0.0};
  if (t >= 3.0) return {2, 1.0, 0.0};
  const int base = std::min(static_cast<int>(std::floor(t)), 2);
  return {base, t - base, 2.0};
}

}  // namespace

Stencil trilinear_stencil(const Vec3& u) {
  const AxisWeights ax[3] = {axis_weights(u.x()), axis_weights(u.y()), axis_weights(u.z())};
  Stencil s;
  int n = 0;
  for (int a = 0; a < 2; ++a)
    for (int b = 0; b < 2; ++b)
      for (int c = 0; c < 2; ++c) {
        const int off[3] = {a, b, c};
        double w[3], dw[3];
        for (int d = 0; d < 3; ++d) {
          w[d] = off[d] ? ax[d].frac : 1.0 - ax[d].frac;
          dw[d] = off[d] ? ax[d].dfrac : -ax[d].dfrac;
        }
        s.cell[n] = static_cast<std::uint8_t>(cell_index(ax[0].base + a, ax[1].base + b, ax[2].base + c));
        s.weight[n] = w[0] * w[1] * w[2];
        s.dweight[n] = Vec3(dw[0] * w[1] * w[2], w[0] * dw[1] * w[2], w[0] * w[1] * dw[2]);
        ++n;
      }
  return s;
}

KernelGrid::KernelGrid(int in_ch, int out_ch)
    : in(in_ch), out(out_ch), values(Matrix::Zero(in_ch, kCells * out_ch)) {}

AntisymKernelGrid::AntisymKernelGrid(int in_ch, int out_ch)
    : in(in_ch), out(out_ch), free_values(Matrix::Zero(in_ch, kFreeCells * out_ch)) {}

Matrix materialize_antisym(const Matrix& free_values, int out_channels) {
  if (free_values.cols() != kFreeCells * out_channels)
    throw ConfigError("materialize_antisym: expected " + std::to_string(kFreeCells * out_channels) +
                      " columns");
  Matrix full(free_values.rows(), kCells * out_channels);
  for (int c = 0; c < kFreeCells; ++c) {
    full.middleCols(c * out_channels, out_channels) = free_values.middleCols(c * out_channels, out_channels);
    full.middleCols(mirror_cell(c) * out_channels, out_channels) =
        -free_values.middleCols(c * out_channels, out_channels);
  }
  return full;
}

KernelGrid AntisymKernelGrid::materialize() const {
  KernelGrid k;
  k.in = in;
  k.out = out;
  k.values = materialize_antisym(free_values, out);
  return k;
}

Matrix interp(const KernelGrid& kernel, const Vec3& u) {
  const Stencil s = trilinear_stencil(u);
  Matrix m = Matrix::Zero(kernel.in, kernel.out);
  for (int k = 0; k < 8; ++k)
    if (s.weight[k] != 0.0) m += s.weight[k] * kernel.cell(s.cell[k]);
  return m;
}

namespace {

/// ∂(a·w_k)/∂r = w_k ∇a + a Jᵀ ∇_u w_k for a unit offset r.
std::array<Vec3, 8> edge_derivatives(const Vec3& r) {
  const double base = 1.0 - r.squaredNorm();
  const double a = base * base * base;
  const Vec3 grad_a = -6.0 * base * base * r;
  const Stencil st = trilinear_stencil(ball_to_cube(r));
  const Mat3 jt = ball_to_cube_jacobian(r).transpose();
  std::array<Vec3, 8> d;
  for (int k = 0; k < 8; ++k) d[k] = st.weight[k] * grad_a + a * (jt * st.dweight[k]);
  return d;
}

}  // namespace

std::shared_ptr<const ConvGeometry> build_geometry(std::span<const Vec3> queries,
                                                   std::span<const Vec3> sources, double radius,
                                                   bool derivatives) {
  auto g = std::make_shared<ConvGeometry>();
  g->radius = radius;
  g->num_queries = queries.size();
  g->num_sources = sources.size();
  g->row_begin.assign(queries.size() + 1, 0);
  const NeighborIndex index = NeighborIndex::build(sources, radius);
  const double inv_r = 1.0 / radius;
  const double r2 = radius * radius;
  for (std::size_t q = 0; q < queries.size(); ++q) {
    if (!queries[q].allFinite()) throw NumericalError("conv geometry: non-finite query position");
    index.for_each(queries[q], [&](std::size_t id, const Vec3& off, double d2) {
      if (d2 >= r2) return;  // window vanishes on the sphere
      const Vec3 r = off * inv_r;
      const double a = window(std::sqrt(d2), radius);
      const Stencil s = trilinear_stencil(ball_to_cube(r));
      std::array<double, 8> w;
      for (int k = 0; k < 8; ++k) w[k] = a * s.weight[k];
      g->source.push_back(static_cast<std::uint32_t>(id));
      g->unit_offset.push_back(r);
      g->cells.push_back(s.cell);
      g->weights.push_back(w);
      if (derivatives) g->dweights.push_back(edge_derivatives(r));
    });
    g->row_begin[q + 1] = static_cast<std::uint32_t>(g->source.size());
  }
  return g;
}

std::shared_ptr<const ConvGeometry> build_geometry(const Matrix& queries, const Matrix& sources,
                                                   double radius, bool derivatives) {
  if (queries.cols() != 3 || sources.cols() != 3) throw ConfigError("build_geometry: positions must be n x 3");
  std::vector<Vec3> q(static_cast<std::size_t>(queries.rows())), s(static_cast<std::size_t>(sources.rows()));
  for (Eigen::Index i = 0; i < queries.rows(); ++i) q[static_cast<std::size_t>(i)] = queries.row(i).transpose();
  for (Eigen::Index i = 0; i < sources.rows(); ++i) s[static_cast<std::size_t>(i)] = sources.row(i).transpose();
  return build_geometry(q, s, radius, derivatives);
}

namespace {

/// out_q = Σ_e Σ_k w_ek · (P[src_e, cell_ek] + [self] P[q, cell_ek]).
Matrix gather_forward(const ConvGeometry& g, const Matrix& proj, int cout, bool add_self) {
  Matrix out = Matrix::Zero(static_cast<Eigen::Index>(g.num_queries), cout);
  parallel_for(g.num_queries, [&](std::size_t q) {
    double* o = out.row(static_cast<Eigen::Index>(q)).data();
    const double* self_row = add_self ? proj.row(static_cast<Eigen::Index>(q)).data() : nullptr;
    for (std::uint32_t e = g.row_begin[q]; e < g.row_begin[q + 1]; ++e) {
      const double* src_row = proj.row(g.source[e]).data();
      const auto& cells = g.cells[e];
      const auto& w = g.weights[e];
      for (int k = 0; k < 8; ++k) {
        const double wk = w[k];
        if (wk == 0.0) continue;
        const double* p = src_row + cells[k] * cout;
        if (self_row) {
          const double* ps = self_row + cells[k] * cout;
          for (int c = 0; c < cout; ++c) o[c] += wk * (p[c] + ps[c]);
        } else {
          for (int c = 0; c < cout; ++c) o[c] += wk * p[c];
        }
      }
    }
  });
  return out;
}

/// Adjoint of gather_forward with respect to the projection.
Matrix gather_backward(const ConvGeometry& g, const Matrix& grad_out, Eigen::Index proj_rows, int cout,
                       bool add_self) {
  Matrix dproj = Matrix::Zero(proj_rows, kCells * cout);
  for (std::size_t q = 0; q < g.num_queries; ++q) {
    const double* go = grad_out.row(static_cast<Eigen::Index>(q)).data();
    double* self_row = add_self ? dproj.row(static_cast<Eigen::Index>(q)).data() : nullptr;
    for (std::uint32_t e = g.row_begin[q]; e < g.row_begin[q + 1]; ++e) {
      double* src_row = dproj.row(g.source[e]).data();
      const auto& cells = g.cells[e];
      const auto& w = g.weights[e];
      for (int k = 0; k < 8; ++k) {
        const double wk = w[k];
        if (wk == 0.0) continue;
        double* p = src_row + cells[k] * cout;
        for (int c = 0; c < cout; ++c) p[c] += wk * go[c];
        if (self_row) {
          double* ps = self_row + cells[k] * cout;
          for (int c = 0; c < cout; ++c) ps[c] += wk * go[c];
        }
      }
    }
  }
  return dproj;
}

/// ∂out_q/∂r_e contracted with grad_out, for every edge; accumulated into
/// source (+) and query (−) position gradients, scaled by 1/R.
void position_backward(const ConvGeometry& g, const Matrix& proj, const Matrix& grad_out, int cout,
                       bool add_self, Matrix* dq, Matrix* ds) {
  const double inv_r = 1.0 / g.radius;
  const bool cached = g.dweights.size() == g.num_edges();
  for (std::size_t q = 0; q < g.num_queries; ++q) {
    const double* go = grad_out.row(static_cast<Eigen::Index>(q)).data();
    const double* self_row = add_self ? proj.row(static_cast<Eigen::Index>(q)).data() : nullptr;
    for (std::uint32_t e = g.row_begin[q]; e < g.row_begin[q + 1]; ++e) {
      const std::uint32_t src = g.source[e];
      if (add_self && src == q) continue;  // self edge: offset is identically zero
      const std::array<Vec3, 8> d = cached ? g.dweights[e] : edge_derivatives(g.unit_offset[e]);
      const double* src_row = proj.row(src).data();
      const auto& cells = g.cells[e];
      Vec3 grad_r = Vec3::Zero();
      for (int k = 0; k < 8; ++k) {
        const double* p = src_row + cells[k] * cout;
        double dot = 0.0;
        if (self_row) {
          const double* ps = self_row + cells[k] * cout;
          for (int c = 0; c < cout; ++c) dot += (p[c] + ps[c]) * go[c];
        } else {
          for (int c = 0; c < cout; ++c) dot += p[c] * go[c];
        }
        grad_r += dot * d[k];
      }
      const Vec3 gx = grad_r * inv_r;
      if (ds) ds->row(src) += gx.transpose();
      if (dq) dq->row(static_cast<Eigen::Index>(q)) -= gx.transpose();
    }
  }
}

void check_kernel(const Matrix& features, const Matrix& kernel, const char* op) {
  if (features.cols() != kernel.rows())
    throw ConfigError(std::string(op) + ": feature width " + std::to_string(features.cols()) +
                      " does not match kernel input channels " + std::to_string(kernel.rows()));
  if (kernel.cols() % kCells != 0) throw ConfigError(std::string(op) + ": kernel is not a [4,4,4] grid");
}

}  // namespace

Matrix cconv(const Matrix& features, std::span<const Vec3> sources, std::span<const Vec3> queries,
             const KernelGrid& kernel, double radius) {
  if (static_cast<std::size_t>(features.rows()) != sources.size())
    throw ConfigError("cconv: features must align with source positions");
  check_kernel(features, kernel.values, "cconv");
  const auto g = build_geometry(queries, sources, radius);
  const Matrix proj = features * kernel.values;
  return gather_forward(*g, proj, kernel.out, false);
}

Matrix ascc(const Matrix& features, std::span<const Vec3> positions, const AntisymKernelGrid& kernel,
            double radius) {
  if (static_cast<std::size_t>(features.rows()) != positions.size())
    throw ConfigError("ascc: features must align with positions");
  const KernelGrid full = kernel.materialize();
  check_kernel(features, full.values, "ascc");
  const auto g = build_geometry(positions, positions, radius);
  const Matrix proj = features * full.values;
  return gather_forward(*g, proj, kernel.out, true);
}

Var cconv(Var features, Var kernel, const std::shared_ptr<const ConvGeometry>& geometry,
          Var query_positions, Var source_positions) {
  check_kernel(features.value(), kernel.value(), "cconv");
  if (static_cast<std::size_t>(features.rows()) != geometry->num_sources)
    throw ConfigError("cconv: features must align with geometry sources");
  const int cout = static_cast<int>(kernel.cols() / kCells);
  Tape& tape = *features.tape;
  auto proj = std::make_shared<Matrix>(features.value() * kernel.value());
  Matrix out = gather_forward(*geometry, *proj, cout, false);
  std::vector<int> inputs{features.id, kernel.id};
  const int qid = query_positions.valid() ? query_positions.id : -1;
  const int sid = source_positions.valid() ? source_positions.id : -1;
  if (qid >= 0) inputs.push_back(qid);
  if (sid >= 0) inputs.push_back(sid);
  return tape.push(
      std::move(out), std::move(inputs),
      [f = features.id, k = kernel.id, qid, sid, geometry, proj, cout](Tape& t, int self) {
        const Matrix& go = t.grad(self);
        if (t.needs_grad(f) || t.needs_grad(k)) {
          const Matrix dproj = gather_backward(*geometry, go, proj->rows(), cout, false);
          if (t.needs_grad(f)) t.grad(f).noalias() += dproj * t.value(k).transpose();
          if (t.needs_grad(k)) t.grad(k).noalias() += t.value(f).transpose() * dproj;
        }
        const bool need_q = qid >= 0 && t.needs_grad(qid);
        const bool need_s = sid >= 0 && t.needs_grad(sid);
        if (need_q || need_s)
          position_backward(*geometry, *proj, go, cout, false, need_q ? &t.grad(qid) : nullptr,
                            need_s ? &t.grad(sid) : nullptr);
      },
      "cconv");
}

Var ascc(Var features, Var kernel, const std::shared_ptr<const ConvGeometry>& geometry, Var positions) {
  check_kernel(features.value(), kernel.value(), "ascc");
  if (geometry->num_queries != geometry->num_sources ||
      static_cast<std::size_t>(features.rows()) != geometry->num_sources)
    throw ConfigError("ascc: geometry must be a self geometry aligned with features");
  const int cout = static_cast<int>(kernel.cols() / kCells);
  Tape& tape = *features.tape;
  auto proj = std::make_shared<Matrix>(features.value() * kernel.value());
  Matrix out = gather_forward(*geometry, *proj, cout, true);
  std::vector<int> inputs{features.id, kernel.id};
  const int pid = positions.valid() ? positions.id : -1;
  if (pid >= 0) inputs.push_back(pid);
  return tape.push(
      std::move(out), std::move(inputs),
      [f = features.id, k = kernel.id, pid, geometry, proj, cout](Tape& t, int self) {
        const Matrix& go = t.grad(self);
        if (t.needs_grad(f) || t.needs_grad(k)) {
          const Matrix dproj = gather_backward(*geometry, go, proj->rows(), cout, true);
          if (t.needs_grad(f)) t.grad(f).noalias() += dproj * t.value(k).transpose();
          if (t.needs_grad(k)) t.grad(k).noalias() += t.value(f).transpose() * dproj;
        }
        if (pid >= 0 && t.needs_grad(pid)) {
          Matrix& dp = t.grad(pid);
          position_backward(*geometry, *proj, go, cout, true, &dp, &dp);
        }
      },
      "ascc");
}

Var materialize_antisym(Var free_values, int out_channels) {
  Matrix full = materialize_antisym(free_values.value(), out_channels);
  return free_values.tape->push(
      std::move(full), {free_values.id},
      [f = free_values.id, out_channels](Tape& t, int self) {
        if (!t.needs_grad(f)) return;
        const Matrix& g = t.grad(self);
        Matrix& gf = t.grad(f);
        for (int c = 0; c < kFreeCells; ++c)
          gf.middleCols(c * out_channels, out_channels) +=
              g.middleCols(c * out_channels, out_channels) -
              g.middleCols(mirror_cell(c) * out_channels, out_channels);
      },
      "materialize_antisym");
}

void init_glorot(Matrix& values, int fan_in, int fan_out, std::mt19937_64& rng) {
  const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  std::uniform_real_distribution<double> dist(-limit, limit);
  for (Eigen::Index i = 0; i < values.size(); ++i) values.data()[i] = dist(rng);
}

}  // namespace slosh::conv
