#include "slosh/sph.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include "slosh/errors.hpp"
#include "slosh/parallel.hpp"
#include "slosh/tank.hpp"

namespace slosh {

double CubicKernel::W(double r) const {
  const double q = r / support;
  if (q >= 1.0) return 0.0;
  const double k = 8.0 / (std::numbers::pi * support * support * support);
  if (q <= 0.5) return k * (6.0 * q * q * q - 6.0 * q * q + 1.0);
  const double t = 1.0 - q;
  return k * 2.0 * t * t * t;
}

Vec3 CubicKernel::grad(const Vec3& r) const {
  const double d = r.norm();
  const double q = d / support;
  if (q >= 1.0 || d <= 1e-12 * support) return Vec3::Zero();
  const double l = 48.0 / (std::numbers::pi * support * support * support);
  const Vec3 dir = r / (d * support);
  if (q <= 0.5) return l * q * (3.0 * q - 2.0) * dir;
  const double t = 1.0 - q;
  return -l * t * t * dir;
}

void SphConfig::validate() const {
  if (!(density_tolerance > 0.0) || !(divergence_tolerance > 0.0))
    throw ConfigError("sph: tolerances must be positive");
  if (max_iterations < 1 || min_iterations < 0 || min_iterations > max_iterations)
    throw ConfigError("sph: bad iteration limits");
  if (!(cfl > 0.0) || !(max_substep > 0.0)) throw ConfigError("sph: cfl and max_substep must be positive");
  if (xsph < 0.0) throw ConfigError("sph: xsph must be non-negative");
}

double sheet_calibration(const SimConfig& config) {
  const double s = config.spacing();
  const CubicKernel k(config.sph_support());
  const int n = static_cast<int>(std::ceil(config.sph_support() / s)) + 1;
  double sum = 0.0;
  for (int i = -n; i <= n; ++i)
    for (int j = -n; j <= n; ++j) sum += k.W(s * std::hypot(i, j));
  return s * s * s * sum;
}

std::vector<double> boundary_volumes(std::span<const Vec3> boundary, const SimConfig& config) {
  const CubicKernel k(config.sph_support());
  const double kappa = sheet_calibration(config);
  const NeighborIndex index = NeighborIndex::build(boundary, config.sph_support());
  std::vector<double> vol(boundary.size());
  parallel_for(boundary.size(), [&](std::size_t b) {
    double sum = 0.0;
    index.for_each(boundary[b], [&](std::size_t, const Vec3&, double d2) { sum += k.W(std::sqrt(d2)); });
    vol[b] = kappa / sum;
  });
  return vol;
}

std::vector<double> density(std::span<const Vec3> positions, std::span<const double> masses, double support) {
  if (positions.size() != masses.size()) throw ConfigError("density: one mass per position required");
  const CubicKernel k(support);
  std::vector<double> rho(positions.size(), 0.0);
  if (positions.empty()) return rho;
  const NeighborIndex index = NeighborIndex::build(positions, support);
  parallel_for(positions.size(), [&](std::size_t i) {
    double sum = 0.0;
    index.for_each(positions[i], [&](std::size_t j, const Vec3&, double d2) { sum += masses[j] * k.W(std::sqrt(d2)); });
    rho[i] = sum;
  });
  return rho;
}

std::vector<double> density(const ParticleSet& state, const SimConfig& config) {
  const auto bidx = state.indices_of(Kind::Boundary);
  std::vector<Vec3> bpos;
  for (auto i : bidx) bpos.push_back(state.positions[i]);
  const std::vector<double> vol = bpos.empty() ? std::vector<double>{} : boundary_volumes(bpos, config);
  std::vector<double> mass(state.size(), config.particle_mass());
  for (std::size_t k = 0; k < bidx.size(); ++k) mass[bidx[k]] = config.rest_density * vol[k];
  return density(state.positions, mass, config.sph_support());
}

double max_fluid_density(const ParticleSet& state, const SimConfig& config) {
  const auto rho = density(state, config);
  double m = 0.0;
  for (std::size_t i = 0; i < state.size(); ++i)
    if (state.kinds[i] == Kind::Fluid) m = std::max(m, rho[i]);
  return m;
}

double fluid_energy(const ParticleSet& state, const SimConfig& config) {
  const double m = config.particle_mass();
  double e = 0.0;
  for (std::size_t i = 0; i < state.size(); ++i)
    if (state.kinds[i] == Kind::Fluid)
      e += 0.5 * m * state.velocities[i].squaredNorm() - m * config.gravity.dot(state.positions[i]);
  return e;
}

namespace {

struct Edge {
  std::uint32_t j;
  double w;
  Vec3 grad;  // m_j ∇W_ij (fluid) or Ψ_b ∇W_ib (boundary)
};

struct Neighborhoods {
  std::vector<std::uint32_t> fluid_begin, bnd_begin;
  std::vector<Edge> fluid, bnd;
  std::vector<double> rho, denom;  // ρ_i, |Σ m∇W|² + Σ|m∇W|²
  std::vector<int> count;
};

class Solver {
 public:
  Solver(const SimConfig& sim, const SphConfig& cfg, std::vector<Vec3> xb, std::vector<double> psi)
      : sim_(sim), cfg_(cfg), kernel_(sim.sph_support()), mass_(sim.particle_mass()), xb_(std::move(xb)),
        psi_(std::move(psi)) {
    if (!xb_.empty()) bindex_ = NeighborIndex::build(xb_, kernel_.support);
  }

  void build(const std::vector<Vec3>& x) {
    const std::size_t n = x.size();
    const NeighborIndex findex = NeighborIndex::build(x, kernel_.support);
    nb_.fluid_begin.assign(n + 1, 0);
    nb_.bnd_begin.assign(n + 1, 0);
    nb_.fluid.clear();
    nb_.bnd.clear();
    nb_.rho.assign(n, 0.0);
    nb_.denom.assign(n, 0.0);
    nb_.count.assign(n, 0);
    for (std::size_t i = 0; i < n; ++i) {
      double rho = 0.0;
      Vec3 gsum = Vec3::Zero();
      double gsq = 0.0;
      findex.for_each(x[i], [&](std::size_t j, const Vec3& off, double d2) {
        const double w = kernel_.W(std::sqrt(d2));
        rho += mass_ * w;
        if (j == i) return;
        const Vec3 g = mass_ * kernel_.grad(-off);  // r = x_i − x_j = −off
        nb_.fluid.push_back({static_cast<std::uint32_t>(j), w, g});
        gsum += g;
        gsq += g.squaredNorm();
      });
      if (!xb_.empty())
        bindex_.for_each(x[i], [&](std::size_t b, const Vec3& off, double d2) {
          const double w = kernel_.W(std::sqrt(d2));
          rho += psi_[b] * w;
          const Vec3 g = psi_[b] * kernel_.grad(-off);
          nb_.bnd.push_back({static_cast<std::uint32_t>(b), w, g});
          gsum += g;
        });
      nb_.fluid_begin[i + 1] = static_cast<std::uint32_t>(nb_.fluid.size());
      nb_.bnd_begin[i + 1] = static_cast<std::uint32_t>(nb_.bnd.size());
      nb_.rho[i] = rho;
      nb_.denom[i] = gsum.squaredNorm() + gsq;
      nb_.count[i] = static_cast<int>(nb_.fluid_begin[i + 1] - nb_.fluid_begin[i] + nb_.bnd_begin[i + 1] -
                                      nb_.bnd_begin[i]);
    }
  }

  /// Σ_j m_j (v_i − v_j)·∇W_ij + Σ_b Ψ_b v_i·∇W_ib.
  double drho_dt(const std::vector<Vec3>& v, std::size_t i) const {
    double d = 0.0;
    for (auto e = nb_.fluid_begin[i]; e < nb_.fluid_begin[i + 1]; ++e) d += (v[i] - v[nb_.fluid[e].j]).dot(nb_.fluid[e].grad);
    for (auto e = nb_.bnd_begin[i]; e < nb_.bnd_begin[i + 1]; ++e) d += v[i].dot(nb_.bnd[e].grad);
    return d;
  }

  void apply_stiffness(std::vector<Vec3>& v, const std::vector<double>& k, double dt) const {
    std::vector<Vec3> dv(v.size(), Vec3::Zero());
    parallel_for(v.size(), [&](std::size_t i) {
      Vec3 acc = Vec3::Zero();
      for (auto e = nb_.fluid_begin[i]; e < nb_.fluid_begin[i + 1]; ++e)
        acc += (k[i] + k[nb_.fluid[e].j]) * nb_.fluid[e].grad;
      for (auto e = nb_.bnd_begin[i]; e < nb_.bnd_begin[i + 1]; ++e) acc += k[i] * nb_.bnd[e].grad;
      dv[i] = -dt * acc;
    });
    for (std::size_t i = 0; i < v.size(); ++i) v[i] += dv[i];
  }

  /// Pressure solve: drives predicted density to ρ0 (compression only).
  std::pair<int, double> density_solve(std::vector<Vec3>& v, double dt) const {
    const std::size_t n = v.size();
    const double rho0 = sim_.rest_density;
    std::vector<double> k(n), err(n);
    double first = -1.0, last = 0.0;
    int it = 0;
    for (; it < cfg_.max_iterations; ++it) {
      parallel_for(n, [&](std::size_t i) {
        const double pred = std::max(nb_.rho[i] + dt * drho_dt(v, i), rho0);
        err[i] = (pred - rho0) / rho0;
        k[i] = nb_.denom[i] > 1e-12 ? (pred - rho0) / (dt * dt * nb_.denom[i]) : 0.0;
      });
      last = n ? *std::max_element(err.begin(), err.end()) : 0.0;
      check_progress("pressure", it, first, last);
      if (it >= cfg_.min_iterations && last <= cfg_.density_tolerance) break;
      apply_stiffness(v, k, dt);
    }
    return {it, last};
  }

  /// Divergence solve: drives dρ/dt to zero where it is positive.
  std::pair<int, double> divergence_solve(std::vector<Vec3>& v, double dt) const {
    const std::size_t n = v.size();
    const double rho0 = sim_.rest_density;
    std::vector<double> k(n), err(n);
    double first = -1.0, last = 0.0;
    int it = 0;
    for (; it < cfg_.max_iterations; ++it) {
      parallel_for(n, [&](std::size_t i) {
        double d = std::max(drho_dt(v, i), 0.0);
        if (nb_.count[i] < 20) d = 0.0;  // sparse free-surface particles are left alone
        err[i] = d / rho0;
        k[i] = nb_.denom[i] > 1e-12 ? d / (dt * nb_.denom[i]) : 0.0;
      });
      double mean = 0.0;
      for (double e : err) mean += e;
      last = n ? mean / static_cast<double>(n) : 0.0;
      check_progress("divergence", it, first, last);
      if (it >= cfg_.min_iterations && last <= cfg_.divergence_tolerance) break;
      apply_stiffness(v, k, dt);
    }
    return {it, last};
  }

  void xsph(std::vector<Vec3>& v) const {
    if (cfg_.xsph == 0.0) return;
    std::vector<Vec3> dv(v.size(), Vec3::Zero());
    parallel_for(v.size(), [&](std::size_t i) {
      Vec3 acc = Vec3::Zero();
      for (auto e = nb_.fluid_begin[i]; e < nb_.fluid_begin[i + 1]; ++e) {
        const auto& ed = nb_.fluid[e];
        acc += (mass_ / nb_.rho[ed.j]) * ed.w * (v[ed.j] - v[i]);
      }
      dv[i] = cfg_.xsph * acc;
    });
    for (std::size_t i = 0; i < v.size(); ++i) v[i] += dv[i];
  }

 private:
  static void check_progress(const char* what, int it, double& first, double err) {
    if (!std::isfinite(err))
      throw SolverError(std::string("dfsph ") + what + " solve: non-finite error at iteration " + std::to_string(it));
    if (first < 0.0) {
      first = err;
      return;
    }
    if (first > 1e-12 && err > 10.0 * first)
      throw SolverError(std::string("dfsph ") + what + " solve diverged: error " + std::to_string(err) +
                        " at iteration " + std::to_string(it) + " vs initial " + std::to_string(first));
  }

  const SimConfig& sim_;
  const SphConfig& cfg_;
  CubicKernel kernel_;
  double mass_;
  std::vector<Vec3> xb_;
  std::vector<double> psi_;
  NeighborIndex bindex_;
  Neighborhoods nb_;
};

}  // namespace

SphDiagnostics dfsph_step(ParticleSet& state, const Scene& scene, const SimConfig& sim, const SphConfig& cfg) {
  sim.validate();
  cfg.validate();
  const auto fidx = state.indices_of(Kind::Fluid);
  const auto bidx = state.indices_of(Kind::Boundary);
  std::vector<Vec3> x, v, xb;
  for (auto i : fidx) {
    x.push_back(state.positions[i]);
    v.push_back(state.velocities[i]);
  }
  for (auto i : bidx) xb.push_back(state.positions[i]);
  std::vector<double> psi = xb.empty() ? std::vector<double>{} : boundary_volumes(xb, sim);
  for (double& p : psi) p *= sim.rest_density;
  Solver solver(sim, cfg, xb, psi);

  SphDiagnostics diag;
  const double max_dt = cfg.max_substep;
  double remaining = sim.dt;
  while (remaining > 1e-9 * sim.dt) {
    double vmax = 0.0;
    for (const Vec3& vi : v) vmax = std::max(vmax, (vi + remaining * sim.gravity).norm());
    double dt = std::min(max_dt, remaining);
    if (vmax > 0.0) dt = std::min(dt, cfg.cfl * sim.spacing() / vmax);
    // Spread the remainder evenly so the last substep is not a sliver.
    const double n = std::ceil(remaining / dt - 1e-9);
    dt = remaining / n;

    solver.build(x);
    if (cfg.divergence_solve) {
      const auto [it, err] = solver.divergence_solve(v, dt);
      diag.divergence_iterations += it;
      diag.divergence_error = std::max(diag.divergence_error, err);
    }
    for (Vec3& vi : v) vi += dt * sim.gravity;
    solver.xsph(v);
    const auto [it, err] = solver.density_solve(v, dt);
    diag.pressure_iterations += it;
    diag.density_error = std::max(diag.density_error, err);

    for (std::size_t i = 0; i < x.size(); ++i) x[i] += dt * v[i];
    if (scene.tank) {
      for (std::size_t i = 0; i < x.size(); ++i) {
        const Vec3 local = scene.to_local(x[i]);
        const Vec3 proj = scene.tank->project(local);
        const Vec3 d = proj - local;
        if (d.squaredNorm() == 0.0) continue;
        diag.raw_penetration = std::max(diag.raw_penetration, scene.tank->penetration(local));
        diag.projection = std::max(diag.projection, d.norm());
        x[i] = scene.to_world(proj);
        const Vec3 nrm = (scene.orientation * d).normalized();
        const double vn = v[i].dot(nrm);
        if (vn < 0.0) v[i] -= vn * nrm;
      }
    }
    for (std::size_t i = 0; i < x.size(); ++i)
      if (!x[i].allFinite() || !v[i].allFinite())
        throw SolverError("dfsph: non-finite fluid state after substep " + std::to_string(diag.substeps));
    remaining -= dt;
    ++diag.substeps;
  }
  for (std::size_t k = 0; k < fidx.size(); ++k) {
    state.positions[fidx[k]] = x[k];
    state.velocities[fidx[k]] = v[k];
  }
  return diag;
}

}  // namespace slosh
