#pragma once

#include <span>
#include <vector>

#include "slosh/core_types.hpp"
#include "slosh/neighbor_index.hpp"

namespace slosh {

/// Cubic spline with compact support H (normalized in 3D).
struct CubicKernel {
  double support;

  explicit CubicKernel(double h) : support(h) {}
  double W(double r) const;
  double W0() const { return W(0.0); }
  /// ∇_x W(‖r‖) with r = x_i − x_j.
  Vec3 grad(const Vec3& r) const;
};

struct SphConfig {
  double density_tolerance = 0.005;   // max (ρ* − ρ0)/ρ0 after the pressure solve
  double divergence_tolerance = 0.1;  // mean dρ/dt, in units of ρ0 per second
  int max_iterations = 50;
  int min_iterations = 2;
  double xsph = 0.01;
  double cfl = 0.4;
  double max_substep = 0.005;
  bool divergence_solve = true;

  void validate() const;
};

struct SphDiagnostics {
  int substeps = 0;
  int pressure_iterations = 0;    // summed over substeps
  int divergence_iterations = 0;  // summed over substeps
  double density_error = 0.0;     // worst accepted max (ρ* − ρ0)/ρ0
  double divergence_error = 0.0;  // worst accepted mean dρ/dt / ρ0
  double raw_penetration = 0.0;   // worst wall penetration before projection, m
  double projection = 0.0;        // longest projection back into the fluid region, m
};

/// Akinci-style boundary volumes V_b = κ / Σ_k W_bk, with κ = s³ Σ W over an
/// infinite planar sheet so a flat wall sampled at spacing s gets V_b = s³.
std::vector<double> boundary_volumes(std::span<const Vec3> boundary, const SimConfig& config);
double sheet_calibration(const SimConfig& config);

/// ρ_i = Σ_j m_j W_ij over `positions` with per-point masses.
std::vector<double> density(std::span<const Vec3> positions, std::span<const double> masses, double support);

/// Density at every particle of a frame: fluid mass ρ0·s³, boundary
/// pseudo-mass ρ0·V_b.
std::vector<double> density(const ParticleSet& state, const SimConfig& config);

/// Max fluid density of a frame.
double max_fluid_density(const ParticleSet& state, const SimConfig& config);

/// Advances the fluid of `state` by config.dt with divergence-free SPH.
/// Substeps follow a CFL bound. After integration fluid particles are
/// projected back into the tank (when the scene has one). Throws
/// SolverError if a solve diverges.
SphDiagnostics dfsph_step(ParticleSet& state, const Scene& scene, const SimConfig& config,
                          const SphConfig& sph = {});

/// Kinetic + gravitational potential energy of the fluid (reference height 0).
double fluid_energy(const ParticleSet& state, const SimConfig& config);

}  // namespace slosh
