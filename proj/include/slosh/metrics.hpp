#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "slosh/core_types.hpp"
#include "slosh/network.hpp"
#include "slosh/pbf.hpp"

namespace slosh {

/// ½(mean_a min_b ‖a−b‖ + mean_b min_a ‖a−b‖). Throws InputError if empty.
double chamfer(std::span<const Vec3> a, std::span<const Vec3> b);

/// Exact minimum-cost perfect matching (Hungarian, O(n³)) on a square cost matrix.
/// Returns assignment[row] = column.
std::vector<int> hungarian(const Matrix& cost);

inline constexpr std::size_t kEmdExactLimit = 1024;

/// Mean matched distance of the optimal bijection. Above kEmdExactLimit
/// points, both sets are replaced by seeded random subsets of that size.
double emd(std::span<const Vec3> a, std::span<const Vec3> b, std::uint64_t seed = 0);

/// (1/N) Σ_i min_x ‖x̂_i − x‖ from truth fluid particles to predicted ones.
double sequence_error(const FrameSequence& pred, const FrameSequence& truth, std::size_t frame);
double frame_sequence_error(const ParticleSet& pred, const ParticleSet& truth);

/// |1 − max ρ(pred) / max ρ(truth)| with SPH densities of each frame.
double max_density_error(const ParticleSet& pred, const ParticleSet& truth, const SimConfig& config);

struct EvalReport {
  double cd_t1 = 0.0, cd_t2 = 0.0;    // meters
  double emd_t1 = 0.0, emd_t2 = 0.0;  // meters
  std::vector<double> d_n;            // meters, index = frame
  double max_density_error = 0.0;     // worst e over frames ≥ 1
  double mean_density_error = 0.0;
  double max_density_error_gcc = 0.0;  // worst |Δ max ρ| in g/cm³
  double seconds_per_frame = 0.0;        // prediction wall clock
  double truth_seconds_per_frame = 0.0;  // oracle wall clock
  double inside_fraction = 1.0;  // fluid inside scene bounds inflated by 4h, worst frame
  std::size_t frames = 0;
  std::size_t windows = 0;

  void validate() const;  // throws NumericalError on negative/non-finite entries
  std::string to_json() const;
  static EvalReport from_json(const std::string& text);
  /// Human-readable summary in the units of the usual results table.
  std::string table() const;
};

/// Compares two aligned sequences frame by frame. t+1 / t+2 metrics use
/// frames 1 and 2 (the prediction is assumed to start from truth frame 0).
EvalReport evaluate(const FrameSequence& pred, const FrameSequence& truth, const SimConfig& config,
                    std::uint64_t seed = 0);

/// Overwrites the t+1 / t+2 entries with averages over one- and two-step
/// rollouts of `net` started from truth frames 0, stride, 2·stride, ...
void evaluate_windows(EvalReport& report, const Network& net, const FrameSequence& truth, const SimConfig& config,
                      std::size_t stride, std::uint64_t seed = 0);

/// Fraction of fluid particles within the boundary bounding box inflated by `margin`.
double inside_fraction(const ParticleSet& state, double margin);

}  // namespace slosh
