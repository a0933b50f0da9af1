#pragma once

#include <vector>

#include "slosh/core_types.hpp"
#include "slosh/network.hpp"

namespace slosh {

/// Placement of the tank at one frame (world = orientation·local + center).
struct FrameTransform {
  Mat3 orientation = Mat3::Identity();
  Vec3 center = Vec3::Zero();
  bool operator==(const FrameTransform&) const = default;
};

/// Rigid rotation applied to the state at the start of `frame`, before it
/// is recorded.
struct ScheduledRotation {
  std::size_t frame = 0;
  double pitch = 0.0;
  double roll = 0.0;
  bool operator==(const ScheduledRotation&) const = default;
};

struct FrameSequence {
  std::vector<ParticleSet> frames;
  std::vector<FrameTransform> transforms;  // one per frame
  std::vector<ScheduledRotation> rotations;
  double dt = 0.0;
  double seconds_per_frame = 0.0;  // producer wall clock per step, 0 if unknown

  std::size_t size() const { return frames.size(); }
  bool empty() const { return frames.empty(); }
  void push(const ParticleSet& state, const Scene& scene);

  /// Throws ConfigError unless every frame has the same count and kinds.
  void validate() const;
  bool operator==(const FrameSequence&) const = default;
};

struct Intermediate {
  std::vector<Vec3> x, v;
};

/// v* = v + dt·g, x* = x + dt·v*.
Intermediate predict_intermediate(std::span<const Vec3> x, std::span<const Vec3> v, const Vec3& g, double dt);

/// x' = x* + Δx, v' = (x' − x)/dt.
Intermediate correct(std::span<const Vec3> x, std::span<const Vec3> x_star, std::span<const Vec3> dx, double dt);

/// Tape form of one PBF step for the fluid; boundary held fixed.
struct StepVars {
  Var x, v;
};
StepVars step_tape(Tape& tape, const Network& net, Var x, Var v, const Matrix& boundary_pos,
                   const Matrix& boundary_normals, const SimConfig& config);

/// One learned step of the fluid particles of `state` in place.
void step(const Network& net, ParticleSet& state, const SimConfig& config);

/// Runs `frames` steps from `initial`; returns frames + 1 snapshots (the
/// first is the initial state after any rotation scheduled at frame 0).
/// Throws NumericalError naming the frame if the state stops being finite.
FrameSequence rollout(const Network& net, const ParticleSet& initial, const Scene& scene,
                      const std::vector<ScheduledRotation>& schedule, std::size_t frames, const SimConfig& config);

Matrix to_matrix(std::span<const Vec3> pts);
std::vector<Vec3> to_points(const Matrix& m);

}  // namespace slosh
