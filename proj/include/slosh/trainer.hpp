#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "slosh/network.hpp"
#include "slosh/pbf.hpp"

namespace slosh {

/// Warm-up length W takes `warmup` from the point where training progress
/// (step / steps) reaches `from`.
struct WarmupStage {
  double from = 0.0;
  std::size_t warmup = 0;
  bool operator==(const WarmupStage&) const = default;
};

struct TrainConfig {
  double gamma = 0.5;
  double c_avg = 40.0;
  std::size_t supervised = 2;  // T
  std::vector<WarmupStage> curriculum{{0.0, 0}, {0.4, 1}, {0.7, 2}};
  std::size_t batch = 2;
  double learning_rate = 0.002;
  std::vector<std::size_t> milestones{1500, 2500};
  std::size_t steps = 3000;
  double beta1 = 0.9, beta2 = 0.999, epsilon = 1e-8;
  std::uint64_t seed = 0;
  std::size_t validate_every = 500;
  std::size_t validation_frames = 20;
  std::size_t validation_holdout = 1;  // trailing iterations per tank kept for validation
  NetworkConfig network;

  void validate() const;  // throws ConfigError
  std::size_t warmup_at(std::size_t step) const;
  double learning_rate_at(std::size_t step) const;
};

/// exp(−c_i / c_avg) per fluid particle of `truth`, with c_i the number of
/// other particles (fluid and boundary) within `radius`.
Matrix neighbor_weights(const ParticleSet& truth, double radius, double c_avg);

/// Σ_i w_i ‖x_i − x̂_i‖^γ.
Var frame_loss(Var x, const Matrix& truth, const Matrix& weights, double gamma);
double frame_loss(const Matrix& x, const Matrix& truth, const Matrix& weights, double gamma);

/// Pluggable one-step model used by rollout_loss (the network by default).
using StepFn = std::function<StepVars(Tape&, Var x, Var v, const ParticleSet& frame, std::size_t step)>;
StepFn network_step(const Network& net, const SimConfig& config);

struct RolloutTrace {
  Matrix warm_x, warm_v;        // state entering the supervised steps
  std::vector<double> losses;   // per supervised step
};

/// Rolls `frames[0]` forward W steps without gradients, then T recorded
/// steps whose frame losses against frames[W+1..W+T] are averaged.
/// Throws InputError if fewer than W+T+1 frames are given.
Var rollout_loss(Tape& tape, const StepFn& step, std::span<const ParticleSet> frames, std::size_t warmup,
                 std::size_t supervised, const TrainConfig& config, double radius, RolloutTrace* trace = nullptr);

struct TrainRecord {
  std::size_t step = 0;
  double loss = 0.0;               // mean training loss since the previous record
  double d_n = 0.0;                // validation sequence error at the last rolled frame
  double max_density_error = 0.0;  // at the same frame
  std::size_t warmup = 0;
  double learning_rate = 0.0;
  std::string to_json() const;
};

struct TrainResult {
  Network network;
  std::vector<TrainRecord> log;
  std::vector<double> losses;  // every step
  bool halted = false;
  std::string message;
};

struct TrainHooks {
  std::function<void(const TrainRecord&)> on_record;
  std::function<void(const Network&, std::size_t step)> on_checkpoint;
};

/// Adam on the rollout loss over windows sampled from `train`. `validation`
/// sequences (may be empty) are rolled from frame 0 for validation records.
/// A non-finite loss or gradient halts training and rolls the weights back
/// to the last checkpoint (the initial weights if none was taken).
TrainResult train(const TrainConfig& config, const SimConfig& sim, const std::vector<FrameSequence>& train_set,
                  const std::vector<FrameSequence>& validation, const TrainHooks& hooks = {});

}  // namespace slosh
