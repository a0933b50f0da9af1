#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "slosh/core_types.hpp"
#include "slosh/pbf.hpp"
#include "slosh/sph.hpp"

namespace slosh {

struct DatasetSpec {
  std::vector<int> tanks{0, 1};
  double fill_min = 0.25;
  double fill_max = 0.75;
  double max_pitch_deg = 90.0;
  double max_roll_deg = 90.0;
  std::size_t frames_per_iteration = 60;
  std::size_t iterations = 20;
  std::uint64_t seed = 1;
  bool record_timing = true;  // off: seconds_per_frame written as 0
  SimConfig sim;
  SphConfig sph;

  /// Throws ConfigError outside fill [0.25, 0.75] / angles ±90° / frames ≥ 1.
  void validate() const;
};

/// Fluid lattice sites of the lowest part of the tank (world y, then x, z)
/// covering `fraction` of its capacity; zero velocity, fluid kind only.
ParticleSet fill_tank(const Scene& scene, double fraction);

/// Tank placed at the origin, filled, with its boundary particles appended.
struct InitialState {
  Scene scene;
  ParticleSet state;
};
InitialState make_initial_state(int tank_id, double fraction, const SimConfig& config);

struct IterationRecord {
  int tank = 0;
  std::size_t iteration = 0;
  std::string file;
  double pitch = 0.0, roll = 0.0;  // radians
  double fill = 0.0;
  std::size_t frames = 0;
  bool ok = true;
  std::string diagnostic;
};

/// Generates and writes tank<id>_iter<k>.frames plus manifest.json into
/// `out_dir`. Iterations chain: the last frame of one seeds the next,
/// which starts by rotating it. `log` receives one line per iteration.
std::vector<IterationRecord> generate(const DatasetSpec& spec, const std::filesystem::path& out_dir,
                                      const std::function<void(const std::string&)>& log = {});

/// Runs the oracle for one sequence: frame 0 is `initial` after the
/// rotations scheduled at 0; returns frames + 1 snapshots.
FrameSequence simulate_sph(const ParticleSet& initial, const Scene& scene,
                           const std::vector<ScheduledRotation>& schedule, std::size_t frames,
                           const SimConfig& config, const SphConfig& sph = {});

std::string iteration_file_name(int tank, std::size_t iteration);

struct LoadedSequence {
  int tank = 0;
  std::size_t iteration = 0;
  FrameSequence frames;
};

/// Reads every successfully generated iteration listed in the manifest,
/// ordered by tank then iteration.
std::vector<LoadedSequence> load_dataset(const std::filesystem::path& dir);

}  // namespace slosh
