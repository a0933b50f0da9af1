#include "slosh/dataset.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numbers>
#include <random>

#include "json.hpp"
#include "slosh/binio.hpp"
#include "slosh/errors.hpp"
#include "slosh/frame_io.hpp"
#include "slosh/tank.hpp"

namespace slosh {

void DatasetSpec::validate() const {
  if (tanks.empty()) throw ConfigError("dataset: no tanks listed");
  for (int t : tanks)
    if (t < 0 || t > 3) throw ConfigError("dataset: unknown tank id " + std::to_string(t));
  if (!(fill_min >= 0.25 && fill_max <= 0.75 && fill_min <= fill_max))
    throw ConfigError("dataset: fill range must lie within [0.25, 0.75]");
  if (!(max_pitch_deg >= 0.0 && max_pitch_deg <= 90.0 && max_roll_deg >= 0.0 && max_roll_deg <= 90.0))
    throw ConfigError("dataset: rotation ranges must lie within [0, 90] degrees");
  if (frames_per_iteration < 1) throw ConfigError("dataset: frames_per_iteration must be >= 1");
  if (iterations < 1) throw ConfigError("dataset: iterations must be >= 1");
  sim.validate();
  sph.validate();
}

ParticleSet fill_tank(const Scene& scene, double fraction) {
  if (!scene.tank) throw InputError("fill_tank: scene has no tank");
  if (!(fraction > 0.0 && fraction < 1.0)) throw InputError("fill_tank: fraction must lie in (0, 1)");
  std::vector<Vec3> sites;
  for (const Vec3& p : scene.tank->fluid_sites()) sites.push_back(scene.to_world(p));
  std::stable_sort(sites.begin(), sites.end(), [](const Vec3& a, const Vec3& b) {
    constexpr double eps = 1e-9;
    if (std::abs(a.y() - b.y()) > eps) return a.y() < b.y();
    if (std::abs(a.x() - b.x()) > eps) return a.x() < b.x();
    return a.z() < b.z() - eps;
  });
  const auto count = static_cast<std::size_t>(std::llround(fraction * static_cast<double>(sites.size())));
  if (count == 0) throw InputError("fill_tank: fraction too small to place a single particle");
  ParticleSet out;
  for (std::size_t i = 0; i < count; ++i) out.push_back(sites[i], Vec3::Zero(), Kind::Fluid);
  return out;
}

InitialState make_initial_state(int tank_id, double fraction, const SimConfig& config) {
  PlacedTank placed = place_tank(tank_id, config);
  InitialState s{placed.scene, fill_tank(placed.scene, fraction)};
  s.state.append(placed.boundary);
  return s;
}

std::string iteration_file_name(int tank, std::size_t iteration) {
  return "tank" + std::to_string(tank) + "_iter" + std::to_string(iteration) + ".frames";
}

FrameSequence simulate_sph(const ParticleSet& initial, const Scene& scene,
                           const std::vector<ScheduledRotation>& schedule, std::size_t frames,
                           const SimConfig& config, const SphConfig& sph) {
  ParticleSet state = initial;
  Scene sc = scene;
  FrameSequence seq;
  seq.dt = config.dt;
  seq.rotations = schedule;
  auto apply = [&](std::size_t f) {
    for (const auto& r : schedule)
      if (r.frame == f) rotate_rigid(state, sc, r.pitch, r.roll);
  };
  apply(0);
  seq.push(state, sc);
  double seconds = 0.0;
  for (std::size_t f = 1; f <= frames; ++f) {
    const auto t0 = std::chrono::steady_clock::now();
    try {
      dfsph_step(state, sc, config, sph);
    } catch (const SolverError& e) {
      throw SolverError("frame " + std::to_string(f) + ": " + e.what());
    }
    seconds += std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    apply(f);
    seq.push(state, sc);
  }
  seq.seconds_per_frame = frames ? seconds / static_cast<double>(frames) : 0.0;
  return seq;
}

std::vector<IterationRecord> generate(const DatasetSpec& spec, const std::filesystem::path& out_dir,
                                      const std::function<void(const std::string&)>& log) {
  spec.validate();
  std::filesystem::create_directories(out_dir);
  std::vector<IterationRecord> records;
  nlohmann::json manifest;
  manifest["format"] = "slosh-dataset";
  manifest["version"] = 1;
  manifest["seed"] = spec.seed;
  manifest["frames_per_iteration"] = spec.frames_per_iteration;
  manifest["iterations"] = spec.iterations;
  manifest["dt"] = spec.sim.dt;
  manifest["particle_radius"] = spec.sim.particle_radius;
  nlohmann::json tanks = nlohmann::json::array();
  const double deg = std::numbers::pi / 180.0;

  for (int tank : spec.tanks) {
    std::mt19937_64 rng(spec.seed * 1000003ull + static_cast<std::uint64_t>(tank));
    std::uniform_real_distribution<double> fill_dist(spec.fill_min, spec.fill_max);
    std::uniform_real_distribution<double> pitch_dist(-spec.max_pitch_deg * deg, spec.max_pitch_deg * deg);
    std::uniform_real_distribution<double> roll_dist(-spec.max_roll_deg * deg, spec.max_roll_deg * deg);
    const double fill = spec.fill_min == spec.fill_max ? spec.fill_min : fill_dist(rng);
    InitialState init = make_initial_state(tank, fill, spec.sim);
    ParticleSet state = init.state;
    Scene scene = init.scene;
    const std::size_t fluid = state.count(Kind::Fluid);
    const double h = spec.sim.particle_radius;
    nlohmann::json iters = nlohmann::json::array();

    for (std::size_t k = 0; k < spec.iterations; ++k) {
      IterationRecord rec;
      rec.tank = tank;
      rec.iteration = k;
      rec.fill = fill;
      rec.pitch = spec.max_pitch_deg > 0.0 ? pitch_dist(rng) : 0.0;
      rec.roll = spec.max_roll_deg > 0.0 ? roll_dist(rng) : 0.0;
      rec.file = iteration_file_name(tank, k);
      try {
        FrameSequence seq = simulate_sph(state, scene, {{0, rec.pitch, rec.roll}}, spec.frames_per_iteration - 1,
                                         spec.sim, spec.sph);
        Scene end_scene = scene;
        end_scene.orientation = seq.transforms.back().orientation;
        end_scene.center = seq.transforms.back().center;
        for (std::size_t f = 0; f < seq.size(); ++f) {
          if (!seq.frames[f].all_finite())
            throw SolverError("non-finite coordinates in frame " + std::to_string(f));
          Scene fs = scene;
          fs.orientation = seq.transforms[f].orientation;
          fs.center = seq.transforms[f].center;
          const double pen = max_penetration(seq.frames[f], fs);
          if (pen > h) throw SolverError("boundary penetration " + std::to_string(pen) + " m in frame " + std::to_string(f));
        }
        if (!spec.record_timing) seq.seconds_per_frame = 0.0;
        write_frames(seq, out_dir / rec.file);
        rec.frames = seq.size();
        state = seq.frames.back();
        scene = end_scene;
        scene.bounds = bounds_of(state.positions_of(Kind::Boundary));
      } catch (const SolverError& e) {
        rec.ok = false;
        rec.diagnostic = e.what();
      }
      if (log)
        log("tank " + std::to_string(tank) + " iteration " + std::to_string(k) + (rec.ok ? " ok" : " skipped: " + rec.diagnostic));
      nlohmann::json j{{"iteration", k}, {"file", rec.ok ? rec.file : ""}, {"pitch", rec.pitch}, {"roll", rec.roll},
                       {"frames", rec.frames}, {"ok", rec.ok}};
      if (!rec.ok) j["diagnostic"] = rec.diagnostic;
      iters.push_back(std::move(j));
      records.push_back(std::move(rec));
    }
    tanks.push_back({{"id", tank}, {"fill_fraction", fill}, {"fluid_particles", fluid},
                     {"total_particles", state.size()}, {"iterations", std::move(iters)}});
  }
  manifest["tanks"] = std::move(tanks);
  binio::atomic_write(out_dir / "manifest.json", manifest.dump(2) + "\n");
  return records;
}

std::vector<LoadedSequence> load_dataset(const std::filesystem::path& dir) {
  const auto path = dir / "manifest.json";
  nlohmann::json m;
  try {
    m = nlohmann::json::parse(binio::read_file(path));
  } catch (const nlohmann::json::exception& e) {
    throw CorruptionError(path.string() + ": " + e.what());
  }
  std::vector<LoadedSequence> out;
  try {
    for (const auto& t : m.at("tanks"))
      for (const auto& it : t.at("iterations")) {
        if (!it.at("ok").get<bool>()) continue;
        LoadedSequence s;
        s.tank = t.at("id").get<int>();
        s.iteration = it.at("iteration").get<std::size_t>();
        s.frames = read_frames(dir / it.at("file").get<std::string>());
        out.push_back(std::move(s));
      }
  } catch (const nlohmann::json::exception& e) {
    throw CorruptionError(path.string() + ": " + e.what());
  }
  if (out.empty()) throw InputError("dataset " + dir.string() + " lists no usable sequences");
  std::stable_sort(out.begin(), out.end(), [](const auto& a, const auto& b) {
    return a.tank != b.tank ? a.tank < b.tank : a.iteration < b.iteration;
  });
  return out;
}

}  // namespace slosh
