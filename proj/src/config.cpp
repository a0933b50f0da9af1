#include "slosh/config.hpp"

#include <numbers>
#include <set>

#include "json.hpp"
#include "slosh/errors.hpp"

namespace slosh {
namespace {

using nlohmann::json;

constexpr double kDeg = std::numbers::pi / 180.0;

json parse(const std::string& text, const char* what) {
  try {
    json j = json::parse(text);
    if (!j.is_object()) throw ConfigError(std::string(what) + ": top level must be an object");
    return j;
  } catch (const json::exception& e) {
    throw ConfigError(std::string(what) + ": " + e.what());
  }
}

void check_keys(const json& j, std::set<std::string> allowed, const std::string& where) {
  if (!j.is_object()) throw ConfigError(where + ": expected an object");
  for (const auto& [k, v] : j.items())
    if (!allowed.count(k)) throw ConfigError(where + ": unknown key '" + k + "'");
}

template <class T>
void get(const json& j, const char* key, T& out, const std::string& where) {
  if (!j.contains(key)) return;
  try {
    out = j.at(key).get<T>();
  } catch (const json::exception& e) {
    throw ConfigError(where + "." + key + ": " + e.what());
  }
}

void read_sim(const json& j, SimConfig& c, const std::string& where) {
  check_keys(j, {"particle_radius", "conv_radius", "dt", "rest_density", "gravity"}, where);
  get(j, "particle_radius", c.particle_radius, where);
  c.conv_radius = 4.5 * c.particle_radius;
  get(j, "conv_radius", c.conv_radius, where);
  get(j, "dt", c.dt, where);
  get(j, "rest_density", c.rest_density, where);
  if (j.contains("gravity")) {
    std::vector<double> g;
    get(j, "gravity", g, where);
    if (g.size() != 3) throw ConfigError(where + ".gravity: expected 3 numbers");
    c.gravity = Vec3(g[0], g[1], g[2]);
  }
  c.validate();
}

json write_sim(const SimConfig& c) {
  return {{"particle_radius", c.particle_radius},
          {"conv_radius", c.conv_radius},
          {"dt", c.dt},
          {"rest_density", c.rest_density},
          {"gravity", {c.gravity.x(), c.gravity.y(), c.gravity.z()}}};
}

void read_sph(const json& j, SphConfig& c, const std::string& where) {
  check_keys(j, {"density_tolerance", "divergence_tolerance", "max_iterations", "min_iterations", "xsph", "cfl",
                 "max_substep", "divergence_solve"},
             where);
  get(j, "density_tolerance", c.density_tolerance, where);
  get(j, "divergence_tolerance", c.divergence_tolerance, where);
  get(j, "max_iterations", c.max_iterations, where);
  get(j, "min_iterations", c.min_iterations, where);
  get(j, "xsph", c.xsph, where);
  get(j, "cfl", c.cfl, where);
  get(j, "max_substep", c.max_substep, where);
  get(j, "divergence_solve", c.divergence_solve, where);
  c.validate();
}

json write_sph(const SphConfig& c) {
  return {{"density_tolerance", c.density_tolerance}, {"divergence_tolerance", c.divergence_tolerance},
          {"max_iterations", c.max_iterations},       {"min_iterations", c.min_iterations},
          {"xsph", c.xsph},                           {"cfl", c.cfl},
          {"max_substep", c.max_substep},             {"divergence_solve", c.divergence_solve}};
}

void read_network(const json& j, NetworkConfig& c, const std::string& where) {
  check_keys(j, {"widths", "input_width", "fc_width", "fusion_width", "radius", "output_scale", "seed"}, where);
  if (j.contains("widths")) {
    std::vector<int> w;
    get(j, "widths", w, where);
    if (w.size() != 5) throw ConfigError(where + ".widths: expected 5 layer widths");
    std::copy(w.begin(), w.end(), c.widths.begin());
  }
  get(j, "input_width", c.input_width, where);
  get(j, "fc_width", c.fc_width, where);
  get(j, "fusion_width", c.fusion_width, where);
  get(j, "radius", c.radius, where);
  get(j, "output_scale", c.output_scale, where);
  get(j, "seed", c.seed, where);
  c.validate();
}

json write_network(const NetworkConfig& c) {
  return {{"widths", std::vector<int>(c.widths.begin(), c.widths.end())},
          {"input_width", c.input_width},
          {"fc_width", c.fc_width},
          {"fusion_width", c.fusion_width},
          {"radius", c.radius},
          {"output_scale", c.output_scale},
          {"seed", c.seed}};
}

}  // namespace

SimConfig parse_sim_config(const std::string& text) {
  SimConfig c;
  read_sim(parse(text, "sim config"), c, "sim");
  return c;
}

DatasetSpec parse_dataset_spec(const std::string& text) {
  const json j = parse(text, "dataset spec");
  const std::string w = "dataset";
  check_keys(j, {"tanks", "fill_range", "max_pitch_deg", "max_roll_deg", "frames_per_iteration", "iterations", "seed",
                 "sim", "sph"},
             w);
  DatasetSpec s;
  get(j, "tanks", s.tanks, w);
  if (j.contains("fill_range")) {
    std::vector<double> r;
    get(j, "fill_range", r, w);
    if (r.size() != 2) throw ConfigError("dataset.fill_range: expected [min, max]");
    s.fill_min = r[0];
    s.fill_max = r[1];
  }
  get(j, "max_pitch_deg", s.max_pitch_deg, w);
  get(j, "max_roll_deg", s.max_roll_deg, w);
  get(j, "frames_per_iteration", s.frames_per_iteration, w);
  get(j, "iterations", s.iterations, w);
  get(j, "seed", s.seed, w);
  if (j.contains("sim")) read_sim(j["sim"], s.sim, "dataset.sim");
  if (j.contains("sph")) read_sph(j["sph"], s.sph, "dataset.sph");
  s.validate();
  return s;
}

std::string to_json(const DatasetSpec& s) {
  json j{{"tanks", s.tanks},
         {"fill_range", {s.fill_min, s.fill_max}},
         {"max_pitch_deg", s.max_pitch_deg},
         {"max_roll_deg", s.max_roll_deg},
         {"frames_per_iteration", s.frames_per_iteration},
         {"iterations", s.iterations},
         {"seed", s.seed},
         {"sim", write_sim(s.sim)},
         {"sph", write_sph(s.sph)}};
  return j.dump(2) + "\n";
}

namespace {
const std::set<std::string> kTrainKeys{"gamma",         "c_avg",          "supervised",        "curriculum",
                                       "batch",         "learning_rate",  "milestones",        "steps",
                                       "seed",          "validate_every", "validation_frames", "network", "validation_holdout",
                                       "sim",           "beta1",          "beta2",             "epsilon"};
}

TrainConfig parse_train_config(const std::string& text) {
  const json j = parse(text, "train config");
  const std::string w = "train";
  check_keys(j, kTrainKeys, w);
  TrainConfig c;
  get(j, "gamma", c.gamma, w);
  get(j, "c_avg", c.c_avg, w);
  get(j, "supervised", c.supervised, w);
  if (j.contains("curriculum")) {
    c.curriculum.clear();
    for (const auto& s : j["curriculum"]) {
      check_keys(s, {"from", "warmup"}, "train.curriculum[]");
      WarmupStage st;
      get(s, "from", st.from, w);
      get(s, "warmup", st.warmup, w);
      c.curriculum.push_back(st);
    }
  }
  get(j, "batch", c.batch, w);
  get(j, "learning_rate", c.learning_rate, w);
  get(j, "milestones", c.milestones, w);
  get(j, "steps", c.steps, w);
  get(j, "seed", c.seed, w);
  get(j, "validate_every", c.validate_every, w);
  get(j, "validation_frames", c.validation_frames, w);
  get(j, "validation_holdout", c.validation_holdout, w);
  get(j, "beta1", c.beta1, w);
  get(j, "beta2", c.beta2, w);
  get(j, "epsilon", c.epsilon, w);
  if (j.contains("network")) read_network(j["network"], c.network, "train.network");
  if (j.contains("sim")) {
    SimConfig sim;
    read_sim(j["sim"], sim, "train.sim");
  }
  c.validate();
  return c;
}

SimConfig parse_train_sim(const std::string& text) {
  const json j = parse(text, "train config");
  SimConfig sim;
  if (j.contains("sim")) read_sim(j["sim"], sim, "train.sim");
  return sim;
}

std::string to_json(const TrainConfig& c, const SimConfig& sim) {
  json cur = json::array();
  for (const auto& s : c.curriculum) cur.push_back({{"from", s.from}, {"warmup", s.warmup}});
  json j{{"gamma", c.gamma},
         {"c_avg", c.c_avg},
         {"supervised", c.supervised},
         {"curriculum", cur},
         {"batch", c.batch},
         {"learning_rate", c.learning_rate},
         {"milestones", c.milestones},
         {"steps", c.steps},
         {"seed", c.seed},
         {"validate_every", c.validate_every},
         {"validation_frames", c.validation_frames},
         {"validation_holdout", c.validation_holdout},
         {"beta1", c.beta1},
         {"beta2", c.beta2},
         {"epsilon", c.epsilon},
         {"network", write_network(c.network)},
         {"sim", write_sim(sim)}};
  return j.dump(2) + "\n";
}

ScheduleSpec parse_schedule(const std::string& text) {
  const json j = parse(text, "schedule");
  const std::string w = "schedule";
  check_keys(j, {"fill", "settle_frames", "rotations"}, w);
  ScheduleSpec s;
  get(j, "fill", s.fill, w);
  get(j, "settle_frames", s.settle_frames, w);
  if (j.contains("rotations"))
    for (const auto& r : j["rotations"]) {
      check_keys(r, {"frame", "pitch_deg", "roll_deg"}, "schedule.rotations[]");
      ScheduledRotation rot;
      double p = 0.0, q = 0.0;
      get(r, "frame", rot.frame, w);
      get(r, "pitch_deg", p, w);
      get(r, "roll_deg", q, w);
      if (std::abs(p) > 90.0 || std::abs(q) > 90.0) throw ConfigError("schedule: angles must lie within ±90°");
      rot.pitch = p * kDeg;
      rot.roll = q * kDeg;
      s.rotations.push_back(rot);
    }
  if (!(s.fill > 0.0 && s.fill < 1.0)) throw ConfigError("schedule: fill must lie in (0, 1)");
  return s;
}

std::string to_json(const ScheduleSpec& s) {
  json rots = json::array();
  for (const auto& r : s.rotations)
    rots.push_back({{"frame", r.frame}, {"pitch_deg", r.pitch / kDeg}, {"roll_deg", r.roll / kDeg}});
  json j{{"fill", s.fill}, {"settle_frames", s.settle_frames}, {"rotations", rots}};
  return j.dump(2) + "\n";
}

}  // namespace slosh
