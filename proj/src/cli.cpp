#include "slosh/cli.hpp"

#include <fstream>
#include <map>
#include <iostream>
#include <numbers>
#include <optional>
#include <random>

#include "CLI11.hpp"
#include "slosh/binio.hpp"
#include "slosh/config.hpp"
#include "slosh/errors.hpp"
#include "slosh/frame_io.hpp"
#include "slosh/metrics.hpp"
#include "slosh/parallel.hpp"
#include "slosh/tank.hpp"

namespace slosh {
namespace {

struct Globals {
  std::optional<std::uint64_t> seed;
  bool deterministic = false;
  int threads = 1;
};

int cmd_generate(const Globals& g, const std::string& spec_path, const std::string& out_dir, std::ostream& err) {
  DatasetSpec spec = parse_dataset_spec(binio::read_file(spec_path));
  if (g.seed) spec.seed = *g.seed;
  spec.record_timing = !g.deterministic;
  const auto records = generate(spec, out_dir, [&](const std::string& line) { err << line << '\n'; });
  std::size_t ok = 0, frames = 0;
  for (const auto& r : records) {
    ok += r.ok;
    frames += r.frames;
  }
  err << "generated " << ok << "/" << records.size() << " iterations, " << frames << " frames\n";
  return 0;
}

int cmd_train(const Globals& g, const std::string& config_path, const std::string& data_dir, const std::string& out,
              std::string log_path, std::ostream& err) {
  const std::string text = binio::read_file(config_path);
  TrainConfig cfg = parse_train_config(text);
  const SimConfig sim = parse_train_sim(text);
  if (g.seed) {
    cfg.seed = *g.seed;
    cfg.network.seed = *g.seed;
  }
  const auto data = load_dataset(data_dir);
  std::vector<FrameSequence> train_set, val_set;
  std::map<int, std::size_t> per_tank;
  for (const auto& s : data) ++per_tank[s.tank];
  std::map<int, std::size_t> seen;
  for (const auto& s : data) {
    const std::size_t k = seen[s.tank]++;
    const bool hold = per_tank[s.tank] > cfg.validation_holdout && k >= per_tank[s.tank] - cfg.validation_holdout;
    (hold ? val_set : train_set).push_back(s.frames);
  }
  if (log_path.empty()) log_path = out + ".log.jsonl";
  std::ofstream log(log_path, std::ios::app);
  if (!log) throw IoError("cannot open metrics log " + log_path);
  TrainHooks hooks;
  hooks.on_record = [&](const TrainRecord& r) {
    log << r.to_json() << '\n';
    log.flush();
    err << "step " << r.step << " loss " << r.loss << " d_n " << r.d_n << " e " << r.max_density_error << '\n';
  };
  hooks.on_checkpoint = [&](const Network& net, std::size_t) { save_checkpoint(net, out); };
  err << "training on " << train_set.size() << " sequences, validating on " << val_set.size() << '\n';
  const TrainResult res = train(cfg, sim, train_set, val_set, hooks);
  save_checkpoint(res.network, out);
  if (res.halted) {
    err << "training halted: " << res.message << " (last good weights saved to " << out << ")\n";
    return 2;
  }
  return 0;
}

int cmd_simulate(const Globals& g, const std::string& ckpt, bool oracle, int scene_id, std::size_t frames,
                 const std::string& schedule_path, const std::string& sim_path, const std::string& out,
                 std::ostream& err) {
  if (ckpt.empty() == !oracle) throw InputError("simulate: pass exactly one of --ckpt or --oracle");
  const SimConfig sim = sim_path.empty() ? SimConfig{} : parse_sim_config(binio::read_file(sim_path));
  ScheduleSpec schedule;
  if (!schedule_path.empty()) {
    schedule = parse_schedule(binio::read_file(schedule_path));
  } else {
    std::mt19937_64 rng(g.seed.value_or(0));
    std::uniform_real_distribution<double> angle(-std::numbers::pi / 2.0, std::numbers::pi / 2.0);
    const double pitch = angle(rng);
    schedule.rotations.push_back({0, pitch, angle(rng)});
  }
  InitialState init = make_initial_state(scene_id, schedule.fill, sim);
  for (std::size_t f = 0; f < schedule.settle_frames; ++f) dfsph_step(init.state, init.scene, sim);
  for (auto& v : init.state.velocities) v.setZero();
  FrameSequence seq;
  if (oracle) {
    seq = simulate_sph(init.state, init.scene, schedule.rotations, frames, sim);
  } else {
    const Network net = load_checkpoint(ckpt);
    seq = rollout(net, init.state, init.scene, schedule.rotations, frames, sim);
  }
  if (g.deterministic) seq.seconds_per_frame = 0.0;  // wall clock is the one nondeterministic field
  write_frames(seq, out);
  err << "wrote " << seq.size() << " frames (" << seq.frames[0].count(Kind::Fluid) << " fluid particles, "
      << seq.seconds_per_frame << " s/frame) to " << out << '\n';
  return 0;
}

int cmd_eval(const Globals& g, const std::string& pred_path, const std::string& truth_path,
             const std::string& report_path, const std::string& ckpt, std::size_t stride, std::ostream& out) {
  const FrameSequence pred = read_frames(pred_path);
  const FrameSequence truth = read_frames(truth_path);
  const SimConfig sim;
  EvalReport r = evaluate(pred, truth, sim, g.seed.value_or(0));
  if (!ckpt.empty()) evaluate_windows(r, load_checkpoint(ckpt), truth, sim, stride, g.seed.value_or(0));
  binio::atomic_write(report_path, r.to_json());
  out << r.table();
  return 0;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Learned fuel-sloshing simulator: dataset generation, training, rollout and evaluation", "slosh"};
  app.require_subcommand(1);
  Globals g;
  std::uint64_t seed = 0;
  auto* seed_opt = app.add_option("--seed", seed, "Seed overriding config seeds");
  app.add_flag("--deterministic", g.deterministic, "Bit-reproducible outputs (drops wall-clock fields)");
  app.add_option("--threads", g.threads, "Worker threads")->check(CLI::PositiveNumber);

  std::string spec, out_dir;
  auto* gen = app.add_subcommand("generate", "Generate an oracle dataset");
  gen->add_option("--spec", spec, "Dataset spec (JSON)")->required();
  gen->add_option("--out", out_dir, "Output directory")->required();

  std::string config, data, ckpt_out, log_path;
  auto* tr = app.add_subcommand("train", "Train the network");
  tr->add_option("--config", config, "Training config (JSON)")->required();
  tr->add_option("--data", data, "Dataset directory")->required();
  tr->add_option("--out", ckpt_out, "Checkpoint path")->required();
  tr->add_option("--log", log_path, "Metrics log (JSON lines); default <out>.log.jsonl");

  std::string ckpt, schedule, sim_path, frames_out;
  bool oracle = false;
  int scene = 0;
  std::size_t frames = 0;
  auto* sim = app.add_subcommand("simulate", "Roll out a scene with the network or the SPH oracle");
  sim->add_option("--ckpt", ckpt, "Network checkpoint");
  sim->add_flag("--oracle", oracle, "Use the SPH oracle instead of a network");
  sim->add_option("--scene", scene, "Tank id (0-3)")->required()->check(CLI::Range(0, 3));
  sim->add_option("--frames", frames, "Number of steps")->required()->check(CLI::PositiveNumber);
  sim->add_option("--schedule", schedule, "Schedule (JSON); default: one random rotation at frame 0");
  sim->add_option("--sim", sim_path, "Simulation constants (JSON)");
  sim->add_option("--out", frames_out, "Output frame file")->required();

  std::string pred, truth, report, eval_ckpt;
  std::size_t stride = 5;
  auto* ev = app.add_subcommand("eval", "Compare a predicted sequence with ground truth");
  ev->add_option("--pred", pred, "Predicted frame file")->required();
  ev->add_option("--truth", truth, "Ground-truth frame file")->required();
  ev->add_option("--report", report, "Report output (JSON)")->required();
  ev->add_option("--ckpt", eval_ckpt, "Checkpoint for windowed t+1/t+2 metrics");
  ev->add_option("--stride", stride, "Window stride for --ckpt")->check(CLI::PositiveNumber);

  std::string csv_in, csv_out;
  auto* csv = app.add_subcommand("export-csv", "Write one CSV per frame");
  csv->add_option("--frames", csv_in, "Frame file")->required();
  csv->add_option("--out", csv_out, "Output directory")->required();

  std::vector<std::string> rev(args.rbegin(), args.rend());
  try {
    app.parse(rev);
  } catch (const CLI::CallForHelp& e) {
    out << app.help();
    return 0;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n\n" << app.help();
    return 1;
  }
  if (*seed_opt) g.seed = seed;
  set_thread_count(g.threads);

  try {
    if (*gen) return cmd_generate(g, spec, out_dir, err);
    if (*tr) return cmd_train(g, config, data, ckpt_out, log_path, err);
    if (*sim) return cmd_simulate(g, ckpt, oracle, scene, frames, schedule, sim_path, frames_out, err);
    if (*ev) return cmd_eval(g, pred, truth, report, eval_ckpt, stride, out);
    if (*csv) {
      export_csv(read_frames(csv_in), csv_out);
      return 0;
    }
  } catch (const InputError& e) {
    err << "error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return 2;
  }
  return 1;
}

}  // namespace slosh
