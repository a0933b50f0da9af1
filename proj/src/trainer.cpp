#include "slosh/trainer.hpp"

#include <cmath>
#include <random>

#include "json.hpp"
#include "slosh/errors.hpp"
#include "slosh/metrics.hpp"
#include "slosh/neighbor_index.hpp"
#include "slosh/sph.hpp"

namespace slosh {

void TrainConfig::validate() const {
  if (!(gamma > 0.0)) throw ConfigError("train: gamma must be positive");
  if (!(c_avg > 0.0)) throw ConfigError("train: c_avg must be positive");
  if (supervised < 1) throw ConfigError("train: supervised frames T must be >= 1");
  if (curriculum.empty() || curriculum.front().from != 0.0)
    throw ConfigError("train: curriculum must start at progress 0");
  for (std::size_t i = 1; i < curriculum.size(); ++i)
    if (!(curriculum[i].from > curriculum[i - 1].from)) throw ConfigError("train: curriculum must be increasing");
  if (batch < 1) throw ConfigError("train: batch must be >= 1");
  if (!(learning_rate > 0.0)) throw ConfigError("train: learning rate must be positive");
  if (!(beta1 >= 0.0 && beta1 < 1.0 && beta2 >= 0.0 && beta2 < 1.0 && epsilon > 0.0))
    throw ConfigError("train: bad Adam constants");
  network.validate();
}

std::size_t TrainConfig::warmup_at(std::size_t step) const {
  const double progress = steps ? static_cast<double>(step) / static_cast<double>(steps) : 0.0;
  std::size_t w = 0;
  for (const auto& s : curriculum)
    if (progress >= s.from) w = s.warmup;
  return w;
}

double TrainConfig::learning_rate_at(std::size_t step) const {
  double lr = learning_rate;
  for (std::size_t m : milestones)
    if (step >= m) lr *= 0.5;
  return lr;
}

Matrix neighbor_weights(const ParticleSet& truth, double radius, double c_avg) {
  const NeighborIndex index = NeighborIndex::build(truth.positions, radius);
  const auto fluid = truth.indices_of(Kind::Fluid);
  Matrix w(static_cast<Eigen::Index>(fluid.size()), 1);
  for (std::size_t k = 0; k < fluid.size(); ++k) {
    int c = 0;
    index.for_each(truth.positions[fluid[k]], [&](std::size_t id, const Vec3&, double) { c += id != fluid[k]; });
    w(static_cast<Eigen::Index>(k), 0) = std::exp(-static_cast<double>(c) / c_avg);
  }
  return w;
}

Var frame_loss(Var x, const Matrix& truth, const Matrix& weights, double gamma) {
  if (x.rows() != truth.rows() || x.cols() != truth.cols() || weights.rows() != x.rows())
    throw ConfigError("frame_loss: arrays are not aligned");
  Tape& t = *x.tape;
  const Var dist = ad::row_norm(ad::sub(x, t.constant(truth)));
  return ad::sum(ad::mul_const(ad::pow_guarded(dist, gamma), weights));
}

double frame_loss(const Matrix& x, const Matrix& truth, const Matrix& weights, double gamma) {
  if (x.rows() != truth.rows() || x.cols() != truth.cols() || weights.rows() != x.rows())
    throw ConfigError("frame_loss: arrays are not aligned");
  double l = 0.0;
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    const double d = (x.row(i) - truth.row(i)).norm();
    l += weights(i, 0) * (d > 0.0 ? std::pow(d, gamma) : 0.0);
  }
  return l;
}

StepFn network_step(const Network& net, const SimConfig& config) {
  return [&net, config](Tape& tape, Var x, Var v, const ParticleSet& frame, std::size_t) {
    const ParticleSet b = frame.subset(Kind::Boundary);
    return step_tape(tape, net, x, v, to_matrix(b.positions), to_matrix(b.normals), config);
  };
}

Var rollout_loss(Tape& tape, const StepFn& step, std::span<const ParticleSet> frames, std::size_t warmup,
                 std::size_t supervised, const TrainConfig& config, double radius, RolloutTrace* trace) {
  if (supervised < 1) throw InputError("rollout_loss: T must be >= 1");
  if (frames.size() < warmup + supervised + 1)
    throw InputError("rollout_loss: window has " + std::to_string(frames.size()) + " frames, needs " +
                     std::to_string(warmup + supervised + 1));
  Matrix x = to_matrix(frames[0].positions_of(Kind::Fluid));
  Matrix v = to_matrix(frames[0].velocities_of(Kind::Fluid));
  for (std::size_t w = 0; w < warmup; ++w) {
    Tape scratch(false);
    const StepVars s = step(scratch, scratch.constant(x), scratch.constant(v), frames[w], w);
    x = s.x.value();
    v = s.v.value();
  }
  if (trace) {
    trace->warm_x = x;
    trace->warm_v = v;
    trace->losses.clear();
  }
  Var xv = tape.constant(x), vv = tape.constant(v);
  Var total;
  for (std::size_t t = 0; t < supervised; ++t) {
    const std::size_t f = warmup + t;
    const StepVars s = step(tape, xv, vv, frames[f], f);
    const ParticleSet& truth = frames[f + 1];
    const Var l = frame_loss(s.x, to_matrix(truth.positions_of(Kind::Fluid)),
                             neighbor_weights(truth, radius, config.c_avg), config.gamma);
    if (trace) trace->losses.push_back(l.value()(0, 0));
    total = total.valid() ? ad::add(total, l) : l;
    xv = s.x;
    vv = s.v;
  }
  return ad::scale(total, 1.0 / static_cast<double>(supervised));
}

std::string TrainRecord::to_json() const {
  nlohmann::json j{{"step", step},
                   {"loss", loss},
                   {"d_n", d_n},
                   {"max_density_error", max_density_error},
                   {"warmup", warmup},
                   {"learning_rate", learning_rate}};
  return j.dump();
}

namespace {

struct Adam {
  std::vector<Matrix> m, v;
  std::size_t t = 0;

  explicit Adam(const ParamStore& p) {
    for (const auto& q : p) {
      m.push_back(Matrix::Zero(q.value.rows(), q.value.cols()));
      v.push_back(Matrix::Zero(q.value.rows(), q.value.cols()));
    }
  }

  void update(ParamStore& p, const std::vector<Matrix>& g, double lr, const TrainConfig& c) {
    ++t;
    const double b1t = 1.0 - std::pow(c.beta1, static_cast<double>(t));
    const double b2t = 1.0 - std::pow(c.beta2, static_cast<double>(t));
    for (std::size_t i = 0; i < p.size(); ++i) {
      m[i] = c.beta1 * m[i] + (1.0 - c.beta1) * g[i];
      v[i] = c.beta2 * v[i] + (1.0 - c.beta2) * g[i].cwiseProduct(g[i]);
      p[i].value.array() -= lr * (m[i].array() / b1t) / ((v[i].array() / b2t).sqrt() + c.epsilon);
    }
  }
};

TrainRecord validate_model(const Network& net, const SimConfig& sim, const std::vector<FrameSequence>& val,
                           std::size_t frames) {
  TrainRecord r;
  if (val.empty()) return r;
  double dn = 0.0, e = 0.0;
  for (const auto& seq : val) {
    const std::size_t n = std::min(frames, seq.size() - 1);
    if (n == 0) continue;
    Scene scene;
    const FrameSequence pred = rollout(net, seq.frames[0], scene, {}, n, sim);
    dn += frame_sequence_error(pred.frames[n], seq.frames[n]);
    e += max_density_error(pred.frames[n], seq.frames[n], sim);
  }
  r.d_n = dn / static_cast<double>(val.size());
  r.max_density_error = e / static_cast<double>(val.size());
  return r;
}

}  // namespace

TrainResult train(const TrainConfig& config, const SimConfig& sim, const std::vector<FrameSequence>& train_set,
                  const std::vector<FrameSequence>& validation, const TrainHooks& hooks) {
  config.validate();
  sim.validate();
  if (train_set.empty()) throw InputError("train: dataset is empty");
  std::size_t max_w = 0;
  for (const auto& s : config.curriculum) max_w = std::max(max_w, s.warmup);
  for (const auto& s : train_set)
    if (s.size() < max_w + config.supervised + 1)
      throw InputError("train: a sequence is shorter than the longest rollout window");

  TrainResult res{Network(config.network), {}, {}, false, {}};
  Network& net = res.network;
  Adam adam(net.params());
  std::mt19937_64 rng(config.seed);
  std::uniform_int_distribution<std::size_t> pick_seq(0, train_set.size() - 1);
  const StepFn step = network_step(net, sim);
  double loss_acc = 0.0;
  std::size_t loss_n = 0;
  ParamStore checkpointed = net.params();

  auto record = [&](std::size_t s) {
    TrainRecord r = validate_model(net, sim, validation, config.validation_frames);
    r.step = s;
    r.loss = loss_n ? loss_acc / static_cast<double>(loss_n) : 0.0;
    r.warmup = config.warmup_at(s == 0 ? 0 : s - 1);
    r.learning_rate = config.learning_rate_at(s == 0 ? 0 : s - 1);
    res.log.push_back(r);
    if (hooks.on_record) hooks.on_record(r);
    loss_acc = 0.0;
    loss_n = 0;
  };

  for (std::size_t s = 0; s < config.steps; ++s) {
    const std::size_t w = config.warmup_at(s);
    const std::size_t len = w + config.supervised + 1;
    std::vector<Matrix> grads;
    double loss = 0.0;
    bool finite = true;
    for (std::size_t b = 0; b < config.batch; ++b) {
      const FrameSequence& seq = train_set[pick_seq(rng)];
      std::uniform_int_distribution<std::size_t> pick_start(0, seq.size() - len);
      const std::size_t start = pick_start(rng);
      Tape tape(true);
      Var l;
      try {
        l = rollout_loss(tape, step, std::span(seq.frames).subspan(start, len), w, config.supervised, config,
                         config.network.radius);
      } catch (const NumericalError& e) {
        finite = false;
        res.message = e.what();
        break;
      }
      const double lv = l.value()(0, 0);
      if (!std::isfinite(lv)) {
        finite = false;
        res.message = "non-finite loss";
        break;
      }
      tape.backward(l);
      auto g = tape.param_grads(net.params());
      if (grads.empty())
        grads = std::move(g);
      else
        for (std::size_t i = 0; i < g.size(); ++i) grads[i] += g[i];
      loss += lv;
    }
    if (finite)
      for (const auto& g : grads)
        if (!g.allFinite()) {
          finite = false;
          res.message = "non-finite gradient";
          break;
        }
    if (!finite) {
      res.halted = true;
      net.params() = checkpointed;
      res.message = "step " + std::to_string(s) + ": " + res.message;
      break;
    }
    const double inv = 1.0 / static_cast<double>(config.batch);
    for (auto& g : grads) g *= inv;
    loss *= inv;
    adam.update(net.params(), grads, config.learning_rate_at(s), config);
    res.losses.push_back(loss);
    loss_acc += loss;
    ++loss_n;
    if (config.validate_every && (s + 1) % config.validate_every == 0) {
      record(s + 1);
      checkpointed = net.params();
      if (hooks.on_checkpoint) hooks.on_checkpoint(net, s + 1);
    }
  }
  if (res.log.empty() || res.log.back().step != res.losses.size()) record(res.losses.size());
  return res;
}

}  // namespace slosh
