#include <cmath>
#include <random>

#include "doctest.h"
#include "slosh/dataset.hpp"
#include "slosh/errors.hpp"
#include "slosh/trainer.hpp"
#include "support.hpp"

using namespace slosh;

namespace {

NetworkConfig tiny(std::uint64_t seed = 1) {
  NetworkConfig c;
  c.widths = {3, 3, 3, 3, 3};
  c.input_width = 3;
  c.fc_width = 2;
  c.fusion_width = 2;
  c.seed = seed;
  return c;
}

Network randomized(const NetworkConfig& c, std::uint64_t seed, double scale) {
  ParamStore p = init_params(c);
  std::mt19937_64 rng(seed);
  for (std::size_t i = 0; i < p.size(); ++i)
    p[i].value = testing::random_matrix(rng, p[i].value.rows(), p[i].value.cols(), scale);
  return Network(c, std::move(p));
}

// 20 fluid particles above a small floor patch, with frames following a
// jittered ballistic path.
std::vector<ParticleSet> small_frames(std::size_t count, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> jit(0.0, 0.002);
  ParticleSet s;
  for (int i = 0; i < 20; ++i)
    s.push_back(Vec3(0.05 * (i % 4), 0.05 + 0.05 * ((i / 4) % 2), 0.05 * (i / 8)), Vec3(0.1, 0, 0), Kind::Fluid);
  for (int i = -1; i <= 4; ++i)
    for (int k = -1; k <= 3; ++k) s.push_back(Vec3(0.05 * i, 0.0, 0.05 * k), Vec3::Zero(), Kind::Boundary, Vec3::UnitY());
  std::vector<ParticleSet> out{s};
  for (std::size_t f = 1; f < count; ++f) {
    ParticleSet n = out.back();
    for (std::size_t i = 0; i < 20; ++i) {
      n.velocities[i] += Vec3(0, -9.81 * 0.02, 0);
      n.positions[i] += 0.02 * n.velocities[i] + Vec3(jit(rng), jit(rng), jit(rng));
    }
    out.push_back(n);
  }
  return out;
}

FrameSequence as_sequence(const std::vector<ParticleSet>& frames) {
  FrameSequence s;
  for (const auto& f : frames) s.push(f, Scene{});
  s.dt = 0.02;
  return s;
}

}  // namespace

TEST_CASE("neighbor weights hand values") {
  ParticleSet s;
  s.push_back(Vec3(0, 0, 0), Vec3::Zero(), Kind::Fluid);
  s.push_back(Vec3(0.05, 0, 0), Vec3::Zero(), Kind::Boundary, Vec3::UnitX());
  s.push_back(Vec3(-0.05, 0, 0), Vec3::Zero(), Kind::Fluid);
  s.push_back(Vec3(5, 0, 0), Vec3::Zero(), Kind::Fluid);
  s.push_back(Vec3(5.2, 0, 0), Vec3::Zero(), Kind::Fluid);
  const Matrix w = neighbor_weights(s, 0.1125, 2.0);
  REQUIRE(w.rows() == 4);
  CHECK(w(0, 0) == doctest::Approx(0.367879).epsilon(1e-6));  // two neighbors, c_avg 2
  CHECK(w(1, 0) == doctest::Approx(0.367879).epsilon(1e-6));  // boundary at 0.1 counts too
  CHECK(w(2, 0) == doctest::Approx(1.0));
  CHECK(w(3, 0) == doctest::Approx(1.0));
}

TEST_CASE("frame loss hand values") {
  const Matrix truth = Matrix::Zero(2, 3);
  Matrix x = truth;
  x(0, 0) = 4.0;
  x(1, 1) = 9.0;
  const Matrix w{{1.0}, {0.5}};
  CHECK(frame_loss(x, truth, w, 0.5) == doctest::Approx(2.0 + 1.5));
  CHECK(frame_loss(truth, truth, w, 0.5) == 0.0);
  Tape t;
  const Var l = frame_loss(t.variable(x), truth, w, 0.5);
  CHECK(l.value()(0, 0) == doctest::Approx(3.5));
}

TEST_CASE("curriculum and learning-rate schedule") {
  TrainConfig c;
  c.steps = 100;
  CHECK(c.warmup_at(0) == 0);
  CHECK(c.warmup_at(39) == 0);
  CHECK(c.warmup_at(40) == 1);
  CHECK(c.warmup_at(70) == 2);
  c.milestones = {10, 20};
  CHECK(c.learning_rate_at(9) == doctest::Approx(0.002));
  CHECK(c.learning_rate_at(10) == doctest::Approx(0.001));
  CHECK(c.learning_rate_at(25) == doctest::Approx(0.0005));
  c.gamma = 0.0;
  CHECK_THROWS_AS(c.validate(), ConfigError);
}

TEST_CASE("rollout loss gradient matches finite differences on a 20-particle graph") {
  const auto frames = small_frames(4, 2);
  const NetworkConfig nc = tiny();
  const Network net = randomized(nc, 3, 0.5);
  const SimConfig sim = default_config();
  TrainConfig tc;
  tc.network = nc;

  auto loss_of = [&](const Network& n) {
    Tape t(false);
    return rollout_loss(t, network_step(n, sim), frames, 0, 3, tc, nc.radius).value()(0, 0);
  };
  Tape t;
  RolloutTrace trace;
  const Var l = rollout_loss(t, network_step(net, sim), frames, 0, 3, tc, nc.radius, &trace);
  CHECK(trace.losses.size() == 3);
  CHECK(l.value()(0, 0) == doctest::Approx((trace.losses[0] + trace.losses[1] + trace.losses[2]) / 3));
  CHECK(l.value()(0, 0) == doctest::Approx(loss_of(net)).epsilon(1e-12));
  t.backward(l);
  const auto grads = t.param_grads(net.params());
  for (const char* name : {"input.cconv_ff", "type_tff2.lam1", "layer1.ascc", "layer4.main_tff.phi1", "res_tff.lam2_b",
                           "head.w", "head.b"}) {
    CAPTURE(std::string(name));
    const std::size_t i = net.params().index_of(name);
    auto f = [&](const Matrix& m) {
      Network n = net;
      n.params()[i].value = m;
      return loss_of(n);
    };
    CHECK(testing::check_gradient(f, net.params()[i].value, grads[i], 1e-6).max_rel < 5e-3);
  }
}

TEST_CASE("warm-up steps carry no gradient") {
  const auto frames = small_frames(4, 3);
  const NetworkConfig nc = tiny();
  const Network net = randomized(nc, 4, 0.5);
  const SimConfig sim = default_config();
  TrainConfig tc;
  Tape a;
  RolloutTrace trace;
  const Var la = rollout_loss(a, network_step(net, sim), frames, 1, 2, tc, nc.radius, &trace);
  a.backward(la);

  // Same supervised steps started from the warm state as if it were data.
  std::vector<ParticleSet> shifted(frames.begin() + 1, frames.end());
  const auto fluid = shifted[0].indices_of(Kind::Fluid);
  for (std::size_t k = 0; k < fluid.size(); ++k) {
    shifted[0].positions[fluid[k]] = trace.warm_x.row(static_cast<Eigen::Index>(k)).transpose();
    shifted[0].velocities[fluid[k]] = trace.warm_v.row(static_cast<Eigen::Index>(k)).transpose();
  }
  Tape b;
  const Var lb = rollout_loss(b, network_step(net, sim), shifted, 0, 2, tc, nc.radius);
  b.backward(lb);
  CHECK(la.value()(0, 0) == doctest::Approx(lb.value()(0, 0)).epsilon(1e-12));
  const auto ga = a.param_grads(net.params()), gb = b.param_grads(net.params());
  for (std::size_t i = 0; i < ga.size(); ++i) CHECK((ga[i] - gb[i]).norm() <= 1e-10 * (1.0 + gb[i].norm()));
}

TEST_CASE("rollout loss needs enough frames and is zero for a perfect model") {
  const auto frames = small_frames(3, 4);
  TrainConfig tc;
  Tape t;
  const StepFn exact = [&](Tape& tp, Var, Var, const ParticleSet&, std::size_t f) {
    const ParticleSet& next = frames[f + 1];
    return StepVars{tp.constant(to_matrix(next.positions_of(Kind::Fluid))),
                    tp.constant(to_matrix(next.velocities_of(Kind::Fluid)))};
  };
  CHECK(rollout_loss(t, exact, frames, 0, 2, tc, 0.1125).value()(0, 0) == 0.0);
  CHECK_THROWS_AS(rollout_loss(t, exact, frames, 1, 2, tc, 0.1125), InputError);
}

TEST_CASE("training lowers the loss and is deterministic") {
  const auto seq = as_sequence(small_frames(6, 5));
  TrainConfig tc;
  tc.network = tiny(9);
  tc.steps = 40;
  tc.batch = 1;
  tc.curriculum = {{0.0, 0}};
  tc.learning_rate = 0.005;
  tc.milestones = {};
  tc.validate_every = 20;
  tc.validation_frames = 3;
  tc.seed = 4;
  std::vector<TrainRecord> records;
  const auto a = train(tc, default_config(), {seq}, {seq}, {[&](const TrainRecord& r) { records.push_back(r); }, {}});
  CHECK_FALSE(a.halted);
  REQUIRE(a.losses.size() == 40);
  double first = 0, last = 0;
  for (int i = 0; i < 5; ++i) {
    first += a.losses[static_cast<std::size_t>(i)];
    last += a.losses[a.losses.size() - 1 - static_cast<std::size_t>(i)];
  }
  CHECK(last < first);
  CHECK(records.size() == 2);
  CHECK(records.back().step == 40);
  const auto b = train(tc, default_config(), {seq}, {seq});
  CHECK(a.network == b.network);
  CHECK(a.losses == b.losses);
}

TEST_CASE("non-finite loss halts with the last good weights") {
  auto good = small_frames(4, 6);
  auto bad = good;
  for (auto& f : bad) f.velocities[0].x() = std::nan("");
  TrainConfig tc;
  tc.network = tiny(2);
  tc.steps = 30;
  tc.batch = 1;
  tc.curriculum = {{0.0, 0}};
  tc.validate_every = 1;
  tc.seed = 1;
  Network last(tc.network);
  std::size_t checkpoints = 0;
  TrainHooks hooks{{}, [&](const Network& n, std::size_t) {
                     last = n;
                     ++checkpoints;
                   }};
  const auto r = train(tc, default_config(), {as_sequence(good), as_sequence(bad)}, {}, hooks);
  CHECK(r.halted);
  CHECK(r.message.find("non-finite") != std::string::npos);
  CHECK(r.losses.size() == checkpoints);
  CHECK(r.network == last);
}

TEST_CASE("training input validation") {
  TrainConfig tc;
  tc.network = tiny();
  CHECK_THROWS_AS(train(tc, default_config(), {}, {}), InputError);
  CHECK_THROWS_AS(train(tc, default_config(), {as_sequence(small_frames(3, 1))}, {}), InputError);
}

TEST_CASE("loss strictly decreases over the first steps on one tiny window") {
  // Three frames with W = 0, T = 2: every step sees the same window.
  const auto seq = as_sequence(small_frames(3, 8));
  TrainConfig tc;
  tc.network = tiny(5);
  tc.steps = 50;
  tc.batch = 1;
  tc.curriculum = {{0.0, 0}};
  tc.milestones = {};
  tc.validate_every = 0;
  const auto r = train(tc, default_config(), {seq}, {});
  REQUIRE(r.losses.size() == 50);
  for (std::size_t i = 1; i <= 10; ++i) CHECK(r.losses[i] < r.losses[i - 1]);
  CHECK(r.losses.back() < r.losses.front());
}
