#include <algorithm>
#include <numeric>
#include <random>

#include "doctest.h"
#include "slosh/dataset.hpp"
#include "slosh/errors.hpp"
#include "slosh/metrics.hpp"
#include "support.hpp"

using namespace slosh;

namespace {

double brute_emd(const std::vector<Vec3>& a, const std::vector<Vec3>& b) {
  std::vector<int> p(a.size());
  std::iota(p.begin(), p.end(), 0);
  double best = INFINITY;
  do {
    double s = 0;
    for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - b[static_cast<std::size_t>(p[i])]).norm();
    best = std::min(best, s);
  } while (std::next_permutation(p.begin(), p.end()));
  return best / static_cast<double>(a.size());
}

FrameSequence single(const std::vector<Vec3>& fluid) {
  FrameSequence s;
  ParticleSet p;
  for (const auto& x : fluid) p.push_back(x, Vec3::Zero(), Kind::Fluid);
  s.push(p, Scene{});
  s.dt = 0.02;
  return s;
}

}  // namespace

TEST_CASE("emd equals the brute-force optimum over all 7! matchings") {
  std::mt19937_64 rng(1);
  for (int trial = 0; trial < 10; ++trial) {
    const auto a = testing::random_cloud(rng, 7, 1.0);
    const auto b = testing::random_cloud(rng, 7, 1.0);
    CHECK(emd(a, b) == doctest::Approx(brute_emd(a, b)).epsilon(1e-12));
  }
}

TEST_CASE("hungarian returns a permutation of minimal cost") {
  std::mt19937_64 rng(2);
  for (int trial = 0; trial < 10; ++trial) {
    const Matrix c = testing::random_matrix(rng, 6, 6).cwiseAbs();
    const auto a = hungarian(c);
    std::vector<int> sorted = a;
    std::sort(sorted.begin(), sorted.end());
    for (int i = 0; i < 6; ++i) CHECK(sorted[static_cast<std::size_t>(i)] == i);
    double cost = 0;
    for (int i = 0; i < 6; ++i) cost += c(i, a[static_cast<std::size_t>(i)]);
    std::vector<int> p{0, 1, 2, 3, 4, 5};
    double best = INFINITY;
    do {
      double s = 0;
      for (int i = 0; i < 6; ++i) s += c(i, p[static_cast<std::size_t>(i)]);
      best = std::min(best, s);
    } while (std::next_permutation(p.begin(), p.end()));
    CHECK(cost == doctest::Approx(best).epsilon(1e-12));
  }
}

TEST_CASE("emd and chamfer properties") {
  std::mt19937_64 rng(3);
  const auto a = testing::random_cloud(rng, 50, 1.0);
  auto b = a;
  std::shuffle(b.begin(), b.end(), rng);
  CHECK(emd(a, b) == doctest::Approx(0.0));
  CHECK(chamfer(a, b) == 0.0);
  auto shifted = a;
  for (auto& p : shifted) p += Vec3(0.003, 0, 0);
  CHECK(emd(a, shifted) == doctest::Approx(0.003));
  const auto c = testing::random_cloud(rng, 30, 1.0);
  CHECK(chamfer(a, c) == doctest::Approx(chamfer(c, a)));
  for (int trial = 0; trial < 10; ++trial) {
    const auto p = testing::random_cloud(rng, 40, 1.0);
    const auto q = testing::random_cloud(rng, 40, 1.0);
    const auto r = testing::random_cloud(rng, 40, 1.0);
    CHECK(chamfer(p, q) <= emd(p, q) + 1e-12);
    CHECK(emd(p, q) == doctest::Approx(emd(q, p)));
    CHECK(emd(p, r) <= emd(p, q) + emd(q, r) + 1e-12);
  }
  CHECK_THROWS_AS(chamfer({}, a), InputError);
  CHECK_THROWS_AS(emd(a, c), InputError);
}

TEST_CASE("chamfer hand value") {
  const std::vector<Vec3> a{Vec3(0, 0, 0), Vec3(1, 0, 0)};
  const std::vector<Vec3> b{Vec3(0, 0, 0)};
  // a→b: (0 + 1)/2, b→a: 0.
  CHECK(chamfer(a, b) == doctest::Approx(0.25));
}

TEST_CASE("emd above the exact limit subsamples deterministically") {
  std::mt19937_64 rng(4);
  const auto a = testing::random_cloud(rng, kEmdExactLimit + 10, 1.0);
  auto b = a;
  for (auto& p : b) p += Vec3(0, 0.01, 0);
  const double e1 = emd(a, b, 5), e2 = emd(a, b, 5);
  CHECK(e1 == e2);
  CHECK(e1 > 0.0);
}

TEST_CASE("sequence error runs from truth to prediction over fluid only") {
  ParticleSet truth, pred;
  truth.push_back(Vec3(0, 0, 0), Vec3::Zero(), Kind::Fluid);
  truth.push_back(Vec3(1, 0, 0), Vec3::Zero(), Kind::Fluid);
  truth.push_back(Vec3(5, 5, 5), Vec3::Zero(), Kind::Boundary, Vec3::UnitY());
  pred = truth;
  pred.positions[1] = Vec3(0, 0.5, 0);
  pred.positions[2] = Vec3(9, 9, 9);
  // truth (0,0,0)→0, truth (1,0,0)→min(1, |(1,-0.5,0)|) = 1; mean 0.5.
  CHECK(frame_sequence_error(pred, truth) == doctest::Approx(0.5));
  // Reverse direction differs: pred (0,0.5,0)→0.5, pred (0,0,0)→0; mean 0.25.
  CHECK(frame_sequence_error(truth, pred) == doctest::Approx(0.25));
}

TEST_CASE("density error and inside fraction") {
  const SimConfig c = default_config();
  auto init = make_initial_state(0, 0.5, c);
  CHECK(max_density_error(init.state, init.state, c) == 0.0);
  ParticleSet squeezed = init.state;
  for (std::size_t i = 0; i < squeezed.size(); ++i)
    if (squeezed.kinds[i] == Kind::Fluid) squeezed.positions[i] *= 0.9;
  CHECK(max_density_error(squeezed, init.state, c) > 0.1);

  CHECK(inside_fraction(init.state, 0.1) == 1.0);
  ParticleSet out = init.state;
  out.positions[0] = Vec3(10, 0, 0);
  const double n = static_cast<double>(out.count(Kind::Fluid));
  CHECK(inside_fraction(out, 0.1) == doctest::Approx((n - 1) / n));
}

TEST_CASE("evaluate on identical sequences is zero and reports round-trip through JSON") {
  const SimConfig c = default_config();
  auto init = make_initial_state(0, 0.3, c);
  const FrameSequence truth = simulate_sph(init.state, init.scene, {}, 3, c);
  const EvalReport r = evaluate(truth, truth, c, 1);
  CHECK(r.cd_t1 == 0.0);
  CHECK(r.emd_t2 == doctest::Approx(0.0));
  CHECK(r.d_n.size() == 4);
  CHECK(r.max_density_error == 0.0);
  CHECK(r.inside_fraction == 1.0);
  CHECK_NOTHROW(r.validate());
  const EvalReport back = EvalReport::from_json(r.to_json());
  CHECK(back.to_json() == r.to_json());
  CHECK(r.table().find("EMD t+1") != std::string::npos);

  EvalReport bad = r;
  bad.cd_t1 = std::nan("");
  CHECK_THROWS_AS(bad.validate(), NumericalError);
}

TEST_CASE("windowed evaluation skips rotation frames") {
  const SimConfig c = default_config();
  auto init = make_initial_state(0, 0.3, c);
  const FrameSequence truth = simulate_sph(init.state, init.scene, {{0, 0.2, 0.0}, {3, 0.0, 0.2}}, 6, c);
  NetworkConfig nc;
  nc.widths = {2, 2, 2, 2, 2};
  nc.input_width = nc.fc_width = nc.fusion_width = 2;
  EvalReport r = evaluate(truth, truth, c);
  evaluate_windows(r, Network(nc), truth, c, 1);
  // Windows start at 0..4; windows covering the rotation at frame 3 (starts 1, 2) are skipped.
  CHECK(r.windows == 3);
  CHECK(r.cd_t1 > 0.0);
}

TEST_CASE("metrics reject mismatched inputs") {
  const auto a = single({Vec3::Zero()});
  const auto b = single({Vec3::Zero(), Vec3::Ones()});
  CHECK_THROWS_AS(evaluate(a, b, default_config()), InputError);
  CHECK_THROWS_AS(evaluate(FrameSequence{}, b, default_config()), InputError);
}
