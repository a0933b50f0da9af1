#include <random>

#include "doctest.h"
#include "slosh/conv_kernels.hpp"
#include "slosh/errors.hpp"
#include "slosh/pbf.hpp"
#include "support.hpp"

using namespace slosh;

namespace {

std::vector<Vec3> clustered(std::mt19937_64& rng, std::size_t n) { return testing::random_cloud(rng, n, 0.12); }

}  // namespace

TEST_CASE("ball_to_cube maps the unit ball onto the cube") {
  std::mt19937_64 rng(2);
  for (const auto& p : testing::random_cloud(rng, 500, 1.0)) {
    if (p.norm() > 1.0) continue;
    const Vec3 u = conv::ball_to_cube(p);
    CHECK((u - testing::scratch_lambda(p)).norm() < 1e-14);
    CHECK((conv::ball_to_cube(-p) + u).norm() < 1e-15);  // odd
    CHECK(u.cwiseAbs().maxCoeff() == doctest::Approx(p.norm()));
  }
  CHECK(conv::ball_to_cube(Vec3::Zero()) == Vec3::Zero());
  CHECK((conv::ball_to_cube(Vec3(0.6, 0.8, 0)) - Vec3(0.75, 1.0, 0)).norm() < 1e-14);
  CHECK_THROWS_AS(conv::ball_to_cube(Vec3(1.1, 0, 0)), InputError);
}

TEST_CASE("ball_to_cube jacobian matches finite differences") {
  std::mt19937_64 rng(3);
  for (const auto& p : testing::random_cloud(rng, 100, 0.5)) {
    const Mat3 j = conv::ball_to_cube_jacobian(p);
    for (int d = 0; d < 3; ++d) {
      Vec3 e = Vec3::Zero();
      e[d] = 1e-7;
      const Vec3 num = (conv::ball_to_cube(p + e) - conv::ball_to_cube(p - e)) / 2e-7;
      CHECK((num - j.col(d)).norm() < 1e-5);
    }
  }
}

TEST_CASE("window") {
  CHECK(conv::window(0.0, 1.0) == 1.0);
  CHECK(conv::window(0.5, 1.0) == doctest::Approx(0.421875));
  CHECK(conv::window(1.0, 1.0) == 0.0);
  CHECK(conv::window(2.0, 1.0) == 0.0);
}

TEST_CASE("trilinear stencil is a partition of unity and reproduces linear fields") {
  std::mt19937_64 rng(4);
  for (const auto& u : testing::random_cloud(rng, 200, 0.75)) {
    const auto s = conv::trilinear_stencil(u);
    double sum = 0;
    Vec3 centroid = Vec3::Zero();
    for (int k = 0; k < 8; ++k) {
      sum += s.weight[k];
      const int c = s.cell[k];
      const Vec3 center(-0.75 + 0.5 * (c / 16), -0.75 + 0.5 * ((c / 4) % 4), -0.75 + 0.5 * (c % 4));
      centroid += s.weight[k] * center;
    }
    CHECK(sum == doctest::Approx(1.0));
    CHECK((centroid - u).norm() < 1e-12);
  }
}

TEST_CASE("antisymmetric materialization") {
  std::mt19937_64 rng(5);
  const Matrix free = testing::random_matrix(rng, 3, conv::kFreeCells * 2);
  const Matrix full = conv::materialize_antisym(free, 2);
  conv::KernelGrid g(3, 2);
  g.values = full;
  for (int c = 0; c < conv::kCells; ++c) CHECK((g.cell(c) + g.cell(conv::mirror_cell(c))).norm() < 1e-15);
  for (const auto& u : testing::random_cloud(rng, 50, 1.0))
    CHECK((conv::interp(g, u) + conv::interp(g, -u)).norm() < 1e-13);
  CHECK(conv::interp(g, Vec3::Zero()).norm() < 1e-15);
}

TEST_CASE("interp agrees with an independent trilinear lookup") {
  std::mt19937_64 rng(6);
  conv::KernelGrid g(3, 4);
  g.values = testing::random_matrix(rng, 3, conv::kCells * 4);
  for (const auto& u : testing::random_cloud(rng, 100, 1.0))
    CHECK((conv::interp(g, u) - testing::scratch_interp(g.values, 4, u)).norm() < 1e-13);
}

TEST_CASE("cconv agrees with a direct transcription of Eq. 1") {
  std::mt19937_64 rng(7);
  const double R = 0.1125;
  for (int trial = 0; trial < 5; ++trial) {
    const auto src = clustered(rng, 40);
    const auto qry = clustered(rng, 25);
    const Matrix f = testing::random_matrix(rng, 40, 3);
    conv::KernelGrid k(3, 5);
    k.values = testing::random_matrix(rng, 3, conv::kCells * 5);
    const Matrix ref = testing::scratch_cconv(f, src, qry, k.values, 5, R);
    CHECK((conv::cconv(f, src, qry, k, R) - ref).cwiseAbs().maxCoeff() < 1e-12);

    Tape t(false);
    const auto geo = conv::build_geometry(qry, src, R);
    const Var out = conv::cconv(t.constant(f), t.constant(k.values), geo);
    CHECK((out.value() - ref).cwiseAbs().maxCoeff() < 1e-12);
  }
}

TEST_CASE("ascc agrees with a direct transcription and conserves the sum") {
  std::mt19937_64 rng(8);
  const double R = 0.1125;
  const auto pos = clustered(rng, 30);
  const Matrix f = testing::random_matrix(rng, 30, 4);
  conv::AntisymKernelGrid k(4, 3);
  k.free_values = testing::random_matrix(rng, 4, conv::kFreeCells * 3);
  const Matrix full = conv::materialize_antisym(k.free_values, 3);
  const Matrix ref = testing::scratch_ascc(f, pos, full, 3, R);
  const Matrix lib = conv::ascc(f, pos, k, R);
  CHECK((lib - ref).cwiseAbs().maxCoeff() < 1e-12);
  CHECK(lib.colwise().sum().norm() < 1e-12 * lib.cwiseAbs().sum());

  Tape t(false);
  const Var out = conv::ascc(t.constant(f), t.constant(full), conv::build_geometry(pos, pos, R));
  CHECK((out.value() - ref).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("two-particle ascc is exactly antisymmetric") {
  std::vector<Vec3> pos{Vec3(0.01, 0.02, -0.03), Vec3(0.05, -0.01, 0.02)};
  std::mt19937_64 rng(9);
  const Matrix f = testing::random_matrix(rng, 2, 2);
  conv::AntisymKernelGrid k(2, 3);
  k.free_values = testing::random_matrix(rng, 2, conv::kFreeCells * 3);
  const Matrix out = conv::ascc(f, pos, k, 0.1125);
  CHECK((out.row(0) + out.row(1)).norm() < 1e-10 * out.row(0).norm());
}

TEST_CASE("cconv gradients match finite differences") {
  std::mt19937_64 rng(10);
  const double R = 0.1125;
  const auto src = clustered(rng, 20);
  const auto qry = clustered(rng, 12);
  const Matrix f0 = testing::random_matrix(rng, 20, 2);
  const Matrix k0 = testing::random_matrix(rng, 2, conv::kCells * 3);
  const Matrix w = testing::random_matrix(rng, 12, 3);
  const Matrix qp0 = to_matrix(qry), sp0 = to_matrix(src);

  auto value = [&](const Matrix& f, const Matrix& k, const Matrix& qp, const Matrix& sp) {
    Tape t(false);
    const Var out = conv::cconv(t.constant(f), t.constant(k), conv::build_geometry(qp, sp, R));
    return (out.value().array() * w.array()).sum();
  };
  Tape t;
  const Var f = t.variable(f0), k = t.variable(k0), qp = t.variable(qp0), sp = t.variable(sp0);
  const Var out = conv::cconv(f, k, conv::build_geometry(qp0, sp0, R, true), qp, sp);
  t.backward(ad::sum(ad::mul_const(out, w)));

  CHECK(testing::check_gradient([&](const Matrix& x) { return value(x, k0, qp0, sp0); }, f0, t.grad(f.id)).max_rel <
        1e-4);
  CHECK(testing::check_gradient([&](const Matrix& x) { return value(f0, x, qp0, sp0); }, k0, t.grad(k.id)).max_rel <
        1e-4);
  CHECK(testing::check_gradient([&](const Matrix& x) { return value(f0, k0, x, sp0); }, qp0, t.grad(qp.id), 1e-7)
            .max_rel < 1e-4);
  CHECK(testing::check_gradient([&](const Matrix& x) { return value(f0, k0, qp0, x); }, sp0, t.grad(sp.id), 1e-7)
            .max_rel < 1e-4);
}

TEST_CASE("self cconv and ascc position gradients match finite differences") {
  std::mt19937_64 rng(12);
  const double R = 0.1125;
  const Matrix p0 = to_matrix(clustered(rng, 16));
  const Matrix f0 = testing::random_matrix(rng, 16, 2);
  const Matrix free0 = testing::random_matrix(rng, 2, conv::kFreeCells * 2);
  const Matrix w = testing::random_matrix(rng, 16, 2);

  auto value = [&](const Matrix& p, const Matrix& f, const Matrix& free) {
    Tape t(false);
    const auto g = conv::build_geometry(p, p, R);
    const Var c = conv::cconv(t.constant(f), t.constant(conv::materialize_antisym(free, 2)), g);
    const Var s = conv::ascc(t.constant(f), conv::materialize_antisym(t.constant(free), 2), g);
    return ((c.value() + s.value()).array() * w.array()).sum();
  };
  Tape t;
  const Var p = t.variable(p0), f = t.variable(f0), free = t.variable(free0);
  const auto g = conv::build_geometry(p0, p0, R, true);
  const Var full = conv::materialize_antisym(free, 2);
  const Var c = conv::cconv(f, full, g, p, p);
  const Var s = conv::ascc(f, full, g, p);
  t.backward(ad::sum(ad::mul_const(ad::add(c, s), w)));

  CHECK(testing::check_gradient([&](const Matrix& x) { return value(x, f0, free0); }, p0, t.grad(p.id), 1e-7)
            .max_rel < 1e-4);
  CHECK(testing::check_gradient([&](const Matrix& x) { return value(p0, x, free0); }, f0, t.grad(f.id)).max_rel <
        1e-4);
  CHECK(testing::check_gradient([&](const Matrix& x) { return value(p0, f0, x); }, free0, t.grad(free.id))
            .max_rel < 1e-4);
}

TEST_CASE("geometry edges match the neighbor set") {
  std::mt19937_64 rng(13);
  const auto pts = clustered(rng, 50);
  const auto g = conv::build_geometry(pts, pts, 0.1125);
  std::size_t edges = 0;
  for (const auto& a : pts)
    for (const auto& b : pts) edges += (a - b).norm() < 0.1125;
  CHECK(g->num_edges() == edges);
}

TEST_CASE("kernel shape mismatches are rejected") {
  Tape t(false);
  std::vector<Vec3> pts{Vec3::Zero()};
  const auto g = conv::build_geometry(pts, pts, 0.1);
  CHECK_THROWS_AS(conv::cconv(t.constant(Matrix::Ones(1, 2)), t.constant(Matrix::Ones(3, 64)), g), ConfigError);
  CHECK_THROWS_AS(conv::cconv(t.constant(Matrix::Ones(1, 2)), t.constant(Matrix::Ones(2, 63)), g), ConfigError);
}

TEST_CASE("glorot init bounds") {
  Matrix m(8, conv::kCells * 4);
  std::mt19937_64 rng(1);
  conv::init_glorot(m, conv::kCells * 8, conv::kCells * 4, rng);
  const double bound = std::sqrt(6.0 / (conv::kCells * 12.0));
  CHECK(m.cwiseAbs().maxCoeff() <= bound);
  CHECK(m.cwiseAbs().maxCoeff() > 0.9 * bound);
  CHECK(std::abs(m.mean()) < 0.1 * bound);
}
