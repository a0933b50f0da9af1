#include <cmath>
#include <numbers>
#include <random>

#include "doctest.h"
#include "slosh/core_types.hpp"
#include "slosh/errors.hpp"
#include "slosh/neighbor_index.hpp"
#include "slosh/tank.hpp"
#include "support.hpp"

using namespace slosh;

TEST_CASE("rotation conventions") {
  const double t = 0.3;
  const Vec3 z = pitch_matrix(t) * Vec3::UnitZ();
  CHECK(z.x() == doctest::Approx(0.0));
  CHECK(z.y() == doctest::Approx(std::sin(t)));
  CHECK(z.z() == doctest::Approx(std::cos(t)));
  const Vec3 x = roll_matrix(t) * Vec3::UnitX();
  CHECK(x.x() == doctest::Approx(std::cos(t)));
  CHECK(x.y() == doctest::Approx(std::sin(t)));
  CHECK(x.z() == doctest::Approx(0.0));
  const Mat3 c = rotation_matrix(0.2, -0.4);
  CHECK((c - pitch_matrix(0.2) * roll_matrix(-0.4)).norm() < 1e-15);
  CHECK((c * c.transpose() - Mat3::Identity()).norm() < 1e-14);
  CHECK(c.determinant() == doctest::Approx(1.0));
}

TEST_CASE("rotate_rigid moves particles, normals and tank but not gravity") {
  auto placed = place_tank(0, default_config());
  ParticleSet s;
  s.push_back(Vec3(0.1, 0.0, 0.0), Vec3(1, 0, 0), Kind::Fluid);
  s.append(placed.boundary);
  Scene scene = placed.scene;
  const ParticleSet before = s;
  rotate_rigid(s, scene, 0.5, 0.25);
  const Mat3 r = rotation_matrix(0.5, 0.25);
  for (std::size_t i = 0; i < s.size(); ++i) {
    CHECK((s.positions[i] - r * before.positions[i]).norm() < 1e-14);
    CHECK((s.velocities[i] - r * before.velocities[i]).norm() < 1e-14);
    CHECK((s.normals[i] - r * before.normals[i]).norm() < 1e-14);
  }
  CHECK((scene.orientation - r).norm() < 1e-14);
  CHECK_THROWS_AS(rotate_rigid(s, scene, 2.0, 0.0), InputError);
  CHECK(default_config().gravity == Vec3(0, -9.81, 0));
}

TEST_CASE("particle set validation") {
  ParticleSet s;
  s.push_back(Vec3::Zero(), Vec3::Zero(), Kind::Fluid);
  s.push_back(Vec3::Ones(), Vec3::Zero(), Kind::Boundary, Vec3::UnitY());
  CHECK_NOTHROW(s.validate());
  CHECK(s.count(Kind::Fluid) == 1);
  CHECK(s.indices_of(Kind::Boundary) == std::vector<std::size_t>{1});
  s.positions[0].x() = std::nan("");
  CHECK_THROWS_AS(s.validate(), NumericalError);
  s.positions[0].x() = 0;
  s.normals[1] = Vec3(0, 2, 0);
  CHECK_THROWS_AS(s.validate(), NumericalError);
  s.normals[1] = Vec3::UnitY();
  s.velocities.pop_back();
  CHECK_THROWS_AS(s.validate(), ConfigError);
}

TEST_CASE("sim config constants") {
  const SimConfig c = default_config();
  CHECK(c.conv_radius == doctest::Approx(0.1125));
  CHECK(c.spacing() == doctest::Approx(0.05));
  CHECK(c.particle_mass() == doctest::Approx(782.885 * 0.05 * 0.05 * 0.05));
  SimConfig bad = c;
  bad.dt = -1;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
}

TEST_CASE("neighbor index matches brute force") {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 20; ++trial) {
    const auto pts = testing::random_cloud(rng, 300, 0.4);
    const double R = 0.05 + 0.01 * trial;
    const auto idx = NeighborIndex::build(pts, R);
    const auto queries = testing::random_cloud(rng, 30, 0.5);
    for (const auto& q : queries) {
      auto a = idx.query(q);
      auto b = brute_force_query(pts, q, R);
      std::vector<std::size_t> ia, ib;
      for (auto& h : a) ia.push_back(h.id);
      for (auto& h : b) ib.push_back(h.id);
      std::sort(ia.begin(), ia.end());
      std::sort(ib.begin(), ib.end());
      REQUIRE(ia == ib);
    }
  }
}

TEST_CASE("neighbor index boundary cases") {
  std::vector<Vec3> pts{Vec3::Zero(), Vec3(0.1, 0, 0), Vec3(-0.1, 0, 0), Vec3(0.1000001, 0, 0)};
  const auto idx = NeighborIndex::build(pts, 0.1);
  CHECK(idx.query(Vec3::Zero()).size() == 3);  // closed ball includes the point itself
  const auto counts = neighbor_counts(idx, pts);
  CHECK(counts[0] == 2);
  CHECK_THROWS_AS(NeighborIndex::build(pts, 0.0), InputError);
  pts[1].y() = INFINITY;
  CHECK_THROWS_AS(NeighborIndex::build(pts, 0.1), InputError);
  CHECK(NeighborIndex::build({}, 0.1).query(Vec3::Zero()).empty());
}

TEST_CASE("negative coordinates hash into distinct cells") {
  std::vector<Vec3> pts{Vec3(-0.01, -0.01, -0.01), Vec3(0.01, 0.01, 0.01)};
  const auto idx = NeighborIndex::build(pts, 0.05);
  CHECK(idx.query(Vec3(-0.03, -0.03, -0.03)).size() == 1);
  CHECK(idx.cell_coord(-0.01) == -1);
}

TEST_CASE("tank sampling") {
  const SimConfig c = default_config();
  const std::size_t fluid[] = {768, 904, 384, 800};
  const std::size_t bnd[] = {632, 880, 510, 760};
  for (int id = 0; id < 4; ++id) {
    CAPTURE(id);
    auto tank = make_tank(id, c.spacing());
    const auto sites = tank->fluid_sites();
    const auto b = tank->boundary_particles();
    CHECK(sites.size() == fluid[id]);
    CHECK(b.size() == bnd[id]);
    CHECK_NOTHROW(b.validate());
    for (const auto& p : sites) {
      CHECK(tank->admits(p));
      CHECK(tank->penetration(p) == doctest::Approx(0.0));
    }
    // Sorted bottom-up.
    for (std::size_t i = 1; i < sites.size(); ++i) CHECK(sites[i - 1].y() <= sites[i].y() + 1e-12);
    // No fluid site closer than one spacing to a boundary particle minus rounding.
    const auto idx = NeighborIndex::build(b.positions, 0.99 * c.spacing());
    std::size_t close = 0;
    for (const auto& p : sites) close += idx.query(p).size();
    CHECK(close == 0);
  }
  CHECK_THROWS_AS(make_tank(9, c.spacing()), InputError);
}

TEST_CASE("projection pulls outside points onto the admissible region") {
  const SimConfig c = default_config();
  for (int id = 0; id < 4; ++id) {
    auto tank = make_tank(id, c.spacing());
    std::mt19937_64 rng(id);
    for (const auto& p : testing::random_cloud(rng, 200, 0.6)) {
      const Vec3 q = tank->project(p);
      CHECK(tank->admits(q));
      CHECK((tank->project(q) - q).norm() < 1e-12);
    }
  }
}
