#include <cmath>
#include <numbers>
#include <random>

#include "doctest.h"
#include "slosh/dataset.hpp"
#include "slosh/errors.hpp"
#include "slosh/pbf.hpp"
#include "slosh/sph.hpp"
#include "slosh/tank.hpp"
#include "support.hpp"

using namespace slosh;

namespace {

NetworkConfig tiny() {
  NetworkConfig c;
  c.widths = {2, 2, 2, 2, 2};
  c.input_width = 2;
  c.fc_width = 2;
  c.fusion_width = 2;
  return c;
}

}  // namespace

TEST_CASE("intermediate state hand values") {
  const std::vector<Vec3> x{Vec3(0.1, 0.2, 0.3)}, v{Vec3::Zero()};
  const auto s = predict_intermediate(x, v, Vec3(0, -9.81, 0), 0.02);
  CHECK(s.v[0].y() == doctest::Approx(-0.1962));
  CHECK((s.x[0] - x[0]).y() == doctest::Approx(-0.003924));
  CHECK(s.x[0].x() == doctest::Approx(0.1));

  const std::vector<Vec3> dx{Vec3(0.001, 0.002, 0.0)};
  const auto c = correct(x, s.x, dx, 0.02);
  CHECK((c.x[0] - (s.x[0] + dx[0])).norm() < 1e-15);
  CHECK((c.v[0] - (c.x[0] - x[0]) / 0.02).norm() < 1e-12);
}

TEST_CASE("untrained network steps ballistically and leaves the boundary fixed") {
  const Network net(tiny());
  auto init = make_initial_state(0, 0.3, default_config());
  ParticleSet s = init.state;
  for (std::size_t i = 0; i < s.size(); ++i)
    if (s.kinds[i] == Kind::Fluid) s.velocities[i] = Vec3(0.1, 0.0, -0.2);
  const ParticleSet before = s;
  const SimConfig c = default_config();
  step(net, s, c);
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (s.kinds[i] == Kind::Boundary) {
      CHECK(s.positions[i] == before.positions[i]);
      continue;
    }
    const Vec3 v = before.velocities[i] + c.dt * c.gravity;
    CHECK((s.positions[i] - (before.positions[i] + c.dt * v)).norm() < 1e-14);
    CHECK((s.velocities[i] - v).norm() < 1e-12);
  }
}

TEST_CASE("rollout records frame 0 after its rotation and later rotations after the step") {
  const Network net(tiny());
  auto init = make_initial_state(0, 0.25, default_config());
  const SimConfig c = default_config();
  const std::vector<ScheduledRotation> sched{{0, 0.3, 0.0}, {2, 0.0, -0.2}};
  const FrameSequence seq = rollout(net, init.state, init.scene, sched, 3, c);
  REQUIRE(seq.size() == 4);
  CHECK_NOTHROW(seq.validate());
  CHECK((seq.transforms[0].orientation - pitch_matrix(0.3)).norm() < 1e-14);
  CHECK((seq.transforms[1].orientation - pitch_matrix(0.3)).norm() < 1e-14);
  CHECK((seq.transforms[2].orientation - roll_matrix(-0.2) * pitch_matrix(0.3)).norm() < 1e-14);

  // Frame 2 = rotate(step(frame 1)).
  ParticleSet s = seq.frames[1];
  Scene sc = init.scene;
  sc.orientation = seq.transforms[1].orientation;
  step(net, s, c);
  rotate_rigid(s, sc, 0.0, -0.2);
  for (std::size_t i = 0; i < s.size(); ++i) CHECK((s.positions[i] - seq.frames[2].positions[i]).norm() < 1e-14);
  CHECK(seq.rotations == sched);
  CHECK_THROWS_AS(rollout(net, init.state, init.scene, {}, 0, c), InputError);
}

TEST_CASE("cubic kernel normalization and gradient") {
  const double H = 0.1;
  const CubicKernel k(H);
  CHECK(k.W(H) == 0.0);
  CHECK(k.W(1.5 * H) == 0.0);
  // Midpoint quadrature of ∫ W dV over the support.
  const int n = 60;
  const double d = 2.0 * H / n;
  double sum = 0.0;
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      for (int l = 0; l < n; ++l) {
        const Vec3 p = Vec3(i + 0.5, j + 0.5, l + 0.5) * d - Vec3::Constant(H);
        sum += k.W(p.norm());
      }
  CHECK(sum * d * d * d == doctest::Approx(1.0).epsilon(1e-3));
  std::mt19937_64 rng(1);
  for (const auto& r : testing::random_cloud(rng, 100, 0.06)) {
    Vec3 num;
    for (int a = 0; a < 3; ++a) {
      Vec3 e = Vec3::Zero();
      e[a] = 1e-7;
      num[a] = (k.W((r + e).norm()) - k.W((r - e).norm())) / 2e-7;
    }
    CHECK((num - k.grad(r)).norm() <= 1e-5 * std::max(1.0, num.norm()));
  }
}

TEST_CASE("lattice density matches an independent sum and sits near rest density") {
  const SimConfig c = default_config();
  const double s = c.spacing(), H = c.sph_support();
  std::vector<Vec3> pts;
  for (int i = -4; i <= 4; ++i)
    for (int j = -4; j <= 4; ++j)
      for (int l = -4; l <= 4; ++l) pts.emplace_back(i * s, j * s, l * s);
  const std::vector<double> m(pts.size(), c.particle_mass());
  const auto rho = density(pts, m, H);
  const std::size_t center = pts.size() / 2;
  REQUIRE(pts[center].norm() == 0.0);
  double ref = 0.0;
  for (const auto& p : pts) {
    const double q = p.norm() / H;
    const double w = q >= 1 ? 0 : q <= 0.5 ? 6 * q * q * q - 6 * q * q + 1 : 2 * std::pow(1 - q, 3);
    ref += c.particle_mass() * 8.0 / (std::numbers::pi * H * H * H) * w;
  }
  CHECK(rho[center] == doctest::Approx(ref).epsilon(1e-12));
  CHECK(rho[center] == doctest::Approx(c.rest_density).epsilon(0.05));
}

TEST_CASE("planar boundary sheet gets volume s^3") {
  const SimConfig c = default_config();
  const double s = c.spacing();
  std::vector<Vec3> sheet;
  for (int i = -6; i <= 6; ++i)
    for (int j = -6; j <= 6; ++j) sheet.emplace_back(i * s, 0.0, j * s);
  const auto vol = boundary_volumes(sheet, c);
  CHECK(vol[sheet.size() / 2] == doctest::Approx(s * s * s).epsilon(1e-12));
  CHECK(vol[0] > s * s * s);  // corners have fewer neighbors
}

TEST_CASE("fluid energy hand value") {
  SimConfig c = default_config();
  ParticleSet s;
  s.push_back(Vec3(0, 0.5, 0), Vec3(2, 0, 0), Kind::Fluid);
  s.push_back(Vec3(0, 9, 0), Vec3(9, 0, 0), Kind::Boundary, Vec3::UnitY());
  const double m = c.particle_mass();
  CHECK(fluid_energy(s, c) == doctest::Approx(m * (0.5 * 4.0 + 9.81 * 0.5)));
}

TEST_CASE("short hydrostatic run stays near rest density inside the tank") {
  const SimConfig c = default_config();
  auto init = make_initial_state(0, 0.5, c);
  ParticleSet s = init.state;
  SphConfig sph;
  for (int f = 0; f < 10; ++f) {
    const auto d = dfsph_step(s, init.scene, c, sph);
    CHECK(d.substeps >= 4);
    CHECK(d.density_error <= sph.density_tolerance + 1e-12);
  }
  CHECK(max_penetration(s, init.scene) <= c.particle_radius);
  CHECK(max_fluid_density(s, c) / c.rest_density - 1.0 < 0.02);
  for (std::size_t i = 0; i < s.size(); ++i)
    if (s.kinds[i] == Kind::Boundary) CHECK(s.positions[i] == init.state.positions[i]);
}

TEST_CASE("sph config validation") {
  SphConfig s;
  s.max_iterations = 0;
  CHECK_THROWS_AS(s.validate(), ConfigError);
  s = {};
  s.density_tolerance = -1;
  CHECK_THROWS_AS(s.validate(), ConfigError);
}
