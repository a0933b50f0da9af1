#include "slosh/core_types.hpp"

#include <cmath>
#include <numbers>
#include <string>

#include "slosh/errors.hpp"

namespace slosh {

void ParticleSet::push_back(const Vec3& x, const Vec3& v, Kind k, const Vec3& n) {
  positions.push_back(x);
  velocities.push_back(v);
  kinds.push_back(k);
  normals.push_back(n);
}

void ParticleSet::append(const ParticleSet& other) {
  positions.insert(positions.end(), other.positions.begin(), other.positions.end());
  velocities.insert(velocities.end(), other.velocities.begin(), other.velocities.end());
  normals.insert(normals.end(), other.normals.begin(), other.normals.end());
  kinds.insert(kinds.end(), other.kinds.begin(), other.kinds.end());
}

std::size_t ParticleSet::count(Kind k) const {
  std::size_t n = 0;
  for (Kind kk : kinds) n += (kk == k);
  return n;
}

std::vector<std::size_t> ParticleSet::indices_of(Kind k) const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < kinds.size(); ++i)
    if (kinds[i] == k) out.push_back(i);
  return out;
}

std::vector<Vec3> ParticleSet::positions_of(Kind k) const {
  std::vector<Vec3> out;
  for (std::size_t i = 0; i < kinds.size(); ++i)
    if (kinds[i] == k) out.push_back(positions[i]);
  return out;
}

std::vector<Vec3> ParticleSet::velocities_of(Kind k) const {
  std::vector<Vec3> out;
  for (std::size_t i = 0; i < kinds.size(); ++i)
    if (kinds[i] == k) out.push_back(velocities[i]);
  return out;
}

ParticleSet ParticleSet::subset(Kind k) const {
  ParticleSet out;
  for (std::size_t i = 0; i < kinds.size(); ++i)
    if (kinds[i] == k) out.push_back(positions[i], velocities[i], kinds[i], normals[i]);
  return out;
}

bool ParticleSet::all_finite() const {
  for (std::size_t i = 0; i < positions.size(); ++i)
    if (!positions[i].allFinite() || !velocities[i].allFinite()) return false;
  return true;
}

void ParticleSet::validate() const {
  const std::size_t n = positions.size();
  if (velocities.size() != n || kinds.size() != n || normals.size() != n)
    throw ConfigError("ParticleSet: field lengths differ");
  for (std::size_t i = 0; i < n; ++i) {
    if (!positions[i].allFinite() || !velocities[i].allFinite())
      throw NumericalError("ParticleSet: non-finite state at particle " + std::to_string(i));
    if (kinds[i] == Kind::Boundary) {
      if (!normals[i].allFinite() || std::abs(normals[i].norm() - 1.0) > 1e-6)
        throw NumericalError("ParticleSet: boundary normal not unit at particle " +
                             std::to_string(i));
    }
  }
}

double SimConfig::particle_mass() const {
  const double s = spacing();
  return rest_density * s * s * s;
}

void SimConfig::validate() const {
  if (!(dt > 0.0)) throw ConfigError("SimConfig: dt must be positive");
  if (!(particle_radius > 0.0)) throw ConfigError("SimConfig: particle_radius must be positive");
  if (!(rest_density > 0.0)) throw ConfigError("SimConfig: rest_density must be positive");
  if (!(conv_radius > 0.0)) throw ConfigError("SimConfig: conv_radius must be positive");
  if (!gravity.allFinite()) throw ConfigError("SimConfig: gravity must be finite");
}

SimConfig default_config() {
  SimConfig c;
  c.particle_radius = 0.025;
  c.conv_radius = 4.5 * c.particle_radius;
  c.dt = 0.02;
  c.rest_density = 782.885;
  c.gravity = Vec3(0.0, -9.81, 0.0);
  return c;
}

bool Aabb::contains(const Vec3& p, double inflate) const {
  return (p.array() >= lo.array() - inflate).all() && (p.array() <= hi.array() + inflate).all();
}

Aabb Aabb::inflated(double margin) const {
  return Aabb{lo.array() - margin, hi.array() + margin};
}

Aabb bounds_of(std::span<const Vec3> pts) {
  if (pts.empty()) return {};
  Aabb b{pts[0], pts[0]};
  for (const Vec3& p : pts) {
    b.lo = b.lo.cwiseMin(p);
    b.hi = b.hi.cwiseMax(p);
  }
  return b;
}

Mat3 pitch_matrix(double pitch) {
  const double c = std::cos(pitch), s = std::sin(pitch);
  Mat3 m;
  m << 1.0, 0.0, 0.0,
       0.0, c, s,
       0.0, -s, c;
  return m;
}

Mat3 roll_matrix(double roll) {
  const double c = std::cos(roll), s = std::sin(roll);
  Mat3 m;
  m << c, -s, 0.0,
       s, c, 0.0,
       0.0, 0.0, 1.0;
  return m;
}

Mat3 rotation_matrix(double pitch, double roll) { return pitch_matrix(pitch) * roll_matrix(roll); }

void rotate_rigid(ParticleSet& state, Scene& scene, double pitch, double roll) {
  constexpr double kLimit = std::numbers::pi / 2.0 + 1e-12;
  if (!std::isfinite(pitch) || !std::isfinite(roll) || std::abs(pitch) > kLimit ||
      std::abs(roll) > kLimit)
    throw InputError("rotate_rigid: pitch and roll must lie in [-pi/2, pi/2]");
  if (pitch == 0.0 && roll == 0.0) return;
  rotate_rigid(state, scene, rotation_matrix(pitch, roll));
}

void rotate_rigid(ParticleSet& state, Scene& scene, const Mat3& rotation) {
  const Vec3 c = scene.center;
  for (std::size_t i = 0; i < state.size(); ++i) {
    state.positions[i] = rotation * (state.positions[i] - c) + c;
    state.velocities[i] = rotation * state.velocities[i];
    if (state.kinds[i] == Kind::Boundary) state.normals[i] = (rotation * state.normals[i]).normalized();
  }
  scene.orientation = rotation * scene.orientation;
  const auto boundary = state.positions_of(Kind::Boundary);
  if (!boundary.empty()) scene.bounds = bounds_of(boundary);
}

}  // namespace slosh
