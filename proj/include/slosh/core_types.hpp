#pragma once

#include <Eigen/Core>
#include <Eigen/Geometry>

#include <cstdint>
#include <memory>
#include <span>
#include <vector>

namespace slosh {

using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;

enum class Kind : std::uint8_t { Fluid = 0, Boundary = 1 };

/// Positions, velocities and kinds of every particle in one frame.
///
/// Fluid particles come first by convention of everything in this library
/// that constructs a ParticleSet, but consumers must not rely on it; use
/// fluid_indices()/boundary_indices() instead. `normals` has one entry per
/// particle; only boundary entries are meaningful and they are unit length.
struct ParticleSet {
  std::vector<Vec3> positions;
  std::vector<Vec3> velocities;
  std::vector<Vec3> normals;
  std::vector<Kind> kinds;

  std::size_t size() const { return positions.size(); }
  bool empty() const { return positions.empty(); }

  void push_back(const Vec3& x, const Vec3& v, Kind k, const Vec3& n = Vec3::Zero());
  void append(const ParticleSet& other);

  std::size_t count(Kind k) const;
  std::vector<std::size_t> indices_of(Kind k) const;
  std::vector<Vec3> positions_of(Kind k) const;
  std::vector<Vec3> velocities_of(Kind k) const;
  ParticleSet subset(Kind k) const;

  /// Throws NumericalError if a coordinate is non-finite or a boundary
  /// normal is not unit length; throws ConfigError on mismatched lengths.
  void validate() const;
  bool all_finite() const;

  bool operator==(const ParticleSet&) const = default;
};

/// Physical and convolution constants shared by the simulator, network and
/// metrics. `particle_radius` is h; the sampling lattice spacing is 2h.
struct SimConfig {
  double particle_radius = 0.025;
  double conv_radius = 4.5 * 0.025;
  double dt = 0.02;
  double rest_density = 782.885;
  Vec3 gravity{0.0, -9.81, 0.0};

  double spacing() const { return 2.0 * particle_radius; }
  double sph_support() const { return 4.0 * particle_radius; }
  double particle_mass() const;

  void validate() const;
};

SimConfig default_config();

struct Aabb {
  Vec3 lo = Vec3::Constant(0.0);
  Vec3 hi = Vec3::Constant(0.0);

  bool contains(const Vec3& p, double inflate = 0.0) const;
  Aabb inflated(double margin) const;
};

Aabb bounds_of(std::span<const Vec3> pts);

class TankGeometry;

/// Rigid placement of a tank: local tank coordinates map to world as
/// world = orientation * local + center.
struct Scene {
  std::shared_ptr<const TankGeometry> tank;  // null for unbounded scenes
  Mat3 orientation = Mat3::Identity();
  Vec3 center = Vec3::Zero();
  Aabb bounds;

  Vec3 to_local(const Vec3& world) const { return orientation.transpose() * (world - center); }
  Vec3 to_world(const Vec3& local) const { return orientation * local + center; }
};

/// Positive pitch turns +z toward +y (about x); positive roll turns +x toward
/// +y (about z). The composite applies roll first, then pitch.
Mat3 pitch_matrix(double pitch);
Mat3 roll_matrix(double roll);
Mat3 rotation_matrix(double pitch, double roll);

/// Instantaneous rigid rotation of tank and contents about scene.center.
/// Angles must lie in [-pi/2, pi/2]. Gravity is a world quantity and is
/// left alone.
void rotate_rigid(ParticleSet& state, Scene& scene, double pitch, double roll);

/// Same, for an arbitrary rotation matrix (used to undo rotations).
void rotate_rigid(ParticleSet& state, Scene& scene, const Mat3& rotation);

}  // namespace slosh
