#pragma once

#include <memory>
#include <string>
#include <vector>

#include "slosh/core_types.hpp"

namespace slosh {

/// Procedural tank shape in its local frame (tank center at the origin).
///
/// Walls are solid; the wall surface is where fluid may touch. Boundary
/// particles sit half a lattice spacing outside the wall surface and fluid
/// particle centers keep one particle radius of clearance inside it, so
/// fluid and boundary sample one common lattice with points at (k + 1/2)·s.
class TankGeometry {
 public:
  explicit TankGeometry(double spacing) : spacing_(spacing) {}
  virtual ~TankGeometry() = default;

  virtual int id() const = 0;
  virtual std::string name() const = 0;

  /// Nearest point of the region fluid particle centers may occupy.
  virtual Vec3 project(const Vec3& local) const = 0;

  /// Depth by which a point lies inside solid material (0 in the open interior).
  virtual double penetration(const Vec3& local) const = 0;

  /// Box in local coordinates enclosing all admissible fluid centers.
  virtual Aabb interior_box() const = 0;

  double spacing() const { return spacing_; }
  double clearance() const { return 0.5 * spacing_; }
  bool admits(const Vec3& local) const { return (project(local) - local).squaredNorm() < 1e-20; }

  /// Lattice sites available to fluid, sorted bottom-up (y, then x, then z).
  std::vector<Vec3> fluid_sites() const;

  /// Boundary particles (positions and inward unit normals), local frame.
  ParticleSet boundary_particles() const;

 protected:
  virtual std::vector<Vec3> raw_boundary_points() const = 0;

  double spacing_;
};

/// Tank ids used by dataset specs and the CLI:
///   0 closed box, 1 box with an interior rib pierced by a hole,
///   2 horizontal cylinder, 3 L-shaped tank.
std::shared_ptr<const TankGeometry> make_tank(int id, double spacing);

/// Scene with the tank at the origin, plus its boundary particles in world frame.
struct PlacedTank {
  Scene scene;
  ParticleSet boundary;
};
PlacedTank place_tank(int id, const SimConfig& config);

/// Largest penetration over the fluid particles of `state`.
double max_penetration(const ParticleSet& state, const Scene& scene);

}  // namespace slosh
