#include "slosh/tank.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <map>
#include <numbers>
#include <tuple>

#include "slosh/errors.hpp"

namespace slosh {
namespace {

constexpr double kEps = 1e-9;

using LatticeKey = std::tuple<long, long, long>;

LatticeKey key_of(const Vec3& p, double s) {
  // Quantize at a quarter spacing so lattice points and ring points both key uniquely.
  const double q = 0.25 * s;
  return {std::lround(p.x() / q), std::lround(p.y() / q), std::lround(p.z() / q)};
}

bool strictly_inside(const Aabb& b, const Vec3& p) {
  return (p.array() > b.lo.array() + kEps).all() && (p.array() < b.hi.array() - kEps).all();
}

double outside_distance(const Aabb& b, const Vec3& p) {
  const Vec3 d = (b.lo - p).cwiseMax(p - b.hi).cwiseMax(Vec3::Zero());
  return d.norm();
}

Vec3 clamp_to(const Aabb& b, const Vec3& p) { return p.cwiseMax(b.lo).cwiseMin(b.hi); }

/// Lattice points (k + 1/2)·s lying on the surface of the box `wall`
/// inflated by s/2. Wall extents must be multiples of s.
std::vector<Vec3> shell_points(const Aabb& wall, double s) {
  const Aabb shell = wall.inflated(0.5 * s);
  std::array<long, 3> n{};
  for (int k = 0; k < 3; ++k) n[k] = std::lround((shell.hi[k] - shell.lo[k]) / s) + 1;
  std::vector<Vec3> out;
  for (long i = 0; i < n[0]; ++i)
    for (long j = 0; j < n[1]; ++j)
      for (long k = 0; k < n[2]; ++k) {
        const bool surface = i == 0 || j == 0 || k == 0 || i == n[0] - 1 || j == n[1] - 1 ||
                             k == n[2] - 1;
        if (!surface) continue;
        out.emplace_back(shell.lo.x() + i * s, shell.lo.y() + j * s, shell.lo.z() + k * s);
      }
  return out;
}

std::vector<Vec3> dedupe(const std::vector<Vec3>& pts, double s) {
  std::map<LatticeKey, Vec3> seen;
  for (const Vec3& p : pts) seen.emplace(key_of(p, s), p);
  std::vector<Vec3> out;
  out.reserve(seen.size());
  for (const auto& [k, p] : seen) out.push_back(p);
  return out;
}

/// Union of axis-aligned boxes; covers the plain box and the L-shaped tank.
class BoxUnionTank final : public TankGeometry {
 public:
  BoxUnionTank(int id, std::string name, double s, std::vector<Aabb> walls, std::vector<Aabb> allowed)
      : TankGeometry(s), id_(id), name_(std::move(name)), walls_(std::move(walls)),
        allowed_(std::move(allowed)) {}

  int id() const override { return id_; }
  std::string name() const override { return name_; }

  Vec3 project(const Vec3& p) const override {
    for (const Aabb& a : allowed_)
      if (a.contains(p)) return p;
    Vec3 best = clamp_to(allowed_.front(), p);
    for (const Aabb& a : allowed_) {
      const Vec3 c = clamp_to(a, p);
      if ((c - p).squaredNorm() < (best - p).squaredNorm()) best = c;
    }
    return best;
  }

  double penetration(const Vec3& p) const override {
    double d = std::numeric_limits<double>::infinity();
    for (const Aabb& w : walls_) d = std::min(d, outside_distance(w, p));
    return d;
  }

  Aabb interior_box() const override {
    Aabb b = allowed_.front();
    for (const Aabb& a : allowed_) {
      b.lo = b.lo.cwiseMin(a.lo);
      b.hi = b.hi.cwiseMax(a.hi);
    }
    return b;
  }

 protected:
  std::vector<Vec3> raw_boundary_points() const override {
    std::vector<Vec3> pts;
    for (const Aabb& w : walls_)
      for (const Vec3& p : shell_points(w, spacing_)) {
        const bool interior = std::any_of(walls_.begin(), walls_.end(),
                                          [&](const Aabb& o) { return strictly_inside(o, p); });
        if (!interior) pts.push_back(p);
      }
    return dedupe(pts, spacing_);
  }

 private:
  int id_;
  std::string name_;
  std::vector<Aabb> walls_;
  std::vector<Aabb> allowed_;
};

/// Box split by a plate normal to x. The plate is sampled by two particle
/// sheets at rib_x ± s/2 (solid surface at rib_x ± s) and is pierced by a
/// circular hole around (hole_y, hole_z).
class RibTank final : public TankGeometry {
 public:
  RibTank(double s, const Vec3& half, double rib_x, double hole_y, double hole_z, double hole_r)
      : TankGeometry(s), half_(half), rib_x_(rib_x), hole_y_(hole_y), hole_z_(hole_z),
        hole_r_(hole_r) {}

  int id() const override { return 1; }
  std::string name() const override { return "rib_box"; }

  Vec3 project(const Vec3& p) const override {
    Vec3 q = clamp_to(allowed_box(), p);
    const double plate_gap = spacing_ + clearance();
    const double dx = q.x() - rib_x_;
    if (std::abs(dx) >= plate_gap) return q;
    const double dy = q.y() - hole_y_, dz = q.z() - hole_z_;
    const double rho = std::hypot(dy, dz);
    const double free_r = hole_r_ - clearance();
    if (free_r > 0.0 && rho <= free_r) return q;

    Vec3 side = q;
    side.x() = rib_x_ + (dx >= 0.0 ? plate_gap : -plate_gap);
    if (free_r <= 0.0) return side;
    Vec3 through = q;
    if (rho > 0.0) {
      through.y() = hole_y_ + dy * (free_r / rho);
      through.z() = hole_z_ + dz * (free_r / rho);
    }
    return (through - q).squaredNorm() < (side - q).squaredNorm() ? through : side;
  }

  double penetration(const Vec3& p) const override {
    const Aabb wall{-half_, half_};
    const double out = outside_distance(wall, p);
    if (out > 0.0) return out;
    const double dx = std::abs(p.x() - rib_x_);
    const double rho = std::hypot(p.y() - hole_y_, p.z() - hole_z_);
    if (dx < spacing_ && rho > hole_r_) return std::min(spacing_ - dx, rho - hole_r_);
    return 0.0;
  }

  Aabb interior_box() const override { return allowed_box(); }

 protected:
  std::vector<Vec3> raw_boundary_points() const override {
    const double s = spacing_;
    std::vector<Vec3> pts = shell_points(Aabb{-half_, half_}, s);
    for (double x : {rib_x_ - 0.5 * s, rib_x_ + 0.5 * s}) {
      for (double y = -half_.y() + 0.5 * s; y < half_.y(); y += s)
        for (double z = -half_.z() + 0.5 * s; z < half_.z(); z += s)
          if (std::hypot(y - hole_y_, z - hole_z_) >= hole_r_) pts.emplace_back(x, y, z);
    }
    return dedupe(pts, s);
  }

 private:
  Aabb allowed_box() const {
    const Vec3 c = Vec3::Constant(clearance());
    return Aabb{-half_ + c, half_ - c};
  }

  Vec3 half_;
  double rib_x_, hole_y_, hole_z_, hole_r_;
};

/// Horizontal cylinder with its axis along x and flat end caps.
class CylinderTank final : public TankGeometry {
 public:
  CylinderTank(double s, double radius, double half_length)
      : TankGeometry(s), radius_(radius), half_length_(half_length) {}

  int id() const override { return 2; }
  std::string name() const override { return "cylinder"; }

  Vec3 project(const Vec3& p) const override {
    const double c = clearance();
    Vec3 q = p;
    q.x() = std::clamp(p.x(), -half_length_ + c, half_length_ - c);
    const double rho = std::hypot(p.y(), p.z());
    const double rmax = radius_ - c;
    if (rho > rmax) {
      q.y() = p.y() * (rmax / rho);
      q.z() = p.z() * (rmax / rho);
    }
    return q;
  }

  double penetration(const Vec3& p) const override {
    const double dx = std::max(std::abs(p.x()) - half_length_, 0.0);
    const double dr = std::max(std::hypot(p.y(), p.z()) - radius_, 0.0);
    return std::hypot(dx, dr);
  }

  Aabb interior_box() const override {
    const double c = clearance();
    return Aabb{Vec3(-half_length_ + c, -(radius_ - c), -(radius_ - c)),
                Vec3(half_length_ - c, radius_ - c, radius_ - c)};
  }

 protected:
  std::vector<Vec3> raw_boundary_points() const override {
    const double s = spacing_;
    const double ring_r = radius_ + 0.5 * s;
    const long m = static_cast<long>(std::ceil(2.0 * std::numbers::pi * ring_r / s));
    std::vector<Vec3> pts;
    for (double x = -half_length_ - 0.5 * s; x <= half_length_ + 0.5 * s + kEps; x += s)
      for (long j = 0; j < m; ++j) {
        const double th = 2.0 * std::numbers::pi * static_cast<double>(j) / static_cast<double>(m);
        pts.emplace_back(x, ring_r * std::cos(th), ring_r * std::sin(th));
      }
    for (double x : {-half_length_ - 0.5 * s, half_length_ + 0.5 * s})
      for (double y = -radius_ + 0.5 * s; y < radius_; y += s)
        for (double z = -radius_ + 0.5 * s; z < radius_; z += s)
          if (std::hypot(y, z) <= radius_) pts.emplace_back(x, y, z);
    return pts;
  }

 private:
  double radius_, half_length_;
};

}  // namespace

std::vector<Vec3> TankGeometry::fluid_sites() const {
  const double s = spacing_;
  const Aabb box = interior_box();
  std::vector<Vec3> sites;
  auto first = [&](double lo) { return (std::ceil(lo / s - 0.5 - kEps) + 0.5) * s; };
  for (double y = first(box.lo.y()); y <= box.hi.y() + kEps; y += s)
    for (double x = first(box.lo.x()); x <= box.hi.x() + kEps; x += s)
      for (double z = first(box.lo.z()); z <= box.hi.z() + kEps; z += s) {
        const Vec3 p(x, y, z);
        if ((project(p) - p).norm() < 1e-9) sites.push_back(p);
      }
  return sites;
}

ParticleSet TankGeometry::boundary_particles() const {
  ParticleSet out;
  for (const Vec3& p : raw_boundary_points()) {
    const Vec3 d = project(p) - p;
    if (d.norm() < 1e-12) throw ConfigError("tank '" + name() + "': boundary point inside fluid region");
    out.push_back(p, Vec3::Zero(), Kind::Boundary, d.normalized());
  }
  return out;
}

std::shared_ptr<const TankGeometry> make_tank(int id, double s) {
  // Dimensions are in lattice units so walls stay lattice-aligned at any spacing.
  const double c = 0.5 * s;
  switch (id) {
    case 0: {
      const Vec3 half(6 * s, 4 * s, 4 * s);
      const Aabb wall{-half, half};
      return std::make_shared<BoxUnionTank>(0, "box", s, std::vector<Aabb>{wall},
                                            std::vector<Aabb>{wall.inflated(-c)});
    }
    case 1:
      return std::make_shared<RibTank>(s, Vec3(8 * s, 4 * s, 4 * s), 0.0, -1 * s, 0.0, 2 * s);
    case 2:
      return std::make_shared<CylinderTank>(s, 4 * s, 6 * s);
    case 3: {
      const Aabb low{Vec3(-8 * s, -4 * s, -4 * s), Vec3(8 * s, 0.0, 4 * s)};
      const Aabb tower{Vec3(-8 * s, 0.0, -4 * s), Vec3(-2 * s, 6 * s, 4 * s)};
      // Allowed regions extend through the shared face so fluid passes freely.
      Aabb low_ok = low.inflated(-c);
      Aabb tower_ok = tower.inflated(-c);
      tower_ok.lo.y() = low_ok.lo.y();
      return std::make_shared<BoxUnionTank>(3, "l_shape", s, std::vector<Aabb>{low, tower},
                                            std::vector<Aabb>{low_ok, tower_ok});
    }
    default:
      throw InputError("unknown tank id " + std::to_string(id));
  }
}

PlacedTank place_tank(int id, const SimConfig& config) {
  PlacedTank out;
  out.scene.tank = make_tank(id, config.spacing());
  out.boundary = out.scene.tank->boundary_particles();
  out.scene.bounds = bounds_of(out.boundary.positions);
  return out;
}

double max_penetration(const ParticleSet& state, const Scene& scene) {
  if (!scene.tank) return 0.0;
  double worst = 0.0;
  for (std::size_t i = 0; i < state.size(); ++i)
    if (state.kinds[i] == Kind::Fluid)
      worst = std::max(worst, scene.tank->penetration(scene.to_local(state.positions[i])));
  return worst;
}

}  // namespace slosh
