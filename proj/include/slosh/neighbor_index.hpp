#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <unordered_map>
#include <vector>

#include "slosh/core_types.hpp"

namespace slosh {

/// Fixed-radius neighbor search on a uniform hash grid with cell size R.
///
/// Queries return every indexed point in the closed ball ‖x_i − x‖ ≤ R,
/// including a point located exactly at the query position. The index keeps
/// a copy of the source positions and is immutable after build, so
/// concurrent queries are safe.
class NeighborIndex {
 public:
  struct Hit {
    std::size_t id;
    Vec3 offset;  // x_i − x
  };

  NeighborIndex() = default;

  /// Throws InputError for R <= 0 or a non-finite position.
  static NeighborIndex build(std::span<const Vec3> positions, double radius);

  std::vector<Hit> query(const Vec3& x) const;

  /// Calls f(id, offset, squared_distance) for each point in the ball, in
  /// ascending cell-key order then insertion order.
  template <class F>
  void for_each(const Vec3& x, F&& f) const {
    if (points_.empty()) return;
    const double r2 = radius_ * radius_;
    const std::int64_t cx = cell_coord(x.x()), cy = cell_coord(x.y()), cz = cell_coord(x.z());
    for (std::int64_t dx = -1; dx <= 1; ++dx)
      for (std::int64_t dy = -1; dy <= 1; ++dy)
        for (std::int64_t dz = -1; dz <= 1; ++dz) {
          const auto it = cells_.find(pack(cx + dx, cy + dy, cz + dz));
          if (it == cells_.end()) continue;
          for (std::uint32_t k = it->second.first; k < it->second.second; ++k) {
            const std::uint32_t id = order_[k];
            const Vec3 off = points_[id] - x;
            const double d2 = off.squaredNorm();
            if (d2 <= r2) f(static_cast<std::size_t>(id), off, d2);
          }
        }
  }

  double radius() const { return radius_; }
  std::size_t size() const { return points_.size(); }
  const std::vector<Vec3>& points() const { return points_; }

  /// floor(coordinate / cell size).
  std::int64_t cell_coord(double v) const { return static_cast<std::int64_t>(std::floor(v / radius_)); }
  static std::uint64_t pack(std::int64_t x, std::int64_t y, std::int64_t z);

 private:
  double radius_ = 0.0;
  std::vector<Vec3> points_;
  std::vector<std::uint32_t> order_;  // point ids sorted by cell key
  std::unordered_map<std::uint64_t, std::pair<std::uint32_t, std::uint32_t>> cells_;
};

/// c_i = |N(x_i, R)| − 1 for each query position (the query itself is not counted
/// when it coincides with an indexed point).
std::vector<int> neighbor_counts(const NeighborIndex& index, std::span<const Vec3> positions);

/// O(n·m) reference scan used by tests and as a fallback for tiny inputs.
std::vector<NeighborIndex::Hit> brute_force_query(std::span<const Vec3> points, const Vec3& x,
                                                  double radius);

}  // namespace slosh
