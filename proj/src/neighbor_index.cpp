#include "slosh/neighbor_index.hpp"

#include <algorithm>
#include <numeric>
#include <string>

#include "slosh/errors.hpp"

namespace slosh {

std::uint64_t NeighborIndex::pack(std::int64_t x, std::int64_t y, std::int64_t z) {
  constexpr std::int64_t kBias = std::int64_t{1} << 20;
  constexpr std::uint64_t kMask = (std::uint64_t{1} << 21) - 1;
  return (static_cast<std::uint64_t>(x + kBias) & kMask) |
         ((static_cast<std::uint64_t>(y + kBias) & kMask) << 21) |
         ((static_cast<std::uint64_t>(z + kBias) & kMask) << 42);
}

NeighborIndex NeighborIndex::build(std::span<const Vec3> positions, double radius) {
  if (!(radius > 0.0) || !std::isfinite(radius)) throw InputError("NeighborIndex: radius must be positive");
  NeighborIndex idx;
  idx.radius_ = radius;
  idx.points_.assign(positions.begin(), positions.end());
  const std::size_t n = positions.size();
  std::vector<std::uint64_t> keys(n);
  for (std::size_t i = 0; i < n; ++i) {
    const Vec3& p = positions[i];
    if (!p.allFinite()) throw InputError("NeighborIndex: non-finite position at " + std::to_string(i));
    keys[i] = pack(idx.cell_coord(p.x()), idx.cell_coord(p.y()), idx.cell_coord(p.z()));
  }
  idx.order_.resize(n);
  std::iota(idx.order_.begin(), idx.order_.end(), 0u);
  std::stable_sort(idx.order_.begin(), idx.order_.end(),
                   [&](std::uint32_t a, std::uint32_t b) { return keys[a] < keys[b]; });
  idx.cells_.reserve(n);
  for (std::uint32_t k = 0; k < n;) {
    const std::uint64_t key = keys[idx.order_[k]];
    std::uint32_t e = k;
    while (e < n && keys[idx.order_[e]] == key) ++e;
    idx.cells_.emplace(key, std::make_pair(k, e));
    k = e;
  }
  return idx;
}

std::vector<NeighborIndex::Hit> NeighborIndex::query(const Vec3& x) const {
  std::vector<Hit> out;
  for_each(x, [&](std::size_t id, const Vec3& off, double) { out.push_back({id, off}); });
  return out;
}

std::vector<int> neighbor_counts(const NeighborIndex& index, std::span<const Vec3> positions) {
  std::vector<int> counts(positions.size(), 0);
  for (std::size_t i = 0; i < positions.size(); ++i) {
    int c = 0;
    bool self = false;
    index.for_each(positions[i], [&](std::size_t, const Vec3&, double d2) {
      if (d2 == 0.0 && !self) {
        self = true;
        return;
      }
      ++c;
    });
    counts[i] = c;
  }
  return counts;
}

std::vector<NeighborIndex::Hit> brute_force_query(std::span<const Vec3> points, const Vec3& x,
                                                  double radius) {
  std::vector<NeighborIndex::Hit> out;
  for (std::size_t i = 0; i < points.size(); ++i) {
    const Vec3 off = points[i] - x;
    if (off.squaredNorm() <= radius * radius) out.push_back({i, off});
  }
  return out;
}

}  // namespace slosh
