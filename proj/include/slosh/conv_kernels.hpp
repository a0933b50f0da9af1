#pragma once

#include <array>
#include <cstdint>
#include <memory>
#include <random>
#include <span>
#include <vector>

#include "slosh/autodiff.hpp"
#include "slosh/core_types.hpp"
#include "slosh/neighbor_index.hpp"

namespace slosh::conv {

inline constexpr int kGridRes = 4;
inline constexpr int kCells = kGridRes * kGridRes * kGridRes;
inline constexpr int kFreeCells = kCells / 2;

/// Flattened cell index, x-major: i*16 + j*4 + k.
constexpr int cell_index(int i, int j, int k) { return (i * kGridRes + j) * kGridRes + k; }
/// Point reflection through the grid center: (i,j,k) -> (3-i,3-j,3-k).
constexpr int mirror_cell(int c) { return kCells - 1 - c; }

/// Odd radial stretch of the unit ball onto [-1,1]^3:
/// Λ(r) = r·‖r‖₂/‖r‖∞, Λ(0) = 0. Rejects ‖r‖ > 1 + 1e-9 and clamps
/// anything in between back onto the sphere.
Vec3 ball_to_cube(const Vec3& r);
/// ∂Λ/∂r (zero at the origin, where Λ is continuous but not differentiable).
Mat3 ball_to_cube_jacobian(const Vec3& r);

/// a(d) = (1 − d²/R²)³ for d < R, else 0.
double window(double d, double radius);

/// Eight-corner trilinear stencil over cell centers at {−.75, −.25, .25, .75}
/// per axis; coordinates beyond the outer centers clamp to the outer cells.
struct Stencil {
  std::array<std::uint8_t, 8> cell{};
  std::array<double, 8> weight{};
  std::array<Vec3, 8> dweight{};  // ∂weight/∂u
};
Stencil trilinear_stencil(const Vec3& u);

/// Learnable filter of shape [4,4,4, C_in, C_out], stored as a
/// C_in × (64·C_out) matrix with column = cell·C_out + out_channel.
struct KernelGrid {
  int in = 0;
  int out = 0;
  Matrix values;

  KernelGrid() = default;
  KernelGrid(int in_ch, int out_ch);
  /// The C_in × C_out filter matrix of one cell.
  Matrix cell(int c) const { return values.middleCols(c * out, out); }
};

/// Filter with g(−u) = −g(u): the 32 cells with i ∈ {0,1} are free and the
/// rest are their negated point reflections.
struct AntisymKernelGrid {
  int in = 0;
  int out = 0;
  Matrix free_values;  // C_in × (32·C_out)

  AntisymKernelGrid() = default;
  AntisymKernelGrid(int in_ch, int out_ch);
  KernelGrid materialize() const;
};

/// Expands free antisymmetric parameters (C_in × 32·C_out) into a full grid.
Matrix materialize_antisym(const Matrix& free_values, int out_channels);

/// Trilinear interpolation of the grid at u ∈ [−1,1]³ → C_in × C_out.
Matrix interp(const KernelGrid& kernel, const Vec3& u);

/// Eq. 1 evaluated at each query: Σ_i a(‖x_i−x‖) f_iᵀ g(Λ((x_i−x)/R)).
/// `features` is (#sources × C_in); result is (#queries × C_out).
Matrix cconv(const Matrix& features, std::span<const Vec3> sources, std::span<const Vec3> queries,
             const KernelGrid& kernel, double radius);

/// Antisymmetric convolution where queries are the sources themselves:
/// out(x) = Σ_i a(·)(f(x) + f_i)ᵀ g_s(Λ((x_i−x)/R)).
Matrix ascc(const Matrix& features, std::span<const Vec3> positions, const AntisymKernelGrid& kernel,
            double radius);

/// Precomputed neighborhoods between a query set and a source set for one
/// radius: CSR by query, with window-weighted trilinear stencils per edge.
struct ConvGeometry {
  double radius = 0.0;
  std::size_t num_queries = 0;
  std::size_t num_sources = 0;
  std::vector<std::uint32_t> row_begin;  // num_queries + 1
  std::vector<std::uint32_t> source;
  std::vector<Vec3> unit_offset;  // (x_src − x_query) / R
  std::vector<std::array<std::uint8_t, 8>> cells;
  std::vector<std::array<double, 8>> weights;  // a · trilinear weight
  std::vector<std::array<Vec3, 8>> dweights;   // ∂(a·w_k)/∂r; empty unless requested

  std::size_t num_edges() const { return source.size(); }
};

/// `derivatives` precomputes the per-edge offset derivatives used when
/// gradients flow to positions.
std::shared_ptr<const ConvGeometry> build_geometry(std::span<const Vec3> queries,
                                                   std::span<const Vec3> sources, double radius,
                                                   bool derivatives = false);

/// Matrix overload: positions are rows of an (n × 3) matrix.
std::shared_ptr<const ConvGeometry> build_geometry(const Matrix& queries, const Matrix& sources,
                                                   double radius, bool derivatives = false);

/// Tape version of cconv. Gradients flow to features, kernel and, when
/// supplied, to query/source positions through the window, Λ and the
/// stencil. `kernel` is C_in × (64·C_out).
Var cconv(Var features, Var kernel, const std::shared_ptr<const ConvGeometry>& geometry,
          Var query_positions = {}, Var source_positions = {});

/// Tape version of ascc over a self geometry (queries == sources).
/// `kernel` is a materialized full grid (see ad_materialize_antisym).
Var ascc(Var features, Var kernel, const std::shared_ptr<const ConvGeometry>& geometry,
         Var positions = {});

/// Tape op expanding free antisymmetric parameters into a full grid; the
/// backward pass folds mirrored gradients back onto the free half.
Var materialize_antisym(Var free_values, int out_channels);

/// Glorot-uniform initialization over the [4,4,4,C_in,C_out] tensor.
void init_glorot(Matrix& values, int fan_in, int fan_out, std::mt19937_64& rng);

}  // namespace slosh::conv
