#ifndef SKM_DISTANCE_HPP
#define SKM_DISTANCE_HPP

#include <cstddef>
#include <span>

#include "skm/core.hpp"
#include "skm/layout.hpp"

namespace skm {

// Resolves kAuto: SKM_GEMM_BACKEND=portable|optimized overrides, otherwise the
// BLAS backend when compiled in.
GemmBackend resolve_backend(GemmBackend requested);
bool optimized_backend_available();

// Caps the OpenMP pool and the BLAS pool at n workers (n >= 1).
void set_worker_threads(int n);

// out[i * ldc + l] = sum_{j < dims} a(i, j) * b(l, j).
// `out` must hold a.rows rows of at least b.rows values; ldc defaults to b.rows.
void matmul(ConstMatrixView a, ConstMatrixView b, std::size_t dims, std::span<float> out,
            GemmBackend backend = GemmBackend::kAuto, std::size_t ldc = 0);

// Squared L2 distances of an x_batch x y_batch tile, computed from inner
// products with the expansion |x|^2 + |y|^2 - 2<x, y>.
struct DistanceBlock {
  float* values = nullptr;
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::size_t d_covered = 0;

  std::span<const float> row(std::size_t i) const { return {values + i * cols, cols}; }
};

// Converts the inner products in `inner` (rows x cols, row-major) into squared
// distances in place. Negative results from cancellation are clamped to 0.
DistanceBlock expand_to_sq_l2(std::span<float> inner, std::size_t rows, std::size_t cols,
                              std::span<const float> x_norms, std::span<const float> y_norms, std::size_t d_covered);

// Squared L2 over the dimensions of tail block `block_idx` between the
// vector's slab (block_dims values) and centroid `centroid_idx` of the bank.
// Accumulates in ascending dimension order.
float tail_block_sq_l2(std::span<const float> x_slab, const PdxCentroidBank& bank, std::size_t centroid_idx,
                       std::size_t block_idx);

// Adds the block's squared differences to acc[s] for each candidate ids[s].
// Per candidate the accumulation order matches tail_block_sq_l2.
void accumulate_tail_block(std::span<const float> x_slab, const PdxCentroidBank& bank, std::size_t block_idx,
                           std::span<const std::uint32_t> ids, std::span<float> acc);

float sq_l2(const float* a, const float* b, std::size_t dims);
float sq_norm(const float* a, std::size_t dims);

}  // namespace skm

#endif  // SKM_DISTANCE_HPP
