#include "skm/distance.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <cstring>
#include <string>

#include <omp.h>

#ifdef SKM_HAVE_CBLAS
#include <cblas.h>
#endif

namespace skm {

bool optimized_backend_available() {
#ifdef SKM_HAVE_CBLAS
  return true;
#else
  return false;
#endif
}

void set_worker_threads(int n) {
  if (n < 1) throw Error(ErrorCode::kInvalidConfig, "thread count must be >= 1");
  omp_set_num_threads(n);
#ifdef SKM_HAVE_CBLAS
  openblas_set_num_threads(n);
#endif
}

GemmBackend resolve_backend(GemmBackend requested) {
  if (requested == GemmBackend::kAuto) {
    static const GemmBackend from_env = [] {
      const char* env = std::getenv("SKM_GEMM_BACKEND");
      if (env != nullptr && std::string(env) == "portable") return GemmBackend::kPortable;
      return GemmBackend::kOptimized;
    }();
    requested = from_env;
  }
  if (requested == GemmBackend::kOptimized && !optimized_backend_available()) return GemmBackend::kPortable;
  return requested;
}

namespace {

inline float dot(const float* a, const float* b, std::size_t n) {
  float s = 0.0f;
#pragma omp simd reduction(+ : s)
  for (std::size_t j = 0; j < n; ++j) s += a[j] * b[j];
  return s;
}

// Cache-blocked fallback: a tile of B rows stays hot while a tile of A rows is
// swept across it. Output cells are independent, so the result does not
// depend on the worker count.
void portable_matmul(ConstMatrixView a, ConstMatrixView b, std::size_t dims, float* out, std::size_t ldc) {
  constexpr std::size_t kRowTile = 8;
  constexpr std::size_t kColTile = 64;
  const std::size_t m = a.rows;
  const std::size_t n = b.rows;
  const auto n_row_tiles = static_cast<std::ptrdiff_t>((m + kRowTile - 1) / kRowTile);
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t rt = 0; rt < n_row_tiles; ++rt) {
    const std::size_t i0 = static_cast<std::size_t>(rt) * kRowTile;
    const std::size_t i1 = std::min(m, i0 + kRowTile);
    for (std::size_t l0 = 0; l0 < n; l0 += kColTile) {
      const std::size_t l1 = std::min(n, l0 + kColTile);
      for (std::size_t i = i0; i < i1; ++i) {
        const float* ai = a.data + i * a.stride;
        float* oi = out + i * ldc;
        for (std::size_t l = l0; l < l1; ++l) {
          oi[l] = dot(ai, b.data + l * b.stride, dims);
        }
      }
    }
  }
}

}  // namespace

void matmul(ConstMatrixView a, ConstMatrixView b, std::size_t dims, std::span<float> out, GemmBackend backend,
            std::size_t ldc) {
  if (dims > a.cols || dims > b.cols) {
    throw Error(ErrorCode::kDimensionMismatch, "matmul dims exceed operand width");
  }
  if (ldc == 0) ldc = b.rows;
  if (a.rows == 0 || b.rows == 0) return;
  if (out.size() < (a.rows - 1) * ldc + b.rows) {
    throw Error(ErrorCode::kDimensionMismatch, "matmul output buffer too small");
  }
  if (dims == 0) {
    for (std::size_t i = 0; i < a.rows; ++i) std::fill_n(out.data() + i * ldc, b.rows, 0.0f);
    return;
  }
  backend = resolve_backend(backend);
#ifdef SKM_HAVE_CBLAS
  if (backend == GemmBackend::kOptimized) {
    cblas_sgemm(CblasRowMajor, CblasNoTrans, CblasTrans, static_cast<int>(a.rows), static_cast<int>(b.rows),
                static_cast<int>(dims), 1.0f, a.data, static_cast<int>(a.stride), b.data,
                static_cast<int>(b.stride), 0.0f, out.data(), static_cast<int>(ldc));
    return;
  }
#endif
  portable_matmul(a, b, dims, out.data(), ldc);
}

DistanceBlock expand_to_sq_l2(std::span<float> inner, std::size_t rows, std::size_t cols,
                              std::span<const float> x_norms, std::span<const float> y_norms, std::size_t d_covered) {
  if (inner.size() < rows * cols || x_norms.size() < rows || y_norms.size() < cols) {
    throw Error(ErrorCode::kDimensionMismatch, "expand_to_sq_l2 shape mismatch");
  }
  float* values = inner.data();
  const float* yn = y_norms.data();
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(rows); ++i) {
    float* row = values + static_cast<std::size_t>(i) * cols;
    const float xn = x_norms[static_cast<std::size_t>(i)];
#pragma omp simd
    for (std::size_t l = 0; l < cols; ++l) {
      row[l] = std::max(0.0f, xn + yn[l] - 2.0f * row[l]);
    }
  }
  return {values, rows, cols, d_covered};
}

float tail_block_sq_l2(std::span<const float> x_slab, const PdxCentroidBank& bank, std::size_t centroid_idx,
                       std::size_t block_idx) {
  const auto block = bank.tail_block(block_idx);
  const std::size_t kb = bank.k_batch();
  const std::size_t width = bank.block_dims(block_idx);
  float acc = 0.0f;
  for (std::size_t t = 0; t < width; ++t) {
    const float diff = x_slab[t] - block[t * kb + centroid_idx];
    acc = std::fma(diff, diff, acc);
  }
  return acc;
}

void accumulate_tail_block(std::span<const float> x_slab, const PdxCentroidBank& bank, std::size_t block_idx,
                           std::span<const std::uint32_t> ids, std::span<float> acc) {
  const auto block = bank.tail_block(block_idx);
  const std::size_t kb = bank.k_batch();
  const std::size_t width = bank.block_dims(block_idx);
  const std::size_t n = ids.size();
  float* a = acc.data();
  const std::uint32_t* id = ids.data();
  if (n == kb) {
    // Every centroid still alive: contiguous rows of the block.
    for (std::size_t t = 0; t < width; ++t) {
      const float xv = x_slab[t];
      const float* col = block.data() + t * kb;
#pragma omp simd
      for (std::size_t s = 0; s < n; ++s) {
        const float diff = xv - col[s];
        a[s] = std::fma(diff, diff, a[s]);
      }
    }
    return;
  }
  for (std::size_t t = 0; t < width; ++t) {
    const float xv = x_slab[t];
    const float* col = block.data() + t * kb;
#pragma omp simd
    for (std::size_t s = 0; s < n; ++s) {
      const float diff = xv - col[id[s]];
      a[s] = std::fma(diff, diff, a[s]);
    }
  }
}

float sq_l2(const float* a, const float* b, std::size_t dims) {
  float s = 0.0f;
#pragma omp simd reduction(+ : s)
  for (std::size_t j = 0; j < dims; ++j) {
    const float diff = a[j] - b[j];
    s += diff * diff;
  }
  return s;
}

float sq_norm(const float* a, std::size_t dims) { return dot(a, a, dims); }

}  // namespace skm
