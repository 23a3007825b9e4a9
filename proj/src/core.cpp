#include "skm/core.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace skm {

const char* to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::kNonFiniteValue: return "NonFiniteValue";
    case ErrorCode::kDimensionMismatch: return "DimensionMismatch";
    case ErrorCode::kEmptySample: return "EmptySample";
    case ErrorCode::kKTooLarge: return "KTooLarge";
    case ErrorCode::kInvalidConfig: return "InvalidConfig";
    case ErrorCode::kMalformedHeader: return "MalformedHeader";
    case ErrorCode::kInconsistentDim: return "InconsistentDim";
    case ErrorCode::kTruncatedFile: return "TruncatedFile";
    case ErrorCode::kVersionMismatch: return "VersionMismatch";
    case ErrorCode::kChecksumMismatch: return "ChecksumMismatch";
    case ErrorCode::kIoError: return "IoError";
  }
  return "Unknown";
}

const char* to_string(GemmBackend backend) {
  switch (backend) {
    case GemmBackend::kAuto: return "auto";
    case GemmBackend::kOptimized: return "optimized";
    case GemmBackend::kPortable: return "portable";
  }
  return "unknown";
}

VectorSet::VectorSet(std::size_t n_rows, std::size_t dim, FloatBuffer data)
    : data_(std::move(data)), n_rows_(n_rows), dim_(dim) {
  if (data_.size() != n_rows * dim) {
    throw Error(ErrorCode::kDimensionMismatch,
                "data length " + std::to_string(data_.size()) + " does not match " + std::to_string(n_rows) +
                    " x " + std::to_string(dim));
  }
}

VectorSet VectorSet::from_values(std::size_t n_rows, std::size_t dim, std::span<const float> values) {
  if (values.size() != n_rows * dim) {
    throw Error(ErrorCode::kDimensionMismatch,
                "data length " + std::to_string(values.size()) + " does not match " + std::to_string(n_rows) +
                    " x " + std::to_string(dim));
  }
  FloatBuffer buf(values.begin(), values.end());
  return VectorSet(n_rows, dim, std::move(buf));
}

namespace {

void check_finite(std::span<const float> values, std::size_t dim) {
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (!std::isfinite(values[i])) {
      const auto row = static_cast<std::int64_t>(i / dim);
      const auto col = static_cast<std::int64_t>(i % dim);
      throw Error(ErrorCode::kNonFiniteValue,
                  "non-finite value at (" + std::to_string(row) + ", " + std::to_string(col) + ")", row, col);
    }
  }
}

}  // namespace

const VectorSet& validate_vector_set(const VectorSet& raw) {
  if (raw.dim() == 0 || raw.values().size() != raw.n_rows() * raw.dim()) {
    throw Error(ErrorCode::kDimensionMismatch, "inconsistent vector set shape");
  }
  check_finite(raw.values(), raw.dim());
  return raw;
}

VectorSet validate_vector_set(std::size_t n_rows, std::size_t dim, std::span<const float> values) {
  if (dim == 0 || values.size() != n_rows * dim) {
    throw Error(ErrorCode::kDimensionMismatch,
                "data length " + std::to_string(values.size()) + " declared as " + std::to_string(n_rows) + " x " +
                    std::to_string(dim));
  }
  check_finite(values, dim);
  return VectorSet::from_values(n_rows, dim, values);
}

void KMeansConfig::validate() const {
  auto fail = [](const std::string& msg) { throw Error(ErrorCode::kInvalidConfig, msg); };
  if (k < 1) fail("k must be >= 1");
  if (max_iters < 1) fail("max_iters must be >= 1");
  if (x_batch < 1) fail("x_batch must be >= 1");
  if (y_batch < 1 || y_batch > 1024) fail("y_batch must be in [1, 1024]");
  if (!(d_prime_init_fraction > 0.0 && d_prime_init_fraction < 1.0)) fail("d_prime_init_fraction must be in (0, 1)");
  if (!(prune_target_low < prune_target_high)) fail("prune_target_low must be < prune_target_high");
  if (!(d_prime_adjust_factor > 0.0 && d_prime_adjust_factor < 1.0)) fail("d_prime_adjust_factor must be in (0, 1)");
  if (!(epsilon0 > 0.0)) fail("epsilon0 must be > 0");
  if (!(sampling_fraction > 0.0 && sampling_fraction <= 1.0)) fail("sampling_fraction must be in (0, 1]");
  if (etr) {
    if (!(etr->tolerance >= 0.0)) fail("etr tolerance must be >= 0");
    if (etr->patience_iters < 1) fail("etr patience must be >= 1");
    if (etr->n_queries < 1 || etr->top_k < 1) fail("etr n_queries and top_k must be >= 1");
    if (!(etr->nprobe_fraction > 0.0 && etr->nprobe_fraction <= 1.0)) fail("etr nprobe_fraction must be in (0, 1]");
  }
}

std::size_t initial_d_prime(std::size_t dim, double fraction) {
  const auto d = static_cast<std::size_t>(std::floor(static_cast<double>(dim) * fraction));
  return std::clamp<std::size_t>(d, 1, std::max<std::size_t>(dim, 1));
}

DPrimeBounds d_prime_bounds(std::size_t dim, std::size_t d_prime_initial) {
  // Normal case [16, d - 64]: leaves at least one full tail block. Small d
  // falls back to keeping the initial cutoff as the floor.
  const std::size_t lower = std::min<std::size_t>(16, d_prime_initial);
  std::size_t upper = dim > 64 + lower ? dim - 64 : std::max(lower, dim / 2);
  upper = std::max(upper, lower);
  return {lower, upper};
}

}  // namespace skm
