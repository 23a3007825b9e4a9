#ifndef SKM_CORE_HPP
#define SKM_CORE_HPP

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "skm/memory.hpp"

namespace skm {

enum class ErrorCode {
  kNonFiniteValue,
  kDimensionMismatch,
  kEmptySample,
  kKTooLarge,
  kInvalidConfig,
  kMalformedHeader,
  kInconsistentDim,
  kTruncatedFile,
  kVersionMismatch,
  kChecksumMismatch,
  kIoError,
};

const char* to_string(ErrorCode code);

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what, std::int64_t row = -1, std::int64_t col = -1)
      : std::runtime_error(what), code_(code), row_(row), col_(col) {}

  ErrorCode code() const { return code_; }
  std::int64_t row() const { return row_; }
  std::int64_t col() const { return col_; }

 private:
  ErrorCode code_;
  std::int64_t row_;
  std::int64_t col_;
};

// Non-owning view over a row-major float matrix. `stride` is the distance in
// floats between consecutive rows, so a view may cover a column prefix.
struct ConstMatrixView {
  const float* data = nullptr;
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::size_t stride = 0;

  ConstMatrixView() = default;
  ConstMatrixView(const float* d, std::size_t r, std::size_t c) : data(d), rows(r), cols(c), stride(c) {}
  ConstMatrixView(const float* d, std::size_t r, std::size_t c, std::size_t s)
      : data(d), rows(r), cols(c), stride(s) {}

  std::span<const float> row(std::size_t i) const { return {data + i * stride, cols}; }
  ConstMatrixView row_range(std::size_t first, std::size_t count) const {
    return {data + first * stride, count, cols, stride};
  }
  ConstMatrixView first_cols(std::size_t n) const { return {data, rows, n, stride}; }
};

// Dense row-major set of n_rows vectors of dimension dim.
class VectorSet {
 public:
  VectorSet() = default;
  VectorSet(std::size_t n_rows, std::size_t dim) : data_(n_rows * dim, 0.0f), n_rows_(n_rows), dim_(dim) {}
  // Takes ownership of `data`; throws DimensionMismatch if the length is not n_rows * dim.
  VectorSet(std::size_t n_rows, std::size_t dim, FloatBuffer data);
  static VectorSet from_values(std::size_t n_rows, std::size_t dim, std::span<const float> values);

  std::size_t n_rows() const { return n_rows_; }
  std::size_t dim() const { return dim_; }
  bool empty() const { return n_rows_ == 0; }

  float* data() { return data_.data(); }
  const float* data() const { return data_.data(); }
  std::span<float> values() { return data_; }
  std::span<const float> values() const { return data_; }

  std::span<float> row(std::size_t i) { return {data_.data() + i * dim_, dim_}; }
  std::span<const float> row(std::size_t i) const { return {data_.data() + i * dim_, dim_}; }

  ConstMatrixView view() const { return {data_.data(), n_rows_, dim_}; }

  bool operator==(const VectorSet& other) const {
    return n_rows_ == other.n_rows_ && dim_ == other.dim_ && data_ == other.data_;
  }

 private:
  FloatBuffer data_;
  std::size_t n_rows_ = 0;
  std::size_t dim_ = 0;
};

// Checks shape consistency (dims > 0, length = rows * dim) and that every value is finite.
const VectorSet& validate_vector_set(const VectorSet& raw);
VectorSet validate_vector_set(std::size_t n_rows, std::size_t dim, std::span<const float> values);

// Orthogonal d x d matrix. Applying it maps x to R x.
struct RotationMatrix {
  FloatBuffer data;
  std::size_t dim = 0;
  std::uint64_t seed = 0;

  ConstMatrixView view() const { return {data.data(), dim, dim}; }
};

struct NormCache {
  FloatBuffer full_sq_norms;
  FloatBuffer partial_sq_norms;
  std::size_t d_prime = 0;
};

struct AssignmentState {
  TrackedVector<std::uint32_t> assignment;
  FloatBuffer best_sq_dist;

  AssignmentState() = default;
  explicit AssignmentState(std::size_t n) : assignment(n, 0), best_sq_dist(n, 0.0f) {}
  std::size_t size() const { return assignment.size(); }
};

struct EtrConfig {
  double tolerance = 0.005;
  int patience_iters = 2;
  std::size_t n_queries = 1000;
  std::size_t top_k = 100;
  double nprobe_fraction = 0.01;
};

enum class GemmBackend { kAuto, kOptimized, kPortable };

const char* to_string(GemmBackend backend);

struct KMeansConfig {
  std::size_t k = 0;
  int max_iters = 25;
  std::size_t x_batch = 4096;
  std::size_t y_batch = 1024;
  double d_prime_init_fraction = 0.125;
  std::size_t delta_d = 64;
  double epsilon0 = 2.1;
  double prune_target_low = 0.95;
  double prune_target_high = 0.97;
  double d_prime_adjust_factor = 0.20;
  bool adjust_d_prime = true;
  double sampling_fraction = 1.0;
  std::optional<EtrConfig> etr;
  std::uint64_t seed = 42;

  // Stop once an iteration leaves every assignment unchanged.
  bool stop_on_convergence = true;
  // Replace the ADSampling bound with +inf below full dimensionality, so every
  // candidate is evaluated exactly. Used to verify the pruning path.
  bool disable_pruning = false;
  bool split_empty = true;
  // Assign the full input set with the final centroids after the loop.
  bool final_assignment = true;
  GemmBackend backend = GemmBackend::kAuto;

  void validate() const;
};

// Bounds of d' for dimensionality d.
struct DPrimeBounds {
  std::size_t lower;
  std::size_t upper;
};

std::size_t initial_d_prime(std::size_t dim, double fraction);
DPrimeBounds d_prime_bounds(std::size_t dim, std::size_t d_prime_initial);

struct PhaseTimings {
  double gemm_s = 0.0;
  double pruning_s = 0.0;
  double update_s = 0.0;
  double etr_s = 0.0;
};

// Counters of distance work. Units are (vector, centroid, dimension) triples,
// i.e. scalar squared-difference or multiply-add operations.
struct WorkCounters {
  std::uint64_t gemm_work = 0;
  std::uint64_t tail_work = 0;
  std::uint64_t threshold_work = 0;
  std::uint64_t pairs = 0;
  std::uint64_t survivors_after_gemm = 0;
  std::uint64_t full_pairs = 0;

  std::uint64_t total() const { return gemm_work + tail_work + threshold_work; }
  WorkCounters& operator+=(const WorkCounters& o) {
    gemm_work += o.gemm_work;
    tail_work += o.tail_work;
    threshold_work += o.threshold_work;
    pairs += o.pairs;
    survivors_after_gemm += o.survivors_after_gemm;
    full_pairs += o.full_pairs;
    return *this;
  }
};

struct IterationStats {
  int iter_index = 0;
  std::size_t d_prime = 0;
  double prune_rate_after_gemm = 0.0;
  double wcss = 0.0;
  std::size_t n_empty_splits = 0;
  std::size_t n_changed = 0;
  std::optional<double> recall;
  PhaseTimings timings;
  WorkCounters work;
};

}  // namespace skm

#endif  // SKM_CORE_HPP
