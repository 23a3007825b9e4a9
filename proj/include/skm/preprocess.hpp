#ifndef SKM_PREPROCESS_HPP
#define SKM_PREPROCESS_HPP

#include <cstddef>
#include <cstdint>
#include <vector>

#include "skm/core.hpp"

namespace skm {

// Uniformly distributed random orthogonal matrix: QR of a standard Gaussian
// matrix with the signs of R's diagonal folded into Q. Deterministic per seed.
RotationMatrix generate_rotation(std::size_t dim, std::uint64_t seed);

// Row i of the output is R applied to row i of x (one dense multiply).
VectorSet apply_rotation(ConstMatrixView x, const RotationMatrix& rotation, GemmBackend backend = GemmBackend::kAuto);
inline VectorSet apply_rotation(const VectorSet& x, const RotationMatrix& rotation,
                                GemmBackend backend = GemmBackend::kAuto) {
  return apply_rotation(x.view(), rotation, backend);
}
// Inverse map, R^T y per row; returns rotated centroids to the input space.
VectorSet undo_rotation(ConstMatrixView y, const RotationMatrix& rotation, GemmBackend backend = GemmBackend::kAuto);
// Rotates rows into a caller buffer (rows x dim).
void apply_rotation_into(ConstMatrixView x, const RotationMatrix& rotation, std::span<float> out,
                         GemmBackend backend = GemmBackend::kAuto);

std::size_t sample_size(std::size_t n, double fraction);

// Sorted indices of a uniform sample without replacement of ceil(fraction * n) rows.
std::vector<std::uint32_t> sample_indices(std::size_t n, double fraction, std::size_t k, std::uint64_t seed);

// ceil(fraction * N) distinct rows; fraction = 1 returns a copy of X.
// Throws EmptySample when the sample would hold fewer than k rows.
VectorSet sample_training_set(const VectorSet& x, double fraction, std::size_t k, std::uint64_t seed);

// Indices of k distinct rows drawn uniformly without replacement.
std::vector<std::uint32_t> init_centroid_indices(std::size_t n, std::size_t k, std::uint64_t seed);
VectorSet init_centroids(ConstMatrixView x, std::size_t k, std::uint64_t seed);
inline VectorSet init_centroids(const VectorSet& x, std::size_t k, std::uint64_t seed) {
  return init_centroids(x.view(), k, seed);
}

NormCache compute_norms(ConstMatrixView m, std::size_t d_prime);
inline NormCache compute_norms(const VectorSet& m, std::size_t d_prime) { return compute_norms(m.view(), d_prime); }
// Recomputes only the partial norms for a new d'.
void update_partial_norms(ConstMatrixView m, std::size_t d_prime, NormCache& cache);

// Scales every row to unit L2 norm (zero rows are left unchanged).
void l2_normalize_rows(VectorSet& x);

}  // namespace skm

#endif  // SKM_PREPROCESS_HPP
