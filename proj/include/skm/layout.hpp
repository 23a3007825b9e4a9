#ifndef SKM_LAYOUT_HPP
#define SKM_LAYOUT_HPP

#include <cstddef>
#include <span>
#include <vector>

#include "skm/core.hpp"

namespace skm {

// Centroids of one Y-batch split at d'. The front d' dimensions stay
// row-major for the partial GEMM. The remaining d'' = d - d' dimensions are
// stored in blocks of 64 dimensions (the last block may be narrower); inside
// a block, values are dimension-major: element (t, j) of block b lives at
// tail_block(b)[t * k_batch + j].
class PdxCentroidBank {
 public:
  static constexpr std::size_t kBlockDims = 64;
  static constexpr std::size_t kMaxBatch = 1024;

  PdxCentroidBank() = default;

  // Copies rows [first, first + count) of `centroids` into PDX form.
  static PdxCentroidBank pdxify(ConstMatrixView centroids, std::size_t first, std::size_t count,
                                std::size_t d_prime);

  std::size_t k_batch() const { return k_batch_; }
  std::size_t dim() const { return dim_; }
  std::size_t d_prime() const { return d_prime_; }
  std::size_t first_centroid() const { return first_; }
  std::size_t tail_dims() const { return dim_ - d_prime_; }
  std::size_t num_blocks() const { return (tail_dims() + kBlockDims - 1) / kBlockDims; }
  std::size_t block_dims(std::size_t b) const;
  // First dimension (absolute) covered by block b.
  std::size_t block_start(std::size_t b) const { return d_prime_ + b * kBlockDims; }

  ConstMatrixView front() const { return {front_.data(), k_batch_, d_prime_}; }
  std::span<const float> tail_block(std::size_t b) const;

  // Writes centroid j of this bank back in row-major order.
  void reconstruct(std::size_t j, std::span<float> out) const;

  std::size_t stored_values() const { return front_.size() + tail_.size(); }

 private:
  FloatBuffer front_;
  FloatBuffer tail_;
  std::size_t k_batch_ = 0;
  std::size_t dim_ = 0;
  std::size_t d_prime_ = 0;
  std::size_t first_ = 0;
};

// All centroids PDXified in consecutive banks of at most y_batch centroids.
std::vector<PdxCentroidBank> pdxify_all(ConstMatrixView centroids, std::size_t y_batch, std::size_t d_prime);

}  // namespace skm

#endif  // SKM_LAYOUT_HPP
