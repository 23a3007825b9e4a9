#include "skm/layout.hpp"

#include <algorithm>
#include <cassert>

namespace skm {

PdxCentroidBank PdxCentroidBank::pdxify(ConstMatrixView centroids, std::size_t first, std::size_t count,
                                        std::size_t d_prime) {
  if (count > kMaxBatch || first + count > centroids.rows || d_prime > centroids.cols) {
    throw Error(ErrorCode::kDimensionMismatch, "invalid PDX bank geometry");
  }
  PdxCentroidBank bank;
  bank.k_batch_ = count;
  bank.dim_ = centroids.cols;
  bank.d_prime_ = d_prime;
  bank.first_ = first;
  const std::size_t tail = bank.dim_ - d_prime;
  bank.front_.resize(count * d_prime);
  bank.tail_.resize(count * tail);
  for (std::size_t j = 0; j < count; ++j) {
    const auto src = centroids.row(first + j);
    std::copy_n(src.data(), d_prime, bank.front_.data() + j * d_prime);
    // Blocks are contiguous and dimension-major, so tail dimension t of
    // centroid j sits at t * count + j regardless of block boundaries.
    for (std::size_t t = 0; t < tail; ++t) {
      bank.tail_[t * count + j] = src[d_prime + t];
    }
  }
  return bank;
}

std::size_t PdxCentroidBank::block_dims(std::size_t b) const {
  assert(b < num_blocks());
  return std::min(kBlockDims, tail_dims() - b * kBlockDims);
}

std::span<const float> PdxCentroidBank::tail_block(std::size_t b) const {
  const std::size_t offset = b * kBlockDims * k_batch_;
  return {tail_.data() + offset, block_dims(b) * k_batch_};
}

void PdxCentroidBank::reconstruct(std::size_t j, std::span<float> out) const {
  assert(out.size() == dim_);
  std::copy_n(front_.data() + j * d_prime_, d_prime_, out.data());
  for (std::size_t t = 0; t < tail_dims(); ++t) {
    out[d_prime_ + t] = tail_[t * k_batch_ + j];
  }
}

std::vector<PdxCentroidBank> pdxify_all(ConstMatrixView centroids, std::size_t y_batch, std::size_t d_prime) {
  std::vector<PdxCentroidBank> banks;
  y_batch = std::min(y_batch, PdxCentroidBank::kMaxBatch);
  for (std::size_t first = 0; first < centroids.rows; first += y_batch) {
    banks.push_back(PdxCentroidBank::pdxify(centroids, first, std::min(y_batch, centroids.rows - first), d_prime));
  }
  return banks;
}

}  // namespace skm
