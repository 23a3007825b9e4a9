#ifndef SKM_SYNTH_HPP
#define SKM_SYNTH_HPP

#include <cstddef>
#include <cstdint>

#include "skm/core.hpp"

namespace skm {

// Isotropic Gaussian blobs: centers uniform in [-center_box, center_box]^d,
// each point a center plus N(0, stddev^2) noise. Points are assigned to
// centers round-robin, then shuffled.
struct BlobsSpec {
  std::size_t n = 0;
  std::size_t d = 0;
  std::size_t centers = 16;
  float center_box = 10.0f;
  float stddev = 1.0f;
  std::uint64_t seed = 0;
};
VectorSet make_blobs(const BlobsSpec& spec);

// Blobs whose dimension j is scaled so its variance is decay^j of the first
// dimension's; decay is chosen so the last dimension's variance ratio is
// `tail_variance_ratio`.
struct SkewedSpec {
  std::size_t n = 0;
  std::size_t d = 0;
  std::size_t centers = 64;
  double tail_variance_ratio = 1e-3;
  std::uint64_t seed = 0;
};
VectorSet make_skewed(const SkewedSpec& spec);

// Standard normal entries.
VectorSet make_gaussian(std::size_t n, std::size_t d, std::uint64_t seed);

}  // namespace skm

#endif  // SKM_SYNTH_HPP
