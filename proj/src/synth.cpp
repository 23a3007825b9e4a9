#include "skm/synth.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <vector>

namespace skm {

namespace {

void check_shape(std::size_t n, std::size_t d, std::size_t centers) {
  if (n == 0 || d == 0) throw Error(ErrorCode::kInvalidConfig, "synthetic data needs n > 0 and d > 0");
  if (centers == 0) throw Error(ErrorCode::kInvalidConfig, "synthetic data needs at least one center");
}

VectorSet blobs_with_scale(std::size_t n, std::size_t d, std::size_t centers, float box, float stddev,
                           const std::vector<float>& scale, std::uint64_t seed) {
  check_shape(n, d, centers);
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<float> uni(-box, box);
  std::normal_distribution<float> noise(0.0f, stddev);
  std::vector<float> c(centers * d);
  for (auto& v : c) v = uni(rng);
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::shuffle(order.begin(), order.end(), rng);
  VectorSet x(n, d);
  for (std::size_t i = 0; i < n; ++i) {
    const float* center = c.data() + (i % centers) * d;
    auto row = x.row(order[i]);
    for (std::size_t j = 0; j < d; ++j) row[j] = (center[j] + noise(rng)) * scale[j];
  }
  return x;
}

}  // namespace

VectorSet make_blobs(const BlobsSpec& spec) {
  return blobs_with_scale(spec.n, spec.d, spec.centers, spec.center_box, spec.stddev,
                          std::vector<float>(spec.d, 1.0f), spec.seed);
}

VectorSet make_skewed(const SkewedSpec& spec) {
  if (!(spec.tail_variance_ratio > 0.0 && spec.tail_variance_ratio <= 1.0)) {
    throw Error(ErrorCode::kInvalidConfig, "tail_variance_ratio must lie in (0, 1]");
  }
  std::vector<float> scale(spec.d, 1.0f);
  if (spec.d > 1) {
    const double log_decay = std::log(spec.tail_variance_ratio) / static_cast<double>(spec.d - 1);
    for (std::size_t j = 0; j < spec.d; ++j) scale[j] = static_cast<float>(std::exp(0.5 * log_decay * j));
  }
  return blobs_with_scale(spec.n, spec.d, spec.centers, 10.0f, 1.0f, scale, spec.seed);
}

VectorSet make_gaussian(std::size_t n, std::size_t d, std::uint64_t seed) {
  check_shape(n, d, 1);
  std::mt19937_64 rng(seed);
  std::normal_distribution<float> g(0.0f, 1.0f);
  VectorSet x(n, d);
  for (auto& v : x.values()) v = g(rng);
  return x;
}

}  // namespace skm
