#ifndef SKM_TEST_SUPPORT_HPP
#define SKM_TEST_SUPPORT_HPP

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <random>
#include <string>

#include "skm/core.hpp"

namespace skm::test {

inline VectorSet gaussian(std::size_t n, std::size_t d, std::uint64_t seed, float scale = 1.0f) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<float> g(0.0f, scale);
  VectorSet x(n, d);
  for (auto& v : x.values()) v = g(rng);
  return x;
}

// Small integer coordinates: every product and partial sum is exactly
// representable in float, so distances do not depend on evaluation order.
inline VectorSet integer_grid(std::size_t n, std::size_t d, int range, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<int> u(-range, range);
  VectorSet x(n, d);
  for (auto& v : x.values()) v = static_cast<float>(u(rng));
  return x;
}

inline RotationMatrix identity_rotation(std::size_t d) {
  RotationMatrix r;
  r.dim = d;
  r.data.assign(d * d, 0.0f);
  for (std::size_t i = 0; i < d; ++i) r.data[i * d + i] = 1.0f;
  return r;
}

inline double rel_err(double got, double want) {
  return std::abs(got - want) / std::max(std::abs(want), 1e-30);
}

inline std::filesystem::path scratch_dir(const std::string& name) {
  auto p = std::filesystem::temp_directory_path() / ("skm_test_" + name);
  std::filesystem::create_directories(p);
  return p;
}

}  // namespace skm::test

#endif  // SKM_TEST_SUPPORT_HPP
