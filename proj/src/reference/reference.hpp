#ifndef SKM_REFERENCE_HPP
#define SKM_REFERENCE_HPP

// Serial, straightforward implementations used as oracles by the tests and
// as the baseline in the benchmark. Nothing here is tuned.

#include <cstddef>
#include <cstdint>
#include <random>
#include <span>
#include <vector>

#include "skm/core.hpp"

namespace skm::ref {

double sq_l2(std::span<const float> a, std::span<const float> b);
double sq_norm(std::span<const float> a);

// out[i * b.rows + l] = <a_i, b_l> accumulated in double.
std::vector<double> matmul(ConstMatrixView a, ConstMatrixView b);

// Squared distance matrix from direct differences.
std::vector<double> sq_distances(ConstMatrixView x, ConstMatrixView y);

// Index of the nearest row of `centroids`, lowest index on ties.
std::vector<std::uint32_t> exhaustive_argmin(ConstMatrixView x, ConstMatrixView centroids);

// Per-cluster means; empty clusters are zero.
std::vector<double> cluster_means(ConstMatrixView x, std::span<const std::uint32_t> assignments, std::size_t k);

// Empty-cluster split with the same rule and RNG draws as the main library.
void split_empty(std::vector<double>& centroids, std::size_t d, std::vector<std::size_t>& counts,
                 std::mt19937_64& rng);

struct LloydTrace {
  std::vector<std::vector<std::uint32_t>> assignments;  // per iteration
  std::vector<double> wcss;                              // per iteration, before the update
  std::vector<double> centroids;                         // k x d after the last update
};

// Textbook Lloyd iterations from the given initial centroid indices.
LloydTrace lloyd(ConstMatrixView x, std::span<const std::uint32_t> init_indices, int iters, std::uint64_t split_seed,
                 bool split_empty_clusters = true);

// Exact top-k ids per query sorted by (distance, index).
std::vector<std::uint32_t> topk(ConstMatrixView x, ConstMatrixView queries, std::size_t k);

}  // namespace skm::ref

#endif  // SKM_REFERENCE_HPP
