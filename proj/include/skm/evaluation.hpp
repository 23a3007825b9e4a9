#ifndef SKM_EVALUATION_HPP
#define SKM_EVALUATION_HPP

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "skm/core.hpp"

namespace skm {

struct Neighbor {
  std::uint32_t index = 0;
  float sq_dist = 0.0f;
};

// Exact top-k_gt neighbors per query, ascending by distance, ties broken by
// lower index.
struct GroundTruth {
  std::size_t n_queries = 0;
  std::size_t k_gt = 0;
  std::vector<std::uint32_t> ids;  // n_queries x k_gt
  std::vector<float> sq_dists;     // n_queries x k_gt

  std::span<const std::uint32_t> ids_of(std::size_t q) const { return {ids.data() + q * k_gt, k_gt}; }
  std::span<const float> dists_of(std::size_t q) const { return {sq_dists.data() + q * k_gt, k_gt}; }
};

// Candidates come from GEMM-expanded distances; the best k_gt + margin per
// query are re-ranked with exact double-precision distances.
GroundTruth brute_force_topk(ConstMatrixView x, ConstMatrixView queries, std::size_t k_gt,
                             GemmBackend backend = GemmBackend::kAuto);

// Inverted lists: ids of the vectors assigned to each cluster, ascending.
struct ClusterLists {
  std::vector<std::uint32_t> offsets;  // k + 1
  std::vector<std::uint32_t> ids;

  std::size_t k() const { return offsets.empty() ? 0 : offsets.size() - 1; }
  std::span<const std::uint32_t> list(std::size_t j) const {
    return {ids.data() + offsets[j], offsets[j + 1] - offsets[j]};
  }
  std::vector<std::size_t> counts() const;
};

ClusterLists build_cluster_lists(std::span<const std::uint32_t> assignments, std::size_t k);

struct SearchResult {
  std::vector<Neighbor> neighbors;
  std::size_t vectors_explored = 0;

  std::vector<std::uint32_t> ids() const;
};

std::size_t nprobe_for(double fraction, std::size_t k);

// Ranks centroids by distance to q, then scans the nprobe closest lists.
// Neighbors are ordered like GroundTruth.
SearchResult ivf_probe_search(ConstMatrixView centroids, const ClusterLists& lists, ConstMatrixView x,
                              std::span<const float> q, std::size_t nprobe, std::size_t top_k);

// |first k of result  intersect  first k of gt| / k.
double recall_at_k(std::span<const std::uint32_t> result, std::span<const std::uint32_t> gt, std::size_t k);

// Mean recall@top_k and mean vectors explored over a query set.
struct IndexQuality {
  double recall = 0.0;
  double mean_vectors_explored = 0.0;
};
IndexQuality evaluate_index(ConstMatrixView centroids, const ClusterLists& lists, ConstMatrixView x,
                            ConstMatrixView queries, const GroundTruth& gt, std::size_t nprobe, std::size_t top_k);

struct RecallHistory {
  std::vector<double> values;
  double tolerance = 0.005;
  int patience = 2;
};

// True once the last `patience` steps improved on every earlier value in the
// window by at most `tolerance`. With patience 2 this needs three values.
bool etr_should_stop(const RecallHistory& history);

// Recall that the current centroids and assignments would reach as an IVF index.
double etr_probe(ConstMatrixView centroids, ConstMatrixView train_x, std::span<const std::uint32_t> assignments,
                 ConstMatrixView queries, const GroundTruth& gt, const EtrConfig& cfg);

// Sum of squared distances to the assigned centroid, accumulated in double.
double wcss(ConstMatrixView x, ConstMatrixView centroids, std::span<const std::uint32_t> assignments);

struct BalanceStats {
  double mean = 0.0;
  double std_dev = 0.0;
};
// Mean and population standard deviation of points per cluster.
BalanceStats balance_stats(std::span<const std::size_t> counts);

}  // namespace skm

#endif  // SKM_EVALUATION_HPP
