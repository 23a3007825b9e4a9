#ifndef SKM_HIERARCHICAL_HPP
#define SKM_HIERARCHICAL_HPP

#include <cstddef>
#include <vector>

#include "skm/kmeans.hpp"

namespace skm {

struct HierarchicalConfig {
  std::size_t k_total = 0;
  std::size_t meso_k = 0;  // 0 selects ceil(sqrt(k_total))
  int meso_iters = 3;
  int fine_iters = 5;
  // Batch sizes, pruning, sampling, seed and backend; `k` and `max_iters`
  // are overridden per phase and ETR only applies to the meso phase.
  KMeansConfig base;

  std::size_t effective_meso_k() const;
  void validate() const;
};

struct KReconciliation {
  std::size_t requested = 0;
  std::size_t achieved = 0;
};

// Achieved k is whatever the fine phase produced; nothing is merged or split
// to reach the requested value.
KReconciliation reconcile_k(std::size_t fine_centroid_count, std::size_t k_total);

// Fine cluster count for a meso-cluster of n points: round(sqrt(n)), at least 1.
std::size_t fine_k_for(std::size_t n);

struct HierarchicalResult {
  KMeansResult fit;  // centroids are the union of all fine centroids
  KReconciliation k;
  std::size_t meso_k = 0;
  std::vector<std::size_t> meso_sizes;
  std::vector<std::size_t> fine_ks;
  WorkCounters meso_work;
  WorkCounters fine_work;
  double meso_seconds = 0.0;
  double fine_seconds = 0.0;
};

// Meso phase over the whole training set, then an independent fine fit
// inside every meso-cluster. The rotation is computed once and shared.
HierarchicalResult hierarchical_fit(const VectorSet& x, const HierarchicalConfig& cfg, const FitOptions& opts = {});

}  // namespace skm

#endif  // SKM_HIERARCHICAL_HPP
