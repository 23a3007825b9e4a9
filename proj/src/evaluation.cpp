#include "skm/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <queue>

#include "skm/distance.hpp"
#include "skm/preprocess.hpp"

namespace skm {

namespace {

struct ByDistThenIndex {
  bool operator()(const Neighbor& a, const Neighbor& b) const {
    return a.sq_dist < b.sq_dist || (a.sq_dist == b.sq_dist && a.index < b.index);
  }
};

// Fixed-capacity max-heap keeping the smallest (dist, index) pairs.
class TopK {
 public:
  explicit TopK(std::size_t cap) : cap_(cap) { heap_.reserve(cap); }

  void push(std::uint32_t index, float dist) {
    const Neighbor n{index, dist};
    if (heap_.size() < cap_) {
      heap_.push_back(n);
      std::push_heap(heap_.begin(), heap_.end(), ByDistThenIndex{});
    } else if (ByDistThenIndex{}(n, heap_.front())) {
      std::pop_heap(heap_.begin(), heap_.end(), ByDistThenIndex{});
      heap_.back() = n;
      std::push_heap(heap_.begin(), heap_.end(), ByDistThenIndex{});
    }
  }
  bool full() const { return heap_.size() == cap_; }
  float worst() const { return heap_.front().sq_dist; }

  std::vector<Neighbor> sorted() && {
    std::sort_heap(heap_.begin(), heap_.end(), ByDistThenIndex{});
    return std::move(heap_);
  }

 private:
  std::size_t cap_;
  std::vector<Neighbor> heap_;
};

double exact_sq_l2(std::span<const float> a, std::span<const float> b) {
  double s = 0.0;
  for (std::size_t j = 0; j < a.size(); ++j) {
    const double diff = static_cast<double>(a[j]) - static_cast<double>(b[j]);
    s += diff * diff;
  }
  return s;
}

// Float candidates are re-scored in double so the final order matches the
// ground truth whenever the true neighbors are within the margin.
constexpr std::size_t kRerankMargin = 32;

std::vector<Neighbor> rerank_exact(std::span<const float> q, ConstMatrixView x, const std::vector<Neighbor>& cands,
                                   std::size_t top_k) {
  std::vector<std::pair<double, std::uint32_t>> exact;
  exact.reserve(cands.size());
  for (const auto& c : cands) exact.emplace_back(exact_sq_l2(q, x.row(c.index)), c.index);
  std::sort(exact.begin(), exact.end());
  std::vector<Neighbor> out;
  const std::size_t n = std::min(top_k, exact.size());
  out.reserve(n);
  for (std::size_t r = 0; r < n; ++r) out.push_back({exact[r].second, static_cast<float>(exact[r].first)});
  return out;
}

}  // namespace

GroundTruth brute_force_topk(ConstMatrixView x, ConstMatrixView queries, std::size_t k_gt, GemmBackend backend) {
  if (x.cols != queries.cols) throw Error(ErrorCode::kDimensionMismatch, "query and data dimensions differ");
  k_gt = std::min(k_gt, x.rows);
  GroundTruth gt;
  gt.n_queries = queries.rows;
  gt.k_gt = k_gt;
  gt.ids.resize(queries.rows * k_gt);
  gt.sq_dists.resize(queries.rows * k_gt);
  if (k_gt == 0 || queries.rows == 0) return gt;

  const std::size_t cap = std::min(x.rows, k_gt + kRerankMargin);
  constexpr std::size_t kQueryBatch = 256;
  constexpr std::size_t kDataBatch = 4096;
  const NormCache xn = compute_norms(x, x.cols);
  const NormCache qn = compute_norms(queries, queries.cols);
  FloatBuffer inner(kQueryBatch * std::min(kDataBatch, x.rows));

  for (std::size_t q0 = 0; q0 < queries.rows; q0 += kQueryBatch) {
    const std::size_t nq = std::min(kQueryBatch, queries.rows - q0);
    std::vector<TopK> heaps(nq, TopK(cap));
    for (std::size_t x0 = 0; x0 < x.rows; x0 += kDataBatch) {
      const std::size_t nx = std::min(kDataBatch, x.rows - x0);
      matmul(queries.row_range(q0, nq), x.row_range(x0, nx), x.cols, inner, backend);
      expand_to_sq_l2(inner, nq, nx, std::span(qn.full_sq_norms).subspan(q0, nq),
                      std::span(xn.full_sq_norms).subspan(x0, nx), x.cols);
#pragma omp parallel for schedule(dynamic, 8)
      for (std::ptrdiff_t qi = 0; qi < static_cast<std::ptrdiff_t>(nq); ++qi) {
        const float* row = inner.data() + static_cast<std::size_t>(qi) * nx;
        auto& heap = heaps[static_cast<std::size_t>(qi)];
        for (std::size_t i = 0; i < nx; ++i) {
          if (!heap.full() || row[i] <= heap.worst()) heap.push(static_cast<std::uint32_t>(x0 + i), row[i]);
        }
      }
    }
#pragma omp parallel for schedule(dynamic, 8)
    for (std::ptrdiff_t qi = 0; qi < static_cast<std::ptrdiff_t>(nq); ++qi) {
      const std::size_t q = q0 + static_cast<std::size_t>(qi);
      const auto cands = std::move(heaps[static_cast<std::size_t>(qi)]).sorted();
      const auto best = rerank_exact(queries.row(q), x, cands, k_gt);
      for (std::size_t r = 0; r < k_gt; ++r) {
        gt.ids[q * k_gt + r] = best[r].index;
        gt.sq_dists[q * k_gt + r] = best[r].sq_dist;
      }
    }
  }
  return gt;
}

std::vector<std::size_t> ClusterLists::counts() const {
  std::vector<std::size_t> c(k());
  for (std::size_t j = 0; j < k(); ++j) c[j] = offsets[j + 1] - offsets[j];
  return c;
}

ClusterLists build_cluster_lists(std::span<const std::uint32_t> assignments, std::size_t k) {
  ClusterLists lists;
  lists.offsets.assign(k + 1, 0);
  for (const auto a : assignments) {
    if (a >= k) throw Error(ErrorCode::kDimensionMismatch, "assignment outside [0, k)");
    ++lists.offsets[a + 1];
  }
  for (std::size_t j = 0; j < k; ++j) lists.offsets[j + 1] += lists.offsets[j];
  lists.ids.resize(assignments.size());
  std::vector<std::uint32_t> cursor(lists.offsets.begin(), lists.offsets.end() - 1);
  for (std::size_t i = 0; i < assignments.size(); ++i) lists.ids[cursor[assignments[i]]++] = static_cast<std::uint32_t>(i);
  return lists;
}

std::vector<std::uint32_t> SearchResult::ids() const {
  std::vector<std::uint32_t> out;
  out.reserve(neighbors.size());
  for (const auto& n : neighbors) out.push_back(n.index);
  return out;
}

std::size_t nprobe_for(double fraction, std::size_t k) {
  const auto n = static_cast<std::size_t>(std::ceil(fraction * static_cast<double>(k) - 1e-9));
  return std::clamp<std::size_t>(n, 1, std::max<std::size_t>(k, 1));
}

SearchResult ivf_probe_search(ConstMatrixView centroids, const ClusterLists& lists, ConstMatrixView x,
                              std::span<const float> q, std::size_t nprobe, std::size_t top_k) {
  const std::size_t k = centroids.rows;
  nprobe = std::min(nprobe, k);
  std::vector<Neighbor> ranked(k);
  for (std::size_t j = 0; j < k; ++j) {
    ranked[j] = {static_cast<std::uint32_t>(j), sq_l2(q.data(), centroids.row(j).data(), q.size())};
  }
  std::partial_sort(ranked.begin(), ranked.begin() + static_cast<std::ptrdiff_t>(nprobe), ranked.end(),
                    ByDistThenIndex{});
  SearchResult res;
  TopK heap(top_k + kRerankMargin);
  for (std::size_t p = 0; p < nprobe; ++p) {
    const auto ids = lists.list(ranked[p].index);
    res.vectors_explored += ids.size();
    for (const auto id : ids) {
      const float dist = sq_l2(q.data(), x.row(id).data(), q.size());
      if (!heap.full() || dist <= heap.worst()) heap.push(id, dist);
    }
  }
  auto cands = std::move(heap).sorted();
  res.neighbors = rerank_exact(q, x, cands, top_k);
  return res;
}

double recall_at_k(std::span<const std::uint32_t> result, std::span<const std::uint32_t> gt, std::size_t k) {
  if (k == 0) return 0.0;
  const std::size_t nr = std::min(k, result.size());
  const std::size_t ng = std::min(k, gt.size());
  std::vector<std::uint32_t> truth(gt.begin(), gt.begin() + static_cast<std::ptrdiff_t>(ng));
  std::sort(truth.begin(), truth.end());
  std::size_t hits = 0;
  for (std::size_t i = 0; i < nr; ++i) {
    if (std::binary_search(truth.begin(), truth.end(), result[i])) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(k);
}

IndexQuality evaluate_index(ConstMatrixView centroids, const ClusterLists& lists, ConstMatrixView x,
                            ConstMatrixView queries, const GroundTruth& gt, std::size_t nprobe, std::size_t top_k) {
  IndexQuality quality;
  if (queries.rows == 0) return quality;
  const std::size_t k_eval = std::min(top_k, gt.k_gt);
  std::vector<double> recalls(queries.rows);
  std::vector<std::size_t> explored(queries.rows);
#pragma omp parallel for schedule(dynamic, 8)
  for (std::ptrdiff_t qi = 0; qi < static_cast<std::ptrdiff_t>(queries.rows); ++qi) {
    const auto q = static_cast<std::size_t>(qi);
    const auto res = ivf_probe_search(centroids, lists, x, queries.row(q), nprobe, top_k);
    recalls[q] = recall_at_k(res.ids(), gt.ids_of(q), k_eval);
    explored[q] = res.vectors_explored;
  }
  // Serial sums keep the result independent of the worker count.
  double recall_sum = 0.0;
  double explored_sum = 0.0;
  for (std::size_t q = 0; q < queries.rows; ++q) {
    recall_sum += recalls[q];
    explored_sum += static_cast<double>(explored[q]);
  }
  quality.recall = recall_sum / static_cast<double>(queries.rows);
  quality.mean_vectors_explored = explored_sum / static_cast<double>(queries.rows);
  return quality;
}

bool etr_should_stop(const RecallHistory& history) {
  const auto p = static_cast<std::size_t>(std::max(1, history.patience));
  const auto& v = history.values;
  if (v.size() < p + 1) return false;
  const std::size_t base = v.size() - (p + 1);
  for (std::size_t i = base + 1; i < v.size(); ++i) {
    for (std::size_t j = base; j < i; ++j) {
      if (v[i] - v[j] > history.tolerance) return false;
    }
  }
  return true;
}

double etr_probe(ConstMatrixView centroids, ConstMatrixView train_x, std::span<const std::uint32_t> assignments,
                 ConstMatrixView queries, const GroundTruth& gt, const EtrConfig& cfg) {
  const auto lists = build_cluster_lists(assignments, centroids.rows);
  const std::size_t nprobe = nprobe_for(cfg.nprobe_fraction, centroids.rows);
  return evaluate_index(centroids, lists, train_x, queries, gt, nprobe, cfg.top_k).recall;
}

double wcss(ConstMatrixView x, ConstMatrixView centroids, std::span<const std::uint32_t> assignments) {
  if (assignments.size() != x.rows || x.cols != centroids.cols) {
    throw Error(ErrorCode::kDimensionMismatch, "wcss shape mismatch");
  }
  std::vector<double> per_row(x.rows);
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(x.rows); ++i) {
    const auto r = static_cast<std::size_t>(i);
    per_row[r] = exact_sq_l2(x.row(r), centroids.row(assignments[r]));
  }
  double total = 0.0;
  for (const double v : per_row) total += v;
  return total;
}

BalanceStats balance_stats(std::span<const std::size_t> counts) {
  BalanceStats s;
  if (counts.empty()) return s;
  double sum = 0.0;
  for (const auto c : counts) sum += static_cast<double>(c);
  s.mean = sum / static_cast<double>(counts.size());
  double var = 0.0;
  for (const auto c : counts) {
    const double dlt = static_cast<double>(c) - s.mean;
    var += dlt * dlt;
  }
  s.std_dev = std::sqrt(var / static_cast<double>(counts.size()));
  return s;
}

}  // namespace skm
