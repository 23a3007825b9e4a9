#include "reference.hpp"

#include <algorithm>
#include <limits>
#include <numeric>

namespace skm::ref {

double sq_l2(std::span<const float> a, std::span<const float> b) {
  double s = 0.0;
  for (std::size_t j = 0; j < a.size(); ++j) {
    const double diff = static_cast<double>(a[j]) - static_cast<double>(b[j]);
    s += diff * diff;
  }
  return s;
}

double sq_norm(std::span<const float> a) {
  double s = 0.0;
  for (const float v : a) s += static_cast<double>(v) * v;
  return s;
}

std::vector<double> matmul(ConstMatrixView a, ConstMatrixView b) {
  std::vector<double> out(a.rows * b.rows);
  for (std::size_t i = 0; i < a.rows; ++i) {
    for (std::size_t l = 0; l < b.rows; ++l) {
      double s = 0.0;
      for (std::size_t j = 0; j < a.cols; ++j) s += static_cast<double>(a.row(i)[j]) * b.row(l)[j];
      out[i * b.rows + l] = s;
    }
  }
  return out;
}

std::vector<double> sq_distances(ConstMatrixView x, ConstMatrixView y) {
  std::vector<double> out(x.rows * y.rows);
  for (std::size_t i = 0; i < x.rows; ++i) {
    for (std::size_t l = 0; l < y.rows; ++l) out[i * y.rows + l] = sq_l2(x.row(i), y.row(l));
  }
  return out;
}

std::vector<std::uint32_t> exhaustive_argmin(ConstMatrixView x, ConstMatrixView centroids) {
  std::vector<std::uint32_t> out(x.rows, 0);
  for (std::size_t i = 0; i < x.rows; ++i) {
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < centroids.rows; ++j) {
      const double dist = sq_l2(x.row(i), centroids.row(j));
      if (dist < best) {
        best = dist;
        out[i] = static_cast<std::uint32_t>(j);
      }
    }
  }
  return out;
}

std::vector<double> cluster_means(ConstMatrixView x, std::span<const std::uint32_t> assignments, std::size_t k) {
  const std::size_t d = x.cols;
  std::vector<double> sums(k * d, 0.0);
  std::vector<std::size_t> counts(k, 0);
  for (std::size_t i = 0; i < x.rows; ++i) {
    const std::uint32_t a = assignments[i];
    ++counts[a];
    for (std::size_t j = 0; j < d; ++j) sums[a * d + j] += x.row(i)[j];
  }
  for (std::size_t c = 0; c < k; ++c) {
    if (counts[c] == 0) continue;
    for (std::size_t j = 0; j < d; ++j) sums[c * d + j] /= static_cast<double>(counts[c]);
  }
  return sums;
}

void split_empty(std::vector<double>& centroids, std::size_t d, std::vector<std::size_t>& counts,
                 std::mt19937_64& rng) {
  constexpr double eps = 1.0 / 1024.0;
  for (std::size_t ci = 0; ci < counts.size(); ++ci) {
    if (counts[ci] != 0) continue;
    std::discrete_distribution<std::size_t> pick(counts.begin(), counts.end());
    const std::size_t cj = pick(rng);
    for (std::size_t t = 0; t < d; ++t) {
      const double v = static_cast<float>(centroids[cj * d + t]);
      const double up = static_cast<float>(v * static_cast<float>(1.0 + eps));
      const double down = static_cast<float>(v * static_cast<float>(1.0 - eps));
      centroids[ci * d + t] = t % 2 == 0 ? up : down;
      centroids[cj * d + t] = t % 2 == 0 ? down : up;
    }
    counts[ci] = counts[cj] / 2;
    counts[cj] -= counts[ci];
  }
}

LloydTrace lloyd(ConstMatrixView x, std::span<const std::uint32_t> init_indices, int iters, std::uint64_t split_seed,
                 bool split_empty_clusters) {
  const std::size_t k = init_indices.size();
  const std::size_t d = x.cols;
  std::vector<float> c(k * d);
  for (std::size_t j = 0; j < k; ++j) std::copy_n(x.row(init_indices[j]).data(), d, c.data() + j * d);
  std::mt19937_64 rng(split_seed);
  LloydTrace trace;
  for (int it = 0; it < iters; ++it) {
    const ConstMatrixView cv(c.data(), k, d);
    auto asg = exhaustive_argmin(x, cv);
    double w = 0.0;
    for (std::size_t i = 0; i < x.rows; ++i) w += sq_l2(x.row(i), cv.row(asg[i]));
    trace.wcss.push_back(w);
    auto means = cluster_means(x, asg, k);
    std::vector<std::size_t> counts(k, 0);
    for (const auto a : asg) ++counts[a];
    // Centroids live in single precision between iterations, as in the library.
    for (auto& v : means) v = static_cast<float>(v);
    if (split_empty_clusters) split_empty(means, d, counts, rng);
    for (std::size_t t = 0; t < k * d; ++t) c[t] = static_cast<float>(means[t]);
    trace.assignments.push_back(std::move(asg));
  }
  trace.centroids.assign(c.begin(), c.end());
  return trace;
}

std::vector<std::uint32_t> topk(ConstMatrixView x, ConstMatrixView queries, std::size_t k) {
  k = std::min(k, x.rows);
  std::vector<std::uint32_t> out(queries.rows * k);
  std::vector<std::pair<double, std::uint32_t>> all(x.rows);
  for (std::size_t q = 0; q < queries.rows; ++q) {
    for (std::size_t i = 0; i < x.rows; ++i) all[i] = {sq_l2(queries.row(q), x.row(i)), static_cast<std::uint32_t>(i)};
    std::partial_sort(all.begin(), all.begin() + static_cast<std::ptrdiff_t>(k), all.end());
    for (std::size_t r = 0; r < k; ++r) out[q * k + r] = all[r].second;
  }
  return out;
}

}  // namespace skm::ref
