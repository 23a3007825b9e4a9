#include "skm/preprocess.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "skm/distance.hpp"

namespace skm {

RotationMatrix generate_rotation(std::size_t dim, std::uint64_t seed) {
  if (dim == 0) throw Error(ErrorCode::kDimensionMismatch, "rotation dimension must be >= 1");
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  const auto n = static_cast<Eigen::Index>(dim);
  Eigen::MatrixXd g(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < n; ++j) g(i, j) = gauss(rng);
  }
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(g);
  Eigen::MatrixXd q = qr.householderQ();
  const Eigen::MatrixXd& r = qr.matrixQR();
  for (Eigen::Index j = 0; j < n; ++j) {
    if (r(j, j) < 0.0) q.col(j) = -q.col(j);
  }
  RotationMatrix rot;
  rot.dim = dim;
  rot.seed = seed;
  rot.data.resize(dim * dim);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < n; ++j) {
      rot.data[static_cast<std::size_t>(i) * dim + static_cast<std::size_t>(j)] = static_cast<float>(q(i, j));
    }
  }
  return rot;
}

void apply_rotation_into(ConstMatrixView x, const RotationMatrix& rotation, std::span<float> out,
                         GemmBackend backend) {
  if (x.cols != rotation.dim) {
    throw Error(ErrorCode::kDimensionMismatch, "rotation dimension does not match data");
  }
  // (R x)_l = sum_j R[l][j] x[j]: rows of R act as the second operand.
  matmul(x, rotation.view(), rotation.dim, out, backend);
}

VectorSet apply_rotation(ConstMatrixView x, const RotationMatrix& rotation, GemmBackend backend) {
  if (x.cols != rotation.dim) {
    throw Error(ErrorCode::kDimensionMismatch, "rotation dimension does not match data");
  }
  VectorSet out(x.rows, x.cols);
  apply_rotation_into(x, rotation, out.values(), backend);
  return out;
}

VectorSet undo_rotation(ConstMatrixView y, const RotationMatrix& rotation, GemmBackend backend) {
  if (y.cols != rotation.dim) {
    throw Error(ErrorCode::kDimensionMismatch, "rotation dimension does not match centroids");
  }
  const std::size_t d = rotation.dim;
  FloatBuffer transposed(d * d);
  for (std::size_t i = 0; i < d; ++i) {
    for (std::size_t j = 0; j < d; ++j) transposed[j * d + i] = rotation.data[i * d + j];
  }
  VectorSet out(y.rows, d);
  matmul(y, ConstMatrixView(transposed.data(), d, d), d, out.values(), backend);
  return out;
}

std::size_t sample_size(std::size_t n, double fraction) {
  if (fraction >= 1.0) return n;
  // Guard against fraction * n landing a hair above an integer.
  const double exact = fraction * static_cast<double>(n);
  return std::min(n, static_cast<std::size_t>(std::ceil(exact - 1e-9 * std::max(1.0, exact))));
}

namespace {

// Partial Fisher-Yates: the first `count` entries become a uniform sample.
std::vector<std::uint32_t> draw_without_replacement(std::size_t n, std::size_t count, std::uint64_t seed) {
  std::vector<std::uint32_t> idx(n);
  std::iota(idx.begin(), idx.end(), 0u);
  std::mt19937_64 rng(seed);
  for (std::size_t i = 0; i < count; ++i) {
    std::uniform_int_distribution<std::size_t> pick(i, n - 1);
    std::swap(idx[i], idx[pick(rng)]);
  }
  idx.resize(count);
  return idx;
}

}  // namespace

std::vector<std::uint32_t> sample_indices(std::size_t n, double fraction, std::size_t k, std::uint64_t seed) {
  if (!(fraction > 0.0 && fraction <= 1.0)) {
    throw Error(ErrorCode::kInvalidConfig, "sampling fraction must be in (0, 1]");
  }
  const std::size_t m = sample_size(n, fraction);
  if (m < k || m == 0) {
    throw Error(ErrorCode::kEmptySample,
                "sample of " + std::to_string(m) + " rows is smaller than k = " + std::to_string(k));
  }
  if (m == n) {
    std::vector<std::uint32_t> all(n);
    std::iota(all.begin(), all.end(), 0u);
    return all;
  }
  auto idx = draw_without_replacement(n, m, seed);
  std::sort(idx.begin(), idx.end());
  return idx;
}

VectorSet sample_training_set(const VectorSet& x, double fraction, std::size_t k, std::uint64_t seed) {
  const auto idx = sample_indices(x.n_rows(), fraction, k, seed);
  if (idx.size() == x.n_rows()) return x;
  VectorSet out(idx.size(), x.dim());
  for (std::size_t i = 0; i < idx.size(); ++i) {
    std::copy_n(x.row(idx[i]).data(), x.dim(), out.row(i).data());
  }
  return out;
}

std::vector<std::uint32_t> init_centroid_indices(std::size_t n, std::size_t k, std::uint64_t seed) {
  if (k == 0 || k > n) {
    throw Error(ErrorCode::kKTooLarge, "k = " + std::to_string(k) + " exceeds " + std::to_string(n) + " rows");
  }
  return draw_without_replacement(n, k, seed);
}

VectorSet init_centroids(ConstMatrixView x, std::size_t k, std::uint64_t seed) {
  const auto idx = init_centroid_indices(x.rows, k, seed);
  VectorSet out(k, x.cols);
  for (std::size_t j = 0; j < k; ++j) {
    std::copy_n(x.row(idx[j]).data(), x.cols, out.row(j).data());
  }
  return out;
}

NormCache compute_norms(ConstMatrixView m, std::size_t d_prime) {
  if (d_prime == 0 || d_prime > m.cols) {
    throw Error(ErrorCode::kDimensionMismatch, "d' must be in [1, dim]");
  }
  NormCache cache;
  cache.full_sq_norms.resize(m.rows);
  cache.partial_sq_norms.resize(m.rows);
  cache.d_prime = d_prime;
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(m.rows); ++i) {
    const float* r = m.data + static_cast<std::size_t>(i) * m.stride;
    const float front = sq_norm(r, d_prime);
    const float back = sq_norm(r + d_prime, m.cols - d_prime);
    cache.partial_sq_norms[static_cast<std::size_t>(i)] = front;
    cache.full_sq_norms[static_cast<std::size_t>(i)] = front + back;
  }
  return cache;
}

void update_partial_norms(ConstMatrixView m, std::size_t d_prime, NormCache& cache) {
  if (d_prime == 0 || d_prime > m.cols) {
    throw Error(ErrorCode::kDimensionMismatch, "d' must be in [1, dim]");
  }
  cache.partial_sq_norms.resize(m.rows);
  cache.d_prime = d_prime;
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(m.rows); ++i) {
    cache.partial_sq_norms[static_cast<std::size_t>(i)] = sq_norm(m.data + static_cast<std::size_t>(i) * m.stride, d_prime);
  }
}

void l2_normalize_rows(VectorSet& x) {
  for (std::size_t i = 0; i < x.n_rows(); ++i) {
    auto r = x.row(i);
    const float n = std::sqrt(sq_norm(r.data(), r.size()));
    if (n > 0.0f) {
      for (float& v : r) v /= n;
    }
  }
}

}  // namespace skm
