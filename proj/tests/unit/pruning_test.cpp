#include <gtest/gtest.h>

#include <cmath>
#include <limits>
#include <random>
#include <vector>

#include "reference.hpp"
#include "skm/distance.hpp"
#include "skm/preprocess.hpp"
#include "skm/pruning.hpp"
#include "skm/synth.hpp"
#include "support.hpp"

namespace skm {
namespace {

TEST(Threshold, ExactAtFullDimensionality) {
  EXPECT_EQ(adsampling_threshold(1024, 3.5, 1024, 2.1), 3.5);
  EXPECT_EQ(adsampling_threshold(77, 0.0, 1024, 2.1), 0.0);
}

TEST(Threshold, QuarterDimensions) {
  const double want = 0.25 * std::pow(1.0 + 2.1 / std::sqrt(256.0), 2.0);
  EXPECT_NEAR(adsampling_threshold(256, 1.0, 1024, 2.1), want, 1e-12);
  EXPECT_NEAR(want, 0.3199, 1e-4);
}

TEST(Threshold, MonotoneInTauAndM) {
  for (std::size_t d : {64u, 300u, 1536u}) {
    double prev_m = 0.0;
    for (std::size_t m = 1; m < d; ++m) {
      const double t = adsampling_threshold(m, 2.0, d, 2.1);
      if (m > 1) {
        EXPECT_GE(t + 1e-12, prev_m) << "m=" << m << " d=" << d;
      }
      prev_m = t;
      double prev_tau = -1.0;
      for (double tau : {0.0, 0.1, 1.0, 10.0}) {
        const double v = adsampling_threshold(m, tau, d, 2.1);
        EXPECT_GE(v, prev_tau);
        prev_tau = v;
      }
    }
  }
}

TEST(Schedule, CheckpointsFollowBlocks) {
  const ThresholdSchedule s(300, 37, 2.1, false);
  ASSERT_EQ(s.checkpoints(), 6u);  // d' then five tail blocks
  EXPECT_FLOAT_EQ(s.threshold(0, 1.0f), static_cast<float>(adsampling_threshold(37, 1.0, 300, 2.1)));
  EXPECT_FLOAT_EQ(s.threshold(2, 1.0f), static_cast<float>(adsampling_threshold(165, 1.0, 300, 2.1)));
  EXPECT_EQ(s.threshold(5, 4.0f), 4.0f);
}

TEST(Schedule, DisabledIsInfiniteUntilTheEnd) {
  const ThresholdSchedule s(256, 32, 2.1, true);
  for (std::size_t c = 0; c + 1 < s.checkpoints(); ++c) {
    EXPECT_EQ(s.threshold(c, 0.0f), std::numeric_limits<float>::infinity());
  }
  EXPECT_EQ(s.threshold(s.checkpoints() - 1, 2.0f), 2.0f);
}

TEST(InitialThreshold, ZeroAndScalarOracle) {
  const VectorSet a = test::gaussian(2, 200, 1);
  EXPECT_EQ(initial_threshold(a.row(0), a.row(0)), 0.0f);
  EXPECT_LE(test::rel_err(initial_threshold(a.row(0), a.row(1)), ref::sq_l2(a.row(0), a.row(1))), 1e-4);
}

// Assigns every row of x against all centroids bank by bank, starting tau
// from `start` (one centroid per row).
struct ScanResult {
  std::vector<std::uint32_t> assignment;
  std::vector<float> dist;
  std::vector<PruneOutcome> outcomes;
  bool tau_increased = false;
};

ScanResult scan(const VectorSet& x, const VectorSet& c, std::size_t d_prime, std::size_t y_batch, bool disabled,
                const std::vector<std::uint32_t>& start) {
  const auto banks = pdxify_all(c.view(), y_batch, d_prime);
  const ThresholdSchedule sched(x.dim(), d_prime, 2.1, disabled);
  const auto xn = compute_norms(x, d_prime);
  const auto cn = compute_norms(c, d_prime);
  ScanResult r;
  r.assignment = start;
  r.dist.resize(x.n_rows());
  for (std::size_t i = 0; i < x.n_rows(); ++i) r.dist[i] = initial_threshold(x.row(i), c.row(start[i]));
  PruneScratch scratch;
  for (const auto& bank : banks) {
    std::vector<float> inner(x.n_rows() * bank.k_batch());
    matmul(x.view().first_cols(d_prime), bank.front(), d_prime, inner);
    const auto blk = expand_to_sq_l2(inner, x.n_rows(), bank.k_batch(), xn.partial_sq_norms,
                                     std::span<const float>(cn.partial_sq_norms).subspan(bank.first_centroid(),
                                                                                         bank.k_batch()),
                                     d_prime);
    for (std::size_t i = 0; i < x.n_rows(); ++i) {
      const float before = r.dist[i];
      r.outcomes.push_back(prune_and_assign(x.row(i), blk.row(i), bank, sched, r.assignment[i], r.dist[i], scratch));
      if (r.dist[i] > before) r.tau_increased = true;
    }
  }
  return r;
}

TEST(PruneAndAssign, SingleCentroidEqualToX) {
  const VectorSet x = test::gaussian(1, 128, 3);
  const auto r = scan(x, x, 16, 1024, false, {0});
  EXPECT_EQ(r.assignment[0], 0u);
  EXPECT_EQ(r.dist[0], 0.0f);
  EXPECT_EQ(r.outcomes[0].survivors_after_gemm, 1u);
}

TEST(PruneAndAssign, DisabledPruningIsExhaustiveArgmin) {
  for (std::size_t d : {64u, 200u, 512u}) {
    const VectorSet x = test::integer_grid(300, d, 3, d);
    const VectorSet c = test::integer_grid(150, d, 3, d + 1);
    std::vector<std::uint32_t> start(300);
    std::mt19937 rng(4);
    for (auto& s : start) s = rng() % 150;
    // y_batch 64 forces several banks.
    const auto r = scan(x, c, initial_d_prime(d, 0.125), 64, true, start);
    EXPECT_EQ(r.assignment, ref::exhaustive_argmin(x.view(), c.view())) << "d=" << d;
  }
}

TEST(PruneAndAssign, TiesGoToLowestIndex) {
  VectorSet c(4, 64);
  for (std::size_t j = 0; j < 4; ++j) std::fill(c.row(j).begin(), c.row(j).end(), j % 2 == 0 ? 1.0f : -1.0f);
  const VectorSet x(1, 64);  // equidistant to every centroid
  for (std::uint32_t start : {0u, 1u, 3u}) {
    const auto r = scan(x, c, 8, 2, true, {start});
    EXPECT_EQ(r.assignment[0], 0u);
  }
}

TEST(PruneAndAssign, BlobsAgreeWithExhaustive) {
  const VectorSet raw = make_blobs({4000, 256, 16, 10.0f, 1.0f, 5});
  const auto rot = generate_rotation(256, 6);
  const VectorSet x = apply_rotation(raw, rot);
  const VectorSet c = init_centroids(x, 16, 7);
  const auto oracle = ref::exhaustive_argmin(x.view(), c.view());
  std::vector<std::uint32_t> start(x.n_rows(), 0);
  const auto r = scan(x, c, 32, 1024, false, start);
  std::size_t agree = 0;
  for (std::size_t i = 0; i < x.n_rows(); ++i) agree += r.assignment[i] == oracle[i];
  EXPECT_GE(static_cast<double>(agree) / x.n_rows(), 0.999);
  EXPECT_FALSE(r.tau_increased);
  for (std::size_t i = 0; i < x.n_rows(); i += 100) {
    EXPECT_LE(test::rel_err(r.dist[i], ref::sq_l2(x.row(i), c.row(r.assignment[i]))), 1e-3);
  }
}

TEST(PruneAndAssign, AgreementAtHigherDimension) {
  const VectorSet raw = make_blobs({3000, 512, 32, 10.0f, 1.0f, 8});
  const VectorSet x = apply_rotation(raw, generate_rotation(512, 9));
  const VectorSet c = init_centroids(x, 200, 10);
  const auto oracle = ref::exhaustive_argmin(x.view(), c.view());
  const auto r = scan(x, c, 64, 1024, false, oracle);  // previous assignment known
  std::size_t agree = 0;
  for (std::size_t i = 0; i < x.n_rows(); ++i) agree += r.assignment[i] == oracle[i];
  EXPECT_GE(static_cast<double>(agree) / x.n_rows(), 0.99);
}

TEST(PruneRate, Extremes) {
  std::vector<PruneOutcome> all(10), one(10);
  for (auto& o : all) o.survivors_after_gemm = 50;
  for (auto& o : one) o.survivors_after_gemm = 1;
  EXPECT_DOUBLE_EQ(measure_prune_rate(all, 50), 0.0);
  EXPECT_NEAR(measure_prune_rate(one, 50), 1.0 - 1.0 / 50, 1e-12);
  EXPECT_DOUBLE_EQ(measure_prune_rate(100, 1000), 0.9);
}

}  // namespace
}  // namespace skm
