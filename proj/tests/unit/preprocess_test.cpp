#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <set>
#include <vector>

#include "reference.hpp"
#include "skm/preprocess.hpp"
#include "support.hpp"

namespace skm {
namespace {

double max_orthogonality_error(const RotationMatrix& r) {
  const std::size_t d = r.dim;
  double worst = 0.0;
  for (std::size_t i = 0; i < d; ++i) {
    for (std::size_t j = 0; j < d; ++j) {
      double s = 0.0;
      for (std::size_t t = 0; t < d; ++t) s += static_cast<double>(r.data[t * d + i]) * r.data[t * d + j];
      worst = std::max(worst, std::abs(s - (i == j ? 1.0 : 0.0)));
    }
  }
  return worst;
}

// Determinant by Gaussian elimination with partial pivoting.
double determinant(const RotationMatrix& r) {
  const std::size_t d = r.dim;
  std::vector<double> a(r.data.begin(), r.data.end());
  double det = 1.0;
  for (std::size_t c = 0; c < d; ++c) {
    std::size_t p = c;
    for (std::size_t i = c + 1; i < d; ++i) {
      if (std::abs(a[i * d + c]) > std::abs(a[p * d + c])) p = i;
    }
    if (p != c) {
      for (std::size_t t = 0; t < d; ++t) std::swap(a[c * d + t], a[p * d + t]);
      det = -det;
    }
    det *= a[c * d + c];
    for (std::size_t i = c + 1; i < d; ++i) {
      const double f = a[i * d + c] / a[c * d + c];
      for (std::size_t t = c; t < d; ++t) a[i * d + t] -= f * a[c * d + t];
    }
  }
  return det;
}

TEST(Rotation, OneDimensionalIsPlusMinusOne) {
  for (std::uint64_t seed : {0ull, 1ull, 99ull}) {
    const auto r = generate_rotation(1, seed);
    ASSERT_EQ(r.data.size(), 1u);
    EXPECT_EQ(std::abs(r.data[0]), 1.0f);
  }
}

TEST(Rotation, Orthogonal) {
  const auto r4 = generate_rotation(4, 7);
  EXPECT_LE(max_orthogonality_error(r4), 1e-3);
  const auto r200 = generate_rotation(200, 3);
  EXPECT_LE(max_orthogonality_error(r200), 1e-3);
  EXPECT_NEAR(std::abs(determinant(r200)), 1.0, 1e-2);
  EXPECT_EQ(r200.seed, 3u);
}

TEST(Rotation, DeterministicPerSeed) {
  EXPECT_EQ(generate_rotation(64, 5).data, generate_rotation(64, 5).data);
  EXPECT_NE(generate_rotation(64, 5).data, generate_rotation(64, 6).data);
}

TEST(Rotation, PreservesDistances) {
  const auto r = generate_rotation(128, 42);
  const VectorSet x = test::gaussian(200, 128, 1);
  const VectorSet y = apply_rotation(x, r);
  for (std::size_t i = 0; i + 1 < 200; i += 2) {
    const double before = ref::sq_l2(x.row(i), x.row(i + 1));
    const double after = ref::sq_l2(y.row(i), y.row(i + 1));
    EXPECT_LE(test::rel_err(after, before), 1e-4);
  }
}

TEST(Rotation, PairwiseDistanceMatrixPreserved) {
  const auto r = generate_rotation(96, 8);
  const VectorSet x = test::gaussian(40, 96, 2);
  const auto before = ref::sq_distances(x.view(), x.view());
  const auto after = ref::sq_distances(apply_rotation(x, r).view(), apply_rotation(x, r).view());
  for (std::size_t i = 0; i < before.size(); ++i) {
    if (before[i] == 0.0) continue;
    EXPECT_LE(test::rel_err(after[i], before[i]), 1e-4);
  }
}

TEST(Rotation, IdentityAndZeroInputs) {
  const VectorSet x = test::gaussian(10, 16, 3);
  EXPECT_EQ(apply_rotation(x, test::identity_rotation(16)), x);
  const VectorSet zero(5, 16);
  EXPECT_EQ(apply_rotation(zero, generate_rotation(16, 1)), zero);
}

TEST(Rotation, AppliesRTimesX) {
  const auto r = generate_rotation(6, 11);
  const VectorSet x = test::gaussian(1, 6, 4);
  const VectorSet y = apply_rotation(x, r);
  for (std::size_t i = 0; i < 6; ++i) {
    double s = 0.0;
    for (std::size_t j = 0; j < 6; ++j) s += static_cast<double>(r.data[i * 6 + j]) * x.row(0)[j];
    EXPECT_NEAR(y.row(0)[i], s, 1e-5);
  }
}

TEST(Rotation, UndoInvertsApply) {
  const auto r = generate_rotation(48, 12);
  const VectorSet x = test::gaussian(30, 48, 5);
  const VectorSet back = undo_rotation(apply_rotation(x, r).view(), r);
  for (std::size_t i = 0; i < x.values().size(); ++i) EXPECT_NEAR(back.values()[i], x.values()[i], 1e-4);
}

TEST(Rotation, DimensionMismatch) {
  const VectorSet x(3, 5);
  EXPECT_THROW(apply_rotation(x, generate_rotation(4, 1)), Error);
}

TEST(Sampling, FullFractionIsIdentity) {
  const VectorSet x = test::gaussian(100, 8, 6);
  EXPECT_EQ(sample_training_set(x, 1.0, 10, 1), x);
}

TEST(Sampling, QuarterOfThousandHasDistinctRows) {
  const auto idx = sample_indices(1000, 0.25, 10, 3);
  EXPECT_EQ(idx.size(), 250u);
  EXPECT_EQ(std::set<std::uint32_t>(idx.begin(), idx.end()).size(), 250u);
  EXPECT_TRUE(std::is_sorted(idx.begin(), idx.end()));
  EXPECT_EQ(sample_indices(1000, 0.25, 10, 3), idx);
  EXPECT_EQ(sample_size(1001, 0.25), 251u);
}

TEST(Sampling, TooSmallForK) {
  try {
    sample_indices(100, 0.01, 64, 0);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kEmptySample);
  }
}

TEST(Init, KEqualsNIsPermutation) {
  auto idx = init_centroid_indices(50, 50, 2);
  std::sort(idx.begin(), idx.end());
  for (std::uint32_t i = 0; i < 50; ++i) EXPECT_EQ(idx[i], i);
}

TEST(Init, SingleCentroidIsARow) {
  const VectorSet x = test::gaussian(20, 4, 7);
  const VectorSet c = init_centroids(x, 1, 9);
  const auto idx = init_centroid_indices(20, 1, 9);
  ASSERT_EQ(c.n_rows(), 1u);
  EXPECT_TRUE(std::equal(c.row(0).begin(), c.row(0).end(), x.row(idx[0]).begin()));
}

TEST(Init, SeedsProduceDifferentSets) {
  std::set<std::vector<std::uint32_t>> seen;
  for (std::uint64_t s = 0; s < 5; ++s) {
    auto idx = init_centroid_indices(10000, 64, s);
    EXPECT_EQ(std::set<std::uint32_t>(idx.begin(), idx.end()).size(), 64u);
    std::sort(idx.begin(), idx.end());
    seen.insert(idx);
  }
  EXPECT_GE(seen.size(), 2u);
}

TEST(Init, KTooLarge) {
  try {
    init_centroid_indices(10, 11, 0);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kKTooLarge);
  }
}

TEST(Norms, HandComputable) {
  VectorSet m(2, 5);
  m.row(1)[0] = 3.0f;
  m.row(1)[1] = 4.0f;
  const auto n = compute_norms(m, 2);
  EXPECT_EQ(n.full_sq_norms[0], 0.0f);
  EXPECT_EQ(n.partial_sq_norms[0], 0.0f);
  EXPECT_EQ(n.full_sq_norms[1], 25.0f);
  EXPECT_EQ(n.partial_sq_norms[1], 25.0f);
}

TEST(Norms, MatchScalarOracle) {
  const VectorSet m = test::gaussian(100, 256, 8);
  auto n = compute_norms(m, 32);
  for (std::size_t i = 0; i < 100; ++i) {
    EXPECT_LE(test::rel_err(n.full_sq_norms[i], ref::sq_norm(m.row(i))), 1e-5);
    EXPECT_LE(test::rel_err(n.partial_sq_norms[i], ref::sq_norm(m.row(i).first(32))), 1e-5);
    EXPECT_LE(n.partial_sq_norms[i], n.full_sq_norms[i] * (1 + 1e-6));
  }
  update_partial_norms(m.view(), 100, n);
  EXPECT_EQ(n.d_prime, 100u);
  for (std::size_t i = 0; i < 100; ++i) {
    EXPECT_LE(test::rel_err(n.partial_sq_norms[i], ref::sq_norm(m.row(i).first(100))), 1e-5);
  }
}

TEST(Normalize, UnitRowsAndZeroRowsKept) {
  VectorSet x = test::gaussian(10, 12, 9);
  std::fill(x.row(3).begin(), x.row(3).end(), 0.0f);
  l2_normalize_rows(x);
  for (std::size_t i = 0; i < 10; ++i) {
    EXPECT_NEAR(ref::sq_norm(x.row(i)), i == 3 ? 0.0 : 1.0, 1e-5);
  }
}

}  // namespace
}  // namespace skm
