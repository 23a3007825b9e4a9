#include <gtest/gtest.h>

#include <algorithm>
#include <set>
#include <vector>

#include "reference.hpp"
#include "skm/evaluation.hpp"
#include "skm/kmeans.hpp"
#include "skm/preprocess.hpp"
#include "skm/synth.hpp"
#include "support.hpp"

namespace skm {
namespace {

TEST(BruteForce, QueryEqualToRowComesFirst) {
  const VectorSet x = test::gaussian(300, 16, 1);
  const VectorSet q = VectorSet::from_values(1, 16, x.row(123));
  const auto gt = brute_force_topk(x.view(), q.view(), 5);
  EXPECT_EQ(gt.ids_of(0)[0], 123u);
  EXPECT_EQ(gt.dists_of(0)[0], 0.0f);
}

TEST(BruteForce, PointsOnALine) {
  const VectorSet x = VectorSet::from_values(3, 1, std::vector<float>{2, 0, 1});
  const VectorSet q = VectorSet::from_values(1, 1, std::vector<float>{0});
  const auto gt = brute_force_topk(x.view(), q.view(), 3);
  EXPECT_EQ(std::vector<std::uint32_t>(gt.ids.begin(), gt.ids.end()), (std::vector<std::uint32_t>{1, 2, 0}));
}

TEST(BruteForce, MatchesQuadraticScan) {
  const VectorSet x = test::gaussian(1000, 64, 2);
  const VectorSet q = test::gaussian(10, 64, 3);
  const auto gt = brute_force_topk(x.view(), q.view(), 10);
  EXPECT_EQ(gt.ids, ref::topk(x.view(), q.view(), 10));
  for (std::size_t i = 0; i < 10; ++i) {
    const auto d = gt.dists_of(i);
    EXPECT_TRUE(std::is_sorted(d.begin(), d.end()));
    const auto ids = gt.ids_of(i);
    EXPECT_EQ(std::set<std::uint32_t>(ids.begin(), ids.end()).size(), 10u);
  }
}

TEST(BruteForce, TiesByLowerIndex) {
  VectorSet x(6, 2);
  for (std::size_t i = 0; i < 6; ++i) x.row(i)[0] = i % 2 == 0 ? 1.0f : -1.0f;
  const VectorSet q(1, 2);
  const auto gt = brute_force_topk(x.view(), q.view(), 6);
  EXPECT_EQ(std::vector<std::uint32_t>(gt.ids.begin(), gt.ids.end()),
            (std::vector<std::uint32_t>{0, 1, 2, 3, 4, 5}));
}

struct SmallIndex {
  VectorSet x;
  VectorSet centroids;
  ClusterLists lists;
};

SmallIndex small_index(std::size_t k, std::uint64_t seed) {
  SmallIndex s;
  s.x = make_blobs({3000, 32, 10, 10.0f, 1.0f, seed});
  KMeansConfig cfg;
  cfg.k = k;
  cfg.max_iters = 10;
  cfg.seed = seed;
  const auto r = fit(s.x, cfg);
  s.centroids = r.centroids;
  s.lists = build_cluster_lists(r.full_assignments, k);
  return s;
}

TEST(ClusterLists, PartitionTheData) {
  const std::vector<std::uint32_t> asg = {2, 0, 2, 1, 0};
  const auto l = build_cluster_lists(asg, 4);
  EXPECT_EQ(l.counts(), (std::vector<std::size_t>{2, 1, 2, 0}));
  EXPECT_EQ(std::vector<std::uint32_t>(l.list(2).begin(), l.list(2).end()), (std::vector<std::uint32_t>{0, 2}));
}

TEST(ProbeSearch, AllListsEqualsBruteForce) {
  const auto idx = small_index(20, 4);
  const VectorSet q = test::gaussian(20, 32, 5, 6.0f);
  const auto gt = brute_force_topk(idx.x.view(), q.view(), 50);
  for (std::size_t i = 0; i < 20; ++i) {
    const auto res = ivf_probe_search(idx.centroids.view(), idx.lists, idx.x.view(), q.row(i), 20, 50);
    EXPECT_EQ(res.ids(), std::vector<std::uint32_t>(gt.ids_of(i).begin(), gt.ids_of(i).end()));
    EXPECT_EQ(res.vectors_explored, 3000u);
  }
}

TEST(ProbeSearch, SingleProbeAtCentroidStaysInCluster) {
  const auto idx = small_index(20, 6);
  for (std::size_t j = 0; j < 20; j += 5) {
    const auto res = ivf_probe_search(idx.centroids.view(), idx.lists, idx.x.view(), idx.centroids.row(j), 1, 10);
    const auto members = idx.lists.list(j);
    const std::set<std::uint32_t> in(members.begin(), members.end());
    for (const auto id : res.ids()) EXPECT_TRUE(in.count(id)) << id;
    EXPECT_EQ(res.vectors_explored, members.size());
  }
}

TEST(ProbeSearch, MatchesRescanOfProbedClusters) {
  const auto idx = small_index(64, 7);
  const VectorSet q = test::gaussian(30, 32, 8, 6.0f);
  const std::size_t nprobe = nprobe_for(0.01, 64);
  EXPECT_EQ(nprobe, 1u);
  for (std::size_t i = 0; i < 30; ++i) {
    const auto res = ivf_probe_search(idx.centroids.view(), idx.lists, idx.x.view(), q.row(i), 3, 100);
    // Independent re-scan: the three nearest centroids, then a full sort.
    std::vector<std::pair<double, std::uint32_t>> cd;
    for (std::uint32_t j = 0; j < 64; ++j) cd.emplace_back(ref::sq_l2(q.row(i), idx.centroids.row(j)), j);
    std::sort(cd.begin(), cd.end());
    std::vector<std::pair<double, std::uint32_t>> cand;
    for (std::size_t p = 0; p < 3; ++p) {
      for (const auto id : idx.lists.list(cd[p].second)) cand.emplace_back(ref::sq_l2(q.row(i), idx.x.row(id)), id);
    }
    std::sort(cand.begin(), cand.end());
    std::vector<std::uint32_t> want;
    for (std::size_t r = 0; r < std::min<std::size_t>(100, cand.size()); ++r) want.push_back(cand[r].second);
    EXPECT_EQ(res.ids(), want);
  }
}

TEST(Recall, Examples) {
  const std::vector<std::uint32_t> gt = {1, 2, 3, 4, 5, 6, 7, 8, 9, 10};
  EXPECT_DOUBLE_EQ(recall_at_k(gt, gt, 10), 1.0);
  const std::vector<std::uint32_t> disjoint = {11, 12, 13, 14, 15, 16, 17, 18, 19, 20};
  EXPECT_DOUBLE_EQ(recall_at_k(disjoint, gt, 10), 0.0);
  const std::vector<std::uint32_t> half = {1, 2, 3, 4, 5, 16, 17, 18, 19, 20};
  EXPECT_DOUBLE_EQ(recall_at_k(half, gt, 10), 0.5);
}

TEST(Nprobe, CeilOfFraction) {
  EXPECT_EQ(nprobe_for(0.01, 895), 9u);
  EXPECT_EQ(nprobe_for(0.01, 100), 1u);
  EXPECT_EQ(nprobe_for(0.01, 101), 2u);
  EXPECT_EQ(nprobe_for(1.0, 64), 64u);
}

TEST(Etr, Rule) {
  EXPECT_TRUE(etr_should_stop({{0.80, 0.801, 0.8015}, 0.005, 2}));
  EXPECT_FALSE(etr_should_stop({{0.80, 0.81}, 0.005, 2}));
  EXPECT_FALSE(etr_should_stop({{0.80, 0.80, 0.81}, 0.005, 2}));
  EXPECT_FALSE(etr_should_stop({{0.80, 0.81, 0.81}, 0.005, 2}));
  EXPECT_TRUE(etr_should_stop({{0.5, 0.80, 0.803, 0.804}, 0.005, 2}));
  EXPECT_FALSE(etr_should_stop({{0.9}, 0.005, 2}));
}

TEST(Etr, ProbeTrivialCases) {
  const VectorSet x = test::gaussian(200, 16, 9);
  std::vector<std::uint32_t> own(200);
  for (std::uint32_t i = 0; i < 200; ++i) own[i] = i;
  const VectorSet q = test::gaussian(10, 16, 10);
  const auto gt = brute_force_topk(x.view(), q.view(), 10);
  EtrConfig cfg;
  cfg.top_k = 10;
  cfg.nprobe_fraction = 1.0;
  EXPECT_DOUBLE_EQ(etr_probe(x.view(), x.view(), own, q.view(), gt, cfg), 1.0);

  const std::vector<std::uint32_t> one(200, 0);
  const VectorSet single(1, 16);
  cfg.nprobe_fraction = 0.01;
  EXPECT_DOUBLE_EQ(etr_probe(single.view(), x.view(), one, q.view(), gt, cfg), 1.0);
}

TEST(Etr, RecordedRecallMatchesTruncatedFit) {
  const VectorSet raw = make_blobs({4000, 64, 8, 10.0f, 1.0f, 100});
  KMeansConfig cfg;
  cfg.k = 64;
  cfg.max_iters = 5;
  cfg.stop_on_convergence = false;
  EtrConfig etr;
  etr.n_queries = 200;
  etr.tolerance = 0.0;
  etr.patience_iters = 100;
  cfg.etr = etr;
  const auto in = prepare_input(raw, cfg);
  const auto ctx = make_etr_context(in, cfg, {});
  const auto full = fit_rotated(in.x_rot.view(), cfg, &ctx);
  ASSERT_EQ(full.stats.size(), 5u);
  for (int iters = 1; iters <= 5; ++iters) {
    auto c = cfg;
    c.max_iters = iters;
    const auto part = fit_rotated(in.x_rot.view(), c, &ctx);
    const double want = etr_probe(part.centroids.view(), in.x_rot.view(), part.assignments, ctx.queries.view(),
                                  ctx.gt, etr);
    ASSERT_TRUE(full.stats[iters - 1].recall.has_value());
    EXPECT_EQ(*full.stats[iters - 1].recall, want) << "iteration " << iters;
    EXPECT_GT(want, 0.0);
    EXPECT_LT(want, 1.0);
  }
}

TEST(Etr, NeverStopsBeforeThirdIteration) {
  const VectorSet raw = make_blobs({2000, 32, 4, 10.0f, 1.0f, 11});
  KMeansConfig cfg;
  cfg.k = 16;
  cfg.stop_on_convergence = false;
  EtrConfig etr;
  etr.tolerance = 1.0;
  cfg.etr = etr;
  const auto r = fit(raw, cfg);
  EXPECT_EQ(r.terminated_by, Termination::kEtr);
  EXPECT_EQ(r.stats.size(), 3u);
}

TEST(Evaluation, RotationInvariantRecall) {
  const auto idx = small_index(32, 12);
  const VectorSet q = test::gaussian(50, 32, 13, 6.0f);
  const auto rot = generate_rotation(32, 14);
  const auto gt = brute_force_topk(idx.x.view(), q.view(), 20);
  const auto plain = evaluate_index(idx.centroids.view(), idx.lists, idx.x.view(), q.view(), gt, 2, 20);
  const VectorSet xr = apply_rotation(idx.x, rot), cr = apply_rotation(idx.centroids, rot), qr = apply_rotation(q, rot);
  const auto gtr = brute_force_topk(xr.view(), qr.view(), 20);
  const auto rotated = evaluate_index(cr.view(), idx.lists, xr.view(), qr.view(), gtr, 2, 20);
  EXPECT_NEAR(plain.recall, rotated.recall, 1e-9);
}

TEST(Wcss, Examples) {
  const VectorSet x = VectorSet::from_values(2, 1, std::vector<float>{-1, 1});
  const VectorSet c(1, 1);
  const std::vector<std::uint32_t> asg = {0, 0};
  EXPECT_DOUBLE_EQ(wcss(x.view(), c.view(), asg), 2.0);
  EXPECT_DOUBLE_EQ(wcss(x.view(), x.view(), std::vector<std::uint32_t>{0, 1}), 0.0);

  const VectorSet r = test::gaussian(500, 40, 15);
  const VectorSet cs = test::gaussian(7, 40, 16);
  std::vector<std::uint32_t> a(500);
  for (std::size_t i = 0; i < 500; ++i) a[i] = i % 7;
  double want = 0.0;
  for (std::size_t i = 0; i < 500; ++i) want += ref::sq_l2(r.row(i), cs.row(a[i]));
  EXPECT_LE(test::rel_err(wcss(r.view(), cs.view(), a), want), 1e-6);
}

TEST(Balance, Examples) {
  const std::vector<std::size_t> eq(5, 7);
  EXPECT_DOUBLE_EQ(balance_stats(eq).std_dev, 0.0);
  const std::vector<std::size_t> two = {1, 3};
  EXPECT_DOUBLE_EQ(balance_stats(two).mean, 2.0);
  EXPECT_DOUBLE_EQ(balance_stats(two).std_dev, 1.0);
  std::vector<std::uint32_t> asg(1000);
  std::mt19937 rng(1);
  for (auto& v : asg) v = rng() % 10;
  EXPECT_DOUBLE_EQ(balance_stats(build_cluster_lists(asg, 10).counts()).mean, 100.0);
}

}  // namespace
}  // namespace skm
