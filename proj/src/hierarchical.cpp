#include "skm/hierarchical.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <optional>

#include "skm/distance.hpp"
#include "skm/preprocess.hpp"

namespace skm {

namespace {

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

struct FineOutcome {
  VectorSet centroids;
  TrackedVector<std::uint32_t> assignments;  // local to the meso-cluster
  WorkCounters work;
};

}  // namespace

std::size_t HierarchicalConfig::effective_meso_k() const {
  if (meso_k != 0) return meso_k;
  return static_cast<std::size_t>(std::ceil(std::sqrt(static_cast<double>(k_total)) - 1e-9));
}

void HierarchicalConfig::validate() const {
  if (k_total == 0) throw Error(ErrorCode::kInvalidConfig, "k_total must be positive");
  if (effective_meso_k() > k_total) throw Error(ErrorCode::kInvalidConfig, "meso_k must not exceed k_total");
  if (meso_iters < 1 || fine_iters < 1) throw Error(ErrorCode::kInvalidConfig, "phase iteration counts must be >= 1");
  KMeansConfig probe = base;
  probe.k = effective_meso_k();
  probe.validate();
}

KReconciliation reconcile_k(std::size_t fine_centroid_count, std::size_t k_total) {
  return {k_total, fine_centroid_count};
}

std::size_t fine_k_for(std::size_t n) {
  return std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(std::sqrt(static_cast<double>(n)))));
}

HierarchicalResult hierarchical_fit(const VectorSet& x, const HierarchicalConfig& cfg, const FitOptions& opts) {
  cfg.validate();
  HierarchicalResult out;
  if (cfg.k_total == 1) {
    KMeansConfig single = cfg.base;
    single.k = 1;
    out.fit = fit(x, single, opts);
    out.meso_k = 1;
    out.meso_sizes = {out.fit.assignments.size()};
    out.fine_ks = {1};
    out.meso_work = out.fit.train_work;
    out.k = reconcile_k(1, 1);
    return out;
  }

  const GemmBackend backend = resolve_backend(cfg.base.backend);
  KMeansConfig meso_cfg = cfg.base;
  meso_cfg.k = cfg.effective_meso_k();
  meso_cfg.max_iters = cfg.meso_iters;
  out.meso_k = meso_cfg.k;

  auto t0 = std::chrono::steady_clock::now();
  PreparedInput in = prepare_input(x, meso_cfg);
  std::optional<EtrContext> etr;
  if (meso_cfg.etr) etr = make_etr_context(in, meso_cfg, opts);
  KMeansResult& res = out.fit;
  res.training_indices = in.training_indices;
  res.rotation_seed = in.rotation.seed;
  res.preprocess_seconds = seconds_since(t0);

  auto t_meso = std::chrono::steady_clock::now();
  RotatedFit meso = fit_rotated(in.x_rot.view(), meso_cfg, etr ? &*etr : nullptr, opts.on_assignment);
  out.meso_seconds = seconds_since(t_meso);
  out.meso_work = meso.work;
  res.stats = std::move(meso.stats);
  res.terminated_by = meso.terminated_by;

  const std::size_t d = in.x_rot.dim();
  const std::size_t mk = meso_cfg.k;
  const ClusterLists members = build_cluster_lists(meso.assignments, mk);
  out.meso_sizes = members.counts();

  auto t_fine = std::chrono::steady_clock::now();
  std::vector<FineOutcome> fine(mk);
#pragma omp parallel for schedule(dynamic, 1)
  for (std::ptrdiff_t mi = 0; mi < static_cast<std::ptrdiff_t>(mk); ++mi) {
    const auto i = static_cast<std::size_t>(mi);
    const auto ids = members.list(i);
    FineOutcome& f = fine[i];
    if (ids.empty()) continue;
    VectorSet part(ids.size(), d);
    for (std::size_t r = 0; r < ids.size(); ++r) std::copy_n(in.x_rot.row(ids[r]).data(), d, part.row(r).data());
    if (ids.size() == 1) {
      f.centroids = std::move(part);
      f.assignments.assign(1, 0);
      continue;
    }
    KMeansConfig fine_cfg = cfg.base;
    fine_cfg.k = fine_k_for(ids.size());
    fine_cfg.max_iters = cfg.fine_iters;
    fine_cfg.etr.reset();
    fine_cfg.seed = derive_seed(cfg.base.seed + i + 1, SeedStream::kInit);
    RotatedFit r = fit_rotated(part.view(), fine_cfg);
    f.centroids = std::move(r.centroids);
    f.assignments = std::move(r.assignments);
    f.work = r.work;
  }
  out.fine_seconds = seconds_since(t_fine);

  // Merge in meso order so the output does not depend on scheduling.
  std::size_t total = 0;
  for (const auto& f : fine) total += f.centroids.n_rows();
  VectorSet all_rot(total, d);
  res.assignments.assign(in.x_rot.n_rows(), 0);
  std::size_t offset = 0;
  for (std::size_t i = 0; i < mk; ++i) {
    const FineOutcome& f = fine[i];
    const std::size_t ki = f.centroids.n_rows();
    out.fine_ks.push_back(ki);
    out.fine_work += f.work;
    if (ki == 0) continue;
    std::copy_n(f.centroids.data(), ki * d, all_rot.data() + offset * d);
    const auto ids = members.list(i);
    for (std::size_t r = 0; r < ids.size(); ++r) {
      res.assignments[ids[r]] = static_cast<std::uint32_t>(offset + f.assignments[r]);
    }
    offset += ki;
  }
  out.k = reconcile_k(total, cfg.k_total);
  res.train_work = out.meso_work;
  res.train_work += out.fine_work;
  res.train_seconds = out.meso_seconds + out.fine_seconds;
  res.final_d_prime = meso.final_d_prime;
  res.centroids = undo_rotation(all_rot.view(), in.rotation, backend);

  if (cfg.base.final_assignment) {
    auto t_fa = std::chrono::steady_clock::now();
    in.x_rot = VectorSet();
    TrackedVector<std::uint32_t> hint(x.n_rows(), kNoHint);
    for (std::size_t i = 0; i < res.training_indices.size(); ++i) hint[res.training_indices[i]] = res.assignments[i];
    KMeansConfig fa_cfg = cfg.base;
    fa_cfg.k = total;
    const std::size_t d_prime = initial_d_prime(d, fa_cfg.d_prime_init_fraction);
    auto assigned = final_assign(x.view(), in.rotation, all_rot.view(), fa_cfg, d_prime, std::move(hint));
    res.full_assignments = std::move(assigned.assignments);
    res.final_assign_work = assigned.work;
    res.final_assign_seconds = seconds_since(t_fa);
  }
  return out;
}

}  // namespace skm
