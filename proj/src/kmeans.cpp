#include "skm/kmeans.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>

#include "skm/distance.hpp"
#include "skm/layout.hpp"
#include "skm/preprocess.hpp"
#include "skm/pruning.hpp"

namespace skm {

const char* to_string(Termination t) {
  switch (t) {
    case Termination::kMaxIters: return "max_iters";
    case Termination::kConverged: return "converged";
    case Termination::kEtr: return "etr";
  }
  return "unknown";
}

std::uint64_t derive_seed(std::uint64_t seed, SeedStream stream) {
  // splitmix64 finaliser over (seed, stream).
  std::uint64_t z = seed + 0x9E3779B97F4A7C15ull * (static_cast<std::uint64_t>(stream) + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

namespace {

class Stopwatch {
 public:
  Stopwatch() : start_(std::chrono::steady_clock::now()) {}
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
  }

 private:
  std::chrono::steady_clock::time_point start_;
};

// Batched distance passes against a fixed set of centroids. Owns the single
// x_batch x y_batch distance buffer.
class Assigner {
 public:
  Assigner(ConstMatrixView centroids, std::size_t x_batch, std::size_t y_batch, GemmBackend backend)
      : centroids_(centroids),
        y_batch_(std::min({y_batch, centroids.rows, PdxCentroidBank::kMaxBatch})),
        backend_(backend),
        inner_(x_batch * y_batch_),
        norms_(compute_norms(centroids, centroids.cols)) {}

  // Exact argmin over all centroids with full-dimensional GEMM distances.
  void full_pass(ConstMatrixView xb, std::span<const float> x_norms, std::span<std::uint32_t> asg,
                 std::span<float> best, WorkCounters& work, PhaseTimings& t) {
    const std::size_t nx = xb.rows;
    const std::size_t d = centroids_.cols;
    std::fill(best.begin(), best.end(), std::numeric_limits<float>::infinity());
    for (std::size_t y0 = 0; y0 < centroids_.rows; y0 += y_batch_) {
      const std::size_t ny = std::min(y_batch_, centroids_.rows - y0);
      Stopwatch sw;
      matmul(xb, centroids_.row_range(y0, ny), d, inner_, backend_);
      const auto block =
          expand_to_sq_l2(inner_, nx, ny, x_norms, std::span<const float>(norms_.full_sq_norms).subspan(y0, ny), d);
#pragma omp parallel for schedule(static)
      for (std::ptrdiff_t ii = 0; ii < static_cast<std::ptrdiff_t>(nx); ++ii) {
        const auto i = static_cast<std::size_t>(ii);
        const auto row = block.row(i);
        float b = best[i];
        std::uint32_t a = asg[i];
        for (std::size_t l = 0; l < ny; ++l) {
          if (row[l] < b) {
            b = row[l];
            a = static_cast<std::uint32_t>(y0 + l);
          }
        }
        best[i] = b;
        asg[i] = a;
      }
      t.gemm_s += sw.seconds();
      work.gemm_work += static_cast<std::uint64_t>(nx) * ny * d;
      work.pairs += static_cast<std::uint64_t>(nx) * ny;
      work.survivors_after_gemm += static_cast<std::uint64_t>(nx) * ny;
      work.full_pairs += static_cast<std::uint64_t>(nx) * ny;
    }
  }

  void prepare_pruned(std::size_t d_prime, double epsilon0, bool disabled) {
    banks_ = pdxify_all(centroids_, y_batch_, d_prime);
    update_partial_norms(centroids_, d_prime, norms_);
    schedule_ = ThresholdSchedule(centroids_.cols, d_prime, epsilon0, disabled);
    d_prime_ = d_prime;
  }

  // tau for every row from its current assignment, against current centroids.
  void seed_thresholds(ConstMatrixView xb, std::span<const std::uint32_t> asg, std::span<float> best,
                       WorkCounters& work) const {
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t ii = 0; ii < static_cast<std::ptrdiff_t>(xb.rows); ++ii) {
      const auto i = static_cast<std::size_t>(ii);
      best[i] = initial_threshold(xb.row(i), centroids_.row(asg[i]));
    }
    work.threshold_work += static_cast<std::uint64_t>(xb.rows) * xb.cols;
  }

  // Partial GEMM at d' then pruning, bank by bank. best[] carries tau in and out.
  void pruned_pass(ConstMatrixView xb, std::span<const float> x_partial, std::span<std::uint32_t> asg,
                   std::span<float> best, WorkCounters& work, PhaseTimings& t) {
    const std::size_t nx = xb.rows;
    for (const auto& bank : banks_) {
      const std::size_t ny = bank.k_batch();
      Stopwatch sw;
      matmul(xb.first_cols(d_prime_), bank.front(), d_prime_, inner_, backend_);
      const auto block = expand_to_sq_l2(
          inner_, nx, ny, x_partial, std::span<const float>(norms_.partial_sq_norms).subspan(bank.first_centroid(), ny),
          d_prime_);
      t.gemm_s += sw.seconds();
      Stopwatch sp;
      std::uint64_t survivors = 0;
      std::uint64_t tail = 0;
      std::uint64_t full = 0;
#pragma omp parallel reduction(+ : survivors, tail, full)
      {
        PruneScratch scratch(ny);
#pragma omp for schedule(dynamic, 8)
        for (std::ptrdiff_t ii = 0; ii < static_cast<std::ptrdiff_t>(nx); ++ii) {
          const auto i = static_cast<std::size_t>(ii);
          const auto out = prune_and_assign(xb.row(i), block.row(i), bank, schedule_, asg[i], best[i], scratch);
          survivors += out.survivors_after_gemm;
          tail += out.dims_touched;
          full += out.full_evaluations;
        }
      }
      t.pruning_s += sp.seconds();
      work.gemm_work += static_cast<std::uint64_t>(nx) * ny * d_prime_;
      work.tail_work += tail;
      work.pairs += static_cast<std::uint64_t>(nx) * ny;
      work.survivors_after_gemm += survivors;
      work.full_pairs += full;
    }
  }

  std::size_t d_prime() const { return d_prime_; }

 private:
  ConstMatrixView centroids_;
  std::size_t y_batch_;
  GemmBackend backend_;
  FloatBuffer inner_;
  NormCache norms_;
  std::vector<PdxCentroidBank> banks_;
  ThresholdSchedule schedule_;
  std::size_t d_prime_ = 0;
};

double sum_serial(std::span<const float> v) {
  double s = 0.0;
  for (const float x : v) s += x;
  return s;
}

}  // namespace

CentroidUpdate update_centroids(ConstMatrixView x_rot, std::span<const std::uint32_t> assignments, std::size_t k) {
  if (assignments.size() != x_rot.rows) throw Error(ErrorCode::kDimensionMismatch, "assignment count mismatch");
  const std::size_t d = x_rot.cols;
  CentroidUpdate out{VectorSet(k, d), std::vector<std::size_t>(k, 0)};
  // Bucket rows by cluster so each cluster is summed by one worker in row
  // order; the result does not depend on the worker count.
  TrackedVector<std::uint32_t> offsets(k + 1, 0);
  for (const auto a : assignments) {
    if (a >= k) throw Error(ErrorCode::kDimensionMismatch, "assignment outside [0, k)");
    ++offsets[a + 1];
  }
  for (std::size_t j = 0; j < k; ++j) {
    out.counts[j] = offsets[j + 1];
    offsets[j + 1] += offsets[j];
  }
  TrackedVector<std::uint32_t> order(assignments.size());
  {
    TrackedVector<std::uint32_t> cursor(offsets.begin(), offsets.end() - 1);
    for (std::size_t i = 0; i < assignments.size(); ++i) order[cursor[assignments[i]]++] = static_cast<std::uint32_t>(i);
  }
#pragma omp parallel
  {
    std::vector<double> acc(d);
#pragma omp for schedule(dynamic, 4)
    for (std::ptrdiff_t jj = 0; jj < static_cast<std::ptrdiff_t>(k); ++jj) {
      const auto j = static_cast<std::size_t>(jj);
      const std::uint32_t begin = offsets[j];
      const std::uint32_t end = offsets[j + 1];
      if (begin == end) continue;
      std::fill(acc.begin(), acc.end(), 0.0);
      for (std::uint32_t p = begin; p < end; ++p) {
        const float* r = x_rot.data + static_cast<std::size_t>(order[p]) * x_rot.stride;
#pragma omp simd
        for (std::size_t t = 0; t < d; ++t) acc[t] += r[t];
      }
      const double inv = 1.0 / static_cast<double>(end - begin);
      auto dst = out.centroids.row(j);
      for (std::size_t t = 0; t < d; ++t) dst[t] = static_cast<float>(acc[t] * inv);
    }
  }
  return out;
}

std::size_t split_empty_clusters(VectorSet& centroids, std::vector<std::size_t>& counts, std::mt19937_64& rng) {
  const std::size_t k = centroids.n_rows();
  const std::size_t d = centroids.dim();
  std::size_t splits = 0;
  for (std::size_t ci = 0; ci < k; ++ci) {
    if (counts[ci] != 0) continue;
    std::discrete_distribution<std::size_t> pick(counts.begin(), counts.end());
    const std::size_t cj = pick(rng);
    auto empty = centroids.row(ci);
    auto donor = centroids.row(cj);
    for (std::size_t t = 0; t < d; ++t) {
      const float v = donor[t];
      if (t % 2 == 0) {
        empty[t] = v * (1.0f + kSplitEpsilon);
        donor[t] = v * (1.0f - kSplitEpsilon);
      } else {
        empty[t] = v * (1.0f - kSplitEpsilon);
        donor[t] = v * (1.0f + kSplitEpsilon);
      }
    }
    counts[ci] = counts[cj] / 2;
    counts[cj] -= counts[ci];
    ++splits;
  }
  return splits;
}

std::size_t adjust_d_prime(std::size_t current_d_prime, double prune_rate, const KMeansConfig& cfg,
                           const DPrimeBounds& bounds) {
  const double cur = static_cast<double>(current_d_prime);
  std::size_t next = current_d_prime;
  if (prune_rate > cfg.prune_target_high) {
    next = static_cast<std::size_t>(std::floor(cur * (1.0 - cfg.d_prime_adjust_factor) + 1e-9));
  } else if (prune_rate < cfg.prune_target_low) {
    next = static_cast<std::size_t>(std::ceil(cur * (1.0 + cfg.d_prime_adjust_factor) - 1e-9));
  }
  // Any cutoff inside the bounds yields a valid block structure (the last
  // tail block may be ragged), so no further alignment is applied.
  return std::clamp(next, bounds.lower, bounds.upper);
}

std::size_t count_changes(std::span<const std::uint32_t> prev, std::span<const std::uint32_t> current) {
  if (prev.size() != current.size()) throw Error(ErrorCode::kDimensionMismatch, "assignment arrays differ in length");
  std::size_t changed = 0;
  for (std::size_t i = 0; i < prev.size(); ++i) changed += prev[i] != current[i] ? 1 : 0;
  return changed;
}

bool check_convergence(std::span<const std::uint32_t> prev, std::span<const std::uint32_t> current) {
  if (current.empty()) throw Error(ErrorCode::kInvalidConfig, "convergence check on an empty training set");
  return count_changes(prev, current) == 0;
}

std::size_t default_k(std::size_t n) {
  if (n == 0) return 0;
  auto s = static_cast<std::size_t>(std::sqrt(static_cast<double>(n)));
  while (s * s > n) --s;
  while (s * s < n) ++s;
  return std::min(n, 4 * s);
}

RotatedFit fit_rotated(ConstMatrixView x_rot, const KMeansConfig& cfg, const EtrContext* etr,
                       const std::function<void(const AssignmentSnapshot&)>& on_assignment) {
  cfg.validate();
  const std::size_t n = x_rot.rows;
  const std::size_t d = x_rot.cols;
  const std::size_t k = cfg.k;
  if (n == 0) throw Error(ErrorCode::kEmptySample, "empty training set");
  if (k > n) throw Error(ErrorCode::kKTooLarge, "k = " + std::to_string(k) + " exceeds " + std::to_string(n) + " rows");

  const GemmBackend backend = resolve_backend(cfg.backend);
  const std::size_t x_batch = std::min(cfg.x_batch, n);

  RotatedFit res;
  res.centroids = init_centroids(x_rot, k, derive_seed(cfg.seed, SeedStream::kInit));
  std::size_t d_prime = initial_d_prime(d, cfg.d_prime_init_fraction);
  const DPrimeBounds bounds = d_prime_bounds(d, d_prime);

  AssignmentState state(n);
  TrackedVector<std::uint32_t> prev(n, 0);
  NormCache x_norms = compute_norms(x_rot, d_prime);
  std::mt19937_64 split_rng(derive_seed(cfg.seed, SeedStream::kSplit));
  RecallHistory history;
  if (cfg.etr) {
    history.tolerance = cfg.etr->tolerance;
    history.patience = cfg.etr->patience_iters;
  }

  for (int iter = 1; iter <= cfg.max_iters; ++iter) {
    IterationStats st;
    st.iter_index = iter;
    {
      Stopwatch sw;
      Assigner assigner(res.centroids.view(), x_batch, cfg.y_batch, backend);
      if (iter > 1) assigner.prepare_pruned(d_prime, cfg.epsilon0, cfg.disable_pruning);
      st.timings.update_s += sw.seconds();
      st.d_prime = iter == 1 ? d : d_prime;
      for (std::size_t x0 = 0; x0 < n; x0 += x_batch) {
        const std::size_t nx = std::min(x_batch, n - x0);
        const auto xb = x_rot.row_range(x0, nx);
        auto asg = std::span<std::uint32_t>(state.assignment).subspan(x0, nx);
        auto best = std::span<float>(state.best_sq_dist).subspan(x0, nx);
        if (iter == 1) {
          assigner.full_pass(xb, std::span<const float>(x_norms.full_sq_norms).subspan(x0, nx), asg, best, st.work,
                             st.timings);
        } else {
          Stopwatch sp;
          assigner.seed_thresholds(xb, asg, best, st.work);
          st.timings.pruning_s += sp.seconds();
          assigner.pruned_pass(xb, std::span<const float>(x_norms.partial_sq_norms).subspan(x0, nx), asg, best,
                               st.work, st.timings);
        }
      }
    }
    st.prune_rate_after_gemm = iter == 1 ? 0.0 : measure_prune_rate(st.work.survivors_after_gemm, st.work.pairs);
    st.wcss = sum_serial(state.best_sq_dist);
    st.n_changed = iter == 1 ? n : count_changes(prev, state.assignment);
    if (on_assignment) {
      on_assignment({iter, x_rot, res.centroids.view(), state.assignment, state.best_sq_dist});
    }

    {
      Stopwatch sw;
      auto upd = update_centroids(x_rot, state.assignment, k);
      if (cfg.split_empty) st.n_empty_splits = split_empty_clusters(upd.centroids, upd.counts, split_rng);
      res.centroids = std::move(upd.centroids);
      if (iter > 1 && cfg.adjust_d_prime) {
        const std::size_t next = adjust_d_prime(d_prime, st.prune_rate_after_gemm, cfg, bounds);
        if (next != d_prime) {
          d_prime = next;
          update_partial_norms(x_rot, d_prime, x_norms);
        }
      }
      st.timings.update_s += sw.seconds();
    }

    bool etr_stop = false;
    if (cfg.etr && etr != nullptr) {
      Stopwatch sw;
      const double recall =
          etr_probe(res.centroids.view(), x_rot, state.assignment, etr->queries.view(), etr->gt, *cfg.etr);
      st.recall = recall;
      history.values.push_back(recall);
      etr_stop = etr_should_stop(history);
      st.timings.etr_s += sw.seconds();
    }

    res.work += st.work;
    res.stats.push_back(st);
    const bool converged = (iter > 1 && st.n_changed == 0) || k == 1;
    std::copy(state.assignment.begin(), state.assignment.end(), prev.begin());
    if (converged && cfg.stop_on_convergence) {
      res.terminated_by = Termination::kConverged;
      break;
    }
    if (etr_stop) {
      res.terminated_by = Termination::kEtr;
      break;
    }
  }
  res.assignments = std::move(state.assignment);
  res.best_sq_dist = std::move(state.best_sq_dist);
  res.final_d_prime = d_prime;
  return res;
}

FinalAssignment final_assign(ConstMatrixView x_full, const RotationMatrix& rotation, ConstMatrixView centroids_rot,
                             const KMeansConfig& cfg, std::size_t d_prime,
                             TrackedVector<std::uint32_t> seed_assignments) {
  const std::size_t n = x_full.rows;
  const std::size_t d = x_full.cols;
  if (d != rotation.dim || centroids_rot.cols != d) {
    throw Error(ErrorCode::kDimensionMismatch, "final assignment dimension mismatch");
  }
  FinalAssignment out;
  if (seed_assignments.empty()) seed_assignments.assign(n, kNoHint);
  if (seed_assignments.size() != n) throw Error(ErrorCode::kDimensionMismatch, "hint length mismatch");
  out.assignments = std::move(seed_assignments);
  if (n == 0) return out;
  d_prime = std::clamp<std::size_t>(d_prime, 1, d);

  const GemmBackend backend = resolve_backend(cfg.backend);
  const std::size_t x_batch = std::min(cfg.x_batch, n);
  Assigner assigner(centroids_rot, x_batch, cfg.y_batch, backend);
  assigner.prepare_pruned(d_prime, cfg.epsilon0, cfg.disable_pruning);
  FloatBuffer xb_buf(x_batch * d);
  FloatBuffer partial(x_batch);
  FloatBuffer best(x_batch);
  PhaseTimings timings;
  for (std::size_t x0 = 0; x0 < n; x0 += x_batch) {
    const std::size_t nx = std::min(x_batch, n - x0);
    apply_rotation_into(x_full.row_range(x0, nx), rotation, xb_buf, backend);
    const ConstMatrixView xb(xb_buf.data(), nx, d);
    for (std::size_t i = 0; i < nx; ++i) partial[i] = sq_norm(xb.row(i).data(), d_prime);
    auto asg = std::span<std::uint32_t>(out.assignments).subspan(x0, nx);
    for (auto& a : asg) {
      if (a == kNoHint || a >= centroids_rot.rows) a = 0;
    }
    auto tau = std::span<float>(best).first(nx);
    assigner.seed_thresholds(xb, asg, tau, out.work);
    assigner.pruned_pass(xb, std::span<const float>(partial).first(nx), asg, tau, out.work, timings);
  }
  return out;
}

TrackedVector<std::uint32_t> assign_exhaustive(ConstMatrixView x, ConstMatrixView centroids, GemmBackend backend) {
  if (x.cols != centroids.cols) throw Error(ErrorCode::kDimensionMismatch, "data and centroid dimensions differ");
  TrackedVector<std::uint32_t> asg(x.rows, 0);
  if (x.rows == 0 || centroids.rows == 0) return asg;
  backend = resolve_backend(backend);
  const std::size_t x_batch = std::min<std::size_t>(4096, x.rows);
  Assigner assigner(centroids, x_batch, 1024, backend);
  FloatBuffer best(x_batch);
  WorkCounters work;
  PhaseTimings timings;
  const NormCache norms = compute_norms(x, x.cols);
  for (std::size_t x0 = 0; x0 < x.rows; x0 += x_batch) {
    const std::size_t nx = std::min(x_batch, x.rows - x0);
    assigner.full_pass(x.row_range(x0, nx), std::span<const float>(norms.full_sq_norms).subspan(x0, nx),
                       std::span<std::uint32_t>(asg).subspan(x0, nx), std::span<float>(best).first(nx), work,
                       timings);
  }
  return asg;
}

PreparedInput prepare_input(const VectorSet& x, const KMeansConfig& cfg) {
  if (x.dim() == 0 || x.n_rows() == 0) throw Error(ErrorCode::kEmptySample, "empty input");
  const GemmBackend backend = resolve_backend(cfg.backend);
  PreparedInput in;
  in.training_indices =
      sample_indices(x.n_rows(), cfg.sampling_fraction, cfg.k, derive_seed(cfg.seed, SeedStream::kSample));
  in.sampled = in.training_indices.size() != x.n_rows();
  in.rotation = generate_rotation(x.dim(), derive_seed(cfg.seed, SeedStream::kRotation));
  if (!in.sampled) {
    in.x_rot = apply_rotation(x, in.rotation, backend);
    return in;
  }
  // Rotate the sample in X-batches so no second unrotated copy is held.
  const std::size_t m = in.training_indices.size();
  const std::size_t d = x.dim();
  in.x_rot = VectorSet(m, d);
  const std::size_t batch = std::min(cfg.x_batch, m);
  FloatBuffer gather(batch * d);
  for (std::size_t r0 = 0; r0 < m; r0 += batch) {
    const std::size_t nr = std::min(batch, m - r0);
    for (std::size_t i = 0; i < nr; ++i) {
      std::copy_n(x.row(in.training_indices[r0 + i]).data(), d, gather.data() + i * d);
    }
    apply_rotation_into(ConstMatrixView(gather.data(), nr, d), in.rotation, in.x_rot.values().subspan(r0 * d, nr * d),
                        backend);
  }
  return in;
}

EtrContext make_etr_context(const PreparedInput& in, const KMeansConfig& cfg, const FitOptions& opts) {
  const GemmBackend backend = resolve_backend(cfg.backend);
  const EtrConfig etr = cfg.etr.value_or(EtrConfig{});
  const std::size_t d = in.x_rot.dim();
  EtrContext ctx;
  if (opts.queries) {
    ctx.queries = apply_rotation(*opts.queries, in.rotation, backend);
  } else {
    const std::size_t nq = std::min(etr.n_queries, in.x_rot.n_rows());
    const auto qidx = init_centroid_indices(in.x_rot.n_rows(), nq, derive_seed(cfg.seed, SeedStream::kQueries));
    ctx.queries = VectorSet(nq, d);
    for (std::size_t q = 0; q < nq; ++q) std::copy_n(in.x_rot.row(qidx[q]).data(), d, ctx.queries.row(q).data());
  }
  if (opts.ground_truth && !in.sampled && opts.ground_truth->n_queries == ctx.queries.n_rows()) {
    ctx.gt = *opts.ground_truth;
  } else {
    ctx.gt = brute_force_topk(in.x_rot.view(), ctx.queries.view(), etr.top_k, backend);
  }
  return ctx;
}

KMeansResult fit(const VectorSet& x, const KMeansConfig& cfg, const FitOptions& opts) {
  cfg.validate();
  const GemmBackend backend = resolve_backend(cfg.backend);
  KMeansResult result;
  Stopwatch pre;
  PreparedInput in = prepare_input(x, cfg);
  result.training_indices = in.training_indices;
  result.rotation_seed = in.rotation.seed;

  std::optional<EtrContext> etr;
  if (cfg.etr) {
    Stopwatch gt_watch;
    etr = make_etr_context(in, cfg, opts);
    result.gt_seconds = gt_watch.seconds();
  }
  result.preprocess_seconds = pre.seconds() - result.gt_seconds;

  Stopwatch train;
  RotatedFit core = fit_rotated(in.x_rot.view(), cfg, etr ? &*etr : nullptr, opts.on_assignment);
  result.train_seconds = train.seconds();

  result.stats = std::move(core.stats);
  result.terminated_by = core.terminated_by;
  result.final_d_prime = core.final_d_prime;
  result.train_work = core.work;
  result.centroids = undo_rotation(core.centroids.view(), in.rotation, backend);

  if (cfg.final_assignment) {
    Stopwatch fa;
    // x_rot is no longer needed; release it before the full pass.
    in.x_rot = VectorSet();
    TrackedVector<std::uint32_t> hint(x.n_rows(), kNoHint);
    for (std::size_t i = 0; i < result.training_indices.size(); ++i) {
      hint[result.training_indices[i]] = core.assignments[i];
    }
    auto assigned = final_assign(x.view(), in.rotation, core.centroids.view(), cfg, core.final_d_prime, std::move(hint));
    result.full_assignments = std::move(assigned.assignments);
    result.final_assign_work = assigned.work;
    result.final_assign_seconds = fa.seconds();
  }
  result.assignments = std::move(core.assignments);
  return result;
}

}  // namespace skm
