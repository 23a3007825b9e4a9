#include "skm/pruning.hpp"

#include <cmath>
#include <limits>

#include "skm/distance.hpp"

namespace skm {

double adsampling_threshold(std::size_t m, double tau, std::size_t dim, double epsilon0) {
  if (m >= dim) return tau;
  const double md = static_cast<double>(m);
  const double scale = 1.0 + epsilon0 / std::sqrt(md);
  return tau * (md / static_cast<double>(dim)) * scale * scale;
}

ThresholdSchedule::ThresholdSchedule(std::size_t dim, std::size_t d_prime, double epsilon0, bool disabled)
    : disabled_(disabled) {
  std::size_t m = d_prime;
  multipliers_.push_back(static_cast<float>(adsampling_threshold(m, 1.0, dim, epsilon0)));
  while (m < dim) {
    m = std::min(dim, m + PdxCentroidBank::kBlockDims);
    multipliers_.push_back(static_cast<float>(adsampling_threshold(m, 1.0, dim, epsilon0)));
  }
  // The last checkpoint always compares against tau itself.
  multipliers_.back() = 1.0f;
}

ThresholdSchedule::ThresholdSchedule(const PdxCentroidBank& bank, double epsilon0, bool disabled)
    : ThresholdSchedule(bank.dim(), bank.d_prime(), epsilon0, disabled) {}

float ThresholdSchedule::threshold(std::size_t checkpoint, float tau) const {
  const bool last = checkpoint + 1 == multipliers_.size();
  if (disabled_ && !last) return std::numeric_limits<float>::infinity();
  return tau * multipliers_[checkpoint];
}

float initial_threshold(std::span<const float> x, std::span<const float> prev_centroid) {
  return sq_l2(x.data(), prev_centroid.data(), x.size());
}

PruneOutcome prune_and_assign(std::span<const float> x, std::span<const float> partial, const PdxCentroidBank& bank,
                              const ThresholdSchedule& schedule, std::uint32_t& assignment, float& tau,
                              PruneScratch& scratch) {
  const std::size_t kb = bank.k_batch();
  if (scratch.ids.size() < kb) {
    scratch.ids.resize(kb);
    scratch.acc.resize(kb);
  }
  std::uint32_t* ids = scratch.ids.data();
  float* acc = scratch.acc.data();

  PruneOutcome out;
  std::size_t n = 0;
  const float bound0 = schedule.threshold(0, tau);
  for (std::size_t j = 0; j < kb; ++j) {
    // Most candidates fail here.
    if (partial[j] > bound0) [[likely]] continue;
    ids[n] = static_cast<std::uint32_t>(j);
    acc[n] = partial[j];
    ++n;
  }
  out.survivors_after_gemm = static_cast<std::uint32_t>(n);

  const std::size_t n_blocks = bank.num_blocks();
  for (std::size_t b = 0; b < n_blocks && n > 0; ++b) {
    const std::size_t width = bank.block_dims(b);
    accumulate_tail_block(x.subspan(bank.block_start(b), width), bank, b, {ids, n}, {acc, n});
    out.dims_touched += static_cast<std::uint64_t>(width) * n;
    const float bound = schedule.threshold(b + 1, tau);
    std::size_t kept = 0;
    for (std::size_t s = 0; s < n; ++s) {
      if (acc[s] <= bound) {
        ids[kept] = ids[s];
        acc[kept] = acc[s];
        ++kept;
      }
    }
    n = kept;
  }

  // Everything left has been evaluated over all d dimensions.
  out.full_evaluations = static_cast<std::uint32_t>(n);
  const auto first = static_cast<std::uint32_t>(bank.first_centroid());
  for (std::size_t s = 0; s < n; ++s) {
    const std::uint32_t global = first + ids[s];
    if (acc[s] < tau || (acc[s] == tau && global < assignment)) {
      assignment = global;
      tau = acc[s];
    }
  }
  out.final_assignment = assignment;
  out.final_sq_dist = tau;
  return out;
}

double measure_prune_rate(std::uint64_t survivors, std::uint64_t pairs) {
  if (pairs == 0) return 0.0;
  return 1.0 - static_cast<double>(survivors) / static_cast<double>(pairs);
}

double measure_prune_rate(std::span<const PruneOutcome> outcomes, std::size_t k_total) {
  if (outcomes.empty() || k_total == 0) return 0.0;
  double sum = 0.0;
  for (const auto& o : outcomes) sum += static_cast<double>(o.survivors_after_gemm) / static_cast<double>(k_total);
  return 1.0 - sum / static_cast<double>(outcomes.size());
}

}  // namespace skm
