#ifndef SKM_PRUNING_HPP
#define SKM_PRUNING_HPP

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "skm/core.hpp"
#include "skm/layout.hpp"

namespace skm {

// ADSampling bound on a partial squared distance observed over m of d
// rotated dimensions: tau * (m / d) * (1 + epsilon0 / sqrt(m))^2, and exactly
// tau at m = d. A candidate whose partial distance exceeds it is discarded.
double adsampling_threshold(std::size_t m, double tau, std::size_t dim, double epsilon0);

// Per-checkpoint multipliers of tau for one bank geometry: entry 0 applies
// after the GEMM phase (m = d'), entry b + 1 after tail block b.
class ThresholdSchedule {
 public:
  ThresholdSchedule() = default;
  ThresholdSchedule(const PdxCentroidBank& bank, double epsilon0, bool disabled);
  ThresholdSchedule(std::size_t dim, std::size_t d_prime, double epsilon0, bool disabled);

  float threshold(std::size_t checkpoint, float tau) const;
  std::size_t checkpoints() const { return multipliers_.size(); }

 private:
  std::vector<float> multipliers_;
  bool disabled_ = false;
};

// Squared distance from x to the current position of its previous centroid.
float initial_threshold(std::span<const float> x, std::span<const float> prev_centroid);

struct PruneOutcome {
  std::uint32_t survivors_after_gemm = 0;
  std::uint32_t final_assignment = 0;
  float final_sq_dist = 0.0f;
  std::uint64_t dims_touched = 0;
  std::uint32_t full_evaluations = 0;
};

// Per-worker buffers sized for one bank.
struct PruneScratch {
  std::vector<std::uint32_t> ids;
  std::vector<float> acc;
  explicit PruneScratch(std::size_t k_batch = PdxCentroidBank::kMaxBatch) : ids(k_batch), acc(k_batch) {}
};

// Scans one bank for vector x. `partial` holds the squared distances over the
// first d' dimensions to each bank centroid. Candidates above the bound after
// the GEMM phase are skipped; the rest are extended block by block and
// dropped as soon as they exceed the bound at the dimensions seen so far.
// A candidate that completes all d dimensions strictly below tau (or equal,
// with a lower index) becomes the assignment and tightens tau. Candidates
// are visited in bank order.
PruneOutcome prune_and_assign(std::span<const float> x, std::span<const float> partial, const PdxCentroidBank& bank,
                              const ThresholdSchedule& schedule, std::uint32_t& assignment, float& tau,
                              PruneScratch& scratch);

// 1 - mean(survivors / k_total) over the processed vectors.
double measure_prune_rate(std::span<const PruneOutcome> outcomes, std::size_t k_total);
double measure_prune_rate(std::uint64_t survivors, std::uint64_t pairs);

}  // namespace skm

#endif  // SKM_PRUNING_HPP
