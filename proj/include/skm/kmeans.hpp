#ifndef SKM_KMEANS_HPP
#define SKM_KMEANS_HPP

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "skm/core.hpp"
#include "skm/evaluation.hpp"

namespace skm {

enum class Termination { kMaxIters, kConverged, kEtr };
const char* to_string(Termination t);

// Independent RNG streams derived from the user seed.
enum class SeedStream : std::uint64_t { kRotation = 1, kSample = 2, kInit = 3, kSplit = 4, kQueries = 5 };
std::uint64_t derive_seed(std::uint64_t seed, SeedStream stream);

// Snapshot handed to FitOptions::on_assignment after each assignment step,
// before the centroids move. Everything is in the rotated space.
struct AssignmentSnapshot {
  int iter = 0;
  ConstMatrixView x_rot;
  ConstMatrixView centroids;
  std::span<const std::uint32_t> assignments;
  std::span<const float> best_sq_dist;
};

struct FitOptions {
  // ETR queries in the input space; sampled from the training set when absent.
  std::optional<VectorSet> queries;
  // Ground truth for `queries` over the training set; only honoured when no
  // sampling happens, otherwise it is recomputed.
  std::optional<GroundTruth> ground_truth;
  std::function<void(const AssignmentSnapshot&)> on_assignment;
};

struct KMeansResult {
  VectorSet centroids;  // k x d, input space
  TrackedVector<std::uint32_t> assignments;       // per training vector, last iteration
  std::vector<std::uint32_t> training_indices;    // rows of the input used for training
  TrackedVector<std::uint32_t> full_assignments;  // per input row, final pass
  std::vector<IterationStats> stats;
  Termination terminated_by = Termination::kMaxIters;
  std::size_t final_d_prime = 0;
  std::uint64_t rotation_seed = 0;

  WorkCounters train_work;
  WorkCounters final_assign_work;
  double preprocess_seconds = 0.0;
  double train_seconds = 0.0;
  double final_assign_seconds = 0.0;
  double gt_seconds = 0.0;
};

// Core loop on data that is already rotated. Centroids in the result stay rotated.
struct RotatedFit {
  VectorSet centroids;
  TrackedVector<std::uint32_t> assignments;
  TrackedVector<float> best_sq_dist;
  std::vector<IterationStats> stats;
  Termination terminated_by = Termination::kMaxIters;
  std::size_t final_d_prime = 0;
  WorkCounters work;
  double gt_seconds = 0.0;
};

struct EtrContext {
  VectorSet queries;  // rotated
  GroundTruth gt;
};

// Sampled, rotated training set shared by the flat and hierarchical drivers.
struct PreparedInput {
  RotationMatrix rotation;
  std::vector<std::uint32_t> training_indices;
  VectorSet x_rot;
  bool sampled = false;
};
PreparedInput prepare_input(const VectorSet& x, const KMeansConfig& cfg);

// Queries and ground truth for ETR in the rotated space.
EtrContext make_etr_context(const PreparedInput& in, const KMeansConfig& cfg, const FitOptions& opts);

RotatedFit fit_rotated(ConstMatrixView x_rot, const KMeansConfig& cfg, const EtrContext* etr = nullptr,
                       const std::function<void(const AssignmentSnapshot&)>& on_assignment = {});

// Full pipeline: sample, rotate, core loop, unrotate, final assignment of the input.
KMeansResult fit(const VectorSet& x, const KMeansConfig& cfg, const FitOptions& opts = {});

struct CentroidUpdate {
  VectorSet centroids;
  std::vector<std::size_t> counts;
};

// Per-cluster means accumulated in double; empty clusters come back as zeros.
CentroidUpdate update_centroids(ConstMatrixView x_rot, std::span<const std::uint32_t> assignments, std::size_t k);

// Relative size of the symmetric split perturbation per dimension.
inline constexpr float kSplitEpsilon = 1.0f / 1024.0f;

// Gives each empty cluster half of a donor chosen with probability
// proportional to its count: the empty centroid becomes donor * (1 +/- eps)
// and the donor donor * (1 -/+ eps), with alternating signs per dimension.
std::size_t split_empty_clusters(VectorSet& centroids, std::vector<std::size_t>& counts, std::mt19937_64& rng);

std::size_t adjust_d_prime(std::size_t current_d_prime, double prune_rate, const KMeansConfig& cfg,
                           const DPrimeBounds& bounds);

// True iff no assignment changed. Throws on empty or mismatched input.
bool check_convergence(std::span<const std::uint32_t> prev, std::span<const std::uint32_t> current);
std::size_t count_changes(std::span<const std::uint32_t> prev, std::span<const std::uint32_t> current);

struct FinalAssignment {
  TrackedVector<std::uint32_t> assignments;
  WorkCounters work;
};

inline constexpr std::uint32_t kNoHint = 0xFFFFFFFFu;

// Two-phase (GEMM + pruning) assignment of every input row; rows are rotated
// one X-batch at a time. `seed_assignments[i]` is the trained assignment of
// row i or kNoHint; tau starts from that centroid, or from centroid 0 without
// a hint. An empty vector means no hints.
FinalAssignment final_assign(ConstMatrixView x_full, const RotationMatrix& rotation, ConstMatrixView centroids_rot,
                             const KMeansConfig& cfg, std::size_t d_prime,
                             TrackedVector<std::uint32_t> seed_assignments = {});

// Nearest centroid for every row from full-dimensional GEMM distances, with
// data and centroids in the same space.
TrackedVector<std::uint32_t> assign_exhaustive(ConstMatrixView x, ConstMatrixView centroids,
                                               GemmBackend backend = GemmBackend::kAuto);

// k = 4 * ceil(sqrt(n)), capped at n.
std::size_t default_k(std::size_t n);

}  // namespace skm

#endif  // SKM_KMEANS_HPP
