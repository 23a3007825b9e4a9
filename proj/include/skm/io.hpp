#ifndef SKM_IO_HPP
#define SKM_IO_HPP

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>

#include "skm/core.hpp"
#include "skm/evaluation.hpp"

namespace skm {

enum class VectorFormat { kFvecs, kFbin };

// "fvecs" / "fbin"; throws InvalidConfig otherwise.
VectorFormat parse_vector_format(const std::string& name);
// From the file extension, defaulting to fbin.
VectorFormat guess_vector_format(const std::filesystem::path& path);

// fvecs: records of [int32 d][d x float32]. fbin: [uint32 N][uint32 d] then
// N * d float32. Little-endian. Rows are read straight into the result.
VectorSet load_vectors(const std::filesystem::path& path, VectorFormat format);
void save_vectors(const std::filesystem::path& path, const VectorSet& x, VectorFormat format);

// ivecs: records of [int32 k][k x int32]; distances are not stored.
GroundTruth load_ground_truth(const std::filesystem::path& path);
void save_ground_truth(const std::filesystem::path& path, const GroundTruth& gt);

// 64-bit FNV-1a.
std::uint64_t fnv1a64(std::span<const unsigned char> bytes, std::uint64_t state = 0xcbf29ce484222325ull);
std::uint64_t file_checksum(const std::filesystem::path& path);

inline constexpr std::uint32_t kModelVersion = 1;

struct CentroidModel {
  VectorSet centroids;  // input space
  std::uint64_t rotation_seed = 0;
  std::optional<ClusterLists> lists;
};

// Layout: "SKMC", u32 version, u32 k, u32 d, u64 rotation seed, u32 has_lists,
// k*d float32, [u32 n_ids, (k + 1) u32 offsets, n_ids u32 ids], then a u64
// FNV-1a checksum of everything before it.
void save_centroids(const std::filesystem::path& path, const CentroidModel& model);
CentroidModel load_centroids(const std::filesystem::path& path);

}  // namespace skm

#endif  // SKM_IO_HPP
