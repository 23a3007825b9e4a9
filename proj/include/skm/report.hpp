#ifndef SKM_REPORT_HPP
#define SKM_REPORT_HPP

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "skm/core.hpp"

namespace skm {

inline constexpr int kReportVersion = 1;

struct DatasetInfo {
  std::string source;
  std::string format;
  std::size_t n = 0;
  std::size_t d = 0;
  std::uint64_t checksum = 0;
};

struct FinalMetrics {
  std::optional<double> recall_at_10;
  std::optional<double> recall_at_100;
  std::optional<double> wcss;
  std::optional<double> vectors_explored;
  std::optional<double> ppc_mean;
  std::optional<double> ppc_std;
};

struct PhaseSeconds {
  double preprocess = 0.0;
  double train = 0.0;
  double final_assign = 0.0;
  double ground_truth = 0.0;
  double evaluation = 0.0;
  double total = 0.0;
};

struct RunReport {
  std::string command;
  nlohmann::json config = nlohmann::json::object();
  DatasetInfo dataset;
  std::vector<IterationStats> iterations;
  FinalMetrics metrics;
  PhaseSeconds seconds;
  std::string termination;
  std::size_t k_requested = 0;
  std::size_t k_achieved = 0;
  WorkCounters train_work;
  WorkCounters final_assign_work;
};

nlohmann::json to_json(const RunReport& report);
// Throws VersionMismatch for another report version and MalformedHeader for
// missing fields.
RunReport report_from_json(const nlohmann::json& j);

void write_report(const std::filesystem::path& path, const RunReport& report);
RunReport read_report(const std::filesystem::path& path);

// Copy of a serialized report with every wall-clock field removed.
nlohmann::json without_timings(nlohmann::json j);

}  // namespace skm

#endif  // SKM_REPORT_HPP
