#include "skm/report.hpp"

#include <cstdio>
#include <fstream>

namespace skm {

using nlohmann::json;

namespace {

json opt(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

std::optional<double> opt_from(const json& j, const char* key) {
  const auto it = j.find(key);
  if (it == j.end() || it->is_null()) return std::nullopt;
  return it->get<double>();
}

json work_json(const WorkCounters& w) {
  return {{"gemm", w.gemm_work},     {"tail", w.tail_work},
          {"threshold", w.threshold_work}, {"pairs", w.pairs},
          {"survivors_after_gemm", w.survivors_after_gemm}, {"full_pairs", w.full_pairs}};
}

WorkCounters work_from(const json& j) {
  WorkCounters w;
  w.gemm_work = j.at("gemm").get<std::uint64_t>();
  w.tail_work = j.at("tail").get<std::uint64_t>();
  w.threshold_work = j.at("threshold").get<std::uint64_t>();
  w.pairs = j.at("pairs").get<std::uint64_t>();
  w.survivors_after_gemm = j.at("survivors_after_gemm").get<std::uint64_t>();
  w.full_pairs = j.at("full_pairs").get<std::uint64_t>();
  return w;
}

json iteration_json(const IterationStats& s) {
  return {{"iter", s.iter_index},
          {"d_prime", s.d_prime},
          {"prune_rate_after_gemm", s.prune_rate_after_gemm},
          {"wcss", s.wcss},
          {"empty_splits", s.n_empty_splits},
          {"changed", s.n_changed},
          {"recall", opt(s.recall)},
          {"work", work_json(s.work)},
          {"timings",
           {{"gemm", s.timings.gemm_s},
            {"pruning", s.timings.pruning_s},
            {"update", s.timings.update_s},
            {"etr", s.timings.etr_s}}}};
}

IterationStats iteration_from(const json& j) {
  IterationStats s;
  s.iter_index = j.at("iter").get<int>();
  s.d_prime = j.at("d_prime").get<std::size_t>();
  s.prune_rate_after_gemm = j.at("prune_rate_after_gemm").get<double>();
  s.wcss = j.at("wcss").get<double>();
  s.n_empty_splits = j.at("empty_splits").get<std::size_t>();
  s.n_changed = j.at("changed").get<std::size_t>();
  s.recall = opt_from(j, "recall");
  s.work = work_from(j.at("work"));
  if (const auto t = j.find("timings"); t != j.end()) {
    s.timings.gemm_s = t->at("gemm").get<double>();
    s.timings.pruning_s = t->at("pruning").get<double>();
    s.timings.update_s = t->at("update").get<double>();
    s.timings.etr_s = t->at("etr").get<double>();
  }
  return s;
}

std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

}  // namespace

json to_json(const RunReport& r) {
  json iters = json::array();
  for (const auto& s : r.iterations) iters.push_back(iteration_json(s));
  const auto& m = r.metrics;
  return {{"report_version", kReportVersion},
          {"command", r.command},
          {"config", r.config},
          {"dataset",
           {{"source", r.dataset.source},
            {"format", r.dataset.format},
            {"n", r.dataset.n},
            {"d", r.dataset.d},
            {"checksum", hex64(r.dataset.checksum)}}},
          {"k", {{"requested", r.k_requested}, {"achieved", r.k_achieved}}},
          {"termination", r.termination},
          {"iterations", iters},
          {"metrics",
           {{"recall_at_10", opt(m.recall_at_10)},
            {"recall_at_100", opt(m.recall_at_100)},
            {"wcss", opt(m.wcss)},
            {"vectors_explored", opt(m.vectors_explored)},
            {"ppc_mean", opt(m.ppc_mean)},
            {"ppc_std", opt(m.ppc_std)}}},
          {"work", {{"train", work_json(r.train_work)}, {"final_assign", work_json(r.final_assign_work)}}},
          {"timings",
           {{"preprocess", r.seconds.preprocess},
            {"train", r.seconds.train},
            {"final_assign", r.seconds.final_assign},
            {"ground_truth", r.seconds.ground_truth},
            {"evaluation", r.seconds.evaluation},
            {"total", r.seconds.total}}}};
}

RunReport report_from_json(const json& j) {
  try {
    const int version = j.at("report_version").get<int>();
    if (version != kReportVersion) {
      throw Error(ErrorCode::kVersionMismatch, "report version " + std::to_string(version) + ", expected " +
                                                   std::to_string(kReportVersion));
    }
    RunReport r;
    r.command = j.at("command").get<std::string>();
    r.config = j.at("config");
    const auto& ds = j.at("dataset");
    r.dataset.source = ds.at("source").get<std::string>();
    r.dataset.format = ds.at("format").get<std::string>();
    r.dataset.n = ds.at("n").get<std::size_t>();
    r.dataset.d = ds.at("d").get<std::size_t>();
    r.dataset.checksum = std::stoull(ds.at("checksum").get<std::string>(), nullptr, 16);
    r.k_requested = j.at("k").at("requested").get<std::size_t>();
    r.k_achieved = j.at("k").at("achieved").get<std::size_t>();
    r.termination = j.at("termination").get<std::string>();
    for (const auto& it : j.at("iterations")) r.iterations.push_back(iteration_from(it));
    const auto& m = j.at("metrics");
    r.metrics.recall_at_10 = opt_from(m, "recall_at_10");
    r.metrics.recall_at_100 = opt_from(m, "recall_at_100");
    r.metrics.wcss = opt_from(m, "wcss");
    r.metrics.vectors_explored = opt_from(m, "vectors_explored");
    r.metrics.ppc_mean = opt_from(m, "ppc_mean");
    r.metrics.ppc_std = opt_from(m, "ppc_std");
    r.train_work = work_from(j.at("work").at("train"));
    r.final_assign_work = work_from(j.at("work").at("final_assign"));
    if (const auto t = j.find("timings"); t != j.end()) {
      r.seconds.preprocess = t->at("preprocess").get<double>();
      r.seconds.train = t->at("train").get<double>();
      r.seconds.final_assign = t->at("final_assign").get<double>();
      r.seconds.ground_truth = t->at("ground_truth").get<double>();
      r.seconds.evaluation = t->at("evaluation").get<double>();
      r.seconds.total = t->at("total").get<double>();
    }
    return r;
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kMalformedHeader, std::string("malformed report: ") + e.what());
  }
}

void write_report(const std::filesystem::path& path, const RunReport& report) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw Error(ErrorCode::kIoError, "cannot create " + path.string());
  out << to_json(report).dump(2) << '\n';
  if (!out) throw Error(ErrorCode::kIoError, "write failed for " + path.string());
}

RunReport read_report(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kIoError, "cannot open " + path.string());
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kMalformedHeader, std::string("report is not valid JSON: ") + e.what());
  }
  return report_from_json(j);
}

json without_timings(json j) {
  if (j.is_object()) {
    j.erase("timings");
    for (auto& [key, value] : j.items()) value = without_timings(value);
  } else if (j.is_array()) {
    for (auto& value : j) value = without_timings(value);
  }
  return j;
}

}  // namespace skm
