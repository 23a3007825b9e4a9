// skm: fit, evaluate and generate ground truth for SuperKMeans indexes.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "skm/distance.hpp"
#include "skm/evaluation.hpp"
#include "skm/hierarchical.hpp"
#include "skm/io.hpp"
#include "skm/kmeans.hpp"
#include "skm/preprocess.hpp"
#include "skm/report.hpp"
#include "skm/synth.hpp"

namespace {

using Clock = std::chrono::steady_clock;

double since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

struct Common {
  std::string input;
  std::string format;
  int threads = 0;
  std::string backend = "auto";
  std::string report;
};

skm::VectorFormat format_of(const std::string& path, const std::string& format) {
  return format.empty() ? skm::guess_vector_format(path) : skm::parse_vector_format(format);
}

const char* format_name(skm::VectorFormat f) { return f == skm::VectorFormat::kFvecs ? "fvecs" : "fbin"; }

skm::GemmBackend parse_backend(const std::string& s) {
  if (s == "auto") return skm::GemmBackend::kAuto;
  if (s == "optimized") return skm::GemmBackend::kOptimized;
  if (s == "portable") return skm::GemmBackend::kPortable;
  throw skm::Error(skm::ErrorCode::kInvalidConfig, "unknown backend '" + s + "'");
}

void add_common(CLI::App* app, Common& c, bool with_input = true) {
  if (with_input) {
    app->add_option("--input", c.input, "Vector file (fvecs or fbin)")->required()->check(CLI::ExistingFile);
    app->add_option("--format", c.format, "fvecs | fbin (default: from the extension)")
        ->check(CLI::IsMember({"fvecs", "fbin"}));
  }
  app->add_option("--threads", c.threads, "Worker threads (0 = all cores)")->check(CLI::NonNegativeNumber);
  app->add_option("--backend", c.backend, "Multiply backend")->check(CLI::IsMember({"auto", "optimized", "portable"}));
}

void apply_threads(const Common& c) {
  if (c.threads > 0) skm::set_worker_threads(c.threads);
}

skm::DatasetInfo describe(const std::string& path, skm::VectorFormat f, const skm::VectorSet& x) {
  return {path, format_name(f), x.n_rows(), x.dim(), skm::file_checksum(path)};
}

skm::FinalMetrics index_metrics(const skm::VectorSet& centroids, const skm::ClusterLists& lists,
                                const skm::VectorSet& x, const skm::VectorSet& queries, const skm::GroundTruth& gt,
                                std::size_t nprobe) {
  skm::FinalMetrics m;
  const auto counts = lists.counts();
  const auto balance = skm::balance_stats(counts);
  m.ppc_mean = balance.mean;
  m.ppc_std = balance.std_dev;
  if (queries.n_rows() > 0) {
    const auto q10 = skm::evaluate_index(centroids.view(), lists, x.view(), queries.view(), gt, nprobe, 10);
    const auto q100 = skm::evaluate_index(centroids.view(), lists, x.view(), queries.view(), gt, nprobe, 100);
    m.recall_at_10 = q10.recall;
    m.recall_at_100 = q100.recall;
    m.vectors_explored = q100.mean_vectors_explored;
  }
  return m;
}

struct FitArgs {
  Common common;
  std::size_t k = 0;
  int iters = 25;
  double sample = 1.0;
  std::string etr_tol = "off";
  bool hierarchical = false;
  int meso_iters = 3;
  int fine_iters = 5;
  std::uint64_t seed = 42;
  std::string out_centroids;
  bool normalize = false;
  bool ignore_convergence = false;
  std::size_t eval_queries = 1000;
};

std::optional<double> parse_etr_tol(const std::string& s) {
  if (s == "off") return std::nullopt;
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(s, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used != s.size() || !(v > 0.0) || !std::isfinite(v)) {
    throw skm::Error(skm::ErrorCode::kInvalidConfig, "--etr-tol expects 'off' or a positive number, got '" + s + "'");
  }
  return v;
}

int run_fit(const FitArgs& a) {
  const auto t_total = Clock::now();
  apply_threads(a.common);
  const auto fmt = format_of(a.common.input, a.common.format);
  skm::VectorSet x = skm::load_vectors(a.common.input, fmt);
  if (a.normalize) skm::l2_normalize_rows(x);

  skm::KMeansConfig cfg;
  cfg.k = a.k != 0 ? a.k : skm::default_k(x.n_rows());
  cfg.max_iters = a.iters;
  cfg.sampling_fraction = a.sample;
  cfg.seed = a.seed;
  cfg.stop_on_convergence = !a.ignore_convergence;
  cfg.backend = parse_backend(a.common.backend);
  if (const auto tol = parse_etr_tol(a.etr_tol)) {
    skm::EtrConfig etr;
    etr.tolerance = *tol;
    cfg.etr = etr;
  }

  skm::RunReport report;
  report.command = "fit";
  report.config = {{"k", cfg.k},
                   {"iters", cfg.max_iters},
                   {"sample", cfg.sampling_fraction},
                   {"etr_tol", a.etr_tol},
                   {"hierarchical", a.hierarchical},
                   {"meso_iters", a.meso_iters},
                   {"fine_iters", a.fine_iters},
                   {"seed", cfg.seed},
                   {"threads", a.common.threads},
                   {"backend", skm::to_string(skm::resolve_backend(cfg.backend))},
                   {"normalize", a.normalize},
                   {"stop_on_convergence", cfg.stop_on_convergence},
                   {"eval_queries", a.eval_queries}};
  report.dataset = describe(a.common.input, fmt, x);
  report.k_requested = cfg.k;

  skm::KMeansResult fit;
  if (a.hierarchical) {
    skm::HierarchicalConfig h;
    h.k_total = cfg.k;
    h.meso_iters = a.meso_iters;
    h.fine_iters = a.fine_iters;
    h.base = cfg;
    auto hr = skm::hierarchical_fit(x, h);
    report.k_achieved = hr.k.achieved;
    report.config["meso_k"] = hr.meso_k;
    fit = std::move(hr.fit);
  } else {
    fit = skm::fit(x, cfg);
    report.k_achieved = fit.centroids.n_rows();
  }
  report.iterations = fit.stats;
  report.termination = skm::to_string(fit.terminated_by);
  report.train_work = fit.train_work;
  report.final_assign_work = fit.final_assign_work;
  report.seconds.preprocess = fit.preprocess_seconds;
  report.seconds.train = fit.train_seconds;
  report.seconds.final_assign = fit.final_assign_seconds;
  report.seconds.ground_truth = fit.gt_seconds;

  const std::size_t k = fit.centroids.n_rows();
  const auto lists = skm::build_cluster_lists(fit.full_assignments, k);
  const auto t_eval = Clock::now();
  const std::size_t nq = std::min(a.eval_queries, x.n_rows());
  skm::VectorSet queries(nq, x.dim());
  skm::GroundTruth gt;
  if (nq > 0) {
    const auto qidx =
        skm::init_centroid_indices(x.n_rows(), nq, skm::derive_seed(cfg.seed, skm::SeedStream::kQueries));
    for (std::size_t q = 0; q < nq; ++q) std::copy_n(x.row(qidx[q]).data(), x.dim(), queries.row(q).data());
    const auto t_gt = Clock::now();
    gt = skm::brute_force_topk(x.view(), queries.view(), 100, cfg.backend);
    report.seconds.ground_truth += since(t_gt);
  }
  report.metrics = index_metrics(fit.centroids, lists, x, queries, gt, skm::nprobe_for(0.01, k));
  report.metrics.wcss = skm::wcss(x.view(), fit.centroids.view(), fit.full_assignments);
  report.seconds.evaluation = since(t_eval);

  if (!a.out_centroids.empty()) {
    skm::CentroidModel model{fit.centroids, fit.rotation_seed, lists};
    skm::save_centroids(a.out_centroids, model);
  }
  report.seconds.total = since(t_total);
  if (!a.common.report.empty()) skm::write_report(a.common.report, report);

  std::printf("k=%zu iterations=%zu termination=%s wcss=%.6g", k, fit.stats.size(), report.termination.c_str(),
              *report.metrics.wcss);
  if (report.metrics.recall_at_100) std::printf(" recall@100=%.4f", *report.metrics.recall_at_100);
  std::printf(" train=%.3fs\n", report.seconds.train);
  return 0;
}

struct EvalArgs {
  Common common;
  std::string centroids;
  std::string queries;
  std::string gt;
  double nprobe_frac = 0.01;
  std::size_t topk = 100;
};

int run_eval(const EvalArgs& a) {
  const auto t_total = Clock::now();
  apply_threads(a.common);
  const auto backend = parse_backend(a.common.backend);
  const auto fmt = format_of(a.common.input, a.common.format);
  const skm::VectorSet x = skm::load_vectors(a.common.input, fmt);
  skm::CentroidModel model = skm::load_centroids(a.centroids);
  if (model.centroids.dim() != x.dim()) {
    throw skm::Error(skm::ErrorCode::kDimensionMismatch, "centroid dimension " + std::to_string(model.centroids.dim()) +
                                                             " does not match data dimension " + std::to_string(x.dim()));
  }
  const skm::VectorSet queries = skm::load_vectors(a.queries, skm::guess_vector_format(a.queries));
  if (queries.dim() != x.dim()) throw skm::Error(skm::ErrorCode::kDimensionMismatch, "query dimension mismatch");

  const std::size_t k = model.centroids.n_rows();
  skm::ClusterLists lists;
  if (model.lists && model.lists->ids.size() == x.n_rows()) {
    lists = std::move(*model.lists);
  } else {
    lists = skm::build_cluster_lists(skm::assign_exhaustive(x.view(), model.centroids.view(), backend), k);
  }

  skm::RunReport report;
  report.command = "eval";
  const auto t_gt = Clock::now();
  skm::GroundTruth gt;
  if (!a.gt.empty()) {
    gt = skm::load_ground_truth(a.gt);
    if (gt.n_queries != queries.n_rows()) {
      throw skm::Error(skm::ErrorCode::kDimensionMismatch, "ground truth has " + std::to_string(gt.n_queries) +
                                                               " rows for " + std::to_string(queries.n_rows()) +
                                                               " queries");
    }
  } else {
    gt = skm::brute_force_topk(x.view(), queries.view(), std::max<std::size_t>(a.topk, 100), backend);
  }
  report.seconds.ground_truth = since(t_gt);

  const auto t_eval = Clock::now();
  const std::size_t nprobe = skm::nprobe_for(a.nprobe_frac, k);
  report.metrics = index_metrics(model.centroids, lists, x, queries, gt, nprobe);
  std::vector<std::uint32_t> asg(x.n_rows());
  for (std::size_t j = 0; j < k; ++j) {
    for (const auto id : lists.list(j)) asg[id] = static_cast<std::uint32_t>(j);
  }
  report.metrics.wcss = skm::wcss(x.view(), model.centroids.view(), asg);
  const auto at_k = skm::evaluate_index(model.centroids.view(), lists, x.view(), queries.view(), gt, nprobe, a.topk);
  report.seconds.evaluation = since(t_eval);

  report.config = {{"centroids", a.centroids}, {"queries", a.queries}, {"gt", a.gt.empty() ? "computed" : a.gt},
                   {"nprobe_frac", a.nprobe_frac}, {"nprobe", nprobe}, {"topk", a.topk},
                   {"recall_at_topk", at_k.recall},
                   {"threads", a.common.threads}};
  report.dataset = describe(a.common.input, fmt, x);
  report.k_requested = k;
  report.k_achieved = k;
  report.termination = "none";
  report.seconds.total = since(t_total);
  if (!a.common.report.empty()) skm::write_report(a.common.report, report);
  std::printf("k=%zu nprobe=%zu recall@%zu=%.4f vectors_explored=%.1f\n", k, nprobe, a.topk, at_k.recall,
              at_k.mean_vectors_explored);
  return 0;
}

struct GtArgs {
  Common common;
  std::string queries;
  std::size_t k = 100;
  std::string out;
};

int run_gt(const GtArgs& a) {
  apply_threads(a.common);
  const auto fmt = format_of(a.common.input, a.common.format);
  const skm::VectorSet x = skm::load_vectors(a.common.input, fmt);
  const skm::VectorSet queries = skm::load_vectors(a.queries, skm::guess_vector_format(a.queries));
  if (queries.dim() != x.dim()) throw skm::Error(skm::ErrorCode::kDimensionMismatch, "query dimension mismatch");
  const auto gt = skm::brute_force_topk(x.view(), queries.view(), a.k, parse_backend(a.common.backend));
  skm::save_ground_truth(a.out, gt);
  std::printf("wrote %zu x %zu neighbors to %s\n", gt.n_queries, gt.k_gt, a.out.c_str());
  return 0;
}

struct SynthArgs {
  std::string kind = "blobs";
  std::size_t n = 10000;
  std::size_t d = 128;
  std::size_t centers = 16;
  double tail_variance = 1e-3;
  std::uint64_t seed = 0;
  std::string out;
  std::string format;
};

int run_synth(const SynthArgs& a) {
  skm::VectorSet x;
  if (a.kind == "blobs") {
    x = skm::make_blobs({a.n, a.d, a.centers, 10.0f, 1.0f, a.seed});
  } else if (a.kind == "skewed") {
    x = skm::make_skewed({a.n, a.d, a.centers, a.tail_variance, a.seed});
  } else {
    x = skm::make_gaussian(a.n, a.d, a.seed);
  }
  skm::save_vectors(a.out, x, format_of(a.out, a.format));
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"SuperKMeans clustering for vector indexes"};
  app.require_subcommand(1);

  FitArgs fit;
  auto* fit_cmd = app.add_subcommand("fit", "Cluster a vector file");
  add_common(fit_cmd, fit.common);
  fit_cmd->add_option("--k", fit.k, "Clusters (default 4 * ceil(sqrt(N)))")->check(CLI::PositiveNumber);
  fit_cmd->add_option("--iters", fit.iters, "Maximum iterations")->check(CLI::PositiveNumber);
  fit_cmd->add_option("--sample", fit.sample, "Training sample fraction")->check(CLI::Range(1e-9, 1.0));
  fit_cmd->add_option("--etr-tol", fit.etr_tol, "Early termination by recall: off or a tolerance");
  fit_cmd->add_flag("--hierarchical", fit.hierarchical, "Meso then fine clustering");
  fit_cmd->add_option("--meso-iters", fit.meso_iters, "Hierarchical meso-phase iterations")->check(CLI::PositiveNumber);
  fit_cmd->add_option("--fine-iters", fit.fine_iters, "Hierarchical fine-phase iterations")->check(CLI::PositiveNumber);
  fit_cmd->add_option("--seed", fit.seed, "Random seed");
  fit_cmd->add_option("--out-centroids", fit.out_centroids, "Write the model (centroids and lists)");
  fit_cmd->add_option("--report", fit.common.report, "Write a JSON run report");
  fit_cmd->add_flag("--normalize", fit.normalize, "L2-normalize rows first (angular data)");
  fit_cmd->add_flag("--ignore-convergence", fit.ignore_convergence, "Run all iterations even when nothing changes");
  fit_cmd->add_option("--eval-queries", fit.eval_queries, "Queries sampled from the input for the final metrics")
      ->check(CLI::NonNegativeNumber);

  EvalArgs ev;
  auto* eval_cmd = app.add_subcommand("eval", "Measure IVF recall of a saved model");
  add_common(eval_cmd, ev.common);
  eval_cmd->add_option("--centroids", ev.centroids, "Model written by fit")->required()->check(CLI::ExistingFile);
  eval_cmd->add_option("--queries", ev.queries, "Query vectors")->required()->check(CLI::ExistingFile);
  eval_cmd->add_option("--gt", ev.gt, "Ground truth (ivecs); computed when absent")->check(CLI::ExistingFile);
  eval_cmd->add_option("--nprobe-frac", ev.nprobe_frac, "Fraction of clusters probed")->check(CLI::Range(1e-9, 1.0));
  eval_cmd->add_option("--topk", ev.topk, "Neighbors per query")->check(CLI::PositiveNumber);
  eval_cmd->add_option("--report", ev.common.report, "Write a JSON run report");

  GtArgs gt;
  auto* gt_cmd = app.add_subcommand("gt", "Brute-force ground truth");
  add_common(gt_cmd, gt.common);
  gt_cmd->add_option("--queries", gt.queries, "Query vectors")->required()->check(CLI::ExistingFile);
  gt_cmd->add_option("--k", gt.k, "Neighbors per query")->check(CLI::PositiveNumber);
  gt_cmd->add_option("--out", gt.out, "Output ivecs file")->required();

  SynthArgs syn;
  auto* syn_cmd = app.add_subcommand("synth", "Generate a synthetic dataset");
  syn_cmd->add_option("--kind", syn.kind, "blobs | skewed | gaussian")
      ->check(CLI::IsMember({"blobs", "skewed", "gaussian"}));
  syn_cmd->add_option("--n", syn.n, "Rows")->check(CLI::PositiveNumber);
  syn_cmd->add_option("--d", syn.d, "Dimensions")->check(CLI::PositiveNumber);
  syn_cmd->add_option("--centers", syn.centers, "Blob centers")->check(CLI::PositiveNumber);
  syn_cmd->add_option("--tail-variance", syn.tail_variance, "Variance ratio of the last dimension (skewed)")
      ->check(CLI::Range(1e-12, 1.0));
  syn_cmd->add_option("--seed", syn.seed, "Random seed");
  syn_cmd->add_option("--out", syn.out, "Output file")->required();
  syn_cmd->add_option("--format", syn.format, "fvecs | fbin (default: from the extension)")
      ->check(CLI::IsMember({"fvecs", "fbin"}));

  CLI11_PARSE(app, argc, argv);

  try {
    if (fit_cmd->parsed()) return run_fit(fit);
    if (eval_cmd->parsed()) return run_eval(ev);
    if (gt_cmd->parsed()) return run_gt(gt);
    if (syn_cmd->parsed()) return run_synth(syn);
  } catch (const skm::Error& e) {
    std::fprintf(stderr, "error [%s]: %s\n", skm::to_string(e.code()), e.what());
    return 2;
  }
  return 1;
}
