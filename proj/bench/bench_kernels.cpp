// Parallel kernels against the serial reference, and the BLAS multiply
// against the portable one.

#include <benchmark/benchmark.h>

#include <vector>

#include "reference.hpp"
#include "skm/distance.hpp"
#include "skm/kmeans.hpp"
#include "skm/synth.hpp"

namespace {

using namespace skm;

void BM_Matmul(benchmark::State& state, GemmBackend backend) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const auto d = static_cast<std::size_t>(state.range(1));
  const VectorSet x = make_gaussian(n, d, 1);
  const VectorSet c = make_gaussian(1024, d, 2);
  std::vector<float> out(n * 1024);
  for (auto _ : state) {
    matmul(x.view(), c.view(), d, out, backend);
    benchmark::DoNotOptimize(out.data());
  }
  state.SetItemsProcessed(static_cast<std::int64_t>(state.iterations() * n * 1024 * d));
}

void BM_MatmulReference(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const auto d = static_cast<std::size_t>(state.range(1));
  const VectorSet x = make_gaussian(n, d, 1);
  const VectorSet c = make_gaussian(1024, d, 2);
  for (auto _ : state) benchmark::DoNotOptimize(ref::matmul(x.view(), c.view()));
  state.SetItemsProcessed(static_cast<std::int64_t>(state.iterations() * n * 1024 * d));
}

BENCHMARK_CAPTURE(BM_Matmul, optimized, GemmBackend::kOptimized)->Args({4096, 128})->Args({4096, 768})->Unit(benchmark::kMillisecond);
BENCHMARK_CAPTURE(BM_Matmul, portable, GemmBackend::kPortable)->Args({4096, 128})->Args({4096, 768})->Unit(benchmark::kMillisecond);
BENCHMARK(BM_MatmulReference)->Args({512, 128})->Args({512, 768})->Unit(benchmark::kMillisecond);

struct AssignData {
  VectorSet x;
  VectorSet c;
};

const AssignData& assign_data(std::size_t d) {
  static std::vector<std::pair<std::size_t, AssignData>> cache;
  for (const auto& [dim, data] : cache) {
    if (dim == d) return data;
  }
  VectorSet x = make_blobs({20000, d, 64, 10.0f, 1.0f, 3});
  VectorSet c = make_blobs({1000, d, 64, 10.0f, 1.0f, 4});
  cache.emplace_back(d, AssignData{std::move(x), std::move(c)});
  return cache.back().second;
}

void BM_AssignPruned(benchmark::State& state) {
  const auto d = static_cast<std::size_t>(state.range(0));
  const auto& data = assign_data(d);
  KMeansConfig cfg;
  cfg.k = data.c.n_rows();
  RotationMatrix identity;
  identity.dim = d;
  identity.data.assign(d * d, 0.0f);
  for (std::size_t i = 0; i < d; ++i) identity.data[i * d + i] = 1.0f;
  for (auto _ : state) {
    benchmark::DoNotOptimize(
        final_assign(data.x.view(), identity, data.c.view(), cfg, initial_d_prime(d, 0.125)).assignments.data());
  }
}

void BM_AssignExhaustive(benchmark::State& state) {
  const auto& data = assign_data(static_cast<std::size_t>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(assign_exhaustive(data.x.view(), data.c.view()).data());
}

void BM_AssignReference(benchmark::State& state) {
  const auto& data = assign_data(static_cast<std::size_t>(state.range(0)));
  const auto x = data.x.view().row_range(0, 2000);
  for (auto _ : state) benchmark::DoNotOptimize(ref::exhaustive_argmin(x, data.c.view()));
}

BENCHMARK(BM_AssignPruned)->Arg(256)->Arg(1024)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_AssignExhaustive)->Arg(256)->Arg(1024)->Unit(benchmark::kMillisecond);
// A tenth of the rows: the serial oracle is slow.
BENCHMARK(BM_AssignReference)->Arg(256)->Arg(1024)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
