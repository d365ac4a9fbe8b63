// Serial reference vs OpenMP version of each parallel kernel. Run with
// --benchmark_filter to pick kernels; the worker count follows OMP_NUM_THREADS.

#include <benchmark/benchmark.h>

#include "oracles.hpp"
#include "playtrace/aggregation.hpp"
#include "playtrace/forest.hpp"
#include "playtrace/kernels.hpp"
#include "playtrace/knn.hpp"
#include "playtrace/selection.hpp"
#include "playtrace/synth.hpp"

using namespace playtrace;

namespace {

template <bool Parallel>
void BM_Matmul(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const Matrix a = oracle::random_matrix(n, 128, 1), b = oracle::random_matrix(128, 128, 2);
  for (auto _ : state) benchmark::DoNotOptimize(Parallel ? kernels::matmul(a, b) : kernels::matmul_serial(a, b));
  state.SetItemsProcessed(static_cast<std::int64_t>(state.iterations() * n));
}

template <bool Parallel>
void BM_KnnPredict(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const Matrix x = oracle::random_matrix(n, 11, 3), q = oracle::random_matrix(500, 11, 4);
  std::vector<int> y(n);
  for (std::size_t i = 0; i < n; ++i) y[i] = static_cast<int>(i % 2);
  const auto model = knn_fit(x, y, 5);
  for (auto _ : state) benchmark::DoNotOptimize(Parallel ? knn_predict(model, q) : knn_predict_serial(model, q));
  state.SetItemsProcessed(static_cast<std::int64_t>(state.iterations() * q.rows()));
}

template <bool Parallel>
void BM_ForestFit(benchmark::State& state) {
  Matrix x;
  std::vector<int> y;
  oracle::blobs(static_cast<std::size_t>(state.range(0)), 11, 0.3, 5, x, y);
  ForestConfig cfg;
  cfg.tree_count = 20;
  for (auto _ : state) benchmark::DoNotOptimize(Parallel ? forest_fit(x, y, cfg) : forest_fit_serial(x, y, cfg));
}

template <bool Parallel>
void BM_ForestPredict(benchmark::State& state) {
  Matrix x;
  std::vector<int> y;
  oracle::blobs(2000, 11, 0.3, 6, x, y);
  ForestConfig cfg;
  cfg.tree_count = 50;
  const auto model = forest_fit(x, y, cfg);
  for (auto _ : state)
    benchmark::DoNotOptimize(Parallel ? forest_predict(model, x) : forest_predict_serial(model, x));
}

const std::vector<RawEvent>& corpus_events() {
  static const std::vector<RawEvent> events = [] {
    SynthConfig c;
    c.sessions = 200;
    return generate_in_memory(c).events;
  }();
  return events;
}

template <bool Parallel>
void BM_Aggregate(benchmark::State& state) {
  const auto& events = corpus_events();
  const auto specs = default_specs();
  for (auto _ : state) {
    Aggregator agg(specs);
    if (Parallel) agg.add_batch(events);
    else agg.add_batch_serial(events);
    benchmark::DoNotOptimize(agg.finish());
  }
  state.SetItemsProcessed(static_cast<std::int64_t>(state.iterations() * events.size()));
}

template <bool Parallel>
void BM_Correlation(benchmark::State& state) {
  const Matrix x = oracle::random_matrix(static_cast<std::size_t>(state.range(0)), 40, 7);
  std::vector<std::string> names;
  for (std::size_t j = 0; j < x.cols(); ++j) names.push_back("f" + std::to_string(j));
  std::vector<int> label(x.rows());
  for (std::size_t i = 0; i < label.size(); ++i) label[i] = static_cast<int>(i % 2);
  for (auto _ : state)
    benchmark::DoNotOptimize(Parallel ? correlation_matrix(x, names, label)
                                      : correlation_matrix_serial(x, names, label));
}

/// Generation has no separate serial path; the worker cap stands in for it.
template <bool Parallel>
void BM_Synth(benchmark::State& state) {
  SynthConfig c;
  c.sessions = 100;
  parallel::set_workers(Parallel ? 0 : 1);
  for (auto _ : state) benchmark::DoNotOptimize(generate_in_memory(c));
  parallel::set_workers(0);
}

}  // namespace

BENCHMARK(BM_Matmul<false>)->Name("matmul/serial")->Arg(1024);
BENCHMARK(BM_Matmul<true>)->Name("matmul/openmp")->Arg(1024);
BENCHMARK(BM_KnnPredict<false>)->Name("knn_predict/serial")->Arg(5000);
BENCHMARK(BM_KnnPredict<true>)->Name("knn_predict/openmp")->Arg(5000);
BENCHMARK(BM_ForestFit<false>)->Name("forest_fit/serial")->Arg(2000)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_ForestFit<true>)->Name("forest_fit/openmp")->Arg(2000)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_ForestPredict<false>)->Name("forest_predict/serial");
BENCHMARK(BM_ForestPredict<true>)->Name("forest_predict/openmp");
BENCHMARK(BM_Aggregate<false>)->Name("aggregate/serial")->Unit(benchmark::kMillisecond);
BENCHMARK(BM_Aggregate<true>)->Name("aggregate/openmp")->Unit(benchmark::kMillisecond);
BENCHMARK(BM_Correlation<false>)->Name("correlation/serial")->Arg(20000);
BENCHMARK(BM_Correlation<true>)->Name("correlation/openmp")->Arg(20000);
BENCHMARK(BM_Synth<false>)->Name("synth/1_worker")->Unit(benchmark::kMillisecond);
BENCHMARK(BM_Synth<true>)->Name("synth/all_workers")->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
