// Parallel kernels against their serial references. Arg(0) is the serial
// path; other args are OpenMP thread counts.

#include <numeric>

#include <benchmark/benchmark.h>

#include "copresence/datagen.hpp"
#include "copresence/features.hpp"
#include "copresence/forest.hpp"
#include "copresence/parallel.hpp"

using namespace copresence;

namespace {

GenConfig bench_config() {
  auto cfg = benchmark_config(42);
  cfg.n_co = 60;
  cfg.n_non = 60;
  cfg.duration_s = 1.0;
  return cfg;
}

const std::vector<ContextPair>& corpus() {
  static const auto pairs = gen_pairs(bench_config());
  return pairs;
}

const TrainingSet& training() {
  static const TrainingSet set = [] {
    const auto schema = FeatureSchema::for_modalities(ModalitySet::all());
    const auto table = extract_features(corpus(), schema);
    std::vector<std::size_t> rows(table.rows), cols(schema.size());
    std::iota(rows.begin(), rows.end(), std::size_t{0});
    std::iota(cols.begin(), cols.end(), std::size_t{0});
    return project(table, rows, cols, schema.id());
  }();
  return set;
}

void BM_extract_features(benchmark::State& state) {
  const auto schema = FeatureSchema::for_modalities(ModalitySet::all());
  const auto& pairs = corpus();
  const auto threads = static_cast<int>(state.range(0));
  set_threads(threads);
  for (auto _ : state) {
    auto t = threads == 0 ? extract_features_serial(pairs, schema) : extract_features(pairs, schema);
    benchmark::DoNotOptimize(t.data.data());
  }
  state.SetItemsProcessed(state.iterations() * static_cast<long>(pairs.size()));
}

void BM_train_forest(benchmark::State& state) {
  const auto& data = training();
  ForestParams p;
  p.n_trees = 100;
  const auto threads = static_cast<int>(state.range(0));
  set_threads(threads);
  for (auto _ : state) {
    auto m = threads == 0 ? train_forest_serial(data, p) : train_forest(data, p);
    benchmark::DoNotOptimize(m.trees.data());
  }
  state.SetItemsProcessed(state.iterations() * p.n_trees);
}

void BM_gen_pairs(benchmark::State& state) {
  auto cfg = bench_config();
  cfg.duration_s = 0.5;
  const auto threads = static_cast<int>(state.range(0));
  set_threads(threads);
  for (auto _ : state) {
    auto pairs = threads == 0 ? gen_pairs_serial(cfg) : gen_pairs(cfg);
    benchmark::DoNotOptimize(pairs.data());
  }
  state.SetItemsProcessed(state.iterations() * (cfg.n_co + cfg.n_non));
}

}  // namespace

BENCHMARK(BM_extract_features)->Arg(0)->Arg(1)->Arg(2)->Arg(4)->Unit(benchmark::kMillisecond)->UseRealTime();
BENCHMARK(BM_train_forest)->Arg(0)->Arg(1)->Arg(2)->Arg(4)->Unit(benchmark::kMillisecond)->UseRealTime();
BENCHMARK(BM_gen_pairs)->Arg(0)->Arg(1)->Arg(2)->Arg(4)->Unit(benchmark::kMillisecond)->UseRealTime();

BENCHMARK_MAIN();
