// SPDX-License-Identifier: Apache-2.0
// Microbenchmarks for the hot paths of labeling and training.

#include <benchmark/benchmark.h>

#include <random>
#include <string>
#include <vector>

#include "labelcost/cost_model.hpp"
#include "labelcost/learner.hpp"
#include "labelcost/metrics.hpp"
#include "labelcost/strategy.hpp"
#include "labelcost/supervision_set.hpp"
#include "labelcost/synth.hpp"

using namespace labelcost;

namespace {

std::vector<std::string> random_words(std::size_t n, std::uint64_t seed) {
  static const std::vector<std::string> vocab{"the", "a", "cat", "sat", "on", "mat", "dog", "ran", "far", "home"};
  std::mt19937_64 gen(seed);
  std::vector<std::string> out(n);
  for (auto& w : out) w = vocab[gen() % vocab.size()];
  return out;
}

void BM_RougeL(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const auto a = random_words(n, 1);
  const auto b = random_words(n, 2);
  for (auto _ : state) benchmark::DoNotOptimize(rouge_l(a, b));
  state.SetComplexityN(state.range(0));
}
BENCHMARK(BM_RougeL)->RangeMultiplier(4)->Range(16, 1024)->Complexity();

void BM_Featurize(benchmark::State& state) {
  const HashedFeatureSpec spec{1 << 18, {1, 2}, 0};
  std::string text;
  for (const auto& w : random_words(static_cast<std::size_t>(state.range(0)), 3)) text += w + " ";
  for (auto _ : state) benchmark::DoNotOptimize(featurize(text, spec));
  state.SetBytesProcessed(static_cast<std::int64_t>(state.iterations() * text.size()));
}
BENCHMARK(BM_Featurize)->Arg(20)->Arg(400);

void BM_TrainEpoch(benchmark::State& state) {
  WordClusterSpec spec;
  spec.num_items = static_cast<std::size_t>(state.range(0));
  spec.seed = 4;
  const Pool pool = make_word_cluster_pool(spec);
  std::vector<LabeledExample> records;
  for (const auto& ex : pool.examples()) records.push_back({ex.id, *ex.gold_label, LabelSource::kHuman, 1.0, Money{}, 0});
  const auto set = assemble(records, 1.0);
  const HashedFeatureSpec features{4096, {1}, 0};
  for (auto _ : state) benchmark::DoNotOptimize(train(set, pool, features, Hyperparams{0.005, 1, 32}, 0));
  state.SetItemsProcessed(static_cast<std::int64_t>(state.iterations() * pool.size()));
}
BENCHMARK(BM_TrainEpoch)->Arg(500)->Arg(2000);

void BM_PlanActive(benchmark::State& state) {
  WordClusterSpec spec;
  spec.num_items = 5000;
  spec.seed = 5;
  const Pool pool = make_word_cluster_pool(spec, 19.3);
  const auto config = StrategyConfig::active(0.5, 2, 0);
  for (auto _ : state) benchmark::DoNotOptimize(plan(Money::parse("140.8"), pool, config, CostSchedule{}));
}
BENCHMARK(BM_PlanActive);

}  // namespace

BENCHMARK_MAIN();
