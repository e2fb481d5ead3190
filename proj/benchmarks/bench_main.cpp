#include <benchmark/benchmark.h>

#include "mollia/aggregator.hpp"
#include "mollia/classifier.hpp"
#include "mollia/featurizer.hpp"
#include "mollia/molam.hpp"
#include "mollia/query.hpp"
#include "mollia/synthetic.hpp"

using namespace mollia;

namespace {

const SyntheticBenchmark& bench_corpus() {
  static const auto b = make_text_benchmark(SyntheticTextConfig{}, 2000, 0, 0, 1);
  return b;
}

std::vector<SparseVector> featurized(std::size_t n, int buckets_log2 = 16) {
  TextFeaturizer f(FeaturizerConfig{.buckets_log2 = buckets_log2});
  std::vector<SparseVector> out;
  for (std::size_t i = 0; i < n; ++i) out.push_back(f.transform(bench_corpus().pool[i].text));
  return out;
}

void BM_Featurize(benchmark::State& state) {
  const TextFeaturizer f;
  const auto& pool = bench_corpus().pool;
  std::size_t i = 0;
  for (auto _ : state) {
    benchmark::DoNotOptimize(f.transform(pool[i++ % pool.size()].text));
  }
  state.SetItemsProcessed(state.iterations());
}
BENCHMARK(BM_Featurize);

void BM_GbdtTrain(benchmark::State& state) {
  const auto& b = bench_corpus();
  const auto panel = make_annotator_panel(PanelConfig{}, 4, 1);
  Dataset d;
  d.num_classes = 4;
  for (std::size_t i = 0; i < std::size_t(state.range(0)); ++i) {
    std::vector<AnnotatorSignal> row;
    for (const auto& a : panel) row.push_back(query_signal(a, b.pool[i], b.labels, 1));
    d.push_back(assemble_features(row).h, *b.pool[i].gold_label);
  }
  const auto params = gbdt_profile("agnews");
  for (auto _ : state) benchmark::DoNotOptimize(train_gbdt(d, params, 1));
}
BENCHMARK(BM_GbdtTrain)->Arg(50)->Arg(500)->Unit(benchmark::kMillisecond);

void BM_Coreset(benchmark::State& state) {
  const auto x = featurized(std::size_t(state.range(0)));
  std::vector<std::string> ids;
  for (std::size_t i = 0; i < x.size(); ++i) ids.push_back(bench_corpus().pool[i].id);
  const auto labeled = featurized(50);
  const QueryContext ctx{.ids = ids, .features = x, .labeled_features = labeled, .batch_size = 50};
  for (auto _ : state) benchmark::DoNotOptimize(select_coreset(ctx));
}
BENCHMARK(BM_Coreset)->Arg(500)->Arg(2000)->Unit(benchmark::kMillisecond);

void BM_ClassifierEpoch(benchmark::State& state) {
  const auto x = featurized(500);
  std::vector<RobustExample> ex;
  for (std::size_t i = 0; i < x.size(); ++i) {
    RobustExample e;
    e.features = x[i];
    e.target.y_plus = *bench_corpus().pool[i].gold_label;
    e.target.w_d = i % 3 == 0 ? 0.5 : 1.0;
    ex.push_back(std::move(e));
  }
  ClassifierConfig cfg;
  cfg.max_epochs = 1;
  cfg.batch_size = 64;
  cfg.architecture = state.range(0) ? Architecture::Mlp : Architecture::Linear;
  for (auto _ : state) benchmark::DoNotOptimize(train_classifier(ex, std::size_t{1} << 16, 4, cfg, {}, 1));
}
BENCHMARK(BM_ClassifierEpoch)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
