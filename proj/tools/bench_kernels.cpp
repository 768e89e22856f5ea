// Serial reference kernels against their OpenMP counterparts.

#include <benchmark/benchmark.h>
#include <omp.h>

#include <memory>

#include "llmdet/corpus.hpp"
#include "llmdet/detection.hpp"
#include "llmdet/dictionary.hpp"
#include "llmdet/harness.hpp"
#include "llmdet/ngram_lm.hpp"
#include "llmdet/tokenizer.hpp"

using namespace llmdet;

namespace {

struct Fixture {
  std::unique_ptr<Experiment> exp;
  std::vector<TokenSequence> texts;
  ContextPlan plan;
  BuildOptions options;
};

const Fixture& fixture() {
  static const Fixture f = [] {
    Fixture f;
    ExperimentConfig c;
    c.sources = {{"science", "builtin:science", "", ""},
                 {"sports", "builtin:sports", "", ""},
                 {"cooking", "builtin:cooking", "", ""}};
    c.builtin_docs = 5000;
    f.exp = std::make_unique<Experiment>(build_experiment(c));
    for (std::size_t i = 0; i < 1000; ++i) f.texts.push_back(f.exp->texts[i % f.exp->texts.size()].tokens);
    f.options.n_max = c.n_max;
    f.options.top_ngrams = c.k_per_level;
    f.options.top_next = c.K_per_level;
    f.plan = plan_contexts(f.exp->texts_with_role(Role::kStatistical, 1), f.options);
    return f;
  }();
  return f;
}

void BM_FeaturesSerial(benchmark::State& state) {
  const auto& f = fixture();
  for (auto _ : state) benchmark::DoNotOptimize(extract_features_batch_serial(f.texts, f.exp->dicts));
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(f.texts.size()));
}

void BM_FeaturesParallel(benchmark::State& state) {
  const auto& f = fixture();
  omp_set_num_threads(static_cast<int>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(extract_features_batch(f.texts, f.exp->dicts));
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(f.texts.size()));
}

void BM_DetectSerial(benchmark::State& state) {
  const auto& f = fixture();
  const Detector d(*f.exp->vocab, f.exp->dicts, f.exp->classifier);
  for (auto _ : state) benchmark::DoNotOptimize(detect_batch_serial(d, f.texts));
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(f.texts.size()));
}

void BM_DetectParallel(benchmark::State& state) {
  const auto& f = fixture();
  omp_set_num_threads(static_cast<int>(state.range(0)));
  const Detector d(*f.exp->vocab, f.exp->dicts, f.exp->classifier);
  for (auto _ : state) benchmark::DoNotOptimize(detect_batch(d, f.texts));
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(f.texts.size()));
}

void BM_DictBuildSerial(benchmark::State& state) {
  const auto& f = fixture();
  const auto& lm = *f.exp->providers[1];
  for (auto _ : state) {
    benchmark::DoNotOptimize(build_dictionary_serial(lm, f.plan, f.options.top_next, f.options.n_max));
  }
}

void BM_DictBuildParallel(benchmark::State& state) {
  const auto& f = fixture();
  omp_set_num_threads(static_cast<int>(state.range(0)));
  const auto& lm = *f.exp->providers[1];
  for (auto _ : state) {
    benchmark::DoNotOptimize(build_dictionary(lm, f.plan, f.options.top_next, f.options.n_max));
  }
}

void thread_args(benchmark::internal::Benchmark* b) {
  const int max = omp_get_num_procs();
  for (int t = 1; t <= max; t *= 2) b->Arg(t);
  if ((max & (max - 1)) != 0) b->Arg(max);
}

}  // namespace

BENCHMARK(BM_FeaturesSerial)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_FeaturesParallel)->Apply(thread_args)->Unit(benchmark::kMillisecond)->UseRealTime();
BENCHMARK(BM_DetectSerial)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_DetectParallel)->Apply(thread_args)->Unit(benchmark::kMillisecond)->UseRealTime();
BENCHMARK(BM_DictBuildSerial)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_DictBuildParallel)->Apply(thread_args)->Unit(benchmark::kMillisecond)->UseRealTime();

BENCHMARK_MAIN();
