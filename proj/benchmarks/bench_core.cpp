#include <benchmark/benchmark.h>

#include "hnm/evalharness.hpp"
#include "hnm/model.hpp"
#include "hnm/rng.hpp"
#include "hnm/synth.hpp"
#include "hnm/textnorm.hpp"

namespace {

const hnm::Collection& corpus() {
  static const auto docs = [] {
    auto c = hnm::synth::make_corpus({.seed = 1, .humans_per_domain = 200});
    for (auto& d : c) d.text = hnm::textnorm::normalize(d.text);
    return c;
  }();
  return docs;
}

void BM_Normalize(benchmark::State& state) {
  const auto& docs = corpus();
  std::size_t i = 0, bytes = 0;
  for (auto _ : state) {
    const auto& t = docs[i++ % docs.size()].text;
    benchmark::DoNotOptimize(hnm::textnorm::normalize(t));
    bytes += t.size();
  }
  state.SetBytesProcessed(static_cast<std::int64_t>(bytes));
}
BENCHMARK(BM_Normalize);

void BM_Featurize(benchmark::State& state) {
  const auto& docs = corpus();
  std::size_t i = 0, bytes = 0;
  for (auto _ : state) {
    const auto& t = docs[i++ % docs.size()].text;
    benchmark::DoNotOptimize(hnm::model::featurize(t));
    bytes += t.size();
  }
  state.SetBytesProcessed(static_cast<std::int64_t>(bytes));
}
BENCHMARK(BM_Featurize);

void BM_PredictBatch(benchmark::State& state) {
  const auto& docs = corpus();
  hnm::model::ClassifierModel m;
  hnm::Rng rng(1);
  for (auto& w : m.mutable_weights()) w = rng.uniform() - 0.5;
  std::vector<hnm::model::FeatureVector> feats;
  for (const auto& d : docs) feats.push_back(hnm::model::featurize(d.text));
  std::vector<const hnm::model::FeatureVector*> ptrs;
  for (const auto& f : feats) ptrs.push_back(&f);
  for (auto _ : state) benchmark::DoNotOptimize(hnm::model::predict_batch(m, ptrs));
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(ptrs.size()));
}
BENCHMARK(BM_PredictBatch);

void BM_Calibrate(benchmark::State& state) {
  hnm::Rng rng(2);
  std::vector<double> scores(static_cast<std::size_t>(state.range(0)));
  for (auto& s : scores) s = rng.uniform();
  for (auto _ : state) benchmark::DoNotOptimize(hnm::eval::calibrate_threshold(scores, 0.01));
}
BENCHMARK(BM_Calibrate)->Arg(1000)->Arg(100000);

}  // namespace

BENCHMARK_MAIN();
