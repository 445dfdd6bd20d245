#include <benchmark/benchmark.h>

#include "gradibd/bucketizer.hpp"
#include "gradibd/cohort.hpp"
#include "gradibd/metrics.hpp"
#include "gradibd/model.hpp"
#include "gradibd/random.hpp"

namespace {

using namespace gradibd;

struct Fixture {
  std::vector<CohortRecord> records;
  CodeVocab vocab;
  std::vector<IcdGraph> graphs;

  Fixture() {
    records = generate_synthetic({.n_patients = 200});
    vocab = build_vocab(all_codes(records));
    for (const auto& r : records) graphs.push_back(build_graph(bucketize(r, vocab, kDefaultTau)));
  }
};

const Fixture& fixture() {
  static const Fixture f;
  return f;
}

ModelConfig width(int scale) {
  ModelConfig c;
  c.d_node = 16 * scale;
  c.d_graph = 64 * scale;
  c.d_hidden = 32 * scale;
  return c;
}

void BM_Bucketize(benchmark::State& state) {
  const auto& f = fixture();
  std::size_t i = 0;
  for (auto _ : state) {
    auto m = bucketize(f.records[i++ % f.records.size()], f.vocab, static_cast<int>(state.range(0)));
    benchmark::DoNotOptimize(m);
  }
}
BENCHMARK(BM_Bucketize)->Arg(1)->Arg(7)->Arg(30);

void BM_BuildGraph(benchmark::State& state) {
  const auto& f = fixture();
  std::vector<BucketMatrix> matrices;
  for (const auto& r : f.records) matrices.push_back(bucketize(r, f.vocab, kDefaultTau));
  std::size_t i = 0;
  for (auto _ : state) {
    auto g = build_graph(matrices[i++ % matrices.size()]);
    benchmark::DoNotOptimize(g);
  }
}
BENCHMARK(BM_BuildGraph);

void BM_Forward(benchmark::State& state) {
  const auto& f = fixture();
  const auto config = width(static_cast<int>(state.range(0)));
  const auto params = ModelParams::init(config, f.vocab.size(), 1);
  std::size_t i = 0;
  for (auto _ : state) {
    benchmark::DoNotOptimize(predict(f.graphs[i++ % f.graphs.size()], params, config));
  }
}
BENCHMARK(BM_Forward)->Arg(1)->Arg(4)->Unit(benchmark::kMicrosecond);

void BM_ForwardBackward(benchmark::State& state) {
  const auto& f = fixture();
  const auto config = width(static_cast<int>(state.range(0)));
  const auto params = ModelParams::init(config, f.vocab.size(), 1);
  std::size_t i = 0;
  for (auto _ : state) {
    const auto k = i++ % f.graphs.size();
    auto g = loss_and_gradient(f.graphs[k], f.records[k].label, params, config);
    benchmark::DoNotOptimize(g.loss);
  }
}
BENCHMARK(BM_ForwardBackward)->Arg(1)->Arg(4)->Unit(benchmark::kMicrosecond);

void BM_Auroc(benchmark::State& state) {
  auto rng = make_rng(3);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const auto n = static_cast<std::size_t>(state.range(0));
  std::vector<double> scores(n);
  std::vector<int> labels(n);
  for (std::size_t i = 0; i < n; ++i) {
    scores[i] = u(rng);
    labels[i] = u(rng) < 0.2 ? 1 : 0;
  }
  for (auto _ : state) benchmark::DoNotOptimize(auroc(scores, labels));
  state.SetComplexityN(state.range(0));
}
BENCHMARK(BM_Auroc)->RangeMultiplier(8)->Range(64, 32768)->Complexity();

}  // namespace
BENCHMARK_MAIN();
