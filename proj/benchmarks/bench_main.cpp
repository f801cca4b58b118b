#include <benchmark/benchmark.h>

#include "kalm/contexts/synthetic.hpp"
#include "kalm/layers/kalm_layer.hpp"
#include "kalm/model/trainer.hpp"
#include "kalm/num/ops.hpp"

using namespace kalm;
using kalm::num::Rng;
using kalm::num::Tensor;

namespace {

Tensor random_matrix(std::size_t r, std::size_t c, Rng& rng, bool grad = false) {
  std::vector<double> v(r * c);
  for (auto& x : v) x = rng.normal();
  return Tensor::from({r, c}, std::move(v), grad);
}

void BM_MatmulForwardBackward(benchmark::State& state) {
  const auto n = std::size_t(state.range(0));
  Rng rng(1);
  const auto a = random_matrix(n, n, rng, true), b = random_matrix(n, n, rng, true);
  for (auto _ : state) {
    auto loss = num::sum(num::matmul(a, b));
    num::backward(loss);
    benchmark::DoNotOptimize(a.grad().data());
  }
  state.SetComplexityN(state.range(0));
}
BENCHMARK(BM_MatmulForwardBackward)->RangeMultiplier(2)->Range(16, 128)->Complexity();

void BM_EncoderBlockForward(benchmark::State& state) {
  const auto rows = std::size_t(state.range(0));
  Rng rng(2);
  layers::EncoderBlock block(64, 8, 4, 0, rng);
  const auto x = random_matrix(rows, 64, rng);
  for (auto _ : state) benchmark::DoNotOptimize(block.forward(x, {}).y.data());
}
BENCHMARK(BM_EncoderBlockForward)->Arg(4)->Arg(16)->Arg(64);

struct Fixture {
  ctx::SyntheticCorpus corpus;
  kg::EmbeddingTable kge;
  model::TrainConfig config;
  std::vector<ctx::ContextBundle> bundles;

  Fixture() {
    config.d_model = 64;
    corpus = ctx::generate_synthetic_corpus({.seed = 0, .n_docs = 32, .kg_size = 200, .n_classes = 2});
    kge = kg::train_transe(corpus.kg, {.dim = config.kge_dim, .epochs = 5});
    bundles = model::build_bundles(corpus.docs, corpus.kg, kge, model::bundle_options(config));
  }
};

const Fixture& fixture() {
  static const Fixture f;
  return f;
}

void BM_BuildBundles(benchmark::State& state) {
  const auto& f = fixture();
  const auto options = model::bundle_options(f.config);
  for (auto _ : state) {
    auto b = model::build_bundles(f.corpus.docs, f.corpus.kg, f.kge, options);
    benchmark::DoNotOptimize(b.data());
  }
  state.SetItemsProcessed(std::int64_t(state.iterations() * f.corpus.docs.size()));
}
BENCHMARK(BM_BuildBundles)->Unit(benchmark::kMillisecond);

void BM_ModelForward(benchmark::State& state) {
  const auto& f = fixture();
  model::KalmModel m(f.config, f.kge);
  std::size_t i = 0;
  for (auto _ : state) {
    benchmark::DoNotOptimize(m.forward(f.bundles[i++ % f.bundles.size()], model::KalmModel::eval_mode()).log_probs);
  }
}
BENCHMARK(BM_ModelForward)->Unit(benchmark::kMillisecond);

void BM_TrainingStep(benchmark::State& state) {
  const auto& f = fixture();
  model::KalmModel m(f.config, f.kge);
  std::size_t i = 0;
  for (auto _ : state) {
    m.zero_grad();
    auto loss = m.loss(f.bundles[i++ % f.bundles.size()], m.train_mode());
    num::backward(loss);
  }
}
BENCHMARK(BM_TrainingStep)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
