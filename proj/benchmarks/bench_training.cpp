#include <benchmark/benchmark.h>

#include <memory>

#include "xlft/codemix.hpp"
#include "xlft/data.hpp"
#include "xlft/loss.hpp"
#include "xlft/model.hpp"
#include "xlft/optim.hpp"
#include "xlft/pruning.hpp"

using namespace xlft;

namespace {

// Default benchmark corpus, generated once.
const SyntheticCorpus& corpus() {
  static const SyntheticCorpus c = generate_synthetic(SyntheticSpec{});
  return c;
}

MultimodalBatch first_batch(const ModelConfig& model, std::size_t size) {
  std::vector<EncodedExample> enc;
  for (std::size_t i = 0; i < size; ++i) {
    const auto& ex = corpus().train[i];
    enc.push_back(encode_example(ex.question, ex, corpus().vocab, corpus().features));
  }
  return make_batch(enc, model);
}

void BM_TrainStep(benchmark::State& state) {
  const ModelConfig model;
  ParamSet ps = init_model(model);
  const MultimodalBatch batch = first_batch(model, static_cast<std::size_t>(state.range(0)));
  LossConfig loss;
  loss.alpha = state.range(1) ? 10.0 : 0.0;
  if (state.range(1)) {
    loss.distance = std::make_shared<DistanceMatrix>(wordnet_distance_matrix(corpus().taxonomy, 0.8, 0.8));
  }
  std::uint64_t step = 0;
  for (auto _ : state) {
    Graph g(&ps);
    g.backward(combined_loss(forward(g, model, batch), batch.labels, loss));
    adam_step(ps, AdamOptions{}, ++step);
  }
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_TrainStep)->Args({32, 0})->Args({32, 1})->Unit(benchmark::kMillisecond);

void BM_Predict(benchmark::State& state) {
  const ModelConfig model;
  const ParamSet ps = init_model(model);
  const MultimodalBatch batch = first_batch(model, 64);
  for (auto _ : state) benchmark::DoNotOptimize(predict_logits(ps, model, batch).data().data());
  state.SetItemsProcessed(state.iterations() * 64);
}
BENCHMARK(BM_Predict)->Unit(benchmark::kMillisecond);

void BM_PruneRound(benchmark::State& state) {
  const ParamSet ps = init_model(ModelConfig{});
  for (auto _ : state) {
    PruningMask mask = PruningMask::all_ones(ps);
    benchmark::DoNotOptimize(prune_lowest_global(ps, mask, 0.1));
  }
}
BENCHMARK(BM_PruneRound)->Unit(benchmark::kMicrosecond);

void BM_CodeMix(benchmark::State& state) {
  const CodeMixConfig cfg{0.3, {"xa", "xb", "xc"}, 0};
  const auto& train = corpus().train;
  std::uint64_t id = 0;
  for (auto _ : state) {
    benchmark::DoNotOptimize(code_mix_question(train[id % train.size()].question, corpus().lexicon, cfg, 0, id));
    ++id;
  }
}
BENCHMARK(BM_CodeMix);

}  // namespace
