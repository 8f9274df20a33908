#include "xlft/trainer.hpp"

#include <numeric>

#include "xlft/error.hpp"
#include "xlft/rng.hpp"

namespace xlft {

void TrainOptions::validate() const {
  if (batch_size == 0) throw Error(ErrorCategory::config, "batch_size must be positive");
  if (!(adam.lr > 0.0)) throw Error(ErrorCategory::config, "learning rate must be positive");
  if (codemix) {
    codemix->validate();
    if (lexicon == nullptr) throw Error(ErrorCategory::config, "code-mixing needs a lexicon");
  }
}

TrainStats train_model(ParamSet& params, const ModelConfig& model, const TrainData& data,
                       const LossConfig& loss, const TrainOptions& options,
                       const PruningMask* mask, const StepObserver& observer) {
  options.validate();
  loss.validate(model.num_labels);
  if (!data.split || !data.vocab || !data.features) {
    throw Error(ErrorCategory::precondition, "train_model: incomplete training data");
  }
  const Split& split = *data.split;
  if (split.empty()) throw Error(ErrorCategory::precondition, "train_model: empty training split");

  params.clear_slots();
  params.clear_grads();
  if (mask) {
    mask->check_against(params);
    mask->apply(params);
  }

  std::vector<EncodedExample> encoded;
  encoded.reserve(split.size());
  for (const auto& ex : split) encoded.push_back(encode_example(ex.question, ex, *data.vocab, *data.features));
  std::vector<std::uint64_t> example_ids;
  if (options.codemix) {
    for (const auto& ex : split) example_ids.push_back(fnv1a64(ex.qid));
  }

  TrainStats stats;
  std::vector<std::size_t> order(split.size());
  std::vector<EncodedExample> batch_examples;
  for (std::size_t epoch = 0; epoch < options.epochs; ++epoch) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    RngStream rng(options.seed, options.shuffle_tag, epoch);
    for (std::size_t i = 0; i + 1 < order.size(); ++i) {
      std::swap(order[i], order[i + rng.index(order.size() - i)]);
    }

    double loss_sum = 0.0;
    std::size_t batches = 0;
    for (std::size_t start = 0; start < order.size(); start += options.batch_size) {
      const std::size_t end = std::min(order.size(), start + options.batch_size);
      batch_examples.clear();
      for (std::size_t j = start; j < end; ++j) {
        const std::size_t idx = order[j];
        if (options.codemix) {
          const auto mixed = code_mix_question(split[idx].question, *options.lexicon, *options.codemix,
                                               epoch, example_ids[idx]);
          batch_examples.push_back(encode_example(mixed, split[idx], *data.vocab, *data.features));
        } else {
          batch_examples.push_back(encoded[idx]);
        }
      }
      const MultimodalBatch batch = make_batch(batch_examples, model);

      Graph graph(&params);
      const Var logits = forward(graph, model, batch);
      const Var objective = combined_loss(logits, batch.labels, loss);
      graph.backward(objective);
      if (mask) mask->apply_to_grads(params);
      adam_step(params, options.adam, ++stats.steps);
      if (mask) mask->apply(params);

      loss_sum += objective.value().item();
      ++batches;
      if (observer) observer(stats.steps, params);
    }
    stats.epoch_loss.push_back(loss_sum / static_cast<double>(batches));
  }
  return stats;
}

PruningMask imp_run(const ParamSet& theta0, const ModelConfig& model, const TrainData& data,
                    const LossConfig& loss, const ImpConfig& imp, const TrainOptions& options,
                    const RoundObserver& observer) {
  imp.validate();
  ParamSet params = theta0;
  PruningMask mask = PruningMask::all_ones(params);
  TrainOptions round_options = options;
  round_options.epochs = imp.epochs_per_round;
  round_options.codemix.reset();
  for (std::size_t round = 0; round < imp.rounds; ++round) {
    rewind(params, theta0, mask);
    round_options.shuffle_tag = options.shuffle_tag + ".imp" + std::to_string(round);
    train_model(params, model, data, loss, round_options, &mask);
    prune_lowest_global(params, mask, imp.prune_rate);
    if (observer) observer(round, mask);
  }
  return mask;
}

ParamSet sft_train(const ParamSet& theta0, const PruningMask& mask, const ModelConfig& model,
                   const TrainData& data, const LossConfig& loss, const TrainOptions& options,
                   const StepObserver& observer) {
  ParamSet params = theta0;
  rewind(params, theta0, mask);
  train_model(params, model, data, loss, options, &mask, observer);
  params.clear_slots();
  return params;
}

}  // namespace xlft
