#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "xlft/codemix.hpp"
#include "xlft/data.hpp"
#include "xlft/loss.hpp"
#include "xlft/model.hpp"
#include "xlft/optim.hpp"
#include "xlft/pruning.hpp"

namespace xlft {

// Borrowed views of one training split and what is needed to encode it.
struct TrainData {
  const Split* split = nullptr;
  const Vocabulary* vocab = nullptr;
  const FeatureStore* features = nullptr;
};

struct TrainOptions {
  std::size_t epochs = 5;
  std::size_t batch_size = 32;
  AdamOptions adam;
  // Keys the per-epoch shuffle.
  std::uint64_t seed = 0;
  std::string shuffle_tag = "shuffle";
  // Code-mixing is applied per epoch when both are set.
  std::optional<CodeMixConfig> codemix;
  const BilingualLexicon* lexicon = nullptr;

  void validate() const;
};

struct TrainStats {
  std::size_t steps = 0;
  std::vector<double> epoch_loss;  // mean batch loss per epoch
};

// Called after every optimizer step with the updated parameters; the grad
// slots still hold the gradients that step used.
using StepObserver = std::function<void(std::size_t step, const ParamSet& params)>;

// Minibatch Adam on combined_loss. The optimizer state is reset on entry.
// With a mask, masked coordinates are zeroed before training and their
// gradients are zeroed before every update, so they stay exactly 0.
TrainStats train_model(ParamSet& params, const ModelConfig& model, const TrainData& data,
                       const LossConfig& loss, const TrainOptions& options,
                       const PruningMask* mask = nullptr, const StepObserver& observer = {});

using RoundObserver = std::function<void(std::size_t round, const PruningMask& mask)>;

// Iterative magnitude pruning with rewinding to theta0. Every round rewinds,
// trains epochs_per_round epochs under the current mask and prunes. Code-mixing
// in `options` is ignored here.
PruningMask imp_run(const ParamSet& theta0, const ModelConfig& model, const TrainData& data,
                    const LossConfig& loss, const ImpConfig& imp, const TrainOptions& options,
                    const RoundObserver& observer = {});

// Sparse fine-tuning from theta0: only coordinates kept by `mask` move.
ParamSet sft_train(const ParamSet& theta0, const PruningMask& mask, const ModelConfig& model,
                   const TrainData& data, const LossConfig& loss, const TrainOptions& options,
                   const StepObserver& observer = {});

}  // namespace xlft
