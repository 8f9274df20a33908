#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "xlft/autograd.hpp"
#include "xlft/params.hpp"
#include "xlft/tensor.hpp"

namespace xlft {

enum class Activation { relu, tanh };

std::string_view to_string(Activation a);
Activation activation_from_string(std::string_view name);

// Desk-scale multimodal encoder: question tokens and projected image regions
// share one transformer encoder behind a prepended CLS position, followed by a
// two-layer classifier head.
struct ModelConfig {
  std::size_t vocab_size = 512;
  std::size_t num_labels = 64;
  std::size_t feat_dim = 16;
  std::size_t num_regions = 8;
  std::size_t hidden_dim = 64;
  std::size_t num_layers = 2;
  std::size_t num_heads = 4;
  std::size_t ffn_dim = 64;
  std::size_t max_question_len = 16;
  Activation ffn_activation = Activation::relu;
  std::uint64_t seed = 0;

  // Throws Error(config) on invalid dimensions.
  void validate() const;

  std::string to_json() const;
  static ModelConfig from_json(std::string_view text);

  friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

inline constexpr std::size_t kPadToken = 0;

struct MultimodalBatch {
  std::size_t batch_size = 0;
  // Token slots per example; shorter questions are padded with kPadToken.
  std::size_t question_len = 0;
  // [batch_size * question_len], row-major.
  std::vector<std::size_t> token_ids;
  // [batch_size * num_regions, feat_dim]
  Tensor image_feats;
  // [batch_size]; may be empty when only logits are needed.
  std::vector<std::size_t> labels;
};

// Seeded initialisation. The result stands in for the pretrained parameters
// and is reproducible bit-for-bit from (config, config.seed).
ParamSet init_model(const ModelConfig& config);

// Logits [batch_size, num_labels] as a node of `graph`, whose ParamSet must
// come from init_model with the same config.
Var forward(Graph& graph, const ModelConfig& config, const MultimodalBatch& batch);

// Convenience wrapper evaluating forward() without keeping the tape.
Tensor predict_logits(const ParamSet& params, const ModelConfig& config,
                      const MultimodalBatch& batch);

// Encoder sublayer weights and biases eligible for pruning, in registration
// order. Token, position, region and image-projection embeddings, all layer
// norms and the classifier head are excluded.
std::vector<std::string> prunable_param_names(const ParamSet& params);

}  // namespace xlft
