#pragma once

#include <cstddef>
#include <memory>
#include <span>
#include <vector>

#include "xlft/autograd.hpp"
#include "xlft/taxonomy.hpp"

namespace xlft {

struct LossConfig {
  double alpha = 10.0;
  std::size_t k = 10;
  // Required when alpha > 0.
  std::shared_ptr<const DistanceMatrix> distance;

  void validate(std::size_t num_labels) const;
};

// Mean over the batch of -log softmax(logits)[target].
Var cross_entropy(Var logits, std::span<const std::size_t> targets);

// Indices of the k largest probabilities, ordered by decreasing probability;
// ties go to the smaller index.
std::vector<std::size_t> topk_indices(std::span<const double> probs, std::size_t k);

// Per-row top-k selections of a [B, C] probability matrix.
using TopkSelection = std::vector<std::vector<std::size_t>>;
TopkSelection select_topk(const Tensor& probs, std::size_t k);

// Mean over the batch of sum_{c in topk} p[c] * d(c, target), with raw
// (unrenormalised) probabilities. The selection is a constant of the graph;
// pass `frozen` to reuse a selection computed elsewhere.
Var prior_loss(Var probs, std::span<const std::size_t> targets, const LossConfig& config,
               const TopkSelection* frozen = nullptr);

// cross_entropy + alpha * prior_loss(softmax(logits)). With alpha == 0 this is
// exactly cross_entropy and no distance matrix is needed.
Var combined_loss(Var logits, std::span<const std::size_t> targets, const LossConfig& config,
                  const TopkSelection* frozen = nullptr);

}  // namespace xlft
