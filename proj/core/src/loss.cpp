#include "xlft/loss.hpp"

#include <algorithm>
#include <numeric>

#include "xlft/error.hpp"

namespace xlft {

void LossConfig::validate(std::size_t num_labels) const {
  if (!(alpha >= 0.0)) throw Error(ErrorCategory::config, "loss: alpha must be non-negative");
  if (k < 1) throw Error(ErrorCategory::config, "loss: k must be at least 1");
  if (k > num_labels) {
    throw Error(ErrorCategory::config, "loss: k = " + std::to_string(k) + " exceeds " +
                                           std::to_string(num_labels) + " labels");
  }
  if (alpha > 0.0) {
    if (!distance) throw Error(ErrorCategory::config, "loss: alpha > 0 requires a distance matrix");
    if (distance->size() != num_labels) {
      throw Error(ErrorCategory::shape, "loss: distance matrix is " +
                                            std::to_string(distance->size()) + "x" +
                                            std::to_string(distance->size()) + " for " +
                                            std::to_string(num_labels) + " labels");
    }
  }
}

Var cross_entropy(Var logits, std::span<const std::size_t> targets) {
  const Tensor& L = logits.value();
  if (L.rank() != 2 || targets.size() != L.dim(0)) {
    throw Error(ErrorCategory::shape, "cross_entropy: logits " + shape_to_string(L.shape()) +
                                          " with " + std::to_string(targets.size()) + " targets");
  }
  for (auto t : targets) {
    if (t >= L.dim(1)) {
      throw Error(ErrorCategory::precondition,
                  "cross_entropy: target " + std::to_string(t) + " out of range");
    }
  }
  return ops::scale(ops::mean(ops::pick(ops::log_softmax(logits), targets)), -1.0);
}

std::vector<std::size_t> topk_indices(std::span<const double> probs, std::size_t k) {
  if (k > probs.size()) {
    throw Error(ErrorCategory::precondition, "topk: k = " + std::to_string(k) + " exceeds " +
                                                 std::to_string(probs.size()) + " classes");
  }
  std::vector<std::size_t> idx(probs.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::partial_sort(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(k), idx.end(),
                    [&](std::size_t a, std::size_t b) {
                      return probs[a] > probs[b] || (probs[a] == probs[b] && a < b);
                    });
  idx.resize(k);
  return idx;
}

TopkSelection select_topk(const Tensor& probs, std::size_t k) {
  TopkSelection out(probs.rows());
  for (std::size_t r = 0; r < probs.rows(); ++r) out[r] = topk_indices(probs.row(r), k);
  return out;
}

Var prior_loss(Var probs, std::span<const std::size_t> targets, const LossConfig& config,
               const TopkSelection* frozen) {
  const Tensor& P = probs.value();
  if (P.rank() != 2 || targets.size() != P.dim(0)) {
    throw Error(ErrorCategory::shape, "prior_loss: probs " + shape_to_string(P.shape()) +
                                          " with " + std::to_string(targets.size()) + " targets");
  }
  const std::size_t B = P.dim(0), C = P.dim(1);
  if (!config.distance || config.distance->size() != C) {
    throw Error(ErrorCategory::shape, "prior_loss: distance matrix does not cover " +
                                          std::to_string(C) + " labels");
  }
  TopkSelection local;
  if (!frozen) {
    local = select_topk(P, config.k);
    frozen = &local;
  }
  if (frozen->size() != B) throw Error(ErrorCategory::shape, "prior_loss: top-k selection size");

  // Constant weights w[b, c] = d(c, y_b) on the selected classes, 0 elsewhere.
  Tensor weights({B, C});
  for (std::size_t b = 0; b < B; ++b) {
    if (targets[b] >= C) {
      throw Error(ErrorCategory::precondition,
                  "prior_loss: target " + std::to_string(targets[b]) + " out of range");
    }
    for (std::size_t c : (*frozen)[b]) weights.at(b, c) = config.distance->at(c, targets[b]);
  }
  Graph& g = probs.graph();
  return ops::scale(ops::sum(ops::mul(probs, g.constant(std::move(weights)))),
                    1.0 / static_cast<double>(B));
}

Var combined_loss(Var logits, std::span<const std::size_t> targets, const LossConfig& config,
                  const TopkSelection* frozen) {
  Var ce = cross_entropy(logits, targets);
  if (config.alpha == 0.0) return ce;
  Var prior = prior_loss(ops::softmax(logits), targets, config, frozen);
  return ops::add(ce, ops::scale(prior, config.alpha));
}

}  // namespace xlft
