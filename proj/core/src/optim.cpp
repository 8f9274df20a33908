#include "xlft/optim.hpp"

#include <cmath>

#include "xlft/error.hpp"

namespace xlft {

void adam_step(ParamSet& params, const AdamOptions& options, std::uint64_t step) {
  if (!(options.lr > 0.0)) {
    throw Error(ErrorCategory::config, "adam: learning rate must be positive");
  }
  if (step == 0) throw Error(ErrorCategory::precondition, "adam: step count is 1-based");
  for (const auto& e : params) {
    if (e.trainable && !e.grad) {
      throw Error(ErrorCategory::precondition, "adam: missing gradient for '" + e.name + "'");
    }
  }
  const double bc1 = 1.0 - std::pow(options.beta1, static_cast<double>(step));
  const double bc2 = 1.0 - std::pow(options.beta2, static_cast<double>(step));
  for (auto& e : params) {
    if (!e.trainable) continue;
    const Tensor& g = *e.grad;
    if (g.shape() != e.value.shape()) {
      throw Error(ErrorCategory::shape, "adam: gradient shape mismatch for '" + e.name + "'");
    }
    auto [mit, m_new] = e.slots.try_emplace("adam.m", Tensor::zeros_like(e.value));
    auto [vit, v_new] = e.slots.try_emplace("adam.v", Tensor::zeros_like(e.value));
    Tensor& m = mit->second;
    Tensor& v = vit->second;
    for (std::size_t i = 0; i < g.size(); ++i) {
      m[i] = options.beta1 * m[i] + (1.0 - options.beta1) * g[i];
      v[i] = options.beta2 * v[i] + (1.0 - options.beta2) * g[i] * g[i];
      const double mhat = m[i] / bc1;
      const double vhat = v[i] / bc2;
      e.value[i] -= options.lr * mhat / (std::sqrt(vhat) + options.eps);
    }
  }
}

}  // namespace xlft
