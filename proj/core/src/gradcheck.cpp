#include "xlft/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "xlft/error.hpp"
#include "xlft/rng.hpp"

namespace xlft {

namespace {

double evaluate(const LossFn& loss, ParamSet& params) {
  Graph g(&params);
  const double v = loss(g).value().item();
  if (!std::isfinite(v)) throw Error(ErrorCategory::precondition, "gradcheck: non-finite loss");
  return v;
}

}  // namespace

GradCheckResult finite_diff_check(const LossFn& loss, ParamSet& params,
                                  const GradCheckOptions& options) {
  if (!(options.step > 0.0)) {
    throw Error(ErrorCategory::precondition, "gradcheck: step must be positive");
  }
  {
    Graph g(&params);
    Var root = loss(g);
    if (!std::isfinite(root.value().item())) {
      throw Error(ErrorCategory::precondition, "gradcheck: non-finite loss");
    }
    g.backward(root);
  }

  GradCheckResult result;
  RngStream rng(options.seed, "gradcheck");
  const double h = options.step;
  for (std::size_t p = 0; p < params.size(); ++p) {
    if (!params[p].trainable) continue;
    const Tensor analytic = *params[p].grad;
    const std::size_t n = params[p].value.size();
    std::vector<std::size_t> coords(n);
    std::iota(coords.begin(), coords.end(), 0);
    if (options.max_coords_per_param > 0 && options.max_coords_per_param < n) {
      for (std::size_t i = 0; i < options.max_coords_per_param; ++i) {
        std::swap(coords[i], coords[i + rng.index(n - i)]);
      }
      coords.resize(options.max_coords_per_param);
      std::sort(coords.begin(), coords.end());
    }
    for (std::size_t i : coords) {
      const double original = params[p].value[i];
      params[p].value[i] = original + h;
      const double up = evaluate(loss, params);
      params[p].value[i] = original - h;
      const double down = evaluate(loss, params);
      params[p].value[i] = original;

      const double numeric = (up - down) / (2.0 * h);
      const double a = analytic[i];
      const double err = std::abs(a - numeric) / std::max(std::abs(a), 1e-8);
      ++result.coords_checked;
      if (result.worst_param.empty() || err > result.max_rel_error) {
        result.max_rel_error = err;
        result.worst_param = params[p].name;
        result.worst_index = i;
        result.worst_analytic = a;
        result.worst_numeric = numeric;
      }
    }
  }
  return result;
}

}  // namespace xlft
