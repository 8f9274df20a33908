#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <string>

#include "xlft/autograd.hpp"
#include "xlft/params.hpp"

namespace xlft {

// Builds a scalar loss on a graph bound to the ParamSet under test. Must be
// deterministic in the parameter values.
using LossFn = std::function<Var(Graph&)>;

struct GradCheckOptions {
  double step = 1e-5;
  // Coordinates sampled per parameter tensor; 0 checks every coordinate.
  std::size_t max_coords_per_param = 0;
  std::uint64_t seed = 0;
};

struct GradCheckResult {
  double max_rel_error = 0.0;
  std::string worst_param;
  std::size_t worst_index = 0;
  double worst_analytic = 0.0;
  double worst_numeric = 0.0;
  std::size_t coords_checked = 0;
};

// Compares reverse-mode gradients against central differences
// (f(x+h) - f(x-h)) / 2h on trainable parameters. The relative error of a
// coordinate is |analytic - numeric| / max(|analytic|, 1e-8). Parameter values
// are restored exactly before returning.
GradCheckResult finite_diff_check(const LossFn& loss, ParamSet& params,
                                  const GradCheckOptions& options);

inline double finite_diff_check(const LossFn& loss, ParamSet& params, double step) {
  GradCheckOptions options;
  options.step = step;
  return finite_diff_check(loss, params, options).max_rel_error;
}

}  // namespace xlft
