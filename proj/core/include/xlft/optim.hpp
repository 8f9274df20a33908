#pragma once

#include <cstdint>

#include "xlft/params.hpp"

namespace xlft {

struct AdamOptions {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

// One bias-corrected Adam update of every trainable parameter from its grad
// slot. `step` is the 1-based update count. Moments live in the entry slots
// "adam.m" and "adam.v". Frozen entries are left untouched.
void adam_step(ParamSet& params, const AdamOptions& options, std::uint64_t step);

}  // namespace xlft
