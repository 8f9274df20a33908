#pragma once

#include <cstddef>
#include <cstdint>
#include <string_view>

namespace xlft {

// Deterministic random stream keyed by (seed, purpose, epoch, example id).
// Two streams built from the same key produce the same draws on every
// platform: the generator and all distributions are implemented here rather
// than taken from <random>, whose distributions are implementation-defined.
class RngStream {
 public:
  RngStream(std::uint64_t seed, std::string_view purpose, std::uint64_t epoch = 0,
            std::uint64_t example_id = 0);

  std::uint64_t next_u64();
  // Uniform in [0, 1).
  double uniform();
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  // Uniform integer in [0, n). n must be positive.
  std::size_t index(std::size_t n);
  double normal();
  double normal(double mean, double stddev) { return mean + stddev * normal(); }
  bool bernoulli(double p) { return uniform() < p; }

 private:
  std::uint64_t state_[4];
  bool has_spare_ = false;
  double spare_ = 0.0;
};

std::uint64_t fnv1a64(std::string_view bytes);
std::uint64_t splitmix64(std::uint64_t x);

}  // namespace xlft
