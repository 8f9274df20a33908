#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <string>
#include <string_view>
#include <vector>

#include "xlft/container.hpp"
#include "xlft/params.hpp"
#include "xlft/tensor.hpp"

namespace xlft {

// Binary keep-mask over the prunable parameters (1 = kept, 0 = pruned), in
// the order prunable_param_names() returns them.
class PruningMask {
 public:
  struct Entry {
    std::string name;
    Shape shape;
    std::vector<std::uint8_t> keep;

    friend bool operator==(const Entry&, const Entry&) = default;
  };

  PruningMask() = default;
  // Everything kept, covering prunable_param_names(params).
  static PruningMask all_ones(const ParamSet& params);

  bool empty() const noexcept { return entries_.empty(); }
  const std::vector<Entry>& entries() const noexcept { return entries_; }
  const Entry& entry(std::string_view name) const;
  Entry& entry(std::string_view name);

  std::size_t total_count() const;
  std::size_t masked_count() const;
  std::size_t remaining_count() const { return total_count() - masked_count(); }

  // Throws Error(shape) unless the mask covers exactly the prunable
  // parameters of `params` with matching shapes.
  void check_against(const ParamSet& params) const;
  // Sets masked values to 0.
  void apply(ParamSet& params) const;
  // Sets gradients of masked coordinates to 0.
  void apply_to_grads(ParamSet& params) const;
  // True when every coordinate pruned in `earlier` is still pruned here.
  bool refines(const PruningMask& earlier) const;

  // Entries "<param>.mask" of dtype u8.
  void add_to(Container& container) const;
  // Reads the "<param>.mask" entries for the prunable parameters of `params`.
  static PruningMask from_container(const Container& container, const ParamSet& params);

  friend bool operator==(const PruningMask&, const PruningMask&) = default;

 private:
  std::vector<Entry> entries_;
};

struct ImpConfig {
  double prune_rate = 0.1;
  std::size_t rounds = 5;
  std::size_t epochs_per_round = 1;

  void validate() const;
};

// Masks floor(p * remaining) more coordinates (at least one while any remain),
// the smallest |value| among unmasked ones; ties go to the earlier parameter,
// then the lower flat index. Returns the number newly masked.
std::size_t prune_lowest_global(const ParamSet& params, PruningMask& mask, double p);

// Resets every parameter to theta0, then zeroes the masked coordinates.
void rewind(ParamSet& params, const ParamSet& theta0, const PruningMask& mask);

// Remaining count after `rounds` applications of prune_lowest_global to
// `count` weights.
std::size_t remaining_after_rounds(std::size_t count, double p, std::size_t rounds);

struct SparsityReport {
  double prunable_sparsity = 0.0;
  double global_sparsity = 0.0;
};

SparsityReport sparsity_report(double masked, double prunable_count, double total_params);
SparsityReport sparsity_report(const PruningMask& mask, std::size_t total_params);

}  // namespace xlft
