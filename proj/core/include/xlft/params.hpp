#pragma once

#include <cstddef>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "xlft/tensor.hpp"

namespace xlft {

struct ParamEntry {
  std::string name;
  Tensor value;
  std::optional<Tensor> grad;
  bool trainable = true;
  // Optimizer state (e.g. Adam moments), keyed by slot name.
  std::map<std::string, Tensor> slots;
};

// Named trainable parameters in insertion order. Names are unique; the order
// is the one the model registered them in and never changes.
class ParamSet {
 public:
  ParamEntry& add(std::string name, Tensor value, bool trainable = true);

  bool contains(std::string_view name) const;
  std::size_t index_of(std::string_view name) const;
  ParamEntry& at(std::string_view name);
  const ParamEntry& at(std::string_view name) const;
  ParamEntry& operator[](std::size_t i) { return entries_[i]; }
  const ParamEntry& operator[](std::size_t i) const { return entries_[i]; }

  std::size_t size() const noexcept { return entries_.size(); }
  std::vector<ParamEntry>::iterator begin() { return entries_.begin(); }
  std::vector<ParamEntry>::iterator end() { return entries_.end(); }
  std::vector<ParamEntry>::const_iterator begin() const { return entries_.begin(); }
  std::vector<ParamEntry>::const_iterator end() const { return entries_.end(); }

  std::vector<std::string> names() const;
  // Total number of scalar values across all parameters.
  std::size_t scalar_count() const;

  void clear_grads();
  void clear_slots();

  // True when names, shapes and values match exactly (grads and slots ignored).
  bool same_values(const ParamSet& other) const;

 private:
  std::vector<ParamEntry> entries_;
  std::unordered_map<std::string, std::size_t> index_;
};

}  // namespace xlft
