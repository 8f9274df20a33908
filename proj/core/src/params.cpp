#include "xlft/params.hpp"

#include "xlft/error.hpp"

namespace xlft {

ParamEntry& ParamSet::add(std::string name, Tensor value, bool trainable) {
  if (index_.contains(name)) {
    throw Error(ErrorCategory::precondition, "duplicate parameter name '" + name + "'");
  }
  index_.emplace(name, entries_.size());
  entries_.push_back(ParamEntry{std::move(name), std::move(value), std::nullopt, trainable, {}});
  return entries_.back();
}

bool ParamSet::contains(std::string_view name) const { return index_.contains(std::string(name)); }

std::size_t ParamSet::index_of(std::string_view name) const {
  auto it = index_.find(std::string(name));
  if (it == index_.end()) {
    throw Error(ErrorCategory::precondition, "unknown parameter '" + std::string(name) + "'");
  }
  return it->second;
}

ParamEntry& ParamSet::at(std::string_view name) { return entries_[index_of(name)]; }
const ParamEntry& ParamSet::at(std::string_view name) const { return entries_[index_of(name)]; }

std::vector<std::string> ParamSet::names() const {
  std::vector<std::string> out;
  out.reserve(entries_.size());
  for (const auto& e : entries_) out.push_back(e.name);
  return out;
}

std::size_t ParamSet::scalar_count() const {
  std::size_t n = 0;
  for (const auto& e : entries_) n += e.value.size();
  return n;
}

void ParamSet::clear_grads() {
  for (auto& e : entries_) e.grad.reset();
}

void ParamSet::clear_slots() {
  for (auto& e : entries_) e.slots.clear();
}

bool ParamSet::same_values(const ParamSet& other) const {
  if (entries_.size() != other.entries_.size()) return false;
  for (std::size_t i = 0; i < entries_.size(); ++i) {
    if (entries_[i].name != other.entries_[i].name) return false;
    if (!(entries_[i].value == other.entries_[i].value)) return false;
  }
  return true;
}

}  // namespace xlft
