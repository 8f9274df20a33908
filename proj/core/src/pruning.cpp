#include "xlft/pruning.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "xlft/error.hpp"
#include "xlft/model.hpp"

namespace xlft {

PruningMask PruningMask::all_ones(const ParamSet& params) {
  PruningMask m;
  for (const auto& name : prunable_param_names(params)) {
    const Tensor& v = params.at(name).value;
    m.entries_.push_back({name, v.shape(), std::vector<std::uint8_t>(v.size(), 1)});
  }
  return m;
}

const PruningMask::Entry& PruningMask::entry(std::string_view name) const {
  for (const auto& e : entries_) {
    if (e.name == name) return e;
  }
  throw Error(ErrorCategory::precondition, "mask has no entry for '" + std::string(name) + "'");
}

PruningMask::Entry& PruningMask::entry(std::string_view name) {
  return const_cast<Entry&>(std::as_const(*this).entry(name));
}

std::size_t PruningMask::total_count() const {
  std::size_t n = 0;
  for (const auto& e : entries_) n += e.keep.size();
  return n;
}

std::size_t PruningMask::masked_count() const {
  std::size_t n = 0;
  for (const auto& e : entries_) n += static_cast<std::size_t>(std::count(e.keep.begin(), e.keep.end(), 0));
  return n;
}

void PruningMask::check_against(const ParamSet& params) const {
  const auto names = prunable_param_names(params);
  if (names.size() != entries_.size()) {
    throw Error(ErrorCategory::shape, "mask covers " + std::to_string(entries_.size()) +
                                          " parameters, model has " + std::to_string(names.size()) +
                                          " prunable ones");
  }
  for (std::size_t i = 0; i < names.size(); ++i) {
    const auto& e = entries_[i];
    if (e.name != names[i]) {
      throw Error(ErrorCategory::shape, "mask entry '" + e.name + "' where '" + names[i] + "' expected");
    }
    if (params.at(e.name).value.shape() != e.shape) {
      throw Error(ErrorCategory::shape, "mask for '" + e.name + "' has shape " + shape_to_string(e.shape) +
                                            ", parameter has " +
                                            shape_to_string(params.at(e.name).value.shape()));
    }
  }
}

void PruningMask::apply(ParamSet& params) const {
  for (const auto& e : entries_) {
    auto v = params.at(e.name).value.data();
    for (std::size_t i = 0; i < e.keep.size(); ++i) {
      if (!e.keep[i]) v[i] = 0.0;
    }
  }
}

void PruningMask::apply_to_grads(ParamSet& params) const {
  for (const auto& e : entries_) {
    auto& g = params.at(e.name).grad;
    if (!g) continue;
    auto d = g->data();
    for (std::size_t i = 0; i < e.keep.size(); ++i) {
      if (!e.keep[i]) d[i] = 0.0;
    }
  }
}

bool PruningMask::refines(const PruningMask& earlier) const {
  if (entries_.size() != earlier.entries_.size()) return false;
  for (std::size_t p = 0; p < entries_.size(); ++p) {
    const auto& now = entries_[p];
    const auto& before = earlier.entries_[p];
    if (now.name != before.name || now.keep.size() != before.keep.size()) return false;
    for (std::size_t i = 0; i < now.keep.size(); ++i) {
      if (!before.keep[i] && now.keep[i]) return false;
    }
  }
  return true;
}

void PruningMask::add_to(Container& container) const {
  for (const auto& e : entries_) {
    container.add_bytes(e.name + ".mask", {e.shape.begin(), e.shape.end()}, e.keep);
  }
}

PruningMask PruningMask::from_container(const Container& container, const ParamSet& params) {
  PruningMask m;
  for (const auto& name : prunable_param_names(params)) {
    const auto& ce = container.entry(name + ".mask");
    if (ce.dtype != DType::u8) {
      throw Error(ErrorCategory::parse, "entry '" + ce.name + "' is not a u8 mask");
    }
    Shape shape(ce.dims.begin(), ce.dims.end());
    if (shape != params.at(name).value.shape()) {
      throw Error(ErrorCategory::shape, "mask '" + ce.name + "' has shape " + shape_to_string(shape) +
                                            ", parameter has " +
                                            shape_to_string(params.at(name).value.shape()));
    }
    for (std::uint8_t b : ce.u8) {
      if (b > 1) throw Error(ErrorCategory::parse, "mask '" + ce.name + "' holds a value other than 0/1");
    }
    m.entries_.push_back({name, std::move(shape), ce.u8});
  }
  return m;
}

void ImpConfig::validate() const {
  if (!(prune_rate > 0.0 && prune_rate < 1.0)) {
    throw Error(ErrorCategory::config, "prune rate must lie in (0, 1)");
  }
  if (rounds == 0) throw Error(ErrorCategory::config, "IMP needs at least one round");
  if (epochs_per_round == 0) throw Error(ErrorCategory::config, "epochs_per_round must be positive");
}

namespace {

std::size_t prune_quota(std::size_t remaining, double p) {
  const auto n = static_cast<std::size_t>(std::floor(p * static_cast<double>(remaining)));
  return std::max<std::size_t>(n, 1);
}

}  // namespace

std::size_t prune_lowest_global(const ParamSet& params, PruningMask& mask, double p) {
  if (!(p > 0.0 && p < 1.0)) throw Error(ErrorCategory::config, "prune rate must lie in (0, 1)");
  mask.check_against(params);

  struct Candidate {
    double magnitude;
    std::uint32_t param;
    std::size_t index;
  };
  std::vector<Candidate> pool;
  const auto& entries = mask.entries();
  for (std::size_t pi = 0; pi < entries.size(); ++pi) {
    const auto v = params.at(entries[pi].name).value.data();
    for (std::size_t i = 0; i < v.size(); ++i) {
      if (entries[pi].keep[i]) pool.push_back({std::abs(v[i]), static_cast<std::uint32_t>(pi), i});
    }
  }
  if (pool.empty()) throw Error(ErrorCategory::precondition, "no unmasked weights left to prune");

  const std::size_t n = std::min(prune_quota(pool.size(), p), pool.size());
  auto before = [](const Candidate& a, const Candidate& b) {
    if (a.magnitude != b.magnitude) return a.magnitude < b.magnitude;
    if (a.param != b.param) return a.param < b.param;
    return a.index < b.index;
  };
  std::nth_element(pool.begin(), pool.begin() + static_cast<std::ptrdiff_t>(n - 1), pool.end(), before);
  for (std::size_t j = 0; j < n; ++j) {
    mask.entry(entries[pool[j].param].name).keep[pool[j].index] = 0;
  }
  return n;
}

void rewind(ParamSet& params, const ParamSet& theta0, const PruningMask& mask) {
  if (params.size() != theta0.size()) {
    throw Error(ErrorCategory::shape, "rewind target has a different parameter count");
  }
  mask.check_against(params);
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto& dst = params[i];
    const auto& src = theta0[i];
    if (dst.name != src.name || dst.value.shape() != src.value.shape()) {
      throw Error(ErrorCategory::shape, "rewind target does not match parameter '" + dst.name + "'");
    }
    dst.value = src.value;
  }
  mask.apply(params);
}

std::size_t remaining_after_rounds(std::size_t count, double p, std::size_t rounds) {
  for (std::size_t r = 0; r < rounds && count > 0; ++r) count -= std::min(count, prune_quota(count, p));
  return count;
}

SparsityReport sparsity_report(double masked, double prunable_count, double total_params) {
  if (masked == 0.0) return {};
  if (!(prunable_count > 0.0 && total_params > 0.0)) {
    throw Error(ErrorCategory::precondition, "sparsity report needs positive parameter counts");
  }
  return {masked / prunable_count, masked / total_params};
}

SparsityReport sparsity_report(const PruningMask& mask, std::size_t total_params) {
  if (mask.empty()) return {};
  return sparsity_report(static_cast<double>(mask.masked_count()),
                         static_cast<double>(mask.total_count()), static_cast<double>(total_params));
}

}  // namespace xlft
