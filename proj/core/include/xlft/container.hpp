#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "xlft/params.hpp"
#include "xlft/tensor.hpp"

namespace xlft {

// On-disk layout (little-endian):
//   "XLFT" | u32 version=1 | u32 entry_count |
//   entries: u32 name_len | name bytes (UTF-8) | u8 dtype | u32 ndim |
//            u64 dims[ndim] | raw data (f64 or u8, row-major)
enum class DType : std::uint8_t { f64 = 0, u8 = 1 };

struct ContainerEntry {
  std::string name;
  DType dtype = DType::f64;
  std::vector<std::uint64_t> dims;
  std::vector<double> f64;
  std::vector<std::uint8_t> u8;

  std::size_t element_count() const;
};

class Container {
 public:
  static constexpr std::uint32_t kVersion = 1;

  void add_tensor(std::string name, const Tensor& tensor);
  void add_bytes(std::string name, std::vector<std::uint64_t> dims,
                 std::vector<std::uint8_t> bytes);

  bool contains(std::string_view name) const;
  const ContainerEntry& entry(std::string_view name) const;
  Tensor tensor(std::string_view name) const;
  const std::vector<std::uint8_t>& bytes(std::string_view name) const;
  const std::vector<ContainerEntry>& entries() const noexcept { return entries_; }

  std::vector<std::uint8_t> serialize() const;
  static Container deserialize(std::span<const std::uint8_t> bytes);

  void save(const std::filesystem::path& path) const;
  static Container load(const std::filesystem::path& path);

 private:
  std::vector<ContainerEntry> entries_;
};

// Every parameter value stored under its own name.
void add_params(Container& container, const ParamSet& params);
// Overwrite the values of `params` from same-named entries; shapes must match.
void load_params(const Container& container, ParamSet& params);

}  // namespace xlft
