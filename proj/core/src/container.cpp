#include "xlft/container.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>

#include "xlft/error.hpp"

namespace xlft {

namespace {

constexpr char kMagic[4] = {'X', 'L', 'F', 'T'};

template <typename T>
void put(std::vector<std::uint8_t>& out, T value) {
  static_assert(std::is_integral_v<T> || std::is_same_v<T, double>);
  std::uint8_t raw[sizeof(T)];
  std::memcpy(raw, &value, sizeof(T));
  if constexpr (std::endian::native == std::endian::big) {
    for (std::size_t i = 0; i < sizeof(T) / 2; ++i) std::swap(raw[i], raw[sizeof(T) - 1 - i]);
  }
  out.insert(out.end(), raw, raw + sizeof(T));
}

class Reader {
 public:
  explicit Reader(std::span<const std::uint8_t> bytes) : bytes_(bytes) {}

  template <typename T>
  T get() {
    need(sizeof(T));
    std::uint8_t raw[sizeof(T)];
    std::memcpy(raw, bytes_.data() + pos_, sizeof(T));
    if constexpr (std::endian::native == std::endian::big) {
      for (std::size_t i = 0; i < sizeof(T) / 2; ++i) std::swap(raw[i], raw[sizeof(T) - 1 - i]);
    }
    pos_ += sizeof(T);
    T value;
    std::memcpy(&value, raw, sizeof(T));
    return value;
  }

  std::span<const std::uint8_t> take(std::size_t n) {
    need(n);
    auto s = bytes_.subspan(pos_, n);
    pos_ += n;
    return s;
  }

  bool done() const { return pos_ == bytes_.size(); }

 private:
  void need(std::size_t n) const {
    if (bytes_.size() - pos_ < n) {
      throw Error(ErrorCategory::parse, "XLFT container truncated at byte " + std::to_string(pos_));
    }
  }

  std::span<const std::uint8_t> bytes_;
  std::size_t pos_ = 0;
};

std::size_t product(const std::vector<std::uint64_t>& dims) {
  std::size_t n = 1;
  for (auto d : dims) n *= static_cast<std::size_t>(d);
  return n;
}

}  // namespace

std::size_t ContainerEntry::element_count() const { return product(dims); }

void Container::add_tensor(std::string name, const Tensor& tensor) {
  if (contains(name)) throw Error(ErrorCategory::precondition, "duplicate container entry " + name);
  ContainerEntry e;
  e.name = std::move(name);
  e.dtype = DType::f64;
  e.dims.assign(tensor.shape().begin(), tensor.shape().end());
  e.f64 = tensor.values();
  entries_.push_back(std::move(e));
}

void Container::add_bytes(std::string name, std::vector<std::uint64_t> dims,
                          std::vector<std::uint8_t> bytes) {
  if (contains(name)) throw Error(ErrorCategory::precondition, "duplicate container entry " + name);
  if (product(dims) != bytes.size()) {
    throw Error(ErrorCategory::shape, "container entry " + name + ": dims do not match byte count");
  }
  ContainerEntry e;
  e.name = std::move(name);
  e.dtype = DType::u8;
  e.dims = std::move(dims);
  e.u8 = std::move(bytes);
  entries_.push_back(std::move(e));
}

bool Container::contains(std::string_view name) const {
  for (const auto& e : entries_) {
    if (e.name == name) return true;
  }
  return false;
}

const ContainerEntry& Container::entry(std::string_view name) const {
  for (const auto& e : entries_) {
    if (e.name == name) return e;
  }
  throw Error(ErrorCategory::precondition, "container has no entry '" + std::string(name) + "'");
}

Tensor Container::tensor(std::string_view name) const {
  const auto& e = entry(name);
  if (e.dtype != DType::f64) {
    throw Error(ErrorCategory::precondition, "container entry '" + e.name + "' is not f64");
  }
  return Tensor(Shape(e.dims.begin(), e.dims.end()), e.f64);
}

const std::vector<std::uint8_t>& Container::bytes(std::string_view name) const {
  const auto& e = entry(name);
  if (e.dtype != DType::u8) {
    throw Error(ErrorCategory::precondition, "container entry '" + e.name + "' is not u8");
  }
  return e.u8;
}

std::vector<std::uint8_t> Container::serialize() const {
  std::vector<std::uint8_t> out(kMagic, kMagic + 4);
  put<std::uint32_t>(out, kVersion);
  put<std::uint32_t>(out, static_cast<std::uint32_t>(entries_.size()));
  for (const auto& e : entries_) {
    put<std::uint32_t>(out, static_cast<std::uint32_t>(e.name.size()));
    out.insert(out.end(), e.name.begin(), e.name.end());
    put<std::uint8_t>(out, static_cast<std::uint8_t>(e.dtype));
    put<std::uint32_t>(out, static_cast<std::uint32_t>(e.dims.size()));
    for (auto d : e.dims) put<std::uint64_t>(out, d);
    if (e.dtype == DType::f64) {
      for (double v : e.f64) put<double>(out, v);
    } else {
      out.insert(out.end(), e.u8.begin(), e.u8.end());
    }
  }
  return out;
}

Container Container::deserialize(std::span<const std::uint8_t> bytes) {
  Reader in(bytes);
  auto magic = in.take(4);
  if (std::memcmp(magic.data(), kMagic, 4) != 0) {
    throw Error(ErrorCategory::parse, "not an XLFT container (bad magic)");
  }
  const auto version = in.get<std::uint32_t>();
  if (version != kVersion) {
    throw Error(ErrorCategory::parse, "unsupported XLFT version " + std::to_string(version));
  }
  const auto count = in.get<std::uint32_t>();
  Container c;
  for (std::uint32_t i = 0; i < count; ++i) {
    ContainerEntry e;
    const auto name_len = in.get<std::uint32_t>();
    auto name = in.take(name_len);
    e.name.assign(name.begin(), name.end());
    const auto dtype = in.get<std::uint8_t>();
    if (dtype > 1) throw Error(ErrorCategory::parse, "entry " + e.name + ": unknown dtype");
    e.dtype = static_cast<DType>(dtype);
    const auto ndim = in.get<std::uint32_t>();
    for (std::uint32_t d = 0; d < ndim; ++d) e.dims.push_back(in.get<std::uint64_t>());
    const std::size_t n = product(e.dims);
    if (e.dtype == DType::f64) {
      e.f64.reserve(n);
      for (std::size_t k = 0; k < n; ++k) e.f64.push_back(in.get<double>());
    } else {
      auto raw = in.take(n);
      e.u8.assign(raw.begin(), raw.end());
    }
    if (c.contains(e.name)) throw Error(ErrorCategory::parse, "duplicate entry " + e.name);
    c.entries_.push_back(std::move(e));
  }
  if (!in.done()) throw Error(ErrorCategory::parse, "trailing bytes after XLFT entries");
  return c;
}

void Container::save(const std::filesystem::path& path) const {
  const auto bytes = serialize();
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCategory::io, "cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error(ErrorCategory::io, "write failed for " + path.string());
}

Container Container::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCategory::io, "cannot open " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                  std::istreambuf_iterator<char>());
  try {
    return deserialize(bytes);
  } catch (const Error& e) {
    throw Error(e.category(), path.string() + ": " + e.what());
  }
}

void add_params(Container& container, const ParamSet& params) {
  for (const auto& e : params) container.add_tensor(e.name, e.value);
}

void load_params(const Container& container, ParamSet& params) {
  for (auto& e : params) {
    Tensor t = container.tensor(e.name);
    if (t.shape() != e.value.shape()) {
      throw Error(ErrorCategory::shape, "checkpoint entry '" + e.name + "' has shape " +
                                            shape_to_string(t.shape()) + ", model expects " +
                                            shape_to_string(e.value.shape()));
    }
    e.value = std::move(t);
  }
}

}  // namespace xlft
