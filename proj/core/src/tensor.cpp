#include "xlft/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "xlft/error.hpp"

namespace xlft {

std::string_view to_string(ErrorCategory category) {
  switch (category) {
    case ErrorCategory::config: return "config";
    case ErrorCategory::io: return "io";
    case ErrorCategory::parse: return "parse";
    case ErrorCategory::shape: return "shape";
    case ErrorCategory::precondition: return "precondition";
    case ErrorCategory::taxonomy: return "taxonomy";
  }
  return "unknown";
}

std::string shape_to_string(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << 'x';
    os << shape[i];
  }
  os << ']';
  return os.str();
}

std::size_t shape_size(const Shape& shape) {
  std::size_t n = 1;
  for (auto d : shape) n *= d;
  return n;
}

namespace {

void check_shape(const Shape& shape) {
  if (shape.empty()) throw Error(ErrorCategory::shape, "tensor shape must have at least one axis");
  for (auto d : shape) {
    if (d == 0) {
      throw Error(ErrorCategory::shape,
                  "tensor dimensions must be positive, got " + shape_to_string(shape));
    }
  }
}

}  // namespace

Tensor::Tensor(Shape shape, double fill) : shape_(std::move(shape)) {
  check_shape(shape_);
  data_.assign(shape_size(shape_), fill);
}

Tensor::Tensor(Shape shape, std::vector<double> data)
    : shape_(std::move(shape)), data_(std::move(data)) {
  check_shape(shape_);
  if (shape_size(shape_) != data_.size()) {
    throw Error(ErrorCategory::shape, "tensor of shape " + shape_to_string(shape_) + " given " +
                                          std::to_string(data_.size()) + " values");
  }
}

void Tensor::fill(double value) { std::fill(data_.begin(), data_.end(), value); }

bool Tensor::all_finite() const noexcept {
  return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
}

double Tensor::item() const {
  if (data_.size() != 1) {
    throw Error(ErrorCategory::shape, "item() on tensor of shape " + shape_to_string(shape_));
  }
  return data_[0];
}

}  // namespace xlft
