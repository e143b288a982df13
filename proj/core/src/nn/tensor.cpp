#include "vcons/nn/tensor.hpp"

#include <algorithm>
#include <cmath>

#include "vcons/error.hpp"

namespace vcons::nn {

std::string shape_str(const Shape& shape) {
  std::string out = "[";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) out += ", ";
    out += std::to_string(shape[i]);
  }
  return out + "]";
}

std::size_t shape_size(const Shape& shape) {
  std::size_t n = 1;
  for (auto d : shape) n *= d;
  return shape.empty() ? 0 : n;
}

Tensor::Tensor(Shape shape, double fill) : shape_(std::move(shape)), data_(shape_size(shape_), fill) {}

Tensor::Tensor(Shape shape, std::vector<double> data) : shape_(std::move(shape)), data_(std::move(data)) {
  if (data_.size() != shape_size(shape_)) {
    fail(ErrorKind::kShape, "tensor data length " + std::to_string(data_.size()) + " does not match shape " +
                                shape_str(shape_));
  }
}

double Tensor::item() const {
  if (data_.size() != 1) fail(ErrorKind::kShape, "item() on tensor of shape " + shape_str(shape_));
  return data_[0];
}

void Tensor::fill(double v) { std::fill(data_.begin(), data_.end(), v); }

bool Tensor::all_finite() const {
  return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
}

}  // namespace vcons::nn
