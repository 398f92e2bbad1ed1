#include "tap/core/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>

#include "tap/errors.hpp"

namespace tap::core {

std::size_t shape_numel(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

std::string shape_str(const Shape& shape) {
  if (shape.empty()) return "scalar";
  std::string out;
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) out += 'x';
    out += std::to_string(shape[i]);
  }
  return out;
}

Tensor::Tensor(Shape shape, double fill) : shape_(std::move(shape)) {
  data_.assign(shape_numel(shape_), fill);
}

Tensor::Tensor(Shape shape, std::vector<double> values)
    : shape_(std::move(shape)), data_(std::move(values)) {
  if (data_.size() != shape_numel(shape_)) {
    throw DimensionError("tensor: " + std::to_string(data_.size()) +
                         " values do not fill shape " + shape_str(shape_));
  }
}

Tensor Tensor::scalar(double value) { return Tensor(Shape{}, std::vector<double>{value}); }

Tensor Tensor::vector(std::vector<double> values) {
  const std::size_t n = values.size();
  return Tensor(Shape{n}, std::move(values));
}

Tensor Tensor::matrix(std::size_t rows, std::size_t cols, std::vector<double> values) {
  return Tensor(Shape{rows, cols}, std::move(values));
}

std::size_t Tensor::extent(std::size_t axis) const {
  if (axis >= shape_.size()) {
    throw DimensionError("tensor: axis " + std::to_string(axis) + " out of range for shape " +
                         shape_str(shape_));
  }
  return shape_[axis];
}

std::size_t Tensor::rows() const {
  if (rank() != 2) throw DimensionError("tensor: rows() on shape " + shape_str(shape_));
  return shape_[0];
}

std::size_t Tensor::cols() const {
  if (rank() != 2) throw DimensionError("tensor: cols() on shape " + shape_str(shape_));
  return shape_[1];
}

double Tensor::item() const {
  if (numel() != 1) throw ContractError("tensor: item() on shape " + shape_str(shape_));
  return data_[0];
}

std::span<double> Tensor::grad() {
  if (!has_grad_) throw ContractError("tensor: gradient not populated");
  return grad_;
}

std::span<const double> Tensor::grad() const {
  if (!has_grad_) throw ContractError("tensor: gradient not populated");
  return grad_;
}

std::span<double> Tensor::ensure_grad() {
  if (!has_grad_) {
    grad_.assign(data_.size(), 0.0);
    has_grad_ = true;
  }
  return grad_;
}

void Tensor::zero_grad() {
  if (has_grad_) std::fill(grad_.begin(), grad_.end(), 0.0);
}

void Tensor::clear_grad() {
  grad_.clear();
  grad_.shrink_to_fit();
  has_grad_ = false;
}

bool Tensor::all_finite() const {
  return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
}

}  // namespace tap::core
