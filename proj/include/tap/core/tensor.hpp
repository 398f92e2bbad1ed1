#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace tap::core {

using Shape = std::vector<std::size_t>;

std::size_t shape_numel(const Shape& shape);
std::string shape_str(const Shape& shape);

/// Dense row-major f64 tensor with an optional same-shape gradient buffer.
///
/// Rank 0 is a scalar. Rank 2 tensors are indexed (row, col); feature
/// sequences are stored as [dim x frames] so each column is one frame.
class Tensor {
 public:
  Tensor() : Tensor(Shape{}) {}
  explicit Tensor(Shape shape, double fill = 0.0);
  Tensor(Shape shape, std::vector<double> values);

  static Tensor scalar(double value);
  static Tensor vector(std::vector<double> values);
  static Tensor matrix(std::size_t rows, std::size_t cols, std::vector<double> values);

  const Shape& shape() const noexcept { return shape_; }
  std::size_t rank() const noexcept { return shape_.size(); }
  std::size_t numel() const noexcept { return data_.size(); }
  std::size_t extent(std::size_t axis) const;
  std::size_t rows() const;
  std::size_t cols() const;

  std::span<double> values() noexcept { return data_; }
  std::span<const double> values() const noexcept { return data_; }
  double& operator[](std::size_t i) { return data_[i]; }
  double operator[](std::size_t i) const { return data_[i]; }
  double& at(std::size_t r, std::size_t c) { return data_[r * shape_[1] + c]; }
  double at(std::size_t r, std::size_t c) const { return data_[r * shape_[1] + c]; }
  double item() const;

  bool requires_grad() const noexcept { return requires_grad_; }
  void set_requires_grad(bool on) noexcept { requires_grad_ = on; }

  bool has_grad() const noexcept { return has_grad_; }
  std::span<double> grad();
  std::span<const double> grad() const;
  // Allocates a zero gradient if none is present.
  std::span<double> ensure_grad();
  void zero_grad();
  void clear_grad();

  bool all_finite() const;

 private:
  Shape shape_;
  std::vector<double> data_;
  std::vector<double> grad_;
  bool has_grad_ = false;
  bool requires_grad_ = false;
};

}  // namespace tap::core
