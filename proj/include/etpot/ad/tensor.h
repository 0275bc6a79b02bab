#pragma once

#include <cstddef>
#include <memory>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace etpot::ad {

using Shape = std::vector<std::size_t>;

std::size_t shape_size(const Shape& shape);
std::string shape_string(const Shape& shape);

class ShapeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class NonFiniteError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Immutable dense row-major array of doubles.
///
/// Storage is shared between copies, so passing tensors by value is cheap and
/// safe across threads.
class Tensor {
 public:
  /// Rank-0 zero.
  Tensor();
  Tensor(Shape shape, std::vector<double> values);

  static Tensor zeros(Shape shape);
  static Tensor filled(Shape shape, double value);
  static Tensor scalar(double value);
  static Tensor vector(std::vector<double> values);
  static Tensor matrix(std::size_t rows, std::size_t cols, std::vector<double> values);

  const Shape& shape() const noexcept { return shape_; }
  std::size_t rank() const noexcept { return shape_.size(); }
  std::size_t dim(std::size_t axis) const;
  std::size_t size() const noexcept { return data_->size(); }

  std::span<const double> values() const noexcept { return *data_; }
  double operator[](std::size_t flat) const { return (*data_)[flat]; }
  /// Only valid for single-element tensors.
  double item() const;

  bool all_finite() const;
  /// Same shape and bit-identical values.
  bool identical(const Tensor& other) const;

  Tensor reshaped(Shape shape) const;

 private:
  Shape shape_;
  std::shared_ptr<const std::vector<double>> data_;
};

}  // namespace etpot::ad
