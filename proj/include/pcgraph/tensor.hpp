// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The pcgraph Authors

#pragma once

#include <cstddef>
#include <initializer_list>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace pcg {

using Shape = std::vector<std::size_t>;

std::size_t shape_numel(const Shape& shape);
std::string shape_to_string(const Shape& shape);

/// Dense row-major array of doubles.
///
/// An empty shape denotes a scalar holding one value. Tensors are plain
/// values: copying copies the data.
class Tensor {
 public:
  Tensor() : shape_{0} {}
  explicit Tensor(Shape shape, double fill = 0.0);
  Tensor(Shape shape, std::vector<double> data);

  static Tensor scalar(double value) { return Tensor(Shape{}, {value}); }
  static Tensor vector(std::initializer_list<double> values);
  static Tensor matrix(std::size_t rows, std::size_t cols,
                       std::initializer_list<double> values);
  static Tensor identity(std::size_t n);

  const Shape& shape() const noexcept { return shape_; }
  std::size_t rank() const noexcept { return shape_.size(); }
  std::size_t numel() const noexcept { return data_.size(); }
  std::size_t extent(std::size_t axis) const;

  std::span<double> data() noexcept { return data_; }
  std::span<const double> data() const noexcept { return data_; }
  const std::vector<double>& values() const noexcept { return data_; }

  double& operator[](std::size_t flat) { return data_[flat]; }
  double operator[](std::size_t flat) const { return data_[flat]; }
  double& at(std::initializer_list<std::size_t> index);
  double at(std::initializer_list<std::size_t> index) const;

  /// Same data, new shape; element counts must agree.
  Tensor reshape(Shape shape) const;
  Tensor flatten() const { return reshape(Shape{numel()}); }

  void fill(double value);
  bool all_finite() const noexcept;

  friend bool operator==(const Tensor& a, const Tensor& b) = default;

 private:
  std::size_t offset(std::initializer_list<std::size_t> index) const;

  Shape shape_;
  std::vector<double> data_;
};

enum class ElementOp { add, sub, mul, tanh, sigmoid, tan, sin, sqrt, square };

bool is_binary(ElementOp op) noexcept;

/// Applies `op` independently per element. Binary ops require `b` with the
/// same shape as `a`; unary ops reject `b`.
Tensor elementwise(ElementOp op, const Tensor& a, const Tensor* b = nullptr);

Tensor operator+(const Tensor& a, const Tensor& b);
Tensor operator-(const Tensor& a, const Tensor& b);
Tensor operator-(const Tensor& a);
/// Hadamard product.
Tensor operator*(const Tensor& a, const Tensor& b);
Tensor operator*(double s, const Tensor& a);

Tensor& operator+=(Tensor& a, const Tensor& b);
Tensor& operator-=(Tensor& a, const Tensor& b);

/// a += s * b
void axpy(double s, const Tensor& b, Tensor& a);

Tensor matmul(const Tensor& a, const Tensor& b);
Tensor transpose(const Tensor& a);
/// m [rows, cols] times flattened x [cols] -> [rows].
Tensor matvec(const Tensor& m, const Tensor& x);
/// m^T times flattened u [rows] -> [cols].
Tensor matvec_transposed(const Tensor& m, const Tensor& u);
/// u [n] outer x [m] -> [n, m]; both operands are flattened.
Tensor outer(const Tensor& u, const Tensor& x);

double dot(const Tensor& a, const Tensor& b);
double max_abs(const Tensor& a) noexcept;
double sum(const Tensor& a) noexcept;

enum class ReduceOp { sum, mean, max };

struct Reduction {
  Tensor values;
  /// Flat indices into the source tensor of each selected maximum; empty
  /// unless the reduction was `max`. Ties keep the first index in row-major
  /// order.
  std::vector<std::size_t> argmax;
};

/// Reduces over `axis`, or over every element when no axis is given.
Reduction reduce(ReduceOp op, const Tensor& a,
                 std::optional<std::size_t> axis = std::nullopt);

// Batch helpers. A batched tensor carries a leading batch axis.
Tensor batch_item(const Tensor& batched, std::size_t index);
void set_batch_item(Tensor& batched, std::size_t index, const Tensor& item);
Tensor stack(std::span<const Tensor> items);

}  // namespace pcg
