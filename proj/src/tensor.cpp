// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The pcgraph Authors

#include "pcgraph/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>

#include "pcgraph/errors.hpp"

namespace pcg {

std::size_t shape_numel(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1},
                         std::multiplies<>());
}

std::string shape_to_string(const Shape& shape) {
  if (shape.empty()) return "scalar";
  std::string out;
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) out += 'x';
    out += std::to_string(shape[i]);
  }
  return out;
}

Tensor::Tensor(Shape shape, double fill)
    : shape_(std::move(shape)), data_(shape_numel(shape_), fill) {}

Tensor::Tensor(Shape shape, std::vector<double> data)
    : shape_(std::move(shape)), data_(std::move(data)) {
  if (data_.size() != shape_numel(shape_)) {
    throw StructuralError("tensor data has " + std::to_string(data_.size()) +
                          " values but shape " + shape_to_string(shape_) +
                          " needs " + std::to_string(shape_numel(shape_)));
  }
}

Tensor Tensor::vector(std::initializer_list<double> values) {
  return Tensor(Shape{values.size()}, std::vector<double>(values));
}

Tensor Tensor::matrix(std::size_t rows, std::size_t cols,
                      std::initializer_list<double> values) {
  return Tensor(Shape{rows, cols}, std::vector<double>(values));
}

Tensor Tensor::identity(std::size_t n) {
  Tensor t(Shape{n, n});
  for (std::size_t i = 0; i < n; ++i) t.data_[i * n + i] = 1.0;
  return t;
}

std::size_t Tensor::extent(std::size_t axis) const {
  if (axis >= shape_.size()) {
    throw StructuralError("axis " + std::to_string(axis) +
                          " out of range for shape " + shape_to_string(shape_));
  }
  return shape_[axis];
}

std::size_t Tensor::offset(std::initializer_list<std::size_t> index) const {
  if (index.size() != shape_.size()) {
    throw StructuralError("index rank does not match tensor rank");
  }
  std::size_t flat = 0;
  std::size_t axis = 0;
  for (std::size_t i : index) {
    if (i >= shape_[axis]) throw StructuralError("index out of range");
    flat = flat * shape_[axis] + i;
    ++axis;
  }
  return flat;
}

double& Tensor::at(std::initializer_list<std::size_t> index) {
  return data_[offset(index)];
}

double Tensor::at(std::initializer_list<std::size_t> index) const {
  return data_[offset(index)];
}

Tensor Tensor::reshape(Shape shape) const {
  if (shape_numel(shape) != data_.size()) {
    throw StructuralError("cannot reshape " + shape_to_string(shape_) +
                          " to " + shape_to_string(shape));
  }
  return Tensor(std::move(shape), data_);
}

void Tensor::fill(double value) { std::fill(data_.begin(), data_.end(), value); }

bool Tensor::all_finite() const noexcept {
  return std::all_of(data_.begin(), data_.end(),
                     [](double x) { return std::isfinite(x); });
}

bool is_binary(ElementOp op) noexcept {
  return op == ElementOp::add || op == ElementOp::sub || op == ElementOp::mul;
}

namespace {

void require_same_shape(const Tensor& a, const Tensor& b, const char* what) {
  if (a.shape() != b.shape()) {
    throw StructuralError(std::string(what) + ": shape mismatch " +
                          shape_to_string(a.shape()) + " vs " +
                          shape_to_string(b.shape()));
  }
}

template <typename F>
Tensor map_binary(const Tensor& a, const Tensor& b, F f) {
  Tensor out(a.shape());
  auto x = a.data();
  auto y = b.data();
  auto z = out.data();
  for (std::size_t i = 0; i < z.size(); ++i) z[i] = f(x[i], y[i]);
  return out;
}

template <typename F>
Tensor map_unary(const Tensor& a, F f) {
  Tensor out(a.shape());
  auto x = a.data();
  auto z = out.data();
  for (std::size_t i = 0; i < z.size(); ++i) z[i] = f(x[i]);
  return out;
}

}  // namespace

Tensor elementwise(ElementOp op, const Tensor& a, const Tensor* b) {
  if (is_binary(op)) {
    if (b == nullptr) throw StructuralError("binary op needs two operands");
    require_same_shape(a, *b, "elementwise");
  } else if (b != nullptr) {
    throw StructuralError("unary op given two operands");
  }
  switch (op) {
    case ElementOp::add:
      return map_binary(a, *b, [](double x, double y) { return x + y; });
    case ElementOp::sub:
      return map_binary(a, *b, [](double x, double y) { return x - y; });
    case ElementOp::mul:
      return map_binary(a, *b, [](double x, double y) { return x * y; });
    case ElementOp::tanh:
      return map_unary(a, [](double x) { return std::tanh(x); });
    case ElementOp::sigmoid:
      return map_unary(a, [](double x) { return 1.0 / (1.0 + std::exp(-x)); });
    case ElementOp::tan:
      return map_unary(a, [](double x) { return std::tan(x); });
    case ElementOp::sin:
      return map_unary(a, [](double x) { return std::sin(x); });
    case ElementOp::sqrt:
      for (double x : a.data()) {
        if (x < 0.0) {
          throw DomainError("sqrt of negative value " + std::to_string(x));
        }
      }
      return map_unary(a, [](double x) { return std::sqrt(x); });
    case ElementOp::square:
      return map_unary(a, [](double x) { return x * x; });
  }
  throw StructuralError("unknown element op");
}

Tensor operator+(const Tensor& a, const Tensor& b) {
  return elementwise(ElementOp::add, a, &b);
}
Tensor operator-(const Tensor& a, const Tensor& b) {
  return elementwise(ElementOp::sub, a, &b);
}
Tensor operator-(const Tensor& a) {
  return map_unary(a, [](double x) { return -x; });
}
Tensor operator*(const Tensor& a, const Tensor& b) {
  return elementwise(ElementOp::mul, a, &b);
}
Tensor operator*(double s, const Tensor& a) {
  return map_unary(a, [s](double x) { return s * x; });
}

Tensor& operator+=(Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "+=");
  auto x = a.data();
  auto y = b.data();
  for (std::size_t i = 0; i < x.size(); ++i) x[i] += y[i];
  return a;
}

Tensor& operator-=(Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "-=");
  auto x = a.data();
  auto y = b.data();
  for (std::size_t i = 0; i < x.size(); ++i) x[i] -= y[i];
  return a;
}

void axpy(double s, const Tensor& b, Tensor& a) {
  require_same_shape(a, b, "axpy");
  auto x = a.data();
  auto y = b.data();
  for (std::size_t i = 0; i < x.size(); ++i) x[i] += s * y[i];
}

Tensor matmul(const Tensor& a, const Tensor& b) {
  if (a.rank() != 2 || b.rank() != 2) {
    throw StructuralError("matmul needs rank-2 operands");
  }
  const std::size_t n = a.shape()[0];
  const std::size_t k = a.shape()[1];
  const std::size_t m = b.shape()[1];
  if (b.shape()[0] != k) {
    throw StructuralError("matmul inner extents differ: " +
                          shape_to_string(a.shape()) + " * " +
                          shape_to_string(b.shape()));
  }
  Tensor out(Shape{n, m});
  auto x = a.data();
  auto y = b.data();
  auto z = out.data();
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t p = 0; p < k; ++p) {
      const double aip = x[i * k + p];
      for (std::size_t j = 0; j < m; ++j) z[i * m + j] += aip * y[p * m + j];
    }
  }
  return out;
}

Tensor transpose(const Tensor& a) {
  if (a.rank() != 2) throw StructuralError("transpose needs a rank-2 tensor");
  const std::size_t n = a.shape()[0];
  const std::size_t m = a.shape()[1];
  Tensor out(Shape{m, n});
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < m; ++j) out[j * n + i] = a[i * m + j];
  return out;
}

Tensor matvec(const Tensor& m, const Tensor& x) {
  if (m.rank() != 2) throw StructuralError("matvec needs a rank-2 matrix");
  const std::size_t rows = m.shape()[0];
  const std::size_t cols = m.shape()[1];
  if (x.numel() != cols) {
    throw StructuralError("matvec: matrix " + shape_to_string(m.shape()) +
                          " cannot multiply " + std::to_string(x.numel()) +
                          " values");
  }
  Tensor out(Shape{rows});
  auto w = m.data();
  auto v = x.data();
  for (std::size_t i = 0; i < rows; ++i) {
    double acc = 0.0;
    const double* row = w.data() + i * cols;
    for (std::size_t j = 0; j < cols; ++j) acc += row[j] * v[j];
    out[i] = acc;
  }
  return out;
}

Tensor matvec_transposed(const Tensor& m, const Tensor& u) {
  if (m.rank() != 2) throw StructuralError("matvec_transposed needs a matrix");
  const std::size_t rows = m.shape()[0];
  const std::size_t cols = m.shape()[1];
  if (u.numel() != rows) {
    throw StructuralError("matvec_transposed: matrix " +
                          shape_to_string(m.shape()) + " cannot take " +
                          std::to_string(u.numel()) + " values");
  }
  Tensor out(Shape{cols});
  auto w = m.data();
  auto v = u.data();
  auto z = out.data();
  for (std::size_t i = 0; i < rows; ++i) {
    const double ui = v[i];
    const double* row = w.data() + i * cols;
    for (std::size_t j = 0; j < cols; ++j) z[j] += row[j] * ui;
  }
  return out;
}

Tensor outer(const Tensor& u, const Tensor& x) {
  const std::size_t n = u.numel();
  const std::size_t m = x.numel();
  Tensor out(Shape{n, m});
  auto a = u.data();
  auto b = x.data();
  auto z = out.data();
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < m; ++j) z[i * m + j] = a[i] * b[j];
  return out;
}

double dot(const Tensor& a, const Tensor& b) {
  if (a.numel() != b.numel()) throw StructuralError("dot: size mismatch");
  double acc = 0.0;
  for (std::size_t i = 0; i < a.numel(); ++i) acc += a[i] * b[i];
  return acc;
}

double max_abs(const Tensor& a) noexcept {
  double m = 0.0;
  for (double x : a.data()) m = std::max(m, std::abs(x));
  return m;
}

double sum(const Tensor& a) noexcept {
  double acc = 0.0;
  for (double x : a.data()) acc += x;
  return acc;
}

Reduction reduce(ReduceOp op, const Tensor& a, std::optional<std::size_t> axis) {
  Reduction r;
  if (!axis) {
    if (a.numel() == 0) throw StructuralError("reduce of an empty tensor");
    switch (op) {
      case ReduceOp::sum:
        r.values = Tensor::scalar(sum(a));
        break;
      case ReduceOp::mean:
        r.values = Tensor::scalar(sum(a) / static_cast<double>(a.numel()));
        break;
      case ReduceOp::max: {
        std::size_t best = 0;
        for (std::size_t i = 1; i < a.numel(); ++i)
          if (a[i] > a[best]) best = i;
        r.values = Tensor::scalar(a[best]);
        r.argmax = {best};
        break;
      }
    }
    return r;
  }

  const std::size_t ax = *axis;
  if (ax >= a.rank()) {
    throw StructuralError("reduce axis " + std::to_string(ax) +
                          " out of range for shape " +
                          shape_to_string(a.shape()));
  }
  const auto& s = a.shape();
  std::size_t outer_n = 1;
  for (std::size_t i = 0; i < ax; ++i) outer_n *= s[i];
  const std::size_t len = s[ax];
  std::size_t inner_n = 1;
  for (std::size_t i = ax + 1; i < s.size(); ++i) inner_n *= s[i];
  if (len == 0) throw StructuralError("reduce over an empty axis");

  Shape out_shape;
  for (std::size_t i = 0; i < s.size(); ++i)
    if (i != ax) out_shape.push_back(s[i]);
  r.values = Tensor(out_shape);
  if (op == ReduceOp::max) r.argmax.resize(outer_n * inner_n);

  for (std::size_t o = 0; o < outer_n; ++o) {
    for (std::size_t in = 0; in < inner_n; ++in) {
      const std::size_t base = o * len * inner_n + in;
      const std::size_t dst = o * inner_n + in;
      if (op == ReduceOp::max) {
        std::size_t best = base;
        for (std::size_t k = 1; k < len; ++k) {
          const std::size_t idx = base + k * inner_n;
          if (a[idx] > a[best]) best = idx;
        }
        r.values[dst] = a[best];
        r.argmax[dst] = best;
      } else {
        double acc = 0.0;
        for (std::size_t k = 0; k < len; ++k) acc += a[base + k * inner_n];
        r.values[dst] =
            op == ReduceOp::mean ? acc / static_cast<double>(len) : acc;
      }
    }
  }
  return r;
}

Tensor batch_item(const Tensor& batched, std::size_t index) {
  if (batched.rank() == 0 || index >= batched.shape()[0]) {
    throw StructuralError("batch index out of range");
  }
  Shape item_shape(batched.shape().begin() + 1, batched.shape().end());
  const std::size_t n = shape_numel(item_shape);
  auto src = batched.data().subspan(index * n, n);
  return Tensor(std::move(item_shape), std::vector<double>(src.begin(), src.end()));
}

void set_batch_item(Tensor& batched, std::size_t index, const Tensor& item) {
  if (batched.rank() == 0 || index >= batched.shape()[0]) {
    throw StructuralError("batch index out of range");
  }
  const std::size_t n = batched.numel() / batched.shape()[0];
  if (item.numel() != n) {
    throw StructuralError("batch item has " + std::to_string(item.numel()) +
                          " values, expected " + std::to_string(n));
  }
  std::copy(item.data().begin(), item.data().end(),
            batched.data().begin() + static_cast<std::ptrdiff_t>(index * n));
}

Tensor stack(std::span<const Tensor> items) {
  if (items.empty()) throw StructuralError("stack of zero tensors");
  Shape shape{items.size()};
  shape.insert(shape.end(), items[0].shape().begin(), items[0].shape().end());
  Tensor out(shape);
  for (std::size_t i = 0; i < items.size(); ++i) {
    if (items[i].shape() != items[0].shape()) {
      throw StructuralError("stack: item shapes differ");
    }
    set_batch_item(out, i, items[i]);
  }
  return out;
}

}  // namespace pcg
