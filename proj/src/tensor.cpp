/* Copyright 2026 The gridnmt Authors. All Rights Reserved.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
==============================================================================*/

#include "gridnmt/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <sstream>

#include "gridnmt/error.hpp"

namespace gridnmt {

Shape::Shape(std::initializer_list<std::size_t> dims)
    : Shape(std::span<const std::size_t>(dims.begin(), dims.size())) {}

Shape::Shape(std::span<const std::size_t> dims) {
  if (dims.empty() || dims.size() > kMaxRank) {
    throw ShapeError("tensor rank must be between 1 and 4, got " + std::to_string(dims.size()));
  }
  for (std::size_t axis = 0; axis < dims.size(); ++axis) {
    if (dims[axis] == 0) throw ShapeError("tensor extents must be positive");
    dims_[axis] = dims[axis];
  }
  rank_ = dims.size();
}

std::size_t Shape::numel() const {
  if (rank_ == 0) return 0;
  std::size_t n = 1;
  for (std::size_t axis = 0; axis < rank_; ++axis) n *= dims_[axis];
  return n;
}

std::string Shape::str() const {
  std::ostringstream os;
  os << '[';
  for (std::size_t axis = 0; axis < rank_; ++axis) {
    if (axis) os << 'x';
    os << dims_[axis];
  }
  os << ']';
  return os.str();
}

Tensor::Tensor(Shape shape, std::vector<double> values) : shape_(shape) {
  if (shape.numel() != values.size()) {
    throw ShapeError("shape " + shape.str() + " does not hold " + std::to_string(values.size()) +
                     " values");
  }
  data_ = std::make_shared<const std::vector<double>>(std::move(values));
}

Tensor Tensor::zeros(Shape shape) { return filled(shape, 0.0); }

Tensor Tensor::filled(Shape shape, double value) {
  return Tensor(shape, std::vector<double>(shape.numel(), value));
}

Tensor Tensor::vector(std::vector<double> values) {
  const std::size_t n = values.size();
  return Tensor(Shape{n}, std::move(values));
}

Tensor Tensor::matrix(std::size_t rows, std::size_t cols, std::vector<double> values) {
  return Tensor(Shape{rows, cols}, std::move(values));
}

Tensor Tensor::scalar(double value) { return Tensor(Shape{1}, {value}); }

std::span<const double> Tensor::values() const {
  if (!data_) return {};
  return {data_->data(), data_->size()};
}

std::vector<double> Tensor::to_vector() const {
  auto v = values();
  return {v.begin(), v.end()};
}

bool Tensor::bit_equal(const Tensor& other) const {
  if (!(shape_ == other.shape_)) return false;
  if (data_ == other.data_) return true;
  auto a = values();
  auto b = other.values();
  return a.size() == b.size() && std::memcmp(a.data(), b.data(), a.size() * sizeof(double)) == 0;
}

double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

void check_finite(std::span<const double> values, const char* what) {
  for (double v : values) {
    if (!std::isfinite(v)) throw NumericError(std::string("non-finite value produced by ") + what);
  }
}

namespace kernels {

void matvec(std::span<const double> w, std::size_t rows, std::size_t cols,
            std::span<const double> x, std::span<double> out) {
  // Eight independent row accumulators; each still sums its own row in
  // ascending column order, so results match the plain loop bit for bit.
  constexpr std::size_t kBlock = 8;
  const double* xp = x.data();
  std::size_t r = 0;
  for (; r + kBlock <= rows; r += kBlock) {
    double acc[kBlock] = {};
    const double* base = w.data() + r * cols;
    for (std::size_t k = 0; k < cols; ++k) {
      const double xk = xp[k];
      for (std::size_t b = 0; b < kBlock; ++b) acc[b] += base[b * cols + k] * xk;
    }
    for (std::size_t b = 0; b < kBlock; ++b) out[r + b] = acc[b];
  }
  for (; r < rows; ++r) {
    const double* row = w.data() + r * cols;
    double acc = 0.0;
    for (std::size_t k = 0; k < cols; ++k) acc += row[k] * xp[k];
    out[r] = acc;
  }
}

void matvec_transposed_acc(std::span<const double> w, std::size_t rows, std::size_t cols,
                           std::span<const double> g, std::span<double> out) {
  double* op = out.data();
  for (std::size_t r = 0; r < rows; ++r) {
    const double gr = g[r];
    const double* row = w.data() + r * cols;
    for (std::size_t k = 0; k < cols; ++k) op[k] += row[k] * gr;
  }
}

void outer_acc(std::span<const double> g, std::span<const double> x, std::span<double> out) {
  const std::size_t cols = x.size();
  const double* xp = x.data();
  for (std::size_t r = 0; r < g.size(); ++r) {
    const double gr = g[r];
    double* row = out.data() + r * cols;
    for (std::size_t k = 0; k < cols; ++k) row[k] += gr * xp[k];
  }
}

void matmul(std::span<const double> a, std::span<const double> b, std::size_t m, std::size_t k,
            std::size_t n, std::span<double> out) {
  // i-k-j order: out[i, j] still accumulates its products in ascending k.
  std::fill(out.begin(), out.end(), 0.0);
  for (std::size_t i = 0; i < m; ++i) {
    double* orow = out.data() + i * n;
    for (std::size_t kk = 0; kk < k; ++kk) {
      const double aik = a[i * k + kk];
      const double* brow = b.data() + kk * n;
      for (std::size_t j = 0; j < n; ++j) orow[j] += aik * brow[j];
    }
  }
}

void softmax(std::span<const double> x, std::span<double> out) {
  const double m = *std::max_element(x.begin(), x.end());
  double total = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    out[i] = std::exp(x[i] - m);
    total += out[i];
  }
  for (std::size_t i = 0; i < x.size(); ++i) out[i] /= total;
}

void log_softmax(std::span<const double> x, std::span<double> out) {
  const double m = *std::max_element(x.begin(), x.end());
  double total = 0.0;
  for (double v : x) total += std::exp(v - m);
  const double log_total = std::log(total);
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = (x[i] - m) - log_total;
}

}  // namespace kernels

namespace {

void require_same_shape(const Tensor& a, const Tensor& b, const char* what) {
  if (!(a.shape() == b.shape())) {
    throw ShapeError(std::string(what) + ": shape mismatch " + a.shape().str() + " vs " +
                     b.shape().str());
  }
}

void require_finite_input(const Tensor& t, const char* what) { check_finite(t.values(), what); }

}  // namespace

Tensor matmul(const Tensor& a, const Tensor& b) {
  if (a.shape().rank() != 2 || b.shape().rank() != 2 || a.shape()[1] != b.shape()[0]) {
    throw ShapeError("matmul: cannot multiply " + a.shape().str() + " by " + b.shape().str());
  }
  const std::size_t m = a.shape()[0], k = a.shape()[1], n = b.shape()[1];
  std::vector<double> out(m * n);
  kernels::matmul(a.values(), b.values(), m, k, n, out);
  check_finite(out, "matmul");
  return Tensor::matrix(m, n, std::move(out));
}

Tensor matvec(const Tensor& w, const Tensor& x) {
  if (w.shape().rank() != 2 || x.shape().rank() != 1 || w.shape()[1] != x.shape()[0]) {
    throw ShapeError("matvec: cannot multiply " + w.shape().str() + " by " + x.shape().str());
  }
  std::vector<double> out(w.shape()[0]);
  kernels::matvec(w.values(), w.shape()[0], w.shape()[1], x.values(), out);
  check_finite(out, "matvec");
  return Tensor::vector(std::move(out));
}

Tensor ewise(Ewise op, const Tensor& a) {
  std::vector<double> out(a.size());
  auto in = a.values();
  switch (op) {
    case Ewise::kTanh:
      for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::tanh(in[i]);
      break;
    case Ewise::kSigmoid:
      for (std::size_t i = 0; i < out.size(); ++i) out[i] = sigmoid(in[i]);
      break;
    default:
      throw ShapeError("ewise: binary operation called with one operand");
  }
  require_finite_input(a, "ewise");
  return Tensor(a.shape(), std::move(out));
}

Tensor ewise(Ewise op, const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "ewise");
  std::vector<double> out(a.size());
  auto x = a.values();
  auto y = b.values();
  switch (op) {
    case Ewise::kAdd:
      for (std::size_t i = 0; i < out.size(); ++i) out[i] = x[i] + y[i];
      break;
    case Ewise::kSub:
      for (std::size_t i = 0; i < out.size(); ++i) out[i] = x[i] - y[i];
      break;
    case Ewise::kMul:
      for (std::size_t i = 0; i < out.size(); ++i) out[i] = x[i] * y[i];
      break;
    default:
      throw ShapeError("ewise: unary operation called with two operands");
  }
  check_finite(out, "ewise");
  return Tensor(a.shape(), std::move(out));
}

Tensor softmax(const Tensor& x) {
  if (x.empty()) throw ShapeError("softmax of an empty tensor");
  require_finite_input(x, "softmax");
  std::vector<double> out(x.size());
  kernels::softmax(x.values(), out);
  return Tensor(x.shape(), std::move(out));
}

Tensor log_softmax(const Tensor& x) {
  if (x.empty()) throw ShapeError("log_softmax of an empty tensor");
  require_finite_input(x, "log_softmax");
  std::vector<double> out(x.size());
  kernels::log_softmax(x.values(), out);
  return Tensor(x.shape(), std::move(out));
}

}  // namespace gridnmt
