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

#pragma once

#include <array>
#include <cstddef>
#include <initializer_list>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace gridnmt {

// Extents of a dense tensor, rank 1 to 4. Every extent is positive. A
// default-constructed Shape (rank 0) only describes the empty tensor.
class Shape {
 public:
  static constexpr std::size_t kMaxRank = 4;

  Shape() = default;
  Shape(std::initializer_list<std::size_t> dims);
  explicit Shape(std::span<const std::size_t> dims);

  std::size_t rank() const { return rank_; }
  std::size_t operator[](std::size_t axis) const { return dims_[axis]; }
  std::size_t numel() const;
  std::span<const std::size_t> dims() const { return {dims_.data(), rank_}; }
  std::string str() const;

  bool operator==(const Shape& other) const = default;

 private:
  std::array<std::size_t, kMaxRank> dims_{};
  std::size_t rank_ = 0;
};

// Immutable dense row-major array of doubles. Copies share storage, so a
// Tensor is cheap to pass around and safe to read from several threads.
class Tensor {
 public:
  Tensor() = default;
  Tensor(Shape shape, std::vector<double> values);

  static Tensor zeros(Shape shape);
  static Tensor filled(Shape shape, double value);
  static Tensor vector(std::vector<double> values);
  static Tensor matrix(std::size_t rows, std::size_t cols, std::vector<double> values);
  static Tensor scalar(double value);

  const Shape& shape() const { return shape_; }
  std::size_t size() const { return shape_.numel(); }
  bool empty() const { return shape_.rank() == 0; }

  std::span<const double> values() const;
  const double* data() const { return data_ ? data_->data() : nullptr; }
  double operator[](std::size_t index) const { return (*data_)[index]; }
  double at(std::size_t row, std::size_t col) const { return (*data_)[row * shape_[1] + col]; }
  std::size_t rows() const { return shape_[0]; }
  std::size_t cols() const { return shape_.rank() > 1 ? shape_[1] : 1; }

  std::vector<double> to_vector() const;

  // Same shape and identical bit patterns (so -0.0 != +0.0, NaN == NaN).
  bool bit_equal(const Tensor& other) const;

 private:
  Shape shape_;
  std::shared_ptr<const std::vector<double>> data_;
};

// Numerically stable logistic function.
double sigmoid(double x);

// Throws NumericError naming `what` if any value is NaN or infinite.
void check_finite(std::span<const double> values, const char* what);

// Raw kernels shared by the value-level operations and the autodiff
// backward rules. Every reduction runs in ascending index order.
namespace kernels {

// out[r] = sum_k w[r, k] * x[k]
void matvec(std::span<const double> w, std::size_t rows, std::size_t cols,
            std::span<const double> x, std::span<double> out);
// out[k] += sum_r w[r, k] * g[r]
void matvec_transposed_acc(std::span<const double> w, std::size_t rows, std::size_t cols,
                           std::span<const double> g, std::span<double> out);
// out[r, k] += g[r] * x[k]
void outer_acc(std::span<const double> g, std::span<const double> x, std::span<double> out);
// out[i, j] = sum_k a[i, k] * b[k, j]
void matmul(std::span<const double> a, std::span<const double> b, std::size_t m, std::size_t k,
            std::size_t n, std::span<double> out);
void softmax(std::span<const double> x, std::span<double> out);
void log_softmax(std::span<const double> x, std::span<double> out);

}  // namespace kernels

Tensor matmul(const Tensor& a, const Tensor& b);
// [m x k] times [k] -> [m]
Tensor matvec(const Tensor& w, const Tensor& x);

enum class Ewise { kAdd, kSub, kMul, kTanh, kSigmoid };

Tensor ewise(Ewise op, const Tensor& a);
Tensor ewise(Ewise op, const Tensor& a, const Tensor& b);

inline Tensor add(const Tensor& a, const Tensor& b) { return ewise(Ewise::kAdd, a, b); }
inline Tensor sub(const Tensor& a, const Tensor& b) { return ewise(Ewise::kSub, a, b); }
inline Tensor mul(const Tensor& a, const Tensor& b) { return ewise(Ewise::kMul, a, b); }
inline Tensor tanh(const Tensor& a) { return ewise(Ewise::kTanh, a); }
inline Tensor sigmoid(const Tensor& a) { return ewise(Ewise::kSigmoid, a); }

Tensor softmax(const Tensor& x);
Tensor log_softmax(const Tensor& x);

}  // namespace gridnmt
