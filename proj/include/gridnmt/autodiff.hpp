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

#include <cstddef>
#include <cstdint>
#include <functional>
#include <initializer_list>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "gridnmt/tensor.hpp"

namespace gridnmt {

using ParamId = std::size_t;

// Named trainable tensors, in registration order. Registration order is the
// canonical order for serialization, gradient merging and optimizer steps.
class ParamStore {
 public:
  ParamId add(std::string name, Tensor init);

  std::size_t size() const { return values_.size(); }
  const Tensor& value(ParamId id) const { return values_.at(id); }
  const std::string& name(ParamId id) const { return names_.at(id); }
  std::optional<ParamId> find(std::string_view name) const;
  ParamId id(std::string_view name) const;  // throws if absent

  void set(ParamId id, Tensor value);
  std::size_t total_size() const;

 private:
  std::vector<std::string> names_;
  std::vector<Tensor> values_;
  std::unordered_map<std::string, ParamId> index_;
};

// Gradient accumulators shaped like a ParamStore.
class GradBuffer {
 public:
  GradBuffer() = default;
  explicit GradBuffer(const ParamStore& store);

  std::size_t size() const { return grads_.size(); }
  std::span<double> operator[](ParamId id) { return grads_.at(id); }
  std::span<const double> operator[](ParamId id) const { return grads_.at(id); }

  void zero();
  void add(const GradBuffer& other);  // element-wise, parameter order
  void scale(double factor);
  bool all_finite() const;

 private:
  std::vector<std::vector<double>> grads_;
};

namespace ad {

using NodeId = std::int32_t;

enum class Op : std::uint8_t {
  kConstant,
  kParam,
  kExternal,
  kAdd,
  kSub,
  kMul,
  kDiv,
  kScale,
  kOneMinus,
  kTanh,
  kSigmoid,
  kMatVec,
  kMatMul,
  kConcat,
  kSlice,
  kRow,
  kPick,
  kDot,
  kSum,
  kAddN,
  kMulScalar,
  kSoftmax,
  kLogSoftmax,
  kWeightedSum,
};

class Tape;

// Handle to a node on a tape.
struct Var {
  Tape* tape = nullptr;
  NodeId id = -1;

  bool valid() const { return tape != nullptr && id >= 0; }
  const Tensor& value() const;
};

// Append-only record of a computation. Nodes only reference earlier nodes,
// so reverse insertion order is a valid reverse topological order. A tape is
// consumed by backward(); a second backward() throws.
class Tape {
 public:
  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;
  Tape(Tape&&) = default;
  Tape& operator=(Tape&&) = default;

  Var constant(Tensor value);
  // Leaf bound to a parameter; one leaf per parameter per tape.
  Var param(const ParamStore& store, ParamId id);
  // Placeholder for a value that lives on another tape; see splice().
  Var external(Tensor value);

  std::size_t size() const { return nodes_.size(); }
  bool consumed() const { return consumed_; }
  const Tensor& value(NodeId id) const { return nodes_.at(id).value; }
  Op op(NodeId id) const { return nodes_.at(id).op; }

  // Accumulates d(seed)/d(param) * seed_value into grads for every parameter
  // leaf, then releases all nodes. The seed must be a single-element node.
  void backward(Var seed, GradBuffer& grads, double seed_value = 1.0);

  // Appends the nodes of a fragment tape. The fragment's external
  // placeholders, in creation order, are replaced by `bindings`; its
  // parameter leaves are merged with this tape's. Returns, for every
  // fragment node, the id it now has on this tape.
  std::vector<NodeId> splice(Tape&& fragment, std::span<const Var> bindings);

  // Used by the operation builders below.
  Var push(Op op, std::vector<NodeId> inputs, Tensor value, std::size_t index = 0,
           double factor = 0.0);

 private:
  struct Node {
    Op op;
    std::vector<NodeId> inputs;
    Tensor value;
    std::size_t index = 0;  // param id, slice offset, row, picked element
    double factor = 0.0;    // scale factor
  };

  Var param_leaf(ParamId id, Tensor value);
  void check_live() const;

  std::vector<Node> nodes_;
  std::vector<NodeId> param_leaves_;
  bool consumed_ = false;
};

Var add(Var a, Var b);
Var sub(Var a, Var b);
Var mul(Var a, Var b);
Var div(Var a, Var b);
Var scale(Var a, double factor);
Var one_minus(Var a);
Var tanh(Var a);
Var sigmoid(Var a);
// [m x k] times [k] -> [m]
Var matvec(Var w, Var x);
Var matmul(Var a, Var b);
// Concatenation of rank-1 operands.
Var concat(std::span<const Var> parts);
Var concat(std::initializer_list<Var> parts);
Var slice(Var a, std::size_t offset, std::size_t length);
// Row `row` of a rank-2 operand, as a vector.
Var row(Var matrix, std::size_t row);
// Element `index` of a vector, as a one-element vector.
Var pick(Var a, std::size_t index);
Var dot(Var a, Var b);
Var sum(Var a);
Var add_n(std::span<const Var> terms);
// Vector times a one-element vector.
Var mul_scalar(Var vec, Var scalar);
Var softmax(Var a);
Var log_softmax(Var a);
// sum_j weights[j] * vecs[j], accumulated in ascending j.
Var weighted_sum(Var weights, std::span<const Var> vecs);

inline Var operator+(Var a, Var b) { return add(a, b); }
inline Var operator-(Var a, Var b) { return sub(a, b); }
inline Var operator*(Var a, Var b) { return mul(a, b); }

}  // namespace ad

struct ParamCheck {
  std::string name;
  double max_rel_error = 0.0;
  std::size_t worst_index = 0;
  bool passed = true;
};

struct GradCheckReport {
  std::vector<ParamCheck> params;
  double tolerance = 0.0;
  bool passed = true;
};

using LossClosure = std::function<ad::Var(ad::Tape&)>;

// Compares reverse-mode gradients against central finite differences for
// every scalar of every parameter. Relative error is
// |g_ad - g_fd| / max(|g_ad|, |g_fd|, 1e-8). Throws NumericError when two
// evaluations at the same point disagree.
GradCheckReport grad_check(const LossClosure& loss, ParamStore& params, double epsilon = 1e-5,
                           double tolerance = 1e-6);

}  // namespace gridnmt
