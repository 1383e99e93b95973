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

#include "gridnmt/autodiff.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <string>

#include "gridnmt/error.hpp"

namespace gridnmt {

ParamId ParamStore::add(std::string name, Tensor init) {
  if (init.empty()) throw ShapeError("parameter '" + name + "' has no shape");
  if (index_.count(name)) throw ConfigError("duplicate parameter name '" + name + "'");
  const ParamId id = values_.size();
  index_.emplace(name, id);
  names_.push_back(std::move(name));
  values_.push_back(std::move(init));
  return id;
}

std::optional<ParamId> ParamStore::find(std::string_view name) const {
  auto it = index_.find(std::string(name));
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

ParamId ParamStore::id(std::string_view name) const {
  auto found = find(name);
  if (!found) throw DataError("unknown parameter '" + std::string(name) + "'");
  return *found;
}

void ParamStore::set(ParamId id, Tensor value) {
  if (!(values_.at(id).shape() == value.shape())) {
    throw ShapeError("parameter '" + names_[id] + "' expects shape " +
                     values_[id].shape().str() + ", got " + value.shape().str());
  }
  values_[id] = std::move(value);
}

std::size_t ParamStore::total_size() const {
  std::size_t n = 0;
  for (const auto& v : values_) n += v.size();
  return n;
}

GradBuffer::GradBuffer(const ParamStore& store) {
  grads_.reserve(store.size());
  for (ParamId id = 0; id < store.size(); ++id) grads_.emplace_back(store.value(id).size(), 0.0);
}

void GradBuffer::zero() {
  for (auto& g : grads_) std::fill(g.begin(), g.end(), 0.0);
}

void GradBuffer::add(const GradBuffer& other) {
  if (other.grads_.size() != grads_.size()) throw ShapeError("gradient buffers differ in layout");
  for (std::size_t p = 0; p < grads_.size(); ++p) {
    auto& dst = grads_[p];
    const auto& src = other.grads_[p];
    if (src.size() != dst.size()) throw ShapeError("gradient buffers differ in layout");
    for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += src[i];
  }
}

void GradBuffer::scale(double factor) {
  for (auto& g : grads_) {
    for (double& v : g) v *= factor;
  }
}

bool GradBuffer::all_finite() const {
  for (const auto& g : grads_) {
    for (double v : g) {
      if (!std::isfinite(v)) return false;
    }
  }
  return true;
}

namespace ad {

const Tensor& Var::value() const { return tape->value(id); }

void Tape::check_live() const {
  if (consumed_) throw Error("tape already consumed by backward()");
}

Var Tape::push(Op op, std::vector<NodeId> inputs, Tensor value, std::size_t index, double factor) {
  check_live();
  nodes_.push_back(Node{op, std::move(inputs), std::move(value), index, factor});
  return Var{this, static_cast<NodeId>(nodes_.size() - 1)};
}

Var Tape::constant(Tensor value) { return push(Op::kConstant, {}, std::move(value)); }

Var Tape::external(Tensor value) { return push(Op::kExternal, {}, std::move(value)); }

Var Tape::param_leaf(ParamId id, Tensor value) {
  if (param_leaves_.size() <= id) param_leaves_.resize(id + 1, -1);
  if (param_leaves_[id] >= 0) return Var{this, param_leaves_[id]};
  Var v = push(Op::kParam, {}, std::move(value), id);
  param_leaves_[id] = v.id;
  return v;
}

Var Tape::param(const ParamStore& store, ParamId id) { return param_leaf(id, store.value(id)); }

std::vector<NodeId> Tape::splice(Tape&& fragment, std::span<const Var> bindings) {
  check_live();
  fragment.check_live();
  std::vector<NodeId> map(fragment.nodes_.size(), -1);
  std::size_t next_binding = 0;
  for (std::size_t k = 0; k < fragment.nodes_.size(); ++k) {
    auto& node = fragment.nodes_[k];
    switch (node.op) {
      case Op::kExternal: {
        if (next_binding >= bindings.size()) throw Error("splice: missing binding for placeholder");
        const Var& b = bindings[next_binding++];
        if (b.tape != this) throw Error("splice: binding belongs to another tape");
        map[k] = b.id;
        break;
      }
      case Op::kParam:
        map[k] = param_leaf(node.index, std::move(node.value)).id;
        break;
      default: {
        for (NodeId& in : node.inputs) in = map[in];
        map[k] = push(node.op, std::move(node.inputs), std::move(node.value), node.index,
                      node.factor)
                     .id;
      }
    }
  }
  if (next_binding != bindings.size()) throw Error("splice: unused bindings");
  fragment.nodes_.clear();
  fragment.consumed_ = true;
  return map;
}

namespace {

Tape& same_tape(Var a, Var b, const char* what) {
  if (!a.valid() || !b.valid() || a.tape != b.tape) {
    throw Error(std::string(what) + ": operands must live on the same tape");
  }
  return *a.tape;
}

void require_same_shape(Var a, Var b, const char* what) {
  if (!(a.value().shape() == b.value().shape())) {
    throw ShapeError(std::string(what) + ": shape mismatch " + a.value().shape().str() + " vs " +
                     b.value().shape().str());
  }
}

void require_vector(Var a, const char* what) {
  if (a.value().shape().rank() != 1) {
    throw ShapeError(std::string(what) + ": expected a vector, got " + a.value().shape().str());
  }
}

Tensor like(const Tensor& t, std::vector<double> values, const char* what) {
  check_finite(values, what);
  return Tensor(t.shape(), std::move(values));
}

}  // namespace

Var add(Var a, Var b) {
  Tape& t = same_tape(a, b, "add");
  return t.push(Op::kAdd, {a.id, b.id}, gridnmt::add(a.value(), b.value()));
}

Var sub(Var a, Var b) {
  Tape& t = same_tape(a, b, "sub");
  return t.push(Op::kSub, {a.id, b.id}, gridnmt::sub(a.value(), b.value()));
}

Var mul(Var a, Var b) {
  Tape& t = same_tape(a, b, "mul");
  return t.push(Op::kMul, {a.id, b.id}, gridnmt::mul(a.value(), b.value()));
}

Var div(Var a, Var b) {
  Tape& t = same_tape(a, b, "div");
  require_same_shape(a, b, "div");
  auto x = a.value().values();
  auto y = b.value().values();
  std::vector<double> out(x.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = x[i] / y[i];
  return t.push(Op::kDiv, {a.id, b.id}, like(a.value(), std::move(out), "div"));
}

Var scale(Var a, double factor) {
  auto x = a.value().values();
  std::vector<double> out(x.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = factor * x[i];
  return a.tape->push(Op::kScale, {a.id}, like(a.value(), std::move(out), "scale"), 0, factor);
}

Var one_minus(Var a) {
  auto x = a.value().values();
  std::vector<double> out(x.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = 1.0 - x[i];
  return a.tape->push(Op::kOneMinus, {a.id}, like(a.value(), std::move(out), "one_minus"));
}

Var tanh(Var a) { return a.tape->push(Op::kTanh, {a.id}, gridnmt::tanh(a.value())); }

Var sigmoid(Var a) { return a.tape->push(Op::kSigmoid, {a.id}, gridnmt::sigmoid(a.value())); }

Var matvec(Var w, Var x) {
  Tape& t = same_tape(w, x, "matvec");
  return t.push(Op::kMatVec, {w.id, x.id}, gridnmt::matvec(w.value(), x.value()));
}

Var matmul(Var a, Var b) {
  Tape& t = same_tape(a, b, "matmul");
  return t.push(Op::kMatMul, {a.id, b.id}, gridnmt::matmul(a.value(), b.value()));
}

Var concat(std::span<const Var> parts) {
  if (parts.empty()) throw ShapeError("concat of nothing");
  Tape* t = parts.front().tape;
  std::vector<NodeId> inputs;
  inputs.reserve(parts.size());
  std::size_t total = 0;
  for (const Var& p : parts) {
    if (p.tape != t) throw Error("concat: operands must live on the same tape");
    require_vector(p, "concat");
    total += p.value().size();
    inputs.push_back(p.id);
  }
  std::vector<double> out;
  out.reserve(total);
  for (const Var& p : parts) {
    auto v = p.value().values();
    out.insert(out.end(), v.begin(), v.end());
  }
  return t->push(Op::kConcat, std::move(inputs), Tensor::vector(std::move(out)));
}

Var concat(std::initializer_list<Var> parts) {
  return concat(std::span<const Var>(parts.begin(), parts.size()));
}

Var slice(Var a, std::size_t offset, std::size_t length) {
  require_vector(a, "slice");
  if (length == 0 || offset + length > a.value().size()) {
    throw ShapeError("slice [" + std::to_string(offset) + ", " + std::to_string(offset + length) +
                     ") out of range for " + a.value().shape().str());
  }
  auto v = a.value().values().subspan(offset, length);
  return a.tape->push(Op::kSlice, {a.id}, Tensor::vector({v.begin(), v.end()}), offset);
}

Var row(Var matrix, std::size_t r) {
  const Tensor& m = matrix.value();
  if (m.shape().rank() != 2 || r >= m.shape()[0]) {
    throw ShapeError("row " + std::to_string(r) + " out of range for " + m.shape().str());
  }
  auto v = m.values().subspan(r * m.shape()[1], m.shape()[1]);
  return matrix.tape->push(Op::kRow, {matrix.id}, Tensor::vector({v.begin(), v.end()}), r);
}

Var pick(Var a, std::size_t index) {
  if (index >= a.value().size()) {
    throw ShapeError("pick " + std::to_string(index) + " out of range for " +
                     a.value().shape().str());
  }
  return a.tape->push(Op::kPick, {a.id}, Tensor::scalar(a.value()[index]), index);
}

Var dot(Var a, Var b) {
  Tape& t = same_tape(a, b, "dot");
  require_same_shape(a, b, "dot");
  auto x = a.value().values();
  auto y = b.value().values();
  double acc = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) acc += x[i] * y[i];
  std::vector<double> out{acc};
  check_finite(out, "dot");
  return t.push(Op::kDot, {a.id, b.id}, Tensor::vector(std::move(out)));
}

Var sum(Var a) {
  double acc = 0.0;
  for (double v : a.value().values()) acc += v;
  std::vector<double> out{acc};
  check_finite(out, "sum");
  return a.tape->push(Op::kSum, {a.id}, Tensor::vector(std::move(out)));
}

Var add_n(std::span<const Var> terms) {
  if (terms.empty()) throw ShapeError("add_n of nothing");
  Tape* t = terms.front().tape;
  const Tensor& first = terms.front().value();
  std::vector<double> out = first.to_vector();
  std::vector<NodeId> inputs{terms.front().id};
  for (std::size_t k = 1; k < terms.size(); ++k) {
    if (terms[k].tape != t) throw Error("add_n: operands must live on the same tape");
    require_same_shape(terms.front(), terms[k], "add_n");
    auto v = terms[k].value().values();
    for (std::size_t i = 0; i < out.size(); ++i) out[i] += v[i];
    inputs.push_back(terms[k].id);
  }
  return t->push(Op::kAddN, std::move(inputs), like(first, std::move(out), "add_n"));
}

Var mul_scalar(Var vec, Var s) {
  Tape& t = same_tape(vec, s, "mul_scalar");
  if (s.value().size() != 1) throw ShapeError("mul_scalar: second operand must have one element");
  const double f = s.value()[0];
  auto x = vec.value().values();
  std::vector<double> out(x.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = x[i] * f;
  return t.push(Op::kMulScalar, {vec.id, s.id}, like(vec.value(), std::move(out), "mul_scalar"));
}

Var softmax(Var a) {
  require_vector(a, "softmax");
  return a.tape->push(Op::kSoftmax, {a.id}, gridnmt::softmax(a.value()));
}

Var log_softmax(Var a) {
  require_vector(a, "log_softmax");
  return a.tape->push(Op::kLogSoftmax, {a.id}, gridnmt::log_softmax(a.value()));
}

Var weighted_sum(Var weights, std::span<const Var> vecs) {
  require_vector(weights, "weighted_sum");
  if (vecs.empty() || weights.value().size() != vecs.size()) {
    throw ShapeError("weighted_sum: " + std::to_string(weights.value().size()) + " weights for " +
                     std::to_string(vecs.size()) + " vectors");
  }
  Tape* t = weights.tape;
  auto w = weights.value().values();
  std::vector<double> out(vecs.front().value().size(), 0.0);
  std::vector<NodeId> inputs{weights.id};
  for (std::size_t j = 0; j < vecs.size(); ++j) {
    if (vecs[j].tape != t) throw Error("weighted_sum: operands must live on the same tape");
    require_same_shape(vecs.front(), vecs[j], "weighted_sum");
    auto v = vecs[j].value().values();
    for (std::size_t i = 0; i < out.size(); ++i) out[i] += w[j] * v[i];
    inputs.push_back(vecs[j].id);
  }
  return t->push(Op::kWeightedSum, std::move(inputs),
                 like(vecs.front().value(), std::move(out), "weighted_sum"));
}

void Tape::backward(Var seed, GradBuffer& grads, double seed_value) {
  check_live();
  if (seed.tape != this) throw Error("backward: seed belongs to another tape");
  if (value(seed.id).size() != 1) {
    throw ShapeError("backward: seed must be a single-element node, got " +
                     value(seed.id).shape().str());
  }
  std::vector<std::vector<double>> g(nodes_.size());
  g[seed.id].assign(1, seed_value);

  auto acc = [&](NodeId id) -> std::vector<double>& {
    auto& v = g[id];
    if (v.empty()) v.assign(nodes_[id].value.size(), 0.0);
    return v;
  };

  for (NodeId k = static_cast<NodeId>(nodes_.size()) - 1; k >= 0; --k) {
    if (g[k].empty()) continue;
    const std::vector<double> gk = std::move(g[k]);
    g[k] = {};
    Node& n = nodes_[k];
    const auto& in = n.inputs;
    auto y = n.value.values();
    switch (n.op) {
      case Op::kConstant:
      case Op::kExternal:
        break;
      case Op::kParam: {
        auto dst = grads[n.index];
        if (dst.size() != gk.size()) throw ShapeError("backward: gradient buffer layout mismatch");
        for (std::size_t i = 0; i < gk.size(); ++i) dst[i] += gk[i];
        break;
      }
      case Op::kAdd: {
        auto& ga = acc(in[0]);
        for (std::size_t i = 0; i < gk.size(); ++i) ga[i] += gk[i];
        auto& gb = acc(in[1]);
        for (std::size_t i = 0; i < gk.size(); ++i) gb[i] += gk[i];
        break;
      }
      case Op::kSub: {
        auto& ga = acc(in[0]);
        for (std::size_t i = 0; i < gk.size(); ++i) ga[i] += gk[i];
        auto& gb = acc(in[1]);
        for (std::size_t i = 0; i < gk.size(); ++i) gb[i] -= gk[i];
        break;
      }
      case Op::kMul: {
        auto a = nodes_[in[0]].value.values();
        auto b = nodes_[in[1]].value.values();
        auto& ga = acc(in[0]);
        for (std::size_t i = 0; i < gk.size(); ++i) ga[i] += gk[i] * b[i];
        auto& gb = acc(in[1]);
        for (std::size_t i = 0; i < gk.size(); ++i) gb[i] += gk[i] * a[i];
        break;
      }
      case Op::kDiv: {
        auto a = nodes_[in[0]].value.values();
        auto b = nodes_[in[1]].value.values();
        auto& ga = acc(in[0]);
        for (std::size_t i = 0; i < gk.size(); ++i) ga[i] += gk[i] / b[i];
        auto& gb = acc(in[1]);
        for (std::size_t i = 0; i < gk.size(); ++i) gb[i] -= gk[i] * a[i] / (b[i] * b[i]);
        break;
      }
      case Op::kScale: {
        auto& ga = acc(in[0]);
        for (std::size_t i = 0; i < gk.size(); ++i) ga[i] += n.factor * gk[i];
        break;
      }
      case Op::kOneMinus: {
        auto& ga = acc(in[0]);
        for (std::size_t i = 0; i < gk.size(); ++i) ga[i] -= gk[i];
        break;
      }
      case Op::kTanh: {
        auto& ga = acc(in[0]);
        for (std::size_t i = 0; i < gk.size(); ++i) ga[i] += gk[i] * (1.0 - y[i] * y[i]);
        break;
      }
      case Op::kSigmoid: {
        auto& ga = acc(in[0]);
        for (std::size_t i = 0; i < gk.size(); ++i) ga[i] += gk[i] * y[i] * (1.0 - y[i]);
        break;
      }
      case Op::kMatVec: {
        const Tensor& w = nodes_[in[0]].value;
        const Tensor& x = nodes_[in[1]].value;
        kernels::outer_acc(gk, x.values(), acc(in[0]));
        kernels::matvec_transposed_acc(w.values(), w.shape()[0], w.shape()[1], gk, acc(in[1]));
        break;
      }
      case Op::kMatMul: {
        const Tensor& a = nodes_[in[0]].value;
        const Tensor& b = nodes_[in[1]].value;
        const std::size_t m = a.shape()[0], kk = a.shape()[1], nn = b.shape()[1];
        auto& ga = acc(in[0]);
        for (std::size_t i = 0; i < m; ++i) {
          for (std::size_t p = 0; p < kk; ++p) {
            double s = 0.0;
            for (std::size_t j = 0; j < nn; ++j) s += gk[i * nn + j] * b.at(p, j);
            ga[i * kk + p] += s;
          }
        }
        auto& gb = acc(in[1]);
        for (std::size_t p = 0; p < kk; ++p) {
          for (std::size_t j = 0; j < nn; ++j) {
            double s = 0.0;
            for (std::size_t i = 0; i < m; ++i) s += a.at(i, p) * gk[i * nn + j];
            gb[p * nn + j] += s;
          }
        }
        break;
      }
      case Op::kConcat: {
        std::size_t offset = 0;
        for (NodeId part : in) {
          auto& gp = acc(part);
          for (std::size_t i = 0; i < gp.size(); ++i) gp[i] += gk[offset + i];
          offset += gp.size();
        }
        break;
      }
      case Op::kSlice: {
        auto& ga = acc(in[0]);
        for (std::size_t i = 0; i < gk.size(); ++i) ga[n.index + i] += gk[i];
        break;
      }
      case Op::kRow: {
        auto& ga = acc(in[0]);
        const std::size_t cols = gk.size();
        for (std::size_t i = 0; i < cols; ++i) ga[n.index * cols + i] += gk[i];
        break;
      }
      case Op::kPick: {
        acc(in[0])[n.index] += gk[0];
        break;
      }
      case Op::kDot: {
        auto a = nodes_[in[0]].value.values();
        auto b = nodes_[in[1]].value.values();
        auto& ga = acc(in[0]);
        for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += gk[0] * b[i];
        auto& gb = acc(in[1]);
        for (std::size_t i = 0; i < gb.size(); ++i) gb[i] += gk[0] * a[i];
        break;
      }
      case Op::kSum: {
        auto& ga = acc(in[0]);
        for (double& v : ga) v += gk[0];
        break;
      }
      case Op::kAddN: {
        for (NodeId term : in) {
          auto& gt = acc(term);
          for (std::size_t i = 0; i < gk.size(); ++i) gt[i] += gk[i];
        }
        break;
      }
      case Op::kMulScalar: {
        auto a = nodes_[in[0]].value.values();
        const double s = nodes_[in[1]].value[0];
        auto& ga = acc(in[0]);
        double gs = 0.0;
        for (std::size_t i = 0; i < gk.size(); ++i) {
          ga[i] += gk[i] * s;
          gs += gk[i] * a[i];
        }
        acc(in[1])[0] += gs;
        break;
      }
      case Op::kSoftmax: {
        double inner = 0.0;
        for (std::size_t i = 0; i < gk.size(); ++i) inner += gk[i] * y[i];
        auto& ga = acc(in[0]);
        for (std::size_t i = 0; i < gk.size(); ++i) ga[i] += y[i] * (gk[i] - inner);
        break;
      }
      case Op::kLogSoftmax: {
        double total = 0.0;
        for (double v : gk) total += v;
        auto& ga = acc(in[0]);
        for (std::size_t i = 0; i < gk.size(); ++i) ga[i] += gk[i] - std::exp(y[i]) * total;
        break;
      }
      case Op::kWeightedSum: {
        auto w = nodes_[in[0]].value.values();
        {
          auto& gw = acc(in[0]);
          for (std::size_t j = 1; j < in.size(); ++j) {
            auto v = nodes_[in[j]].value.values();
            double s = 0.0;
            for (std::size_t i = 0; i < gk.size(); ++i) s += gk[i] * v[i];
            gw[j - 1] += s;
          }
        }
        for (std::size_t j = 1; j < in.size(); ++j) {
          auto& gv = acc(in[j]);
          for (std::size_t i = 0; i < gk.size(); ++i) gv[i] += w[j - 1] * gk[i];
        }
        break;
      }
    }
  }
  nodes_.clear();
  nodes_.shrink_to_fit();
  param_leaves_.clear();
  consumed_ = true;
}

}  // namespace ad

GradCheckReport grad_check(const LossClosure& loss, ParamStore& params, double epsilon,
                           double tolerance) {
  auto evaluate = [&]() {
    ad::Tape tape;
    return loss(tape).value()[0];
  };

  GradBuffer analytic(params);
  {
    ad::Tape tape;
    ad::Var out = loss(tape);
    const double first = out.value()[0];
    const double second = evaluate();
    if (std::memcmp(&first, &second, sizeof(double)) != 0) {
      throw NumericError("grad_check: loss closure is not deterministic");
    }
    tape.backward(out, analytic);
  }

  GradCheckReport report;
  report.tolerance = tolerance;
  for (ParamId id = 0; id < params.size(); ++id) {
    ParamCheck check;
    check.name = params.name(id);
    const Tensor original = params.value(id);
    std::vector<double> work = original.to_vector();
    for (std::size_t i = 0; i < work.size(); ++i) {
      const double saved = work[i];
      work[i] = saved + epsilon;
      params.set(id, Tensor(original.shape(), work));
      const double plus = evaluate();
      work[i] = saved - epsilon;
      params.set(id, Tensor(original.shape(), work));
      const double minus = evaluate();
      work[i] = saved;
      const double numeric = (plus - minus) / (2.0 * epsilon);
      const double exact = analytic[id][i];
      const double denom = std::max({std::abs(exact), std::abs(numeric), 1e-8});
      const double rel = std::abs(exact - numeric) / denom;
      if (rel > check.max_rel_error) {
        check.max_rel_error = rel;
        check.worst_index = i;
      }
    }
    params.set(id, original);
    check.passed = check.max_rel_error < tolerance;
    report.passed = report.passed && check.passed;
    report.params.push_back(std::move(check));
  }
  return report;
}

}  // namespace gridnmt
