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

#include "gridnmt/cells.hpp"

#include <cmath>

#include "gridnmt/error.hpp"

namespace gridnmt {

CellState CellState::zeros(std::size_t hidden) {
  Tensor z = Tensor::zeros(Shape{hidden});
  return {z, z};
}

namespace {

Tensor uniform_matrix(std::size_t rows, std::size_t cols, double bound, Rng& rng) {
  std::vector<double> values(rows * cols);
  for (double& v : values) v = rng.uniform(-bound, bound);
  return Tensor::matrix(rows, cols, std::move(values));
}

Tensor gate_bias(std::size_t gates, std::size_t hidden) {
  std::vector<double> values(gates * hidden, 0.0);
  for (std::size_t k = 0; k < hidden; ++k) values[kForgetGate * hidden + k] = 1.0;
  return Tensor::vector(std::move(values));
}

void require_vector_of(const ad::Var& v, std::size_t n, const char* what) {
  const Shape& s = v.value().shape();
  if (s.rank() != 1 || s[0] != n) {
    throw ShapeError(std::string(what) + ": expected [" + std::to_string(n) + "], got " + s.str());
  }
}

}  // namespace

LSTMParams LSTMParams::create(ParamStore& store, const std::string& prefix, std::size_t input,
                              std::size_t hidden, Rng& rng) {
  const double bound = std::sqrt(1.0 / static_cast<double>(hidden));
  LSTMParams p;
  p.input = input;
  p.hidden = hidden;
  p.w = store.add(prefix + ".w", uniform_matrix(4 * hidden, input, bound, rng));
  p.u = store.add(prefix + ".u", uniform_matrix(4 * hidden, hidden, bound, rng));
  p.b = store.add(prefix + ".b", gate_bias(4, hidden));
  return p;
}

LSTMVars bind(ad::Tape& tape, const ParamStore& store, const LSTMParams& params) {
  return {tape.param(store, params.w), tape.param(store, params.u), tape.param(store, params.b),
          params.hidden};
}

CellVars lstm_step(const LSTMVars& p, ad::Var x, const CellVars& prev) {
  const std::size_t n = p.hidden;
  require_vector_of(prev.s, n, "lstm_step state");
  require_vector_of(prev.c, n, "lstm_step cell");
  ad::Var pre = (ad::matvec(p.w, x) + p.b) + ad::matvec(p.u, prev.s);
  ad::Var in = ad::sigmoid(ad::slice(pre, kInputGate * n, n));
  ad::Var forget = ad::sigmoid(ad::slice(pre, kForgetGate * n, n));
  ad::Var out = ad::sigmoid(ad::slice(pre, kOutputGate * n, n));
  ad::Var cand = ad::tanh(ad::slice(pre, kCandidate * n, n));
  ad::Var c = forget * prev.c + cand * in;
  ad::Var s = ad::tanh(c) * out;
  return {c, s};
}

CellState lstm_step(const ParamStore& store, const LSTMParams& params, const Tensor& x,
                    const CellState& prev) {
  ad::Tape tape;
  CellVars out = lstm_step(bind(tape, store, params), tape.constant(x),
                           {tape.constant(prev.c), tape.constant(prev.s)});
  return {out.c.value(), out.s.value()};
}

TwoDLSTMParams TwoDLSTMParams::create(ParamStore& store, const std::string& prefix,
                                      std::size_t input, std::size_t hidden, Rng& rng) {
  const double bound = std::sqrt(1.0 / static_cast<double>(hidden));
  TwoDLSTMParams p;
  p.input = input;
  p.hidden = hidden;
  p.w = store.add(prefix + ".w", uniform_matrix(5 * hidden, input, bound, rng));
  p.u = store.add(prefix + ".u", uniform_matrix(5 * hidden, hidden, bound, rng));
  p.v = store.add(prefix + ".v", uniform_matrix(5 * hidden, hidden, bound, rng));
  p.b = store.add(prefix + ".b", gate_bias(5, hidden));
  return p;
}

TwoDLSTMVars bind(ad::Tape& tape, const ParamStore& store, const TwoDLSTMParams& params) {
  return {tape.param(store, params.w), tape.param(store, params.u), tape.param(store, params.v),
          tape.param(store, params.b), params.hidden};
}

CellVars twodlstm_step(const TwoDLSTMVars& p, ad::Var x, const CellVars& horiz,
                       const CellVars& vert) {
  const std::size_t n = p.hidden;
  require_vector_of(horiz.s, n, "twodlstm_step horizontal state");
  require_vector_of(vert.s, n, "twodlstm_step vertical state");
  require_vector_of(horiz.c, n, "twodlstm_step horizontal cell");
  require_vector_of(vert.c, n, "twodlstm_step vertical cell");
  // The recurrent sum is formed first so that exchanging the two
  // predecessors (with U and V) leaves the pre-activation bit-identical.
  ad::Var recurrent = ad::matvec(p.u, horiz.s) + ad::matvec(p.v, vert.s);
  ad::Var pre = (ad::matvec(p.w, x) + p.b) + recurrent;
  ad::Var in = ad::sigmoid(ad::slice(pre, kInputGate * n, n));
  ad::Var forget = ad::sigmoid(ad::slice(pre, kForgetGate * n, n));
  ad::Var out = ad::sigmoid(ad::slice(pre, kOutputGate * n, n));
  ad::Var cand = ad::tanh(ad::slice(pre, kCandidate * n, n));
  ad::Var lambda = ad::sigmoid(ad::slice(pre, kLambdaGate * n, n));
  ad::Var blend = lambda * horiz.c + ad::one_minus(lambda) * vert.c;
  ad::Var c = forget * blend + cand * in;
  ad::Var s = ad::tanh(c) * out;
  return {c, s};
}

CellState twodlstm_step(const ParamStore& store, const TwoDLSTMParams& params, const Tensor& x,
                        const CellState& horiz, const CellState& vert) {
  ad::Tape tape;
  CellVars out = twodlstm_step(bind(tape, store, params), tape.constant(x),
                               {tape.constant(horiz.c), tape.constant(horiz.s)},
                               {tape.constant(vert.c), tape.constant(vert.s)});
  return {out.c.value(), out.s.value()};
}

}  // namespace gridnmt
