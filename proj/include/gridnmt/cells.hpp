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
#include <string>

#include "gridnmt/autodiff.hpp"
#include "gridnmt/rng.hpp"
#include "gridnmt/tensor.hpp"

namespace gridnmt {

// Internal cell state c and hidden state s of one LSTM position.
struct CellState {
  Tensor c;
  Tensor s;

  static CellState zeros(std::size_t hidden);
};

struct CellVars {
  ad::Var c;
  ad::Var s;
};

// Gate blocks inside the fused pre-activation vector, each `hidden` wide.
enum Gate : std::size_t {
  kInputGate = 0,
  kForgetGate = 1,
  kOutputGate = 2,
  kCandidate = 3,
  kLambdaGate = 4,
};

// Standard LSTM: input path w [4n x d], recurrent path u [4n x n], bias
// b [4n], gate blocks ordered input, forget, output, candidate.
struct LSTMParams {
  ParamId w = 0, u = 0, b = 0;
  std::size_t input = 0;
  std::size_t hidden = 0;

  // Uniform(-sqrt(1/n), sqrt(1/n)) weights, zero bias except forget = 1.
  static LSTMParams create(ParamStore& store, const std::string& prefix, std::size_t input,
                           std::size_t hidden, Rng& rng);
};

struct LSTMVars {
  ad::Var w, u, b;
  std::size_t hidden = 0;
};

LSTMVars bind(ad::Tape& tape, const ParamStore& store, const LSTMParams& params);

CellVars lstm_step(const LSTMVars& params, ad::Var x, const CellVars& prev);
CellState lstm_step(const ParamStore& store, const LSTMParams& params, const Tensor& x,
                    const CellState& prev);

// Two-dimensional LSTM with the lambda gate. Fused matrices hold the five
// gate blocks (input, forget, output, candidate, lambda) stacked by rows:
// w [5n x d] reads the local input, u [5n x n] the horizontal predecessor
// s(j-1, i), v [5n x n] the vertical predecessor s(j, i-1).
struct TwoDLSTMParams {
  ParamId w = 0, u = 0, v = 0, b = 0;
  std::size_t input = 0;
  std::size_t hidden = 0;

  static TwoDLSTMParams create(ParamStore& store, const std::string& prefix, std::size_t input,
                               std::size_t hidden, Rng& rng);
};

struct TwoDLSTMVars {
  ad::Var w, u, v, b;
  std::size_t hidden = 0;
};

TwoDLSTMVars bind(ad::Tape& tape, const ParamStore& store, const TwoDLSTMParams& params);

// One grid cell:
//   a      = (W x + b) + (U s_h + V s_v)
//   i, f, o, lambda = sigmoid(blocks), cand = tanh(block)
//   c      = f * (lambda * c_h + (1 - lambda) * c_v) + cand * i
//   s      = tanh(c) * o
// where (c_h, s_h) sits at (j-1, i) and (c_v, s_v) at (j, i-1).
CellVars twodlstm_step(const TwoDLSTMVars& params, ad::Var x, const CellVars& horiz,
                       const CellVars& vert);
CellState twodlstm_step(const ParamStore& store, const TwoDLSTMParams& params, const Tensor& x,
                        const CellState& horiz, const CellState& vert);

}  // namespace gridnmt
