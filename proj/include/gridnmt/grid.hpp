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
#include <span>
#include <utility>
#include <vector>

#include "gridnmt/autodiff.hpp"
#include "gridnmt/cells.hpp"
#include "gridnmt/tensor.hpp"

namespace gridnmt {

// Grid inputs indexed [j - 1][i - 1]: j runs along the source axis (1..J),
// i along the target axis (1..I).
using GridInputs = std::vector<std::vector<Tensor>>;
using GridInputVars = std::vector<std::vector<ad::Var>>;

// (J+1) x (I+1) lattice of cell states; row i = 0 and column j = 0 are the
// zero border.
struct GridState {
  std::size_t J = 0;
  std::size_t I = 0;
  std::vector<CellState> states;

  const CellState& at(std::size_t j, std::size_t i) const { return states[i * (J + 1) + j]; }
};

struct GridVars {
  std::size_t J = 0;
  std::size_t I = 0;
  std::vector<CellVars> states;

  const CellVars& at(std::size_t j, std::size_t i) const { return states[i * (J + 1) + j]; }
  CellVars& at(std::size_t j, std::size_t i) { return states[i * (J + 1) + j]; }
};

// The J cell states of the most recently completed target row. Row 0 is the
// zero border, so an empty cache starts a fresh grid.
struct RowCache {
  std::size_t row = 0;
  std::vector<CellState> states;

  static RowCache empty(std::size_t J, std::size_t hidden);
};

struct WavefrontStats {
  std::size_t diagonals = 0;
  std::size_t max_width = 0;
};

// Row-major evaluation: i outer, j inner, recorded directly on the tape of
// `params`.
GridVars forward_full(const TwoDLSTMVars& params, const GridInputVars& inputs);

// Anti-diagonal evaluation: every cell with j + i = d is computed
// concurrently on up to `workers` threads, each into its own fragment tape.
// Fragments are spliced back in row-major order, so the resulting tape is
// node-for-node identical to the one forward_full records.
GridVars forward_wavefront(const TwoDLSTMVars& params, const GridInputVars& inputs,
                           std::size_t workers, WavefrontStats* stats = nullptr);

// Computes row i from row i - 1 (the J states in `prev_row`): O(J) cells.
std::vector<CellVars> extend_row(const TwoDLSTMVars& params, std::span<const CellVars> prev_row,
                                 std::span<const ad::Var> row_inputs);

GridState forward_full(const ParamStore& store, const TwoDLSTMParams& params,
                       const GridInputs& inputs);
GridState forward_wavefront(const ParamStore& store, const TwoDLSTMParams& params,
                            const GridInputs& inputs, std::size_t workers,
                            WavefrontStats* stats = nullptr);
// Returns the cache for row cache.row + 1 together with that row's states.
std::pair<RowCache, std::vector<CellState>> extend_row(const ParamStore& store,
                                                       const TwoDLSTMParams& params,
                                                       const RowCache& cache,
                                                       std::span<const Tensor> new_inputs);

}  // namespace gridnmt
