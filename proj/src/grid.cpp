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

#include "gridnmt/grid.hpp"

#include <algorithm>
#include <string>

#include "gridnmt/error.hpp"
#include "gridnmt/parallel.hpp"

namespace gridnmt {

RowCache RowCache::empty(std::size_t J, std::size_t hidden) {
  return RowCache{0, std::vector<CellState>(J, CellState::zeros(hidden))};
}

namespace {

std::pair<std::size_t, std::size_t> extents(const GridInputVars& inputs) {
  if (inputs.empty() || inputs.front().empty()) throw ShapeError("grid needs J, I >= 1");
  const std::size_t I = inputs.front().size();
  for (const auto& column : inputs) {
    if (column.size() != I) throw ShapeError("grid inputs are ragged");
  }
  return {inputs.size(), I};
}

GridVars bordered(std::size_t J, std::size_t I, ad::Tape& tape, std::size_t hidden) {
  GridVars grid{J, I, std::vector<CellVars>((J + 1) * (I + 1))};
  ad::Var zero = tape.constant(Tensor::zeros(Shape{hidden}));
  for (std::size_t j = 0; j <= J; ++j) grid.at(j, 0) = {zero, zero};
  for (std::size_t i = 0; i <= I; ++i) grid.at(0, i) = {zero, zero};
  return grid;
}

void values_to_vars(ad::Tape& tape, const GridInputs& inputs, GridInputVars& out) {
  out.assign(inputs.size(), {});
  for (std::size_t j = 0; j < inputs.size(); ++j) {
    for (const Tensor& x : inputs[j]) out[j].push_back(tape.constant(x));
  }
}

GridState vars_to_state(const GridVars& vars) {
  GridState out{vars.J, vars.I, {}};
  out.states.reserve(vars.states.size());
  for (const auto& cv : vars.states) out.states.push_back({cv.c.value(), cv.s.value()});
  return out;
}

}  // namespace

GridVars forward_full(const TwoDLSTMVars& params, const GridInputVars& inputs) {
  const auto [J, I] = extents(inputs);
  GridVars grid = bordered(J, I, *params.w.tape, params.hidden);
  for (std::size_t i = 1; i <= I; ++i) {
    for (std::size_t j = 1; j <= J; ++j) {
      grid.at(j, i) = twodlstm_step(params, inputs[j - 1][i - 1], grid.at(j - 1, i),
                                    grid.at(j, i - 1));
    }
  }
  return grid;
}

GridVars forward_wavefront(const TwoDLSTMVars& params, const GridInputVars& inputs,
                           std::size_t workers, WavefrontStats* stats) {
  const auto [J, I] = extents(inputs);
  ad::Tape& main = *params.w.tape;
  GridVars grid = bordered(J, I, main, params.hidden);

  // Compute phase: values only, one fragment tape per cell.
  struct Cell {
    ad::Tape fragment;
    CellVars local;  // outputs, on the fragment
  };
  std::vector<Cell> cells((J + 1) * (I + 1));
  auto cell = [&](std::size_t j, std::size_t i) -> Cell& { return cells[i * (J + 1) + j]; };
  auto state_value = [&](std::size_t j, std::size_t i) -> std::pair<Tensor, Tensor> {
    if (j == 0 || i == 0) return {grid.at(0, 0).c.value(), grid.at(0, 0).s.value()};
    const CellVars& v = cell(j, i).local;
    return {v.c.value(), v.s.value()};
  };

  WorkerPool pool(workers);
  WavefrontStats local_stats;
  for (std::size_t d = 2; d <= J + I; ++d) {
    const std::size_t j_lo = d > I ? d - I : 1;
    const std::size_t j_hi = std::min(J, d - 1);
    const std::size_t width = j_hi - j_lo + 1;
    ++local_stats.diagonals;
    local_stats.max_width = std::max(local_stats.max_width, width);
    pool.parallel_for(width, [&](std::size_t k) {
      const std::size_t j = j_lo + k;
      const std::size_t i = d - j;
      Cell& target = cell(j, i);
      ad::Tape& f = target.fragment;
      // Placeholder order must match the bindings built in the splice phase.
      TwoDLSTMVars p{f.external(params.w.value()), f.external(params.u.value()),
                     f.external(params.v.value()), f.external(params.b.value()), params.hidden};
      ad::Var x = f.external(inputs[j - 1][i - 1].value());
      auto [hc, hs] = state_value(j - 1, i);
      CellVars horiz{f.external(hc), f.external(hs)};
      auto [vc, vs] = state_value(j, i - 1);
      CellVars vert{f.external(vc), f.external(vs)};
      target.local = twodlstm_step(p, x, horiz, vert);
    });
  }

  // Splice phase, row-major.
  for (std::size_t i = 1; i <= I; ++i) {
    for (std::size_t j = 1; j <= J; ++j) {
      Cell& c = cell(j, i);
      const CellVars& h = grid.at(j - 1, i);
      const CellVars& v = grid.at(j, i - 1);
      const ad::Var bindings[] = {params.w, params.u, params.v, params.b, inputs[j - 1][i - 1],
                                  h.c,      h.s,      v.c,      v.s};
      const ad::NodeId local_c = c.local.c.id;
      const ad::NodeId local_s = c.local.s.id;
      auto map = main.splice(std::move(c.fragment), bindings);
      grid.at(j, i) = {ad::Var{&main, map[local_c]}, ad::Var{&main, map[local_s]}};
    }
  }
  if (stats) *stats = local_stats;
  return grid;
}

std::vector<CellVars> extend_row(const TwoDLSTMVars& params, std::span<const CellVars> prev_row,
                                 std::span<const ad::Var> row_inputs) {
  if (row_inputs.size() != prev_row.size()) {
    throw ShapeError("extend_row: " + std::to_string(row_inputs.size()) + " inputs for a row of " +
                     std::to_string(prev_row.size()) + " cells");
  }
  const std::size_t J = prev_row.size();
  if (J == 0) throw ShapeError("extend_row: empty row");
  ad::Var zero = params.w.tape->constant(Tensor::zeros(Shape{params.hidden}));
  std::vector<CellVars> row;
  row.reserve(J);
  CellVars left{zero, zero};
  for (std::size_t j = 0; j < J; ++j) {
    left = twodlstm_step(params, row_inputs[j], left, prev_row[j]);
    row.push_back(left);
  }
  return row;
}

GridState forward_full(const ParamStore& store, const TwoDLSTMParams& params,
                       const GridInputs& inputs) {
  ad::Tape tape;
  TwoDLSTMVars p = bind(tape, store, params);
  GridInputVars vars;
  values_to_vars(tape, inputs, vars);
  return vars_to_state(forward_full(p, vars));
}

GridState forward_wavefront(const ParamStore& store, const TwoDLSTMParams& params,
                            const GridInputs& inputs, std::size_t workers,
                            WavefrontStats* stats) {
  ad::Tape tape;
  TwoDLSTMVars p = bind(tape, store, params);
  GridInputVars vars;
  values_to_vars(tape, inputs, vars);
  return vars_to_state(forward_wavefront(p, vars, workers, stats));
}

std::pair<RowCache, std::vector<CellState>> extend_row(const ParamStore& store,
                                                       const TwoDLSTMParams& params,
                                                       const RowCache& cache,
                                                       std::span<const Tensor> new_inputs) {
  if (new_inputs.size() != cache.states.size()) {
    throw ShapeError("extend_row: " + std::to_string(new_inputs.size()) +
                     " inputs for a cache of " + std::to_string(cache.states.size()) + " cells");
  }
  ad::Tape tape;
  TwoDLSTMVars p = bind(tape, store, params);
  std::vector<CellVars> prev;
  std::vector<ad::Var> xs;
  for (std::size_t j = 0; j < new_inputs.size(); ++j) {
    prev.push_back({tape.constant(cache.states[j].c), tape.constant(cache.states[j].s)});
    xs.push_back(tape.constant(new_inputs[j]));
  }
  auto row = extend_row(p, prev, xs);
  RowCache next{cache.row + 1, {}};
  for (const auto& cv : row) next.states.push_back({cv.c.value(), cv.s.value()});
  std::vector<CellState> states = next.states;
  return {std::move(next), std::move(states)};
}

}  // namespace gridnmt
