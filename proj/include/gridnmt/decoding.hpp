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
#include <string>
#include <vector>

#include "gridnmt/data.hpp"
#include "gridnmt/models.hpp"

namespace gridnmt {

struct Hypothesis {
  std::vector<TokenId> tokens;  // EOS included when the hypothesis finished normally
  double log_prob = 0.0;
  bool finished = false;
  SequenceModel::StatePtr state;

  // log_prob / token count.
  double score() const;
};

// True when a ranks before b: higher score, then shorter, then smaller
// token ids lexicographically.
bool ranks_before(const Hypothesis& a, const Hypothesis& b);

struct BeamOptions {
  std::size_t beam = 12;
  std::size_t max_len = 0;  // 0: 2 * J + 10
  TokenId bos = kBos;
  TokenId eos = kEos;
};

struct BeamResult {
  Hypothesis best;
  std::vector<Hypothesis> nbest;  // every finished hypothesis, best first
  std::size_t steps = 0;
};

// Each step expands every active hypothesis over the whole vocabulary and
// keeps the beam best by cumulative log-probability. Hypotheses ending in
// EOS move to the finished pool; at max_len the remaining ones are finished
// without EOS. Search stops early once no active hypothesis can reach the
// best finished score.
BeamResult beam_search(const SequenceModel& model, std::span<const TokenId> source,
                       const BeamOptions& options = {});

// Drops the trailing EOS, if any.
std::vector<TokenId> output_tokens(const Hypothesis& hypothesis, TokenId eos = kEos);

// Decodes one sentence per line, preserving order; an empty input line
// yields an empty output line.
std::vector<std::string> decode_lines(const SequenceModel& model, const Vocabulary& source_vocab,
                                      const Vocabulary& target_vocab,
                                      std::span<const std::string> lines,
                                      const BeamOptions& options, std::size_t workers = 1);

}  // namespace gridnmt
