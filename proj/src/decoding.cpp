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

#include "gridnmt/decoding.hpp"

#include <algorithm>
#include <limits>

#include "gridnmt/error.hpp"
#include "gridnmt/parallel.hpp"

namespace gridnmt {

double Hypothesis::score() const {
  return tokens.empty() ? 0.0 : log_prob / static_cast<double>(tokens.size());
}

bool ranks_before(const Hypothesis& a, const Hypothesis& b) {
  const double sa = a.score();
  const double sb = b.score();
  if (sa != sb) return sa > sb;
  if (a.tokens.size() != b.tokens.size()) return a.tokens.size() < b.tokens.size();
  return a.tokens < b.tokens;
}

namespace {

struct Candidate {
  std::size_t parent;
  TokenId token;
  double log_prob;
};

}  // namespace

BeamResult beam_search(const SequenceModel& model, std::span<const TokenId> source,
                       const BeamOptions& options) {
  if (options.beam == 0) throw ConfigError("beam size must be positive");
  if (source.empty()) throw DataError("cannot decode an empty source sentence");
  const std::size_t max_len = options.max_len > 0 ? options.max_len : 2 * source.size() + 10;
  const std::size_t V = model.target_vocab_size();

  std::vector<Hypothesis> active(1);
  active[0].state = model.begin(source);
  std::vector<Hypothesis> pool;
  BeamResult result;

  for (std::size_t t = 1; t <= max_len && !active.empty(); ++t) {
    ++result.steps;
    std::vector<SequenceModel::StatePtr> next_states(active.size());
    std::vector<Candidate> candidates;
    candidates.reserve(active.size() * V);
    for (std::size_t h = 0; h < active.size(); ++h) {
      const TokenId previous = active[h].tokens.empty() ? options.bos : active[h].tokens.back();
      SequenceModel::Step step = model.step(*active[h].state, previous);
      if (step.log_probs.size() != V) throw ShapeError("model returned a wrong-sized distribution");
      for (std::size_t w = 0; w < V; ++w) {
        candidates.push_back({h, static_cast<TokenId>(w), active[h].log_prob + step.log_probs[w]});
      }
      next_states[h] = std::move(step.next);
    }
    // Equal-length prefixes: rank by log-probability, then lexicographically.
    auto order = [&](const Candidate& a, const Candidate& b) {
      if (a.log_prob != b.log_prob) return a.log_prob > b.log_prob;
      const auto& pa = active[a.parent].tokens;
      const auto& pb = active[b.parent].tokens;
      if (pa != pb) return pa < pb;
      return a.token < b.token;
    };
    const std::size_t keep = std::min(options.beam, candidates.size());
    std::partial_sort(candidates.begin(), candidates.begin() + static_cast<std::ptrdiff_t>(keep),
                      candidates.end(), order);

    std::vector<Hypothesis> next;
    for (std::size_t k = 0; k < keep; ++k) {
      const Candidate& c = candidates[k];
      Hypothesis h;
      h.tokens = active[c.parent].tokens;
      h.tokens.push_back(c.token);
      h.log_prob = c.log_prob;
      if (c.token == options.eos || t == max_len) {
        h.finished = true;
        pool.push_back(std::move(h));
      } else {
        h.state = next_states[c.parent];
        next.push_back(std::move(h));
      }
    }
    active = std::move(next);

    if (!pool.empty() && !active.empty()) {
      const Hypothesis& best = *std::min_element(pool.begin(), pool.end(), ranks_before);
      double bound = -std::numeric_limits<double>::infinity();
      for (const Hypothesis& h : active) {
        bound = std::max(bound, h.log_prob / static_cast<double>(max_len));
      }
      if (bound < best.score()) break;
    }
  }

  std::sort(pool.begin(), pool.end(), ranks_before);
  result.nbest = std::move(pool);
  result.best = result.nbest.front();
  return result;
}

std::vector<TokenId> output_tokens(const Hypothesis& hypothesis, TokenId eos) {
  std::vector<TokenId> out = hypothesis.tokens;
  if (!out.empty() && out.back() == eos) out.pop_back();
  return out;
}

std::vector<std::string> decode_lines(const SequenceModel& model, const Vocabulary& source_vocab,
                                      const Vocabulary& target_vocab,
                                      std::span<const std::string> lines,
                                      const BeamOptions& options, std::size_t workers) {
  std::vector<std::string> out(lines.size());
  WorkerPool pool(workers);
  pool.parallel_for(lines.size(), [&](std::size_t k) {
    const std::vector<std::string> tokens = split_tokens(lines[k]);
    if (tokens.empty()) return;
    const std::vector<TokenId> source = source_vocab.encode(tokens);
    const BeamResult r = beam_search(model, source, options);
    const std::vector<TokenId> ids = output_tokens(r.best);
    out[k] = join_tokens(target_vocab.decode(ids));
  });
  return out;
}

}  // namespace gridnmt
