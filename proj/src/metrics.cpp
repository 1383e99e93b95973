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

#include "gridnmt/metrics.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <map>
#include <string>

#include "gridnmt/error.hpp"
#include "gridnmt/parallel.hpp"

namespace gridnmt {

namespace {

using NgramCounts = std::map<std::vector<std::string>, std::size_t>;

NgramCounts count_ngrams(const Sentence& tokens, std::size_t n) {
  NgramCounts counts;
  if (tokens.size() < n) return counts;
  for (std::size_t k = 0; k + n <= tokens.size(); ++k) {
    ++counts[std::vector<std::string>(tokens.begin() + static_cast<std::ptrdiff_t>(k),
                                      tokens.begin() + static_cast<std::ptrdiff_t>(k + n))];
  }
  return counts;
}

Sentence lowered(const Sentence& s) {
  Sentence out = s;
  for (std::string& t : out) {
    std::transform(t.begin(), t.end(), t.begin(),
                   [](unsigned char ch) { return static_cast<char>(std::tolower(ch)); });
  }
  return out;
}

}  // namespace

BleuResult bleu(std::span<const Sentence> hypotheses, std::span<const Sentence> references,
                std::size_t max_ngram, bool case_sensitive) {
  if (hypotheses.empty()) throw DataError("BLEU needs at least one hypothesis");
  if (hypotheses.size() != references.size()) {
    throw DataError("BLEU: " + std::to_string(hypotheses.size()) + " hypotheses but " +
                    std::to_string(references.size()) + " references");
  }
  if (max_ngram == 0 || max_ngram > 4) throw DataError("BLEU: max_ngram must be in 1..4");
  std::array<std::size_t, 4> matched{}, total{};
  BleuResult r;
  for (std::size_t s = 0; s < hypotheses.size(); ++s) {
    const Sentence hyp = case_sensitive ? hypotheses[s] : lowered(hypotheses[s]);
    const Sentence ref = case_sensitive ? references[s] : lowered(references[s]);
    r.hypothesis_length += hyp.size();
    r.reference_length += ref.size();
    for (std::size_t n = 1; n <= max_ngram; ++n) {
      const NgramCounts h = count_ngrams(hyp, n);
      const NgramCounts g = count_ngrams(ref, n);
      for (const auto& [gram, count] : h) {
        total[n - 1] += count;
        if (auto it = g.find(gram); it != g.end()) matched[n - 1] += std::min(count, it->second);
      }
    }
  }
  double log_sum = 0.0;
  bool zero = r.hypothesis_length == 0;
  for (std::size_t n = 0; n < max_ngram; ++n) {
    r.precisions[n] =
        total[n] == 0 ? 0.0 : static_cast<double>(matched[n]) / static_cast<double>(total[n]);
    if (r.precisions[n] == 0.0) {
      zero = true;
    } else {
      log_sum += std::log(r.precisions[n]);
    }
  }
  const double c = static_cast<double>(r.hypothesis_length);
  const double ref_len = static_cast<double>(r.reference_length);
  r.brevity_penalty = c == 0.0 ? 0.0 : (c > ref_len ? 1.0 : std::exp(1.0 - ref_len / c));
  r.score = zero ? 0.0
                 : 100.0 * r.brevity_penalty * std::exp(log_sum / static_cast<double>(max_ngram));
  return r;
}

PerplexityResult perplexity(const TranslationModel& model, std::span<const IdPair> corpus,
                            std::size_t workers) {
  if (corpus.empty()) throw DataError("perplexity needs a non-empty corpus");
  std::vector<std::vector<long double>> token_nll(corpus.size());
  WorkerPool pool(workers);
  pool.parallel_for(corpus.size(), [&](std::size_t k) {
    const IdPair& pair = corpus[k];
    std::vector<Tensor> lp = model.teacher_forced_log_probs(pair.source, pair.target);
    token_nll[k].reserve(lp.size());
    for (std::size_t i = 0; i < lp.size(); ++i) {
      if (pair.target[i] < 0 || static_cast<std::size_t>(pair.target[i]) >= lp[i].size()) {
        throw DataError("target token id outside vocabulary");
      }
      // Renormalise in extended precision: log-softmax rounding is shared
      // across the row and cancels here.
      long double norm = 0.0L;
      for (double v : lp[i].values()) norm += std::exp(static_cast<long double>(v));
      token_nll[k].push_back(std::log(norm) -
                             static_cast<long double>(lp[i][static_cast<std::size_t>(pair.target[i])]));
    }
  });
  long double total = 0.0L;
  std::size_t tokens = 0;
  for (const auto& sentence : token_nll) {
    for (long double v : sentence) total += v;
    tokens += sentence.size();
  }
  PerplexityResult r;
  r.tokens = tokens;
  r.total_nll = static_cast<double>(total);
  r.perplexity = static_cast<double>(std::exp(total / static_cast<long double>(tokens)));
  return r;
}

}  // namespace gridnmt
