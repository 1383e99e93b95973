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
#include <span>
#include <vector>

#include "gridnmt/data.hpp"
#include "gridnmt/models.hpp"

namespace gridnmt {

struct BleuResult {
  double score = 0.0;  // percentage in [0, 100]
  std::array<double, 4> precisions{};
  double brevity_penalty = 0.0;
  std::size_t hypothesis_length = 0;
  std::size_t reference_length = 0;
};

// Corpus-level BLEU with clipped n-gram counts for n = 1..max_ngram and
// brevity penalty exp(1 - r/c) when c <= r. No smoothing: any zero
// precision gives 0. Tokens compare case-sensitively unless told otherwise.
BleuResult bleu(std::span<const Sentence> hypotheses, std::span<const Sentence> references,
                std::size_t max_ngram = 4, bool case_sensitive = true);

struct PerplexityResult {
  double perplexity = 0.0;
  double total_nll = 0.0;
  std::size_t tokens = 0;  // EOS included
};

// exp(total NLL / target tokens) under teacher forcing. Each token NLL is
// logsumexp(row) - row[y] over the model's log-probabilities, evaluated in
// long double; NLLs are accumulated in corpus order, so the result does not
// depend on the worker count.
PerplexityResult perplexity(const TranslationModel& model, std::span<const IdPair> corpus,
                            std::size_t workers = 1);

}  // namespace gridnmt
