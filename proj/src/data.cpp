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

#include "gridnmt/data.hpp"

#include <algorithm>
#include <fstream>
#include <map>
#include <sstream>

#include "gridnmt/error.hpp"
#include "gridnmt/rng.hpp"

namespace gridnmt {

namespace {

constexpr const char* kReservedNames[kReservedTokens] = {"<pad>", "<s>", "</s>", "<unk>"};

constexpr const char* kDigitWords[10] = {"zero", "one", "two",   "three", "four",
                                         "five", "six", "seven", "eight", "nine"};

}  // namespace

Vocabulary::Vocabulary() {
  for (const char* name : kReservedNames) add(name);
}

TokenId Vocabulary::add(const std::string& token) {
  auto it = ids_.find(token);
  if (it != ids_.end()) return it->second;
  const auto id = static_cast<TokenId>(tokens_.size());
  tokens_.push_back(token);
  ids_.emplace(token, id);
  return id;
}

TokenId Vocabulary::id(std::string_view token) const {
  auto it = ids_.find(std::string(token));
  return it == ids_.end() ? kUnk : it->second;
}

bool Vocabulary::contains(std::string_view token) const {
  return ids_.count(std::string(token)) > 0;
}

const std::string& Vocabulary::token(TokenId id) const {
  if (id < 0 || static_cast<std::size_t>(id) >= tokens_.size()) {
    throw DataError("token id " + std::to_string(id) + " outside vocabulary of " +
                    std::to_string(tokens_.size()));
  }
  return tokens_[id];
}

std::vector<TokenId> Vocabulary::encode(std::span<const std::string> tokens) const {
  std::vector<TokenId> out;
  out.reserve(tokens.size());
  for (const auto& t : tokens) out.push_back(id(t));
  return out;
}

std::vector<std::string> Vocabulary::decode(std::span<const TokenId> ids) const {
  std::vector<std::string> out;
  for (TokenId id : ids) {
    if (id == kEos) break;
    if (id == kPad || id == kBos) continue;
    out.push_back(token(id));
  }
  return out;
}

void Vocabulary::save(const std::filesystem::path& path) const {
  std::vector<std::string> lines(tokens_.begin() + kReservedTokens, tokens_.end());
  write_lines(path, lines);
}

Vocabulary Vocabulary::load(const std::filesystem::path& path) {
  Vocabulary v;
  for (const auto& line : read_lines(path)) {
    if (line.empty() || line.find_first_of(" \t") != std::string::npos) {
      throw DataError("vocabulary " + path.string() + ": malformed token line '" + line + "'");
    }
    if (v.contains(line)) {
      throw DataError("vocabulary " + path.string() + ": duplicate token '" + line + "'");
    }
    v.add(line);
  }
  return v;
}

Vocabulary build_vocab(std::span<const Sentence> sentences, std::size_t max_size) {
  if (max_size < kReservedTokens) {
    throw ConfigError("vocabulary size must be at least " + std::to_string(kReservedTokens));
  }
  std::map<std::string, std::size_t> counts;
  Vocabulary vocab;
  for (const auto& sentence : sentences) {
    for (const auto& token : sentence) {
      if (!vocab.contains(token)) ++counts[token];
    }
  }
  std::vector<std::pair<std::string, std::size_t>> ranked(counts.begin(), counts.end());
  std::stable_sort(ranked.begin(), ranked.end(),
                   [](const auto& a, const auto& b) { return a.second > b.second; });
  for (const auto& [token, count] : ranked) {
    if (vocab.size() >= max_size) break;
    vocab.add(token);
  }
  return vocab;
}

std::vector<std::string> split_tokens(std::string_view line) {
  std::vector<std::string> out;
  std::size_t pos = 0;
  while (pos < line.size()) {
    while (pos < line.size() && (line[pos] == ' ' || line[pos] == '\t' || line[pos] == '\r')) ++pos;
    std::size_t end = pos;
    while (end < line.size() && line[end] != ' ' && line[end] != '\t' && line[end] != '\r') ++end;
    if (end > pos) out.emplace_back(line.substr(pos, end - pos));
    pos = end;
  }
  return out;
}

std::string join_tokens(std::span<const std::string> tokens) {
  std::string out;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    if (i) out += ' ';
    out += tokens[i];
  }
  return out;
}

std::vector<std::string> read_lines(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path.string());
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    lines.push_back(std::move(line));
  }
  if (in.bad()) throw DataError("error reading " + path.string());
  return lines;
}

void write_lines(const std::filesystem::path& path, std::span<const std::string> lines) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write " + path.string());
  for (const auto& line : lines) out << line << '\n';
  if (!out) throw DataError("error writing " + path.string());
}

ParallelCorpus read_corpus(const std::string& prefix) {
  auto src = read_lines(prefix + ".src");
  auto tgt = read_lines(prefix + ".tgt");
  if (src.size() != tgt.size()) {
    throw DataError("corpus " + prefix + ": " + std::to_string(src.size()) + " source lines vs " +
                    std::to_string(tgt.size()) + " target lines");
  }
  ParallelCorpus corpus;
  for (std::size_t k = 0; k < src.size(); ++k) {
    corpus.source.push_back(split_tokens(src[k]));
    corpus.target.push_back(split_tokens(tgt[k]));
  }
  return corpus;
}

void write_corpus(const std::string& prefix, const ParallelCorpus& corpus) {
  std::vector<std::string> src, tgt;
  for (std::size_t k = 0; k < corpus.size(); ++k) {
    src.push_back(join_tokens(corpus.source[k]));
    tgt.push_back(join_tokens(corpus.target[k]));
  }
  write_lines(prefix + ".src", src);
  write_lines(prefix + ".tgt", tgt);
}

ParallelCorpus filter_by_length(const ParallelCorpus& corpus, std::size_t max_tokens) {
  ParallelCorpus out;
  for (std::size_t k = 0; k < corpus.size(); ++k) {
    const auto& s = corpus.source[k];
    const auto& t = corpus.target[k];
    if (s.empty() || t.empty() || s.size() > max_tokens || t.size() > max_tokens) continue;
    out.source.push_back(s);
    out.target.push_back(t);
  }
  return out;
}

std::string_view to_string(Task task) {
  switch (task) {
    case Task::kCopy:
      return "copy";
    case Task::kReverse:
      return "reverse";
    case Task::kDigitToWord:
      return "digit-to-word";
  }
  return "copy";
}

Task parse_task(std::string_view name) {
  if (name == "copy") return Task::kCopy;
  if (name == "reverse") return Task::kReverse;
  if (name == "digit-to-word") return Task::kDigitToWord;
  throw ConfigError("unknown task '" + std::string(name) + "'");
}

Sentence apply_task(Task task, std::span<const std::string> source) {
  switch (task) {
    case Task::kCopy:
      return {source.begin(), source.end()};
    case Task::kReverse:
      return {source.rbegin(), source.rend()};
    case Task::kDigitToWord: {
      Sentence out;
      for (const auto& token : source) {
        if (token.size() != 1 || token[0] < '0' || token[0] > '9') {
          throw DataError("digit-to-word: '" + token + "' is not a digit");
        }
        out.emplace_back(kDigitWords[token[0] - '0']);
      }
      return out;
    }
  }
  return {};
}

ParallelCorpus generate_task(const SyntheticTaskSpec& spec) {
  if (spec.min_length == 0 || spec.min_length > spec.max_length) {
    throw ConfigError("task lengths must satisfy 1 <= min <= max");
  }
  const std::size_t symbols = spec.task == Task::kDigitToWord ? 10 : spec.vocab_size;
  if (symbols == 0) throw ConfigError("task vocabulary must be non-empty");
  Rng rng(spec.seed);
  ParallelCorpus corpus;
  for (std::size_t n = 0; n < spec.samples; ++n) {
    const std::size_t len = spec.min_length + rng.index(spec.max_length - spec.min_length + 1);
    Sentence src;
    for (std::size_t k = 0; k < len; ++k) src.push_back(std::to_string(rng.index(symbols)));
    corpus.target.push_back(apply_task(spec.task, src));
    corpus.source.push_back(std::move(src));
  }
  return corpus;
}

std::vector<IdPair> to_ids(const ParallelCorpus& corpus, const Vocabulary& source_vocab,
                           const Vocabulary& target_vocab) {
  std::vector<IdPair> out;
  out.reserve(corpus.size());
  for (std::size_t k = 0; k < corpus.size(); ++k) {
    IdPair p{source_vocab.encode(corpus.source[k]), target_vocab.encode(corpus.target[k])};
    p.target.push_back(kEos);
    out.push_back(std::move(p));
  }
  return out;
}

}  // namespace gridnmt
