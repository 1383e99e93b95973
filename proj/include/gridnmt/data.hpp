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
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace gridnmt {

using TokenId = std::int32_t;

inline constexpr TokenId kPad = 0;
inline constexpr TokenId kBos = 1;
inline constexpr TokenId kEos = 2;
inline constexpr TokenId kUnk = 3;
inline constexpr std::size_t kReservedTokens = 4;

using Sentence = std::vector<std::string>;

// Token <-> id bijection. Ids 0-3 are PAD, BOS, EOS, UNK in every vocabulary.
class Vocabulary {
 public:
  Vocabulary();

  std::size_t size() const { return tokens_.size(); }
  TokenId id(std::string_view token) const;  // UNK when absent
  const std::string& token(TokenId id) const;
  bool contains(std::string_view token) const;

  // Appends a token if new; returns its id either way.
  TokenId add(const std::string& token);

  std::vector<TokenId> encode(std::span<const std::string> tokens) const;
  // Stops at the first EOS; PAD and BOS are skipped.
  std::vector<std::string> decode(std::span<const TokenId> ids) const;

  // One token per line; line k (from 0) holds id k + 4.
  void save(const std::filesystem::path& path) const;
  static Vocabulary load(const std::filesystem::path& path);

  bool operator==(const Vocabulary& other) const { return tokens_ == other.tokens_; }

 private:
  std::vector<std::string> tokens_;
  std::unordered_map<std::string, TokenId> ids_;
};

// Most frequent tokens first, frequency ties broken lexicographically, until
// the vocabulary holds max_size entries (reserved ids included).
Vocabulary build_vocab(std::span<const Sentence> sentences, std::size_t max_size);

struct ParallelCorpus {
  std::vector<Sentence> source;
  std::vector<Sentence> target;

  std::size_t size() const { return source.size(); }
};

std::vector<std::string> split_tokens(std::string_view line);
std::string join_tokens(std::span<const std::string> tokens);

std::vector<std::string> read_lines(const std::filesystem::path& path);
void write_lines(const std::filesystem::path& path, std::span<const std::string> lines);

// Reads <prefix>.src and <prefix>.tgt; line counts must agree.
ParallelCorpus read_corpus(const std::string& prefix);
void write_corpus(const std::string& prefix, const ParallelCorpus& corpus);

// Drops pairs with an empty side or more than max_tokens tokens on either
// side.
ParallelCorpus filter_by_length(const ParallelCorpus& corpus, std::size_t max_tokens);

enum class Task { kCopy, kReverse, kDigitToWord };

std::string_view to_string(Task task);
Task parse_task(std::string_view name);

struct SyntheticTaskSpec {
  Task task = Task::kCopy;
  std::size_t vocab_size = 16;  // content symbols; digit-to-word always uses 10
  std::size_t min_length = 3;
  std::size_t max_length = 10;
  std::size_t samples = 1000;
  std::uint64_t seed = 1;
};

// Applies the task's mapping to one source sentence.
Sentence apply_task(Task task, std::span<const std::string> source);
ParallelCorpus generate_task(const SyntheticTaskSpec& spec);

// Sentence pairs as ids; targets end with EOS.
struct IdPair {
  std::vector<TokenId> source;
  std::vector<TokenId> target;
};

std::vector<IdPair> to_ids(const ParallelCorpus& corpus, const Vocabulary& source_vocab,
                           const Vocabulary& target_vocab);

}  // namespace gridnmt
