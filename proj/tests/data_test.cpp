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

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <set>
#include <string>
#include <vector>

#include "gridnmt/data.hpp"
#include "gridnmt/error.hpp"
#include "test_util.hpp"

using namespace gridnmt;
using gridnmt::testing::read_file;
using gridnmt::testing::TempDir;
using gridnmt::testing::write_file;

TEST_CASE("reserved ids") {
  const Vocabulary v;
  CHECK(v.size() == kReservedTokens);
  CHECK(v.id("<unk>") == kUnk);
  CHECK(v.token(kPad) == "<pad>");
  CHECK(v.token(kBos) == "<s>");
  CHECK(v.token(kEos) == "</s>");
  CHECK(v.id("never-seen") == kUnk);
}

TEST_CASE("build_vocab orders by frequency then lexicographically") {
  const std::vector<Sentence> corpus{{"a", "a", "b"}};
  const Vocabulary v = build_vocab(corpus, 10);
  CHECK(v.size() == 6);
  CHECK(v.id("a") == 4);
  CHECK(v.id("b") == 5);

  const std::vector<Sentence> ties{{"z", "y", "x", "y"}, {"w", "x"}};
  const Vocabulary t = build_vocab(ties, 100);
  CHECK(t.id("x") == 4);
  CHECK(t.id("y") == 5);
  CHECK(t.id("w") == 6);
  CHECK(t.id("z") == 7);
}

TEST_CASE("a small vocabulary maps rare tokens to UNK") {
  const std::vector<Sentence> corpus{{"a", "a", "a", "b", "b", "c"}};
  const Vocabulary v = build_vocab(corpus, 6);
  CHECK(v.size() == 6);
  const Sentence s{"a", "c", "b"};
  const auto ids = v.encode(s);
  CHECK(ids == std::vector<TokenId>{4, kUnk, 5});
}

TEST_CASE("decode stops at EOS and skips PAD and BOS") {
  Vocabulary v;
  v.add("x");
  v.add("y");
  const std::vector<TokenId> ids{kBos, 4, kPad, 5, kEos, 4};
  CHECK(v.decode(ids) == Sentence{"x", "y"});
}

TEST_CASE("vocabulary save and load round-trip") {
  TempDir dir("vocab");
  std::vector<Sentence> corpus{{"der", "Hund", "bellt"}, {"der", "Hund"}};
  const Vocabulary v = build_vocab(corpus, 100);
  v.save(dir / "v.txt");
  CHECK(read_file(dir / "v.txt") == "Hund\nder\nbellt\n");
  const Vocabulary back = Vocabulary::load(dir / "v.txt");
  CHECK(back == v);
  for (TokenId id = 0; id < static_cast<TokenId>(v.size()); ++id) CHECK(back.token(id) == v.token(id));
}

TEST_CASE("vocabulary load rejects duplicates and reserved tokens") {
  TempDir dir("vocab-bad");
  write_file(dir / "dup.txt", "a\nb\na\n");
  CHECK_THROWS_AS(Vocabulary::load(dir / "dup.txt"), DataError);
  write_file(dir / "res.txt", "a\n</s>\n");
  CHECK_THROWS_AS(Vocabulary::load(dir / "res.txt"), DataError);
  CHECK_THROWS_AS(Vocabulary::load(dir / "missing.txt"), DataError);
}

TEST_CASE("whitespace tokenisation") {
  CHECK(split_tokens("  a\tb  c \r") == std::vector<std::string>{"a", "b", "c"});
  CHECK(split_tokens("").empty());
  const std::vector<std::string> toks{"x", "y"};
  CHECK(join_tokens(toks) == "x y");
}

TEST_CASE("corpus read, write and mismatch") {
  TempDir dir("corpus");
  ParallelCorpus c;
  c.source = {{"a", "b"}, {"c"}};
  c.target = {{"b", "a"}, {"c"}};
  const std::string prefix = (dir / "train").string();
  write_corpus(prefix, c);
  CHECK(read_file(dir / "train.src") == "a b\nc\n");
  const ParallelCorpus back = read_corpus(prefix);
  CHECK(back.source == c.source);
  CHECK(back.target == c.target);

  write_file(dir / "bad.src", "a\nb\n");
  write_file(dir / "bad.tgt", "a\n");
  CHECK_THROWS_AS(read_corpus((dir / "bad").string()), DataError);
  try {
    read_corpus((dir / "absent").string());
    FAIL("expected DataError");
  } catch (const DataError& e) {
    CHECK(std::string(e.what()).find("absent.src") != std::string::npos);
  }
}

TEST_CASE("length filter") {
  ParallelCorpus c;
  const Sentence long_side(51, "w"), limit(50, "w");
  c.source = {{"a"}, long_side, limit, {}, {"b"}};
  c.target = {{"a"}, {"x"}, limit, {"y"}, long_side};
  const ParallelCorpus f = filter_by_length(c, 50);
  CHECK(f.size() == 2);
  CHECK(f.source[0] == Sentence{"a"});
  CHECK(f.source[1] == limit);
}

TEST_CASE("task mappings") {
  const Sentence s{"3", "7", "1"};
  CHECK(apply_task(Task::kCopy, s) == s);
  const Sentence abc{"a", "b", "c"};
  CHECK(apply_task(Task::kReverse, abc) == Sentence{"c", "b", "a"});
  const Sentence digits{"4", "2"};
  CHECK(apply_task(Task::kDigitToWord, digits) == Sentence{"four", "two"});
  CHECK(parse_task("reverse") == Task::kReverse);
  CHECK(to_string(Task::kDigitToWord) == "digit-to-word");
  CHECK_THROWS(parse_task("sort"));
}

TEST_CASE("generated tasks respect their settings and reproduce under a seed") {
  for (Task task : {Task::kCopy, Task::kReverse, Task::kDigitToWord}) {
    SyntheticTaskSpec spec;
    spec.task = task;
    spec.vocab_size = 16;
    spec.samples = 300;
    spec.seed = 9;
    const ParallelCorpus a = generate_task(spec);
    const ParallelCorpus b = generate_task(spec);
    CHECK(a.source == b.source);
    CHECK(a.target == b.target);
    CHECK(a.size() == 300);
    std::set<std::string> symbols;
    for (std::size_t k = 0; k < a.size(); ++k) {
      CHECK(a.source[k].size() >= 3);
      CHECK(a.source[k].size() <= 10);
      CHECK(a.target[k] == apply_task(task, a.source[k]));
      symbols.insert(a.source[k].begin(), a.source[k].end());
    }
    CHECK(symbols.size() == (task == Task::kDigitToWord ? 10u : 16u));
    spec.seed = 10;
    CHECK(generate_task(spec).source != a.source);
  }
}

TEST_CASE("to_ids appends EOS to targets only") {
  ParallelCorpus c;
  c.source = {{"a", "b"}};
  c.target = {{"b"}};
  Vocabulary sv, tv;
  sv.add("a");
  sv.add("b");
  tv.add("b");
  const auto ids = to_ids(c, sv, tv);
  REQUIRE(ids.size() == 1);
  CHECK(ids[0].source == std::vector<TokenId>{4, 5});
  CHECK(ids[0].target == std::vector<TokenId>{4, kEos});
}
