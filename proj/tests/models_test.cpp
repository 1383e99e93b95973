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

#include <cmath>
#include <memory>
#include <vector>

#include "gridnmt/error.hpp"
#include "gridnmt/grid.hpp"
#include "gridnmt/models.hpp"
#include "gridnmt/training.hpp"
#include "test_util.hpp"

using namespace gridnmt;
using gridnmt::testing::random_tensor;

namespace {

ModelConfig tiny(Variant variant, std::size_t hidden = 4, std::size_t embed = 3) {
  ModelConfig c;
  c.variant = variant;
  c.source_vocab = 9;
  c.target_vocab = 8;
  c.hidden = hidden;
  c.embed = embed;
  return c;
}

std::vector<TokenId> random_ids(Rng& rng, std::size_t length, std::size_t vocab, bool eos) {
  std::vector<TokenId> ids;
  for (std::size_t k = 0; k < length; ++k) {
    ids.push_back(static_cast<TokenId>(kReservedTokens + rng.index(vocab - kReservedTokens)));
  }
  if (eos) ids.push_back(kEos);
  return ids;
}

void set_param(ParamStore& store, const std::string& name, const Tensor& value) {
  store.set(store.id(name), value);
}

double sum_exp(const Tensor& log_probs) {
  double s = 0.0;
  for (double v : log_probs.values()) s += std::exp(v);
  return s;
}

// Step-by-step decoding distributions along a forced prefix.
std::vector<Tensor> decode_path(const TranslationModel& model, std::span<const TokenId> source,
                                std::span<const TokenId> target) {
  std::vector<Tensor> out;
  SequenceModel::StatePtr state = model.begin(source);
  TokenId previous = kBos;
  for (TokenId y : target) {
    SequenceModel::Step s = model.step(*state, previous);
    out.push_back(s.log_probs);
    state = s.next;
    previous = y;
  }
  return out;
}

}  // namespace

TEST_CASE("variant names") {
  for (Variant v : kAllVariants) CHECK(parse_variant(to_string(v)) == v);
  CHECK(parse_variant("2d-seq2seq") == Variant::kTwoD);
  CHECK(parse_variant("attention") == Variant::kAttention);
  CHECK(is_two_dimensional(Variant::kTwoDWeighted));
  CHECK_FALSE(is_two_dimensional(Variant::kFertility));
  CHECK_THROWS_AS(parse_variant("transformer"), Error);
}

TEST_CASE("parameter shapes follow the vocabulary and sizes") {
  for (Variant v : kAllVariants) {
    auto m = TranslationModel::create(tiny(v), 1);
    const ParamStore& p = m->params();
    CHECK(p.value(p.id("source.embed")).shape() == Shape{9, 3});
    CHECK(p.value(p.id("target.embed")).shape() == Shape{8, 3});
    CHECK(p.value(m->output().w).rows() == 8);
    CHECK(p.value(m->output().b).shape() == Shape{8});
    CHECK(p.value(m->output().w).cols() == (is_two_dimensional(v) ? 4u : 12u));
  }
  CHECK_THROWS(TranslationModel::create([] {
    ModelConfig c = tiny(Variant::kTwoD);
    c.target_vocab = 3;
    return c;
  }(), 1));
}

TEST_CASE("embedding lookup range") {
  auto m = TranslationModel::create(tiny(Variant::kTwoD), 1);
  ad::Tape tape;
  CHECK_THROWS_AS(m->source_embedding().lookup(tape, m->params(), 9), DataError);
  CHECK_THROWS_AS(m->source_embedding().lookup(tape, m->params(), -1), DataError);
  CHECK(m->source_embedding().lookup(tape, m->params(), 8).value().size() == 3);
}

TEST_CASE("encoder equals two independent scans") {
  auto m = TranslationModel::create(tiny(Variant::kAttention), 5);
  const ParamStore& p = m->params();
  const Tensor& table = p.value(m->source_embedding().table);
  auto embed = [&](TokenId t) {
    std::vector<double> row(table.values().begin() + t * 3, table.values().begin() + (t + 1) * 3);
    return Tensor::vector(row);
  };
  Rng rng(2);
  for (std::size_t J : {1u, 2u, 5u}) {
    const auto src = random_ids(rng, J, 9, false);
    const EncoderStates enc = m->encode(src);
    REQUIRE(enc.h.size() == J);
    std::vector<CellState> fwd(J), bwd(J);
    CellState state = CellState::zeros(4);
    for (std::size_t j = 0; j < J; ++j) fwd[j] = state = lstm_step(p, m->encoder().forward, embed(src[j]), state);
    state = CellState::zeros(4);
    for (std::size_t j = J; j-- > 0;) bwd[j] = state = lstm_step(p, m->encoder().backward, embed(src[j]), state);
    for (std::size_t j = 0; j < J; ++j) {
      CHECK(enc.h[j].shape() == Shape{8});
      for (std::size_t k = 0; k < 4; ++k) {
        CHECK(enc.h[j][k] == fwd[j].s[k]);
        CHECK(enc.h[j][4 + k] == bwd[j].s[k]);
      }
    }
    CHECK(enc.backward_final.s.bit_equal(bwd[0].s));
    CHECK(enc.backward_final.c.bit_equal(bwd[0].c));
  }
}

TEST_CASE("tied encoder directions mirror each other on a palindrome") {
  auto m = TranslationModel::create(tiny(Variant::kTwoD), 6);
  ParamStore& p = m->params();
  const EncoderParams& e = m->encoder();
  p.set(e.backward.w, p.value(e.forward.w));
  p.set(e.backward.u, p.value(e.forward.u));
  p.set(e.backward.b, p.value(e.forward.b));
  const std::vector<TokenId> src{4, 7, 5, 7, 4};
  const EncoderStates enc = m->encode(src);
  for (std::size_t j = 0; j < 5; ++j) {
    for (std::size_t k = 0; k < 4; ++k) CHECK(enc.h[j][k] == enc.h[4 - j][4 + k]);
  }
}

TEST_CASE("2D model: cached rows equal the full grid") {
  for (Variant v : {Variant::kTwoD, Variant::kTwoDWeighted}) {
    auto base = TranslationModel::create(tiny(v), 3);
    auto& m = dynamic_cast<TwoDSeq2Seq&>(*base);
    const ParamStore& p = m.params();
    const std::vector<TokenId> src{4, 5, 6};
    const std::vector<TokenId> ys{kBos, 7, 5};
    const EncoderStates enc = m.encode(src);
    const Tensor& table = p.value(m.target_embedding().table);

    GridInputs inputs(3);
    for (std::size_t j = 0; j < 3; ++j) {
      for (TokenId y : ys) {
        std::vector<double> x = enc.h[j].to_vector();
        for (std::size_t k = 0; k < 3; ++k) x.push_back(table[y * 3 + k]);
        inputs[j].push_back(Tensor::vector(x));
      }
    }
    const GridState full = forward_full(p, m.grid(), inputs);

    RowCache cache = RowCache::empty(3, 4);
    for (std::size_t i = 0; i < ys.size(); ++i) {
      TwoDSeq2Seq::RowStep r = m.row_step(enc, ys[i], cache);
      if (!m.weighted()) {
        CHECK(r.context.bit_equal(full.at(3, i + 1).s));
      } else {
        std::vector<Tensor> row;
        for (std::size_t j = 1; j <= 3; ++j) row.push_back(full.at(j, i + 1).s);
        CHECK(r.context.bit_equal(weighted_context(p, m.weighting(), row).context));
      }
      CHECK(sum_exp(r.log_probs) == doctest::Approx(1.0).epsilon(1e-12));
      double ps = 0.0;
      for (double q : r.probs.values()) ps += q;
      CHECK(std::fabs(ps - 1.0) < 1e-12);
      cache = std::move(r.cache);
    }
  }
}

TEST_CASE("2D model: incremental decoding matches recomputation bit-exactly") {
  for (Variant v : {Variant::kTwoD, Variant::kTwoDWeighted}) {
    auto base = TranslationModel::create(tiny(v), 11);
    const auto& m = dynamic_cast<const TwoDSeq2Seq&>(*base);
    Rng rng(4);
    for (int trial = 0; trial < 5; ++trial) {
      const auto src = random_ids(rng, 1 + rng.index(5), 9, false);
      const auto tgt = random_ids(rng, 1 + rng.index(6), 8, true);
      const auto steps = decode_path(m, src, tgt);
      for (std::size_t i = 0; i < tgt.size(); ++i) {
        const std::span<const TokenId> prefix(tgt.data(), i);
        CHECK(steps[i].bit_equal(m.recompute_log_probs(src, prefix)));
      }
    }
  }
}

TEST_CASE("decode path equals the teacher-forced training path for every variant") {
  for (Variant v : kAllVariants) {
    auto m = TranslationModel::create(tiny(v), 12);
    Rng rng(7);
    for (int trial = 0; trial < 4; ++trial) {
      const auto src = random_ids(rng, 1 + rng.index(5), 9, false);
      const auto tgt = random_ids(rng, rng.index(5), 8, true);
      const auto forced = m->teacher_forced_log_probs(src, tgt);
      const auto decoded = decode_path(*m, src, tgt);
      REQUIRE(forced.size() == tgt.size());
      for (std::size_t i = 0; i < tgt.size(); ++i) {
        INFO(to_string(v) << " position " << i);
        CHECK(forced[i].bit_equal(decoded[i]));
        CHECK(sum_exp(forced[i]) == doctest::Approx(1.0).epsilon(1e-12));
      }
    }
  }
}

TEST_CASE("weighted context") {
  ParamStore store;
  Rng rng(1);
  const auto w = WeightingParams::create(store, 4, rng);
  const Tensor s1 = random_tensor(Shape{4}, rng);
  const WeightedContext one = weighted_context(store, w, std::vector<Tensor>{s1});
  CHECK(one.gamma[0] == 1.0);
  CHECK(one.context.bit_equal(s1));

  const WeightedContext same = weighted_context(store, w, std::vector<Tensor>{s1, s1, s1});
  for (std::size_t j = 0; j < 3; ++j) CHECK(same.gamma[j] == same.gamma[0]);
  for (std::size_t k = 0; k < 4; ++k) CHECK(same.context[k] == doctest::Approx(s1[k]).epsilon(1e-15));

  for (int trial = 0; trial < 50; ++trial) {
    std::vector<Tensor> row;
    for (int j = 0; j < 4; ++j) row.push_back(random_tensor(Shape{4}, rng));
    const WeightedContext r = weighted_context(store, w, row);
    double total = 0.0;
    for (double g : r.gamma.values()) {
      CHECK(g >= 0.0);
      total += g;
    }
    CHECK(std::fabs(total - 1.0) < 1e-12);
    for (std::size_t k = 0; k < 4; ++k) {
      double lo = row[0][k], hi = row[0][k];
      for (const Tensor& s : row) {
        lo = std::min(lo, s[k]);
        hi = std::max(hi, s[k]);
      }
      CHECK(r.context[k] >= lo - 1e-15);
      CHECK(r.context[k] <= hi + 1e-15);
    }
  }
}

TEST_CASE("attention step: single source position and normalisation") {
  for (AttentionMode mode : {AttentionMode::kPlain, AttentionMode::kCoverage, AttentionMode::kFertility}) {
    ParamStore store;
    Rng rng(3);
    const auto a = AttentionParams::create(store, mode, 4, 6, 2.0, rng);
    EncoderStates enc;
    enc.h = {random_tensor(Shape{6}, rng)};
    const Tensor s = random_tensor(Shape{4}, rng);
    const Tensor extra = Tensor::vector({0.3});
    const AttentionResult r = attention_step(store, a, s, enc, mode == AttentionMode::kPlain ? nullptr : &extra);
    CHECK(r.alpha[0] == 1.0);
    CHECK(r.context.bit_equal(enc.h[0]));

    enc.h.clear();
    for (int j = 0; j < 5; ++j) enc.h.push_back(random_tensor(Shape{6}, rng, -3, 3));
    const Tensor extra5 = random_tensor(Shape{5}, rng, 0, 1);
    const AttentionResult many =
        attention_step(store, a, s, enc, mode == AttentionMode::kPlain ? nullptr : &extra5);
    double total = 0.0;
    for (double x : many.alpha.values()) {
      CHECK(x >= 0.0);
      total += x;
    }
    CHECK(std::fabs(total - 1.0) < 1e-12);
    for (std::size_t k = 0; k < 6; ++k) {
      double want = 0.0;
      for (std::size_t j = 0; j < 5; ++j) want += many.alpha[j] * enc.h[j][k];
      CHECK(many.context[k] == doctest::Approx(want).epsilon(1e-14));
    }
  }
}

TEST_CASE("fertility: empty history gives zero beta, denominators in (0, N)") {
  ParamStore store;
  Rng rng(8);
  const auto a = AttentionParams::create(store, AttentionMode::kFertility, 4, 6, 2.0, rng);
  store.set(a.fertility, random_tensor(Shape{6}, rng, -3, 3));
  EncoderStates enc;
  for (int j = 0; j < 7; ++j) enc.h.push_back(random_tensor(Shape{6}, rng, -2, 2));
  const Tensor beta = fertility_beta(store, a, enc, Tensor::zeros(Shape{7}));
  for (double b : beta.values()) CHECK(b == 0.0);

  ad::Tape tape;
  const AttentionVars vars = bind(tape, store, a);
  std::vector<ad::Var> h;
  for (const Tensor& t : enc.h) h.push_back(tape.constant(t));
  const Tensor denom = fertility_denominators(vars, h).value();
  for (double d : denom.values()) {
    CHECK(d > 0.0);
    CHECK(d < 2.0);
  }
  const Tensor ones = Tensor::filled(Shape{7}, 1.0);
  const Tensor b1 = fertility_beta(store, a, enc, ones);
  for (std::size_t j = 0; j < 7; ++j) CHECK(b1[j] == doctest::Approx(1.0 / denom[j]).epsilon(1e-15));
}

TEST_CASE("coverage with a zero feedback path equals plain attention") {
  auto plain = TranslationModel::create(tiny(Variant::kAttention), 21);
  auto cov = TranslationModel::create(tiny(Variant::kCoverage), 22);
  ParamStore& pc = cov->params();
  const ParamStore& pp = plain->params();
  for (ParamId id = 0; id < pp.size(); ++id) set_param(pc, pp.name(id), pp.value(id));
  const auto& attention = dynamic_cast<const AttentionSeq2Seq&>(*cov).attention();
  pc.set(attention.feedback, Tensor::zeros(pc.value(attention.feedback).shape()));
  Rng rng(3);
  for (int trial = 0; trial < 5; ++trial) {
    const auto src = random_ids(rng, 1 + rng.index(6), 9, false);
    const auto tgt = random_ids(rng, rng.index(6), 8, true);
    const auto a = plain->teacher_forced_log_probs(src, tgt);
    const auto b = cov->teacher_forced_log_probs(src, tgt);
    for (std::size_t i = 0; i < a.size(); ++i) CHECK(a[i].bit_equal(b[i]));
    ad::Tape t1, t2;
    CHECK(plain->sentence_loss(t1, src, tgt).value()[0] == cov->sentence_loss(t2, src, tgt).value()[0]);
  }
}

TEST_CASE("alignments are distributions and coverage starts from zero feedback") {
  for (Variant v : {Variant::kAttention, Variant::kCoverage, Variant::kFertility}) {
    auto base = TranslationModel::create(tiny(v), 9);
    const auto& m = dynamic_cast<const AttentionSeq2Seq&>(*base);
    const std::vector<TokenId> src{4, 5, 6, 7}, tgt{5, 6, kEos};
    const auto alignments = m.teacher_forced_alignments(src, tgt);
    REQUIRE(alignments.size() == 3);
    for (const Tensor& a : alignments) {
      double total = 0.0;
      for (double x : a.values()) total += x;
      CHECK(std::fabs(total - 1.0) < 1e-12);
    }
    // The first alignment cannot depend on the feedback weights, since the
    // fed-back quantity is zero at step one.
    auto changed = TranslationModel::create(tiny(v), 9);
    if (v != Variant::kAttention) {
      const auto& ap = dynamic_cast<const AttentionSeq2Seq&>(*changed).attention();
      Rng rng(1);
      changed->params().set(ap.feedback, random_tensor(changed->params().value(ap.feedback).shape(), rng, -5, 5));
      const auto other = dynamic_cast<const AttentionSeq2Seq&>(*changed).teacher_forced_alignments(src, tgt);
      CHECK(other[0].bit_equal(alignments[0]));
      CHECK_FALSE(other[2].bit_equal(alignments[2]));
    }
  }
}

TEST_CASE("uniform output layer: loss is a sum of log |V_t|") {
  for (Variant v : kAllVariants) {
    auto m = TranslationModel::create(tiny(v), 2);
    ParamStore& p = m->params();
    p.set(m->output().w, Tensor::zeros(p.value(m->output().w).shape()));
    p.set(m->output().b, Tensor::zeros(p.value(m->output().b).shape()));
    const std::vector<TokenId> src{4, 5}, tgt{6, 7, 4, kEos};
    ad::Tape tape;
    const double loss = m->sentence_loss(tape, src, tgt).value()[0];
    const double log_v = std::log(8.0);
    double summed = 0.0;
    for (int i = 0; i < 4; ++i) summed += log_v;
    CHECK(loss == summed);
    CHECK(loss == doctest::Approx(4.0 * log_v).epsilon(1e-15));
  }
}

TEST_CASE("sentence_loss is non-negative and rejects malformed targets") {
  for (Variant v : kAllVariants) {
    auto m = TranslationModel::create(tiny(v), 4);
    Rng rng(5);
    for (int trial = 0; trial < 5; ++trial) {
      ad::Tape tape;
      const auto src = random_ids(rng, 1 + rng.index(5), 9, false);
      const auto tgt = random_ids(rng, rng.index(5), 8, true);
      CHECK(m->sentence_loss(tape, src, tgt).value()[0] >= 0.0);
    }
    ad::Tape t1, t2, t3;
    const std::vector<TokenId> src{4}, no_eos{5, 6}, empty{};
    CHECK_THROWS_AS(m->sentence_loss(t1, src, no_eos), DataError);
    CHECK_THROWS_AS(m->sentence_loss(t2, src, empty), DataError);
    CHECK_THROWS_AS(m->sentence_loss(t3, empty, std::vector<TokenId>{kEos}), DataError);
  }
}

TEST_CASE("dropout is inactive without a generator and reproducible with one") {
  for (Variant v : kAllVariants) {
    auto m = TranslationModel::create(tiny(v), 14);
    const std::vector<TokenId> src{4, 5, 6}, tgt{6, 5, kEos};
    auto loss = [&](const Dropout& d) {
      ad::Tape tape;
      return m->sentence_loss(tape, src, tgt, d).value()[0];
    };
    const double clean = loss({});
    CHECK(loss({0.5, nullptr}) == clean);
    Rng r0(1);
    CHECK(loss({0.0, &r0}) == clean);
    Rng r1(9), r2(9);
    const double a = loss({0.5, &r1}), b = loss({0.5, &r2});
    CHECK(a == b);
    CHECK(a != clean);
  }
}

TEST_CASE("one Adam step on an example usually lowers its loss") {
  for (Variant v : kAllVariants) {
    int lowered = 0;
    for (std::uint64_t seed = 1; seed <= 20; ++seed) {
      auto m = TranslationModel::create(tiny(v), seed);
      Rng rng(seed + 1000);
      const auto src = random_ids(rng, 2 + rng.index(4), 9, false);
      const auto tgt = random_ids(rng, 1 + rng.index(4), 8, true);
      GradBuffer g(m->params());
      ad::Tape tape;
      ad::Var loss = m->sentence_loss(tape, src, tgt);
      const double before = loss.value()[0];
      tape.backward(loss, g);
      Adam adam(m->params(), AdamConfig{1e-3});
      adam.step(m->params(), g);
      ad::Tape after_tape;
      if (m->sentence_loss(after_tape, src, tgt).value()[0] < before) ++lowered;
    }
    INFO(to_string(v) << " lowered " << lowered << "/20");
    CHECK(lowered > 10);
  }
}

TEST_CASE("model gradients match finite differences elementwise") {
  // Mixed absolute/relative criterion: elements whose true gradient is near
  // zero are dominated by the round-off of the difference quotient.
  for (Variant v : kAllVariants) {
    auto m = TranslationModel::create(tiny(v, 3, 3), 31);
    ParamStore& p = m->params();
    const std::vector<TokenId> src{4, 8, 5}, tgt{6, 7, kEos};
    GradBuffer g(p);
    {
      ad::Tape tape;
      tape.backward(m->sentence_loss(tape, src, tgt), g);
    }
    auto value = [&] {
      ad::Tape tape;
      return m->sentence_loss(tape, src, tgt).value()[0];
    };
    const double eps = 1e-5;
    std::size_t checked = 0;
    for (ParamId id = 0; id < p.size(); ++id) {
      const Tensor original = p.value(id);
      std::vector<double> work = original.to_vector();
      for (std::size_t k = 0; k < work.size(); ++k) {
        const double saved = work[k];
        work[k] = saved + eps;
        p.set(id, Tensor(original.shape(), work));
        const double plus = value();
        work[k] = saved - eps;
        p.set(id, Tensor(original.shape(), work));
        const double minus = value();
        work[k] = saved;
        const double numeric = (plus - minus) / (2 * eps);
        INFO(to_string(v) << " " << p.name(id) << "[" << k << "] ad " << g[id][k] << " fd " << numeric);
        CHECK(std::fabs(g[id][k] - numeric) <= 1e-8 + 1e-6 * std::fabs(numeric));
        ++checked;
      }
      p.set(id, original);
    }
    CHECK(checked == p.total_size());
  }
}
