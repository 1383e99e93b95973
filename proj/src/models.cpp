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

#include "gridnmt/models.hpp"

#include <cmath>
#include <string>

#include "gridnmt/error.hpp"

namespace gridnmt {

std::string_view to_string(Variant variant) {
  switch (variant) {
    case Variant::kAttention: return "attention";
    case Variant::kTwoD: return "2d-seq2seq";
    case Variant::kTwoDWeighted: return "2d-seq2seq-weighting";
    case Variant::kCoverage: return "coverage";
    case Variant::kFertility: return "fertility";
  }
  return "?";
}

Variant parse_variant(std::string_view name) {
  for (Variant v : kAllVariants) {
    if (to_string(v) == name) return v;
  }
  throw ConfigError("unknown model variant '" + std::string(name) +
                    "' (expected attention, 2d-seq2seq, 2d-seq2seq-weighting, coverage, "
                    "fertility)");
}

bool is_two_dimensional(Variant variant) {
  return variant == Variant::kTwoD || variant == Variant::kTwoDWeighted;
}

namespace {

Tensor uniform_tensor(Shape shape, double bound, Rng& rng) {
  std::vector<double> values(shape.numel());
  for (double& v : values) v = rng.uniform(-bound, bound);
  return Tensor(shape, std::move(values));
}

double init_bound(std::size_t fan) { return std::sqrt(1.0 / static_cast<double>(fan)); }

std::vector<TokenId> decoder_inputs(std::span<const TokenId> target) {
  std::vector<TokenId> inputs;
  inputs.reserve(target.size());
  inputs.push_back(kBos);
  for (std::size_t i = 0; i + 1 < target.size(); ++i) inputs.push_back(target[i]);
  return inputs;
}

}  // namespace

ad::Var apply_dropout(ad::Var x, const Dropout& dropout) {
  if (!dropout.active()) return x;
  const double keep = 1.0 - dropout.rate;
  std::vector<double> mask(x.value().size());
  for (double& m : mask) m = dropout.rng->uniform() < keep ? 1.0 / keep : 0.0;
  return x * x.tape->constant(Tensor(x.value().shape(), std::move(mask)));
}

Embedding Embedding::create(ParamStore& store, const std::string& name, std::size_t vocab,
                            std::size_t dim, Rng& rng) {
  Embedding e;
  e.vocab = vocab;
  e.dim = dim;
  e.table = store.add(name, uniform_tensor(Shape{vocab, dim}, init_bound(dim), rng));
  return e;
}

ad::Var Embedding::lookup(ad::Tape& tape, const ParamStore& store, TokenId id) const {
  if (id < 0 || static_cast<std::size_t>(id) >= vocab) {
    throw DataError("token id " + std::to_string(id) + " outside vocabulary of size " +
                    std::to_string(vocab));
  }
  return ad::row(tape.param(store, table), static_cast<std::size_t>(id));
}

EncoderVars encode(ad::Tape& tape, const ParamStore& store, const EncoderParams& params,
                   std::span<const ad::Var> embedded) {
  const std::size_t J = embedded.size();
  if (J == 0) throw DataError("cannot encode an empty source sentence");
  LSTMVars fwd = bind(tape, store, params.forward);
  LSTMVars bwd = bind(tape, store, params.backward);
  ad::Var zero = tape.constant(Tensor::zeros(Shape{params.forward.hidden}));
  std::vector<ad::Var> fwd_s(J), bwd_s(J);
  CellVars state{zero, zero};
  for (std::size_t j = 0; j < J; ++j) {
    state = lstm_step(fwd, embedded[j], state);
    fwd_s[j] = state.s;
  }
  state = {zero, zero};
  for (std::size_t j = J; j-- > 0;) {
    state = lstm_step(bwd, embedded[j], state);
    bwd_s[j] = state.s;
  }
  EncoderVars out;
  out.h.reserve(J);
  for (std::size_t j = 0; j < J; ++j) out.h.push_back(ad::concat({fwd_s[j], bwd_s[j]}));
  out.backward_final = state;
  return out;
}

OutputLayer OutputLayer::create(ParamStore& store, std::size_t vocab, std::size_t input,
                                Rng& rng) {
  OutputLayer o;
  o.vocab = vocab;
  o.input = input;
  o.w = store.add("output.w", uniform_tensor(Shape{vocab, input}, init_bound(input), rng));
  o.b = store.add("output.b", Tensor::zeros(Shape{vocab}));
  return o;
}

ad::Var OutputLayer::logits(ad::Tape& tape, const ParamStore& store, ad::Var context) const {
  return ad::matvec(tape.param(store, w), context) + tape.param(store, b);
}

WeightingParams WeightingParams::create(ParamStore& store, std::size_t hidden, Rng& rng) {
  WeightingParams p;
  p.hidden = hidden;
  p.w = store.add("weighting.w", uniform_tensor(Shape{hidden, hidden}, init_bound(hidden), rng));
  p.v = store.add("weighting.v", uniform_tensor(Shape{hidden}, init_bound(hidden), rng));
  return p;
}

ad::Var weighted_context(ad::Tape& tape, const ParamStore& store, const WeightingParams& params,
                         std::span<const ad::Var> row_states, ad::Var* gamma) {
  if (row_states.empty()) throw ShapeError("weighted_context: empty row");
  ad::Var w = tape.param(store, params.w);
  ad::Var v = tape.param(store, params.v);
  std::vector<ad::Var> scores;
  scores.reserve(row_states.size());
  for (const ad::Var& s : row_states) scores.push_back(ad::dot(v, ad::tanh(ad::matvec(w, s))));
  ad::Var g = ad::softmax(ad::concat(scores));
  if (gamma != nullptr) *gamma = g;
  return ad::weighted_sum(g, row_states);
}

WeightedContext weighted_context(const ParamStore& store, const WeightingParams& params,
                                 std::span<const Tensor> row_states) {
  ad::Tape tape;
  std::vector<ad::Var> row;
  row.reserve(row_states.size());
  for (const Tensor& s : row_states) row.push_back(tape.constant(s));
  ad::Var gamma;
  ad::Var t = weighted_context(tape, store, params, row, &gamma);
  return {gamma.value(), t.value()};
}

AttentionParams AttentionParams::create(ParamStore& store, AttentionMode mode,
                                        std::size_t hidden, std::size_t key_dim,
                                        double fertility_cap, Rng& rng) {
  AttentionParams p;
  p.hidden = hidden;
  p.key_dim = key_dim;
  p.mode = mode;
  p.fertility_cap = fertility_cap;
  p.query = store.add("attention.query",
                      uniform_tensor(Shape{hidden, hidden}, init_bound(hidden), rng));
  p.key = store.add("attention.key",
                    uniform_tensor(Shape{hidden, key_dim}, init_bound(key_dim), rng));
  p.score = store.add("attention.score", uniform_tensor(Shape{hidden}, init_bound(hidden), rng));
  if (mode != AttentionMode::kPlain) {
    p.feedback = store.add("attention.feedback",
                           uniform_tensor(Shape{hidden}, init_bound(hidden), rng));
  }
  if (mode == AttentionMode::kFertility) {
    p.fertility = store.add("attention.fertility",
                            uniform_tensor(Shape{key_dim}, init_bound(key_dim), rng));
  }
  return p;
}

AttentionVars bind(ad::Tape& tape, const ParamStore& store, const AttentionParams& params) {
  AttentionVars v;
  v.mode = params.mode;
  v.fertility_cap = params.fertility_cap;
  v.query = tape.param(store, params.query);
  v.key = tape.param(store, params.key);
  v.score = tape.param(store, params.score);
  if (params.mode != AttentionMode::kPlain) v.feedback = tape.param(store, params.feedback);
  if (params.mode == AttentionMode::kFertility) v.fertility = tape.param(store, params.fertility);
  return v;
}

AttentionOutput attention_step(const AttentionVars& params, ad::Var s_prev,
                               std::span<const ad::Var> h, std::span<const ad::Var> keys,
                               ad::Var extra) {
  const std::size_t J = h.size();
  if (J == 0 || keys.size() != J) throw ShapeError("attention_step: encoder/key length mismatch");
  const bool feedback = params.mode != AttentionMode::kPlain;
  if (feedback && (!extra.valid() || extra.value().size() != J)) {
    throw ShapeError("attention_step: feedback input must have one entry per source position");
  }
  ad::Var query = ad::matvec(params.query, s_prev);
  std::vector<ad::Var> energies;
  energies.reserve(J);
  for (std::size_t j = 0; j < J; ++j) {
    ad::Var pre = query + keys[j];
    if (feedback) pre = pre + ad::mul_scalar(params.feedback, ad::pick(extra, j));
    energies.push_back(ad::dot(params.score, ad::tanh(pre)));
  }
  ad::Var alpha = ad::softmax(ad::concat(energies));
  return {alpha, ad::weighted_sum(alpha, h)};
}

ad::Var fertility_denominators(const AttentionVars& params, std::span<const ad::Var> h) {
  std::vector<ad::Var> den;
  den.reserve(h.size());
  for (const ad::Var& hj : h) {
    den.push_back(ad::scale(ad::sigmoid(ad::dot(params.fertility, hj)), params.fertility_cap));
  }
  return ad::concat(den);
}

namespace {

struct ConstEncoder {
  AttentionVars vars;
  std::vector<ad::Var> h;
  std::vector<ad::Var> keys;
};

ConstEncoder const_encoder(ad::Tape& tape, const ParamStore& store,
                           const AttentionParams& params, const EncoderStates& encoder) {
  ConstEncoder e;
  e.vars = bind(tape, store, params);
  for (const Tensor& hj : encoder.h) {
    e.h.push_back(tape.constant(hj));
    e.keys.push_back(ad::matvec(e.vars.key, e.h.back()));
  }
  return e;
}

}  // namespace

AttentionResult attention_step(const ParamStore& store, const AttentionParams& params,
                               const Tensor& s_prev, const EncoderStates& encoder,
                               const Tensor* extra) {
  ad::Tape tape;
  ConstEncoder e = const_encoder(tape, store, params, encoder);
  ad::Var x = extra != nullptr ? tape.constant(*extra) : ad::Var{};
  AttentionOutput out = attention_step(e.vars, tape.constant(s_prev), e.h, e.keys, x);
  return {out.alpha.value(), out.context.value()};
}

Tensor fertility_beta(const ParamStore& store, const AttentionParams& params,
                      const EncoderStates& encoder, const Tensor& alpha_sum) {
  ad::Tape tape;
  ConstEncoder e = const_encoder(tape, store, params, encoder);
  return ad::div(tape.constant(alpha_sum), fertility_denominators(e.vars, e.h)).value();
}

// ---------------------------------------------------------------------------

TranslationModel::TranslationModel(const ModelConfig& config, Rng& rng) : config_(config) {
  if (config.source_vocab < kReservedTokens || config.target_vocab < kReservedTokens) {
    throw ConfigError("vocabularies must hold at least the reserved ids");
  }
  if (config.embed == 0 || config.hidden == 0) {
    throw ConfigError("embedding and hidden sizes must be positive");
  }
  if (!(config.fertility_cap > 0.0)) throw ConfigError("fertility cap must be positive");
  source_embedding_ =
      Embedding::create(params_, "source.embed", config.source_vocab, config.embed, rng);
  target_embedding_ =
      Embedding::create(params_, "target.embed", config.target_vocab, config.embed, rng);
  encoder_.forward = LSTMParams::create(params_, "encoder.fwd", config.embed, config.hidden, rng);
  encoder_.backward =
      LSTMParams::create(params_, "encoder.bwd", config.embed, config.hidden, rng);
}

std::unique_ptr<TranslationModel> TranslationModel::create(const ModelConfig& config,
                                                           std::uint64_t seed) {
  Rng rng(seed);
  if (is_two_dimensional(config.variant)) return std::make_unique<TwoDSeq2Seq>(config, rng);
  return std::make_unique<AttentionSeq2Seq>(config, rng);
}

void TranslationModel::validate_source(std::span<const TokenId> source) const {
  if (source.empty()) throw DataError("empty source sentence");
}

EncoderVars TranslationModel::encode_vars(ad::Tape& tape, std::span<const TokenId> source,
                                          const Dropout& dropout) const {
  validate_source(source);
  std::vector<ad::Var> embedded;
  embedded.reserve(source.size());
  for (TokenId t : source) {
    embedded.push_back(apply_dropout(source_embedding_.lookup(tape, params_, t), dropout));
  }
  EncoderVars enc = gridnmt::encode(tape, params_, encoder_, embedded);
  for (ad::Var& h : enc.h) h = apply_dropout(h, dropout);
  return enc;
}

EncoderStates TranslationModel::encode(std::span<const TokenId> source) const {
  ad::Tape tape;
  EncoderVars vars = encode_vars(tape, source, {});
  EncoderStates out;
  for (const ad::Var& h : vars.h) out.h.push_back(h.value());
  out.backward_final = {vars.backward_final.c.value(), vars.backward_final.s.value()};
  return out;
}

ad::Var TranslationModel::sentence_loss(ad::Tape& tape, std::span<const TokenId> source,
                                        std::span<const TokenId> target,
                                        const Dropout& dropout) const {
  if (target.empty() || target.back() != kEos) {
    throw DataError("training targets must be non-empty and end with EOS");
  }
  std::vector<TokenId> inputs = decoder_inputs(target);
  std::vector<ad::Var> log_probs = forward(tape, source, inputs, dropout);
  std::vector<ad::Var> picked;
  picked.reserve(target.size());
  for (std::size_t i = 0; i < target.size(); ++i) {
    if (target[i] < 0 || static_cast<std::size_t>(target[i]) >= config_.target_vocab) {
      throw DataError("target token id " + std::to_string(target[i]) + " outside vocabulary");
    }
    picked.push_back(ad::pick(log_probs[i], static_cast<std::size_t>(target[i])));
  }
  return ad::scale(ad::add_n(picked), -1.0);
}

std::vector<Tensor> TranslationModel::teacher_forced_log_probs(
    std::span<const TokenId> source, std::span<const TokenId> target) const {
  if (target.empty()) throw DataError("empty target sentence");
  ad::Tape tape;
  std::vector<TokenId> inputs = decoder_inputs(target);
  std::vector<Tensor> out;
  for (const ad::Var& lp : forward(tape, source, inputs, {})) out.push_back(lp.value());
  return out;
}

// ---------------------------------------------------------------------------

namespace {

struct TwoDState : SequenceModel::State {
  std::shared_ptr<const EncoderStates> encoder;
  RowCache cache;
};

}  // namespace

TwoDSeq2Seq::TwoDSeq2Seq(const ModelConfig& config, Rng& rng) : TranslationModel(config, rng) {
  grid_ = TwoDLSTMParams::create(params_, "grid", 2 * config.hidden + config.embed, config.hidden,
                                 rng);
  if (weighted()) weighting_ = WeightingParams::create(params_, config.hidden, rng);
  output_ = OutputLayer::create(params_, config.target_vocab, config.hidden, rng);
}

ad::Var TwoDSeq2Seq::context(ad::Tape& tape, std::span<const ad::Var> row_states) const {
  if (weighted()) return weighted_context(tape, params_, weighting_, row_states);
  return row_states.back();
}

std::vector<ad::Var> TwoDSeq2Seq::forward(ad::Tape& tape, std::span<const TokenId> source,
                                          std::span<const TokenId> target_inputs,
                                          const Dropout& dropout) const {
  EncoderVars enc = encode_vars(tape, source, dropout);
  const std::size_t J = enc.h.size();
  const std::size_t I = target_inputs.size();
  TwoDLSTMVars grid = bind(tape, params_, grid_);
  std::vector<ad::Var> embedded;
  embedded.reserve(I);
  for (TokenId y : target_inputs) {
    embedded.push_back(apply_dropout(target_embedding_.lookup(tape, params_, y), dropout));
  }
  GridInputVars inputs(J);
  for (std::size_t j = 0; j < J; ++j) {
    inputs[j].reserve(I);
    for (std::size_t i = 0; i < I; ++i) inputs[j].push_back(ad::concat({enc.h[j], embedded[i]}));
  }
  GridVars states = grid_workers_ > 1 ? forward_wavefront(grid, inputs, grid_workers_)
                                      : forward_full(grid, inputs);
  std::vector<ad::Var> out;
  out.reserve(I);
  std::vector<ad::Var> row(J);
  for (std::size_t i = 1; i <= I; ++i) {
    for (std::size_t j = 1; j <= J; ++j) row[j - 1] = states.at(j, i).s;
    ad::Var t = apply_dropout(context(tape, row), dropout);
    out.push_back(ad::log_softmax(output_.logits(tape, params_, t)));
  }
  return out;
}

TwoDSeq2Seq::RowStep TwoDSeq2Seq::row_step(const EncoderStates& encoder, TokenId previous,
                                           const RowCache& cache) const {
  const std::size_t J = encoder.h.size();
  if (cache.states.size() != J) throw ShapeError("row cache width differs from source length");
  ad::Tape tape;
  TwoDLSTMVars grid = bind(tape, params_, grid_);
  ad::Var y = target_embedding_.lookup(tape, params_, previous);
  std::vector<CellVars> prev;
  std::vector<ad::Var> xs;
  prev.reserve(J);
  xs.reserve(J);
  for (std::size_t j = 0; j < J; ++j) {
    prev.push_back({tape.constant(cache.states[j].c), tape.constant(cache.states[j].s)});
    xs.push_back(ad::concat({tape.constant(encoder.h[j]), y}));
  }
  std::vector<CellVars> next = extend_row(grid, prev, xs);
  std::vector<ad::Var> row;
  row.reserve(J);
  RowStep out;
  out.cache.row = cache.row + 1;
  for (const CellVars& cell : next) {
    row.push_back(cell.s);
    out.cache.states.push_back({cell.c.value(), cell.s.value()});
  }
  ad::Var t = context(tape, row);
  ad::Var logits = output_.logits(tape, params_, t);
  out.context = t.value();
  out.probs = ad::softmax(logits).value();
  out.log_probs = ad::log_softmax(logits).value();
  return out;
}

Tensor TwoDSeq2Seq::recompute_log_probs(std::span<const TokenId> source,
                                        std::span<const TokenId> prefix) const {
  std::vector<TokenId> inputs;
  inputs.push_back(kBos);
  inputs.insert(inputs.end(), prefix.begin(), prefix.end());
  ad::Tape tape;
  return forward(tape, source, inputs, {}).back().value();
}

SequenceModel::StatePtr TwoDSeq2Seq::begin(std::span<const TokenId> source) const {
  auto state = std::make_shared<TwoDState>();
  state->encoder = std::make_shared<const EncoderStates>(encode(source));
  state->cache = RowCache::empty(source.size(), config_.hidden);
  return state;
}

SequenceModel::Step TwoDSeq2Seq::step(const State& state, TokenId previous) const {
  const auto& s = dynamic_cast<const TwoDState&>(state);
  RowStep r = row_step(*s.encoder, previous, s.cache);
  auto next = std::make_shared<TwoDState>();
  next->encoder = s.encoder;
  next->cache = std::move(r.cache);
  return {std::move(r.log_probs), std::move(next)};
}

// ---------------------------------------------------------------------------

struct AttentionSeq2Seq::Keys {
  AttentionVars attention;
  LSTMVars decoder;
  std::vector<ad::Var> h;
  std::vector<ad::Var> keys;
  ad::Var denominators;
};

struct AttentionSeq2Seq::Carry {
  CellVars state;
  ad::Var context;
  ad::Var alpha_prev;
  ad::Var alpha_sum;
};

namespace {

AttentionMode mode_of(Variant variant) {
  switch (variant) {
    case Variant::kCoverage: return AttentionMode::kCoverage;
    case Variant::kFertility: return AttentionMode::kFertility;
    default: return AttentionMode::kPlain;
  }
}

struct AttentionDecodeState : SequenceModel::State {
  std::vector<Tensor> h;
  std::vector<Tensor> keys;
  Tensor denominators;
  CellState state;
  Tensor context;
  Tensor alpha_prev;
  Tensor alpha_sum;
};

}  // namespace

AttentionSeq2Seq::AttentionSeq2Seq(const ModelConfig& config, Rng& rng)
    : TranslationModel(config, rng) {
  const std::size_t n = config.hidden;
  attention_ = AttentionParams::create(params_, mode_of(config.variant), n, 2 * n,
                                       config.fertility_cap, rng);
  decoder_ = LSTMParams::create(params_, "decoder", config.embed + 2 * n, n, rng);
  output_ = OutputLayer::create(params_, config.target_vocab, 3 * n, rng);
}

AttentionSeq2Seq::Keys AttentionSeq2Seq::make_keys(ad::Tape& tape, std::vector<ad::Var> h) const {
  Keys k;
  k.attention = bind(tape, params_, attention_);
  k.decoder = bind(tape, params_, decoder_);
  k.h = std::move(h);
  k.keys.reserve(k.h.size());
  for (const ad::Var& hj : k.h) k.keys.push_back(ad::matvec(k.attention.key, hj));
  if (attention_.mode == AttentionMode::kFertility) {
    k.denominators = fertility_denominators(k.attention, k.h);
  }
  return k;
}

AttentionSeq2Seq::Carry AttentionSeq2Seq::decode_step(ad::Tape& tape, const Keys& keys,
                                                      const Carry& carry, ad::Var embedded,
                                                      const Dropout& dropout,
                                                      ad::Var* log_probs) const {
  ad::Var extra;
  if (attention_.mode == AttentionMode::kCoverage) extra = carry.alpha_prev;
  if (attention_.mode == AttentionMode::kFertility) {
    extra = ad::div(carry.alpha_sum, keys.denominators);
  }
  AttentionOutput att = attention_step(keys.attention, carry.state.s, keys.h, keys.keys, extra);
  Carry next;
  next.state = lstm_step(keys.decoder, ad::concat({embedded, carry.context}), carry.state);
  next.context = att.context;
  next.alpha_prev = att.alpha;
  next.alpha_sum = attention_.mode == AttentionMode::kFertility ? carry.alpha_sum + att.alpha
                                                                : carry.alpha_sum;
  ad::Var readout = apply_dropout(ad::concat({next.state.s, att.context}), dropout);
  *log_probs = ad::log_softmax(output_.logits(tape, params_, readout));
  return next;
}

std::vector<ad::Var> AttentionSeq2Seq::run(ad::Tape& tape, std::span<const TokenId> source,
                                           std::span<const TokenId> target_inputs,
                                           const Dropout& dropout,
                                           std::vector<ad::Var>* alignments) const {
  EncoderVars enc = encode_vars(tape, source, dropout);
  const std::size_t J = enc.h.size();
  const std::size_t n = config_.hidden;
  Keys keys = make_keys(tape, std::move(enc.h));
  Carry carry;
  carry.state = enc.backward_final;
  carry.context = tape.constant(Tensor::zeros(Shape{2 * n}));
  carry.alpha_prev = tape.constant(Tensor::zeros(Shape{J}));
  carry.alpha_sum = carry.alpha_prev;
  std::vector<ad::Var> out;
  out.reserve(target_inputs.size());
  for (TokenId y : target_inputs) {
    ad::Var e = apply_dropout(target_embedding_.lookup(tape, params_, y), dropout);
    ad::Var lp;
    carry = decode_step(tape, keys, carry, e, dropout, &lp);
    out.push_back(lp);
    if (alignments != nullptr) alignments->push_back(carry.alpha_prev);
  }
  return out;
}

std::vector<ad::Var> AttentionSeq2Seq::forward(ad::Tape& tape, std::span<const TokenId> source,
                                               std::span<const TokenId> target_inputs,
                                               const Dropout& dropout) const {
  return run(tape, source, target_inputs, dropout, nullptr);
}

std::vector<Tensor> AttentionSeq2Seq::teacher_forced_alignments(
    std::span<const TokenId> source, std::span<const TokenId> target) const {
  if (target.empty()) throw DataError("empty target sentence");
  ad::Tape tape;
  std::vector<TokenId> inputs = decoder_inputs(target);
  std::vector<ad::Var> alignments;
  run(tape, source, inputs, {}, &alignments);
  std::vector<Tensor> out;
  for (const ad::Var& a : alignments) out.push_back(a.value());
  return out;
}

SequenceModel::StatePtr AttentionSeq2Seq::begin(std::span<const TokenId> source) const {
  EncoderStates enc = encode(source);
  const std::size_t J = enc.h.size();
  ad::Tape tape;
  std::vector<ad::Var> h;
  for (const Tensor& hj : enc.h) h.push_back(tape.constant(hj));
  Keys keys = make_keys(tape, std::move(h));
  auto state = std::make_shared<AttentionDecodeState>();
  state->h = std::move(enc.h);
  for (const ad::Var& k : keys.keys) state->keys.push_back(k.value());
  if (keys.denominators.valid()) state->denominators = keys.denominators.value();
  state->state = enc.backward_final;
  state->context = Tensor::zeros(Shape{2 * config_.hidden});
  state->alpha_prev = Tensor::zeros(Shape{J});
  state->alpha_sum = state->alpha_prev;
  return state;
}

SequenceModel::Step AttentionSeq2Seq::step(const State& state, TokenId previous) const {
  const auto& s = dynamic_cast<const AttentionDecodeState&>(state);
  ad::Tape tape;
  Keys keys;
  keys.attention = bind(tape, params_, attention_);
  keys.decoder = bind(tape, params_, decoder_);
  for (std::size_t j = 0; j < s.h.size(); ++j) {
    keys.h.push_back(tape.constant(s.h[j]));
    keys.keys.push_back(tape.constant(s.keys[j]));
  }
  if (!s.denominators.empty()) keys.denominators = tape.constant(s.denominators);
  Carry carry{{tape.constant(s.state.c), tape.constant(s.state.s)},
              tape.constant(s.context),
              tape.constant(s.alpha_prev),
              tape.constant(s.alpha_sum)};
  ad::Var lp;
  Carry next =
      decode_step(tape, keys, carry, target_embedding_.lookup(tape, params_, previous), {}, &lp);
  auto out = std::make_shared<AttentionDecodeState>(s);
  out->state = {next.state.c.value(), next.state.s.value()};
  out->context = next.context.value();
  out->alpha_prev = next.alpha_prev.value();
  out->alpha_sum = next.alpha_sum.value();
  return {lp.value(), std::move(out)};
}

}  // namespace gridnmt
