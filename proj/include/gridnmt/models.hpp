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
#include <cstdint>
#include <memory>
#include <span>
#include <string_view>
#include <vector>

#include "gridnmt/autodiff.hpp"
#include "gridnmt/cells.hpp"
#include "gridnmt/data.hpp"
#include "gridnmt/grid.hpp"
#include "gridnmt/rng.hpp"
#include "gridnmt/tensor.hpp"

namespace gridnmt {

enum class Variant { kAttention, kTwoD, kTwoDWeighted, kCoverage, kFertility };

inline constexpr std::array<Variant, 5> kAllVariants = {
    Variant::kAttention, Variant::kTwoD, Variant::kTwoDWeighted, Variant::kCoverage,
    Variant::kFertility};

std::string_view to_string(Variant variant);
Variant parse_variant(std::string_view name);
bool is_two_dimensional(Variant variant);

struct ModelConfig {
  Variant variant = Variant::kTwoD;
  std::size_t source_vocab = 0;
  std::size_t target_vocab = 0;
  std::size_t embed = 32;
  std::size_t hidden = 32;
  double fertility_cap = 2.0;  // N
};

// Inverted dropout on non-recurrent inputs; inactive when rate is 0 or no
// generator is attached (evaluation).
struct Dropout {
  double rate = 0.0;
  Rng* rng = nullptr;

  bool active() const { return rate > 0.0 && rng != nullptr; }
};

ad::Var apply_dropout(ad::Var x, const Dropout& dropout);

struct Embedding {
  ParamId table = 0;
  std::size_t vocab = 0;
  std::size_t dim = 0;

  static Embedding create(ParamStore& store, const std::string& name, std::size_t vocab,
                          std::size_t dim, Rng& rng);
  ad::Var lookup(ad::Tape& tape, const ParamStore& store, TokenId id) const;
};

// Bidirectional LSTM pre-encoder; h_j = [forward_j ; backward_j].
struct EncoderParams {
  LSTMParams forward;
  LSTMParams backward;
};

struct EncoderVars {
  std::vector<ad::Var> h;
  CellVars backward_final;  // state after the right-to-left scan reached j = 1
};

struct EncoderStates {
  std::vector<Tensor> h;
  CellState backward_final;
};

EncoderVars encode(ad::Tape& tape, const ParamStore& store, const EncoderParams& params,
                   std::span<const ad::Var> embedded);

struct OutputLayer {
  ParamId w = 0;
  ParamId b = 0;
  std::size_t vocab = 0;
  std::size_t input = 0;

  static OutputLayer create(ParamStore& store, std::size_t vocab, std::size_t input, Rng& rng);
  ad::Var logits(ad::Tape& tape, const ParamStore& store, ad::Var context) const;
};

// gamma_j = softmax_j(v . tanh(W s_j)), t = sum_j gamma_j s_j.
struct WeightingParams {
  ParamId w = 0;
  ParamId v = 0;
  std::size_t hidden = 0;

  static WeightingParams create(ParamStore& store, std::size_t hidden, Rng& rng);
};

struct WeightedContext {
  Tensor gamma;
  Tensor context;
};

ad::Var weighted_context(ad::Tape& tape, const ParamStore& store, const WeightingParams& params,
                         std::span<const ad::Var> row_states, ad::Var* gamma = nullptr);
WeightedContext weighted_context(const ParamStore& store, const WeightingParams& params,
                                 std::span<const Tensor> row_states);

enum class AttentionMode { kPlain, kCoverage, kFertility };

// Additive attention e_j = v . tanh(Wq s + Wk h_j [+ w_fb * extra_j]). The
// feedback term reads the previous alignment (coverage) or the accumulated
// alignment divided by the fertility N * sigmoid(u . h_j) (fertility).
struct AttentionParams {
  ParamId query = 0;
  ParamId key = 0;
  ParamId score = 0;
  ParamId feedback = 0;   // coverage and fertility only
  ParamId fertility = 0;  // fertility only
  std::size_t hidden = 0;
  std::size_t key_dim = 0;
  AttentionMode mode = AttentionMode::kPlain;
  double fertility_cap = 2.0;

  static AttentionParams create(ParamStore& store, AttentionMode mode, std::size_t hidden,
                                std::size_t key_dim, double fertility_cap, Rng& rng);
};

struct AttentionVars {
  ad::Var query, key, score, feedback, fertility;
  AttentionMode mode = AttentionMode::kPlain;
  double fertility_cap = 2.0;
};

AttentionVars bind(ad::Tape& tape, const ParamStore& store, const AttentionParams& params);

struct AttentionOutput {
  ad::Var alpha;
  ad::Var context;
};

// `keys` are Wk h_j. `extra` is unused in plain mode, the previous
// alignment in coverage mode and beta in fertility mode.
AttentionOutput attention_step(const AttentionVars& params, ad::Var s_prev,
                               std::span<const ad::Var> h, std::span<const ad::Var> keys,
                               ad::Var extra);
// N * sigmoid(u . h_j) for every j, as a [J] vector.
ad::Var fertility_denominators(const AttentionVars& params, std::span<const ad::Var> h);

struct AttentionResult {
  Tensor alpha;
  Tensor context;
};

AttentionResult attention_step(const ParamStore& store, const AttentionParams& params,
                               const Tensor& s_prev, const EncoderStates& encoder,
                               const Tensor* extra);
// beta_j = alpha_sum_j / (N * sigmoid(u . h_j)).
Tensor fertility_beta(const ParamStore& store, const AttentionParams& params,
                      const EncoderStates& encoder, const Tensor& alpha_sum);

// Incremental decoding interface used by beam search.
class SequenceModel {
 public:
  struct State {
    virtual ~State() = default;
  };
  using StatePtr = std::shared_ptr<const State>;

  struct Step {
    Tensor log_probs;
    StatePtr next;
  };

  virtual ~SequenceModel() = default;
  virtual std::size_t target_vocab_size() const = 0;
  virtual StatePtr begin(std::span<const TokenId> source) const = 0;
  virtual Step step(const State& state, TokenId previous) const = 0;
};

class TranslationModel : public SequenceModel {
 public:
  static std::unique_ptr<TranslationModel> create(const ModelConfig& config, std::uint64_t seed);

  const ModelConfig& config() const { return config_; }
  ParamStore& params() { return params_; }
  const ParamStore& params() const { return params_; }
  std::size_t target_vocab_size() const override { return config_.target_vocab; }

  // -sum_i log p(y_i | y_<i, source) under teacher forcing. The target must
  // be non-empty and end with EOS.
  ad::Var sentence_loss(ad::Tape& tape, std::span<const TokenId> source,
                        std::span<const TokenId> target, const Dropout& dropout = {}) const;

  // Per-position log-distributions computed along the training path.
  std::vector<Tensor> teacher_forced_log_probs(std::span<const TokenId> source,
                                               std::span<const TokenId> target) const;

  EncoderStates encode(std::span<const TokenId> source) const;

  const Embedding& source_embedding() const { return source_embedding_; }
  const Embedding& target_embedding() const { return target_embedding_; }
  const EncoderParams& encoder() const { return encoder_; }
  const OutputLayer& output() const { return output_; }

 protected:
  TranslationModel(const ModelConfig& config, Rng& rng);

  // Log-softmax outputs for every target position; inputs are BOS, y_1, ...
  virtual std::vector<ad::Var> forward(ad::Tape& tape, std::span<const TokenId> source,
                                       std::span<const TokenId> target_inputs,
                                       const Dropout& dropout) const = 0;

  EncoderVars encode_vars(ad::Tape& tape, std::span<const TokenId> source,
                          const Dropout& dropout) const;
  void validate_source(std::span<const TokenId> source) const;

  ModelConfig config_;
  ParamStore params_;
  Embedding source_embedding_;
  Embedding target_embedding_;
  EncoderParams encoder_;
  OutputLayer output_;
};

// Source axis encodes, target axis decodes; the context at target step i is
// s(J, i), or the weighted sum of row i in the weighting variant.
class TwoDSeq2Seq : public TranslationModel {
 public:
  TwoDSeq2Seq(const ModelConfig& config, Rng& rng);

  struct RowStep {
    Tensor context;
    Tensor probs;
    Tensor log_probs;
    RowCache cache;
  };

  // One decoder row: x_j = [h_j ; embed(previous)], extend the cached row,
  // read the context, apply the output layer.
  RowStep row_step(const EncoderStates& encoder, TokenId previous, const RowCache& cache) const;

  // Decoding distributions from a from-scratch grid over the whole prefix
  // (O(J * i) per step); the reference for the cached path.
  Tensor recompute_log_probs(std::span<const TokenId> source,
                             std::span<const TokenId> prefix) const;

  StatePtr begin(std::span<const TokenId> source) const override;
  Step step(const State& state, TokenId previous) const override;

  const TwoDLSTMParams& grid() const { return grid_; }
  bool weighted() const { return config_.variant == Variant::kTwoDWeighted; }
  const WeightingParams& weighting() const { return weighting_; }

  // Training-time grid evaluation uses the wavefront scheduler when > 1.
  void set_grid_workers(std::size_t workers) { grid_workers_ = workers; }

 protected:
  std::vector<ad::Var> forward(ad::Tape& tape, std::span<const TokenId> source,
                               std::span<const TokenId> target_inputs,
                               const Dropout& dropout) const override;

 private:
  ad::Var context(ad::Tape& tape, std::span<const ad::Var> row_states) const;

  TwoDLSTMParams grid_;
  WeightingParams weighting_;
  std::size_t grid_workers_ = 1;
};

// Bidirectional encoder, unidirectional LSTM decoder with additive
// attention. Decoder input at step i is [embed(y_{i-1}) ; context_{i-1}];
// the output layer reads [s_i ; context_i].
class AttentionSeq2Seq : public TranslationModel {
 public:
  AttentionSeq2Seq(const ModelConfig& config, Rng& rng);

  StatePtr begin(std::span<const TokenId> source) const override;
  Step step(const State& state, TokenId previous) const override;

  const AttentionParams& attention() const { return attention_; }
  const LSTMParams& decoder() const { return decoder_; }

  // Alignments under teacher forcing, one [J] vector per target position.
  std::vector<Tensor> teacher_forced_alignments(std::span<const TokenId> source,
                                                std::span<const TokenId> target) const;

 protected:
  std::vector<ad::Var> forward(ad::Tape& tape, std::span<const TokenId> source,
                               std::span<const TokenId> target_inputs,
                               const Dropout& dropout) const override;

 private:
  struct Keys;
  struct Carry;
  std::vector<ad::Var> run(ad::Tape& tape, std::span<const TokenId> source,
                           std::span<const TokenId> target_inputs, const Dropout& dropout,
                           std::vector<ad::Var>* alignments) const;
  Keys make_keys(ad::Tape& tape, std::vector<ad::Var> h) const;
  Carry decode_step(ad::Tape& tape, const Keys& keys, const Carry& carry, ad::Var embedded,
                    const Dropout& dropout, ad::Var* log_probs) const;

  AttentionParams attention_;
  LSTMParams decoder_;
};

}  // namespace gridnmt
