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
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "gridnmt/autodiff.hpp"
#include "gridnmt/checkpoint.hpp"
#include "gridnmt/config.hpp"
#include "gridnmt/data.hpp"
#include "gridnmt/models.hpp"
#include "gridnmt/parallel.hpp"
#include "gridnmt/rng.hpp"

namespace gridnmt {

struct AdamConfig {
  double lr = 0.001;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

// Bias-corrected Adam with one first/second moment per parameter scalar.
class Adam {
 public:
  Adam(const ParamStore& store, AdamConfig config);

  // Throws NumericError, leaving parameters and moments untouched, if any
  // gradient is NaN or infinite.
  void step(ParamStore& store, const GradBuffer& grads);

  std::uint64_t steps() const { return t_; }
  const AdamConfig& config() const { return config_; }
  std::span<const double> first_moment(ParamId id) const { return m_.at(id); }
  std::span<const double> second_moment(ParamId id) const { return v_.at(id); }

 private:
  AdamConfig config_;
  std::uint64_t t_ = 0;
  std::vector<std::vector<double>> m_;
  std::vector<std::vector<double>> v_;
};

// L2 norm over every scalar of every gradient, in parameter order.
double global_norm(const GradBuffer& grads);

// Scales all gradients by threshold / norm when the global norm exceeds
// the threshold. Returns the norm before clipping.
double clip_global_norm(GradBuffer& grads, double threshold = 1.0);

// Element-wise mean, accumulated in long double in the given order. Names
// and shapes must agree; metadata and dtype come from the first checkpoint.
Checkpoint average_checkpoints(std::span<const Checkpoint> checkpoints);

// Shuffles, sorts by source length inside windows of 20 batches, cuts into
// batches and shuffles the batch order.
std::vector<std::vector<std::size_t>> make_batches(std::span<const IdPair> data,
                                                   std::size_t batch_size, Rng& rng);

struct BatchGradient {
  GradBuffer grads;  // summed over sentences, not yet normalised
  double nll = 0.0;
  std::size_t tokens = 0;
};

// Per-sentence tapes evaluated on the pool; gradients merged in batch order
// so the result is independent of the worker count. Dropout for sentence k
// draws from a generator seeded with (seed, step, k).
BatchGradient batch_gradient(const TranslationModel& model, std::span<const IdPair> data,
                             std::span<const std::size_t> batch, double dropout,
                             std::uint64_t seed, std::uint64_t step, WorkerPool& pool);

struct MetricRecord {
  std::uint64_t step = 0;
  double train_nll = 0.0;  // mean per target token since the previous record
  double dev_ppl = 0.0;
  double wall_time = 0.0;  // seconds since start; 0 when wall time logging is off
};

std::string to_json_line(const MetricRecord& record);

struct TrainOptions {
  RunConfig config;
  // When set, receives ckpt-<step>.ckpt for the retained checkpoints,
  // avg.ckpt and metrics.jsonl.
  std::filesystem::path out_dir;
  std::function<void(const MetricRecord&)> on_record;
};

struct TrainResult {
  std::vector<MetricRecord> metrics;
  std::vector<Checkpoint> best;  // ascending dev perplexity
  Checkpoint average;
  double average_dev_ppl = 0.0;
  std::uint64_t steps = 0;
};

// Trains for config.epochs epochs, evaluating dev perplexity
// config.evals_per_epoch times per epoch and keeping the config.keep_best
// best checkpoints. The model ends up holding their average.
TrainResult train_loop(TranslationModel& model, std::span<const IdPair> train,
                       std::span<const IdPair> dev, const TrainOptions& options);

}  // namespace gridnmt
