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

#include "gridnmt/training.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>

#include <json.hpp>

#include "gridnmt/error.hpp"
#include "gridnmt/metrics.hpp"

namespace gridnmt {

Adam::Adam(const ParamStore& store, AdamConfig config) : config_(config) {
  for (ParamId id = 0; id < store.size(); ++id) {
    m_.emplace_back(store.value(id).size(), 0.0);
    v_.emplace_back(store.value(id).size(), 0.0);
  }
}

void Adam::step(ParamStore& store, const GradBuffer& grads) {
  if (grads.size() != m_.size() || store.size() != m_.size()) {
    throw ShapeError("Adam: gradient buffer does not match the parameter store");
  }
  for (ParamId id = 0; id < grads.size(); ++id) {
    for (double g : grads[id]) {
      if (!std::isfinite(g)) {
        throw NumericError("non-finite gradient for parameter '" + store.name(id) +
                           "'; optimizer step skipped");
      }
    }
  }
  ++t_;
  const double b1 = config_.beta1;
  const double b2 = config_.beta2;
  const double correction1 = 1.0 - std::pow(b1, static_cast<double>(t_));
  const double correction2 = 1.0 - std::pow(b2, static_cast<double>(t_));
  for (ParamId id = 0; id < grads.size(); ++id) {
    std::span<const double> g = grads[id];
    std::vector<double>& m = m_[id];
    std::vector<double>& v = v_[id];
    std::vector<double> p = store.value(id).to_vector();
    for (std::size_t k = 0; k < p.size(); ++k) {
      m[k] = b1 * m[k] + (1.0 - b1) * g[k];
      v[k] = b2 * v[k] + (1.0 - b2) * (g[k] * g[k]);
      const double m_hat = m[k] / correction1;
      const double v_hat = v[k] / correction2;
      p[k] -= config_.lr * m_hat / (std::sqrt(v_hat) + config_.epsilon);
    }
    store.set(id, Tensor(store.value(id).shape(), std::move(p)));
  }
}

double global_norm(const GradBuffer& grads) {
  double sq = 0.0;
  for (std::size_t id = 0; id < grads.size(); ++id) {
    for (double g : grads[id]) sq += g * g;
  }
  return std::sqrt(sq);
}

double clip_global_norm(GradBuffer& grads, double threshold) {
  const double norm = global_norm(grads);
  if (!std::isfinite(norm)) throw NumericError("non-finite gradient norm");
  if (norm > threshold) grads.scale(threshold / norm);
  return norm;
}

Checkpoint average_checkpoints(std::span<const Checkpoint> checkpoints) {
  if (checkpoints.empty()) throw DataError("nothing to average");
  const Checkpoint& first = checkpoints.front();
  for (const Checkpoint& c : checkpoints) {
    if (c.names != first.names) throw DataError("cannot average checkpoints of different models");
    for (std::size_t k = 0; k < c.tensors.size(); ++k) {
      if (!(c.tensors[k].shape() == first.tensors[k].shape())) {
        throw DataError("shape mismatch for parameter '" + c.names[k] + "' while averaging");
      }
    }
    if (c.meta.config_hash != first.meta.config_hash) {
      throw DataError("cannot average checkpoints with different config hashes");
    }
  }
  Checkpoint out;
  out.meta = first.meta;
  out.dtype = first.dtype;
  out.names = first.names;
  const long double count = static_cast<long double>(checkpoints.size());
  for (std::size_t k = 0; k < first.tensors.size(); ++k) {
    std::vector<double> mean(first.tensors[k].size());
    for (std::size_t e = 0; e < mean.size(); ++e) {
      long double total = 0.0L;
      for (const Checkpoint& c : checkpoints) total += c.tensors[k][e];
      mean[e] = static_cast<double>(total / count);
    }
    out.tensors.emplace_back(first.tensors[k].shape(), std::move(mean));
  }
  return out;
}

std::vector<std::vector<std::size_t>> make_batches(std::span<const IdPair> data,
                                                   std::size_t batch_size, Rng& rng) {
  if (batch_size == 0) throw ConfigError("batch size must be positive");
  std::vector<std::size_t> order(data.size());
  for (std::size_t k = 0; k < order.size(); ++k) order[k] = k;
  rng.shuffle(order);
  const std::size_t window = batch_size * 20;
  std::vector<std::vector<std::size_t>> batches;
  auto at = [&](std::size_t k) { return order.begin() + static_cast<std::ptrdiff_t>(k); };
  for (std::size_t start = 0; start < order.size(); start += window) {
    const std::size_t stop = std::min(start + window, order.size());
    std::stable_sort(at(start), at(stop), [&](std::size_t a, std::size_t b) {
      return data[a].source.size() < data[b].source.size();
    });
    for (std::size_t b = start; b < stop; b += batch_size) {
      batches.emplace_back(at(b), at(std::min(b + batch_size, stop)));
    }
  }
  rng.shuffle(batches);
  return batches;
}

BatchGradient batch_gradient(const TranslationModel& model, std::span<const IdPair> data,
                             std::span<const std::size_t> batch, double dropout,
                             std::uint64_t seed, std::uint64_t step, WorkerPool& pool) {
  std::vector<GradBuffer> grads(batch.size());
  std::vector<double> nll(batch.size());
  const std::uint64_t step_seed = Rng::mix(Rng::mix(seed, 0x64726f70ULL), step);
  pool.parallel_for(batch.size(), [&](std::size_t k) {
    const IdPair& pair = data[batch[k]];
    Rng rng(Rng::mix(step_seed, batch[k]));
    const Dropout drop{dropout, &rng};
    ad::Tape tape;
    ad::Var loss = model.sentence_loss(tape, pair.source, pair.target, drop);
    nll[k] = loss.value()[0];
    grads[k] = GradBuffer(model.params());
    tape.backward(loss, grads[k]);
  });
  BatchGradient out;
  out.grads = GradBuffer(model.params());
  for (std::size_t k = 0; k < batch.size(); ++k) {
    out.grads.add(grads[k]);
    out.nll += nll[k];
    out.tokens += data[batch[k]].target.size();
  }
  return out;
}

std::string to_json_line(const MetricRecord& record) {
  nlohmann::ordered_json j;
  j["step"] = record.step;
  j["train_nll"] = record.train_nll;
  j["dev_ppl"] = record.dev_ppl;
  j["wall_time"] = record.wall_time;
  return j.dump();
}

namespace {

bool better(const Checkpoint& a, const Checkpoint& b) {
  if (a.meta.dev_ppl != b.meta.dev_ppl) return a.meta.dev_ppl < b.meta.dev_ppl;
  return a.meta.step < b.meta.step;
}

std::filesystem::path checkpoint_path(const std::filesystem::path& dir, std::uint64_t step) {
  return dir / ("ckpt-" + std::to_string(step) + ".ckpt");
}

}  // namespace

TrainResult train_loop(TranslationModel& model, std::span<const IdPair> train,
                       std::span<const IdPair> dev, const TrainOptions& options) {
  const RunConfig& config = options.config;
  validate(config);
  if (train.empty()) throw DataError("training corpus is empty after filtering");
  if (dev.empty()) throw DataError("dev corpus is empty after filtering");

  const auto start = std::chrono::steady_clock::now();
  const std::string hash = config_hash(config);
  const bool write = !options.out_dir.empty();
  std::ofstream metrics_file;
  if (write) {
    std::filesystem::create_directories(options.out_dir);
    metrics_file.open(options.out_dir / "metrics.jsonl", std::ios::trunc);
    if (!metrics_file) {
      throw DataError("cannot write " + (options.out_dir / "metrics.jsonl").string());
    }
  }

  WorkerPool pool(config.workers);
  Adam adam(model.params(), {config.learning_rate(), 0.9, 0.999, 1e-8});
  TrainResult result;
  std::uint64_t step = 0;
  double window_nll = 0.0;
  std::size_t window_tokens = 0;

  auto evaluate = [&]() {
    MetricRecord record;
    record.step = step;
    record.train_nll = window_tokens == 0 ? 0.0 : window_nll / static_cast<double>(window_tokens);
    record.dev_ppl = perplexity(model, dev, config.workers).perplexity;
    if (config.log_wall_time) {
      record.wall_time =
          std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    }
    window_nll = 0.0;
    window_tokens = 0;
    result.metrics.push_back(record);
    if (write) metrics_file << to_json_line(record) << '\n' << std::flush;
    if (options.on_record) options.on_record(record);

    Checkpoint ckpt = Checkpoint::capture(model.params(), {step, record.dev_ppl, hash},
                                          config.checkpoint_dtype);
    if (config.checkpoint_dtype == DType::kF32) ckpt = parse_checkpoint(serialize_checkpoint(ckpt));
    auto& best = result.best;
    if (best.size() >= config.keep_best && !better(ckpt, best.back())) return;
    if (write) save_checkpoint(ckpt, checkpoint_path(options.out_dir, step));
    best.insert(std::upper_bound(best.begin(), best.end(), ckpt, better), std::move(ckpt));
    if (best.size() > config.keep_best) {
      if (write) std::filesystem::remove(checkpoint_path(options.out_dir, best.back().meta.step));
      best.pop_back();
    }
  };

  const std::size_t evals = config.evals_per_epoch;
  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    Rng shuffle_rng(Rng::mix(Rng::mix(config.seed, 0x73687566ULL), epoch));
    const auto batches = make_batches(train, config.batch, shuffle_rng);
    const std::size_t nb = batches.size();
    for (std::size_t b = 0; b < nb; ++b) {
      BatchGradient g = batch_gradient(model, train, batches[b], config.dropout, config.seed,
                                       step, pool);
      if (!std::isfinite(g.nll)) {
        throw NumericError("non-finite training loss at step " + std::to_string(step));
      }
      g.grads.scale(1.0 / static_cast<double>(g.tokens));
      clip_global_norm(g.grads, config.clip);
      adam.step(model.params(), g.grads);
      ++step;
      window_nll += g.nll;
      window_tokens += g.tokens;
      if (((b + 1) * evals) / nb != (b * evals) / nb) evaluate();
    }
  }

  result.steps = step;
  result.average = average_checkpoints(result.best);
  result.average.restore(model.params());
  result.average_dev_ppl = perplexity(model, dev, config.workers).perplexity;
  result.average.meta = {step, result.average_dev_ppl, hash};
  if (write) save_checkpoint(result.average, options.out_dir / "avg.ckpt");
  return result;
}

}  // namespace gridnmt
