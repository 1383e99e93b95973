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
#include <optional>
#include <string>
#include <string_view>

#include "gridnmt/data.hpp"
#include "gridnmt/models.hpp"

namespace gridnmt {

enum class DType { kF64, kF32 };

std::string_view to_string(DType dtype);
DType parse_dtype(std::string_view name);

// Everything a training run needs. Text form: one key=value per line, '#'
// starts a comment, unknown keys are rejected.
struct RunConfig {
  Variant variant = Variant::kTwoD;
  std::size_t hidden = 32;
  std::size_t embed = 32;
  std::optional<double> lr;  // defaults per variant, see learning_rate()
  std::size_t beam = 12;
  std::size_t batch = 50;
  double dropout = 0.3;
  double clip = 1.0;
  std::uint64_t seed = 1;
  std::size_t epochs = 20;
  std::size_t max_tokens = 50;   // length filter, both sides
  std::size_t vocab_limit = 30000;  // per side, reserved ids included
  std::size_t keep_best = 4;
  std::size_t evals_per_epoch = 2;
  std::size_t decode_max_len = 0;  // 0: 2 * J + 10
  double fertility_cap = 2.0;
  DType checkpoint_dtype = DType::kF64;

  // Either corpus prefixes (<prefix>.src / <prefix>.tgt) ...
  std::string train;
  std::string dev;
  // ... or a synthetic task generated in memory.
  std::optional<Task> task;
  std::size_t task_vocab = 16;
  std::size_t task_min_length = 3;
  std::size_t task_max_length = 10;
  std::size_t train_samples = 5000;
  std::size_t dev_samples = 500;
  std::uint64_t task_seed = 1;

  // Runtime-only: excluded from the config hash.
  std::size_t workers = 1;
  bool log_wall_time = true;

  double learning_rate() const;
  ModelConfig model_config(std::size_t source_vocab, std::size_t target_vocab) const;
};

// 0.0005 for the two-dimensional models, 0.001 for the attention family.
double default_learning_rate(Variant variant);

// Relative corpus paths are resolved against base_dir when it is non-empty.
RunConfig parse_config_text(std::string_view text, const std::filesystem::path& base_dir = {});
RunConfig parse_config(const std::filesystem::path& path);

// Applies one key=value assignment (config line or command-line override).
void set_config_value(RunConfig& config, std::string_view key, std::string_view value);
bool is_config_key(std::string_view key);

void validate(const RunConfig& config);

// Canonical text listing every key with its effective value.
std::string serialize_config(const RunConfig& config);

// 16 hex digits of FNV-1a over the canonical text minus runtime-only keys.
std::string config_hash(const RunConfig& config);

// Shortest decimal text that parses back to the same double.
std::string format_double(double value);
double parse_double(std::string_view text, std::string_view what);
std::uint64_t parse_unsigned(std::string_view text, std::string_view what);

}  // namespace gridnmt
