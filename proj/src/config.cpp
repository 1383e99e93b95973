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

#include "gridnmt/config.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

#include "gridnmt/error.hpp"

namespace gridnmt {

std::string_view to_string(DType dtype) { return dtype == DType::kF32 ? "f32" : "f64"; }

DType parse_dtype(std::string_view name) {
  if (name == "f64") return DType::kF64;
  if (name == "f32") return DType::kF32;
  throw ConfigError("unknown dtype '" + std::string(name) + "' (expected f64 or f32)");
}

std::string format_double(double value) {
  char buf[64];
  auto [end, ec] = std::to_chars(buf, buf + sizeof buf, value);
  if (ec != std::errc()) throw NumericError("cannot format value");
  return std::string(buf, end);
}

double parse_double(std::string_view text, std::string_view what) {
  double value = 0.0;
  auto [end, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (ec != std::errc() || end != text.data() + text.size() || !std::isfinite(value)) {
    throw ConfigError(std::string(what) + ": expected a finite number, got '" +
                      std::string(text) + "'");
  }
  return value;
}

std::uint64_t parse_unsigned(std::string_view text, std::string_view what) {
  std::uint64_t value = 0;
  auto [end, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (ec != std::errc() || end != text.data() + text.size()) {
    throw ConfigError(std::string(what) + ": expected a non-negative integer, got '" +
                      std::string(text) + "'");
  }
  return value;
}

double default_learning_rate(Variant variant) {
  return is_two_dimensional(variant) ? 0.0005 : 0.001;
}

double RunConfig::learning_rate() const { return lr ? *lr : default_learning_rate(variant); }

ModelConfig RunConfig::model_config(std::size_t source_vocab, std::size_t target_vocab) const {
  ModelConfig m;
  m.variant = variant;
  m.source_vocab = source_vocab;
  m.target_vocab = target_vocab;
  m.embed = embed;
  m.hidden = hidden;
  m.fertility_cap = fertility_cap;
  return m;
}

namespace {

bool parse_bool(std::string_view text, std::string_view what) {
  if (text == "true" || text == "1") return true;
  if (text == "false" || text == "0") return false;
  throw ConfigError(std::string(what) + ": expected true or false, got '" + std::string(text) +
                    "'");
}

std::size_t to_size(std::string_view text, std::string_view what) {
  return static_cast<std::size_t>(parse_unsigned(text, what));
}

struct Field {
  std::function<void(RunConfig&, std::string_view)> set;
  std::function<std::string(const RunConfig&)> get;
  bool runtime = false;
};

template <typename T>
Field size_field(T RunConfig::*member) {
  return {[member](RunConfig& c, std::string_view v) { c.*member = to_size(v, "value"); },
          [member](const RunConfig& c) { return std::to_string(c.*member); }};
}

Field real_field(double RunConfig::*member) {
  return {[member](RunConfig& c, std::string_view v) { c.*member = parse_double(v, "value"); },
          [member](const RunConfig& c) { return format_double(c.*member); }};
}

Field string_field(std::string RunConfig::*member) {
  return {[member](RunConfig& c, std::string_view v) { c.*member = std::string(v); },
          [member](const RunConfig& c) { return c.*member; }};
}

// Ordered: this is the canonical serialization order.
const std::vector<std::pair<std::string, Field>>& fields() {
  static const std::vector<std::pair<std::string, Field>> table = {
      {"variant",
       {[](RunConfig& c, std::string_view v) { c.variant = parse_variant(v); },
        [](const RunConfig& c) { return std::string(to_string(c.variant)); }}},
      {"hidden", size_field(&RunConfig::hidden)},
      {"embed", size_field(&RunConfig::embed)},
      {"lr",
       {[](RunConfig& c, std::string_view v) { c.lr = parse_double(v, "lr"); },
        [](const RunConfig& c) { return format_double(c.learning_rate()); }}},
      {"beam", size_field(&RunConfig::beam)},
      {"batch", size_field(&RunConfig::batch)},
      {"dropout", real_field(&RunConfig::dropout)},
      {"clip", real_field(&RunConfig::clip)},
      {"seed", size_field(&RunConfig::seed)},
      {"epochs", size_field(&RunConfig::epochs)},
      {"max_tokens", size_field(&RunConfig::max_tokens)},
      {"vocab_limit", size_field(&RunConfig::vocab_limit)},
      {"keep_best", size_field(&RunConfig::keep_best)},
      {"evals_per_epoch", size_field(&RunConfig::evals_per_epoch)},
      {"decode_max_len", size_field(&RunConfig::decode_max_len)},
      {"fertility_cap", real_field(&RunConfig::fertility_cap)},
      {"checkpoint_dtype",
       {[](RunConfig& c, std::string_view v) { c.checkpoint_dtype = parse_dtype(v); },
        [](const RunConfig& c) { return std::string(to_string(c.checkpoint_dtype)); }}},
      {"train", string_field(&RunConfig::train)},
      {"dev", string_field(&RunConfig::dev)},
      {"task",
       {[](RunConfig& c, std::string_view v) {
          if (v.empty()) {
            c.task.reset();
          } else {
            c.task = parse_task(v);
          }
        },
        [](const RunConfig& c) { return c.task ? std::string(to_string(*c.task)) : std::string(); }}},
      {"task_vocab", size_field(&RunConfig::task_vocab)},
      {"task_min_length", size_field(&RunConfig::task_min_length)},
      {"task_max_length", size_field(&RunConfig::task_max_length)},
      {"train_samples", size_field(&RunConfig::train_samples)},
      {"dev_samples", size_field(&RunConfig::dev_samples)},
      {"task_seed", size_field(&RunConfig::task_seed)},
      {"workers", {size_field(&RunConfig::workers).set, size_field(&RunConfig::workers).get, true}},
      {"log_wall_time",
       {[](RunConfig& c, std::string_view v) { c.log_wall_time = parse_bool(v, "log_wall_time"); },
        [](const RunConfig& c) { return std::string(c.log_wall_time ? "true" : "false"); },
        true}},
  };
  return table;
}

const Field* find_field(std::string_view key) {
  for (const auto& [name, field] : fields()) {
    if (name == key) return &field;
  }
  return nullptr;
}

std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

std::string resolve(const std::string& path, const std::filesystem::path& base) {
  if (path.empty() || base.empty()) return path;
  std::filesystem::path p(path);
  if (p.is_absolute()) return path;
  return (base / p).lexically_normal().string();
}

}  // namespace

bool is_config_key(std::string_view key) { return find_field(key) != nullptr; }

void set_config_value(RunConfig& config, std::string_view key, std::string_view value) {
  const Field* field = find_field(key);
  if (field == nullptr) throw ConfigError("unknown config key '" + std::string(key) + "'");
  try {
    field->set(config, value);
  } catch (const ConfigError& e) {
    throw ConfigError("config key '" + std::string(key) + "': " + e.what());
  }
}

RunConfig parse_config_text(std::string_view text, const std::filesystem::path& base_dir) {
  RunConfig config;
  std::map<std::string, std::size_t, std::less<>> seen;
  std::size_t line_no = 0;
  while (!text.empty()) {
    const auto nl = text.find('\n');
    std::string_view line = text.substr(0, nl);
    text = nl == std::string_view::npos ? std::string_view{} : text.substr(nl + 1);
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string_view::npos) {
      line = line.substr(0, hash);
    }
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) {
      throw ConfigError("config line " + std::to_string(line_no) + ": expected key=value");
    }
    const std::string key(trim(line.substr(0, eq)));
    const std::string_view value = trim(line.substr(eq + 1));
    if (auto it = seen.find(key); it != seen.end()) {
      throw ConfigError("config line " + std::to_string(line_no) + ": key '" + key +
                        "' already set on line " + std::to_string(it->second));
    }
    seen.emplace(key, line_no);
    set_config_value(config, key, value);
  }
  config.train = resolve(config.train, base_dir);
  config.dev = resolve(config.dev, base_dir);
  validate(config);
  return config;
}

RunConfig parse_config(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot read config file " + path.string());
  std::ostringstream text;
  text << in.rdbuf();
  return parse_config_text(text.str(), path.parent_path());
}

void validate(const RunConfig& c) {
  auto require = [](bool ok, const std::string& message) {
    if (!ok) throw ConfigError(message);
  };
  require(c.hidden > 0, "hidden must be positive");
  require(c.embed > 0, "embed must be positive");
  require(c.learning_rate() >= 0.0, "lr must be non-negative");
  require(c.beam > 0, "beam must be positive");
  require(c.batch > 0, "batch must be positive");
  require(c.dropout >= 0.0 && c.dropout < 1.0, "dropout must lie in [0, 1)");
  require(c.clip > 0.0, "clip must be positive");
  require(c.epochs > 0, "epochs must be positive");
  require(c.max_tokens > 0, "max_tokens must be positive");
  require(c.vocab_limit > kReservedTokens, "vocab_limit must exceed the 4 reserved ids");
  require(c.keep_best > 0, "keep_best must be positive");
  require(c.evals_per_epoch > 0, "evals_per_epoch must be positive");
  require(c.fertility_cap > 0.0, "fertility_cap must be positive");
  require(c.workers > 0, "workers must be positive");
  if (c.task) {
    require(c.train.empty() && c.dev.empty(),
            "task and train/dev corpora are mutually exclusive; set only one");
    require(c.task_min_length > 0 && c.task_min_length <= c.task_max_length,
            "task lengths must satisfy 0 < task_min_length <= task_max_length");
    require(c.task_vocab > 0, "task_vocab must be positive");
    require(c.train_samples > 0 && c.dev_samples > 0, "sample counts must be positive");
  } else {
    require(!c.train.empty() && !c.dev.empty(), "set train and dev corpus prefixes, or a task");
  }
}

std::string serialize_config(const RunConfig& config) {
  std::string out;
  for (const auto& [name, field] : fields()) out += name + "=" + field.get(config) + "\n";
  return out;
}

std::string config_hash(const RunConfig& config) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (const auto& [name, field] : fields()) {
    if (field.runtime) continue;
    for (char ch : name + "=" + field.get(config) + "\n") {
      h ^= static_cast<unsigned char>(ch);
      h *= 0x100000001b3ULL;
    }
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

}  // namespace gridnmt
