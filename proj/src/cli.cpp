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

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "gridnmt/commands.hpp"
#include "gridnmt/decoding.hpp"
#include "gridnmt/error.hpp"
#include "gridnmt/metrics.hpp"

namespace gridnmt {

namespace {

std::string fixed(double value, int digits) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, value);
  return buf;
}

std::string scientific(double value) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.3e", value);
  return buf;
}

struct TrainArgs {
  std::string config;
  std::string out_dir;
  std::uint64_t seed = 0;
  std::size_t workers = 0;
  bool no_wall_time = false;
  std::vector<std::string> overrides;
};

struct DecodeArgs {
  std::string model;
  std::string input;
  std::string output;
  std::size_t beam = 0;
  std::size_t max_len = 0;
  std::size_t workers = 1;
};

struct EvalArgs {
  std::string hyps;
  std::string refs;
  std::string model;
  std::string corpus;
  std::size_t beam = 0;
  std::size_t max_len = 0;
  std::size_t workers = 1;
  bool ignore_case = false;
};

struct GradCheckArgs {
  std::string variant = "2d-seq2seq";
  std::string dims = "3x4x5";
  std::uint64_t seed = 1;
  double epsilon = 1e-5;
  double tolerance = 1e-4;
};

struct GenTaskArgs {
  std::string task;
  std::string out;
  SyntheticTaskSpec spec;
};

// Applies a command-line value over the config file, reporting a conflict
// when the file set something different.
void override_key(RunConfig& config, const std::string& key, const std::string& value,
                  std::ostream& err) {
  RunConfig probe = config;
  set_config_value(probe, key, value);
  if (serialize_config(probe) != serialize_config(config)) {
    err << "note: command line sets " << key << "=" << value << ", overriding the config file\n";
  }
  config = std::move(probe);
}

int train_command(const TrainArgs& args, std::ostream& out, std::ostream& err) {
  RunConfig config = parse_config(args.config);
  for (const std::string& assignment : args.overrides) {
    const auto eq = assignment.find('=');
    if (eq == std::string::npos) throw ConfigError("--set expects key=value, got '" + assignment + "'");
    override_key(config, assignment.substr(0, eq), assignment.substr(eq + 1), err);
  }
  if (args.seed != 0) override_key(config, "seed", std::to_string(args.seed), err);
  if (args.workers != 0) override_key(config, "workers", std::to_string(args.workers), err);
  if (args.no_wall_time) override_key(config, "log_wall_time", "false", err);
  validate(config);
  TrainingRun run = run_training(config, args.out_dir, &out);
  out << "wrote " << (std::filesystem::path(args.out_dir) / "avg.ckpt").string() << " and "
      << (std::filesystem::path(args.out_dir) / "metrics.jsonl").string() << "\n";
  return kExitOk;
}

BeamOptions beam_options(const RunConfig& config, std::size_t beam, std::size_t max_len) {
  BeamOptions o;
  o.beam = beam != 0 ? beam : config.beam;
  o.max_len = max_len != 0 ? max_len : config.decode_max_len;
  return o;
}

int decode_command(const DecodeArgs& args, std::ostream& out) {
  LoadedModel loaded = load_model(args.model);
  const std::vector<std::string> lines = read_lines(args.input);
  const std::vector<std::string> hyps =
      decode_lines(*loaded.model, loaded.source_vocab, loaded.target_vocab, lines,
                   beam_options(loaded.config, args.beam, args.max_len), args.workers);
  if (args.output.empty()) {
    for (const std::string& h : hyps) out << h << "\n";
  } else {
    write_lines(args.output, hyps);
  }
  return kExitOk;
}

void print_bleu(const BleuResult& b, std::ostream& out) {
  out << "BLEU " << fixed(b.score, 2) << "\n";
  out << "  precisions " << fixed(100 * b.precisions[0], 1) << "/" << fixed(100 * b.precisions[1], 1)
      << "/" << fixed(100 * b.precisions[2], 1) << "/" << fixed(100 * b.precisions[3], 1)
      << "  BP " << fixed(b.brevity_penalty, 3) << "  hyp_len " << b.hypothesis_length
      << "  ref_len " << b.reference_length << "\n";
}

std::vector<Sentence> tokenized(const std::vector<std::string>& lines) {
  std::vector<Sentence> out;
  out.reserve(lines.size());
  for (const std::string& l : lines) out.push_back(split_tokens(l));
  return out;
}

int eval_command(const EvalArgs& args, std::ostream& out) {
  const bool text_mode = !args.hyps.empty() || !args.refs.empty();
  const bool model_mode = !args.model.empty() || !args.corpus.empty();
  if (text_mode == model_mode) {
    throw ConfigError("eval needs either --hyps and --refs, or --model and --corpus");
  }
  if (text_mode) {
    if (args.hyps.empty() || args.refs.empty()) throw ConfigError("eval needs both --hyps and --refs");
    const auto hyps = tokenized(read_lines(args.hyps));
    const auto refs = tokenized(read_lines(args.refs));
    print_bleu(bleu(hyps, refs, 4, !args.ignore_case), out);
    return kExitOk;
  }
  if (args.model.empty() || args.corpus.empty()) throw ConfigError("eval needs both --model and --corpus");
  LoadedModel loaded = load_model(args.model);
  const ParallelCorpus corpus = filter_by_length(read_corpus(args.corpus), loaded.config.max_tokens);
  if (corpus.size() == 0) throw DataError("corpus " + args.corpus + " is empty after length filtering");
  const std::vector<IdPair> pairs = to_ids(corpus, loaded.source_vocab, loaded.target_vocab);
  const PerplexityResult ppl = perplexity(*loaded.model, pairs, args.workers);
  out << "perplexity " << fixed(ppl.perplexity, 4) << "  (" << ppl.tokens << " tokens)\n";

  std::vector<std::string> sources;
  for (const Sentence& s : corpus.source) sources.push_back(join_tokens(s));
  const std::vector<std::string> hyps =
      decode_lines(*loaded.model, loaded.source_vocab, loaded.target_vocab, sources,
                   beam_options(loaded.config, args.beam, args.max_len), args.workers);
  std::size_t exact = 0;
  for (std::size_t k = 0; k < hyps.size(); ++k) exact += hyps[k] == join_tokens(corpus.target[k]);
  print_bleu(bleu(tokenized(hyps), corpus.target, 4, !args.ignore_case), out);
  out << "exact_match " << fixed(100.0 * static_cast<double>(exact) / static_cast<double>(hyps.size()), 2)
      << "%  (" << exact << "/" << hyps.size() << ")\n";
  return kExitOk;
}

int gradcheck_command(const GradCheckArgs& args, std::ostream& out) {
  GradCheckOptions options;
  unsigned long long j = 0, i = 0, n = 0;
  char tail = 0;
  if (std::sscanf(args.dims.c_str(), "%llux%llux%llu%c", &j, &i, &n, &tail) != 3) {
    throw ConfigError("--dims expects JxIxn, got '" + args.dims + "'");
  }
  options.J = j;
  options.I = i;
  options.hidden = n;
  options.seed = args.seed;
  options.epsilon = args.epsilon;
  options.tolerance = args.tolerance;
  const Variant variant = parse_variant(args.variant);
  const GradCheckReport report = gradcheck_variant(variant, options);
  std::size_t width = 0;
  for (const ParamCheck& p : report.params) width = std::max(width, p.name.size());
  for (const ParamCheck& p : report.params) {
    out << p.name << std::string(width + 2 - p.name.size(), ' ') << scientific(p.max_rel_error)
        << "  " << (p.passed ? "ok" : "FAIL") << "\n";
  }
  out << (report.passed ? "PASS" : "FAIL") << " " << to_string(variant) << " dims " << args.dims
      << " tolerance " << scientific(report.tolerance) << "\n";
  return report.passed ? kExitOk : kExitNumeric;
}

int gentask_command(GenTaskArgs args, std::ostream& out) {
  args.spec.task = parse_task(args.task);
  const ParallelCorpus corpus = generate_task(args.spec);
  write_corpus(args.out, corpus);
  out << "wrote " << corpus.size() << " pairs to " << args.out << ".src / " << args.out
      << ".tgt\n";
  return kExitOk;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Two-dimensional LSTM sequence-to-sequence toolkit", "gridnmt"};
  app.require_subcommand(1);

  TrainArgs train;
  auto* train_cmd = app.add_subcommand("train", "Train a model from a config file");
  train_cmd->add_option("--config", train.config, "Config file (key=value lines)")->required();
  train_cmd->add_option("--out-dir", train.out_dir, "Directory for checkpoints and logs")->required();
  train_cmd->add_option("--seed", train.seed, "Override the config seed (non-zero)");
  train_cmd->add_option("--workers", train.workers, "Worker threads");
  train_cmd->add_flag("--no-wall-time", train.no_wall_time, "Log wall_time as 0");
  train_cmd->add_option("--set", train.overrides, "Override a config key (key=value)");

  DecodeArgs decode;
  auto* decode_cmd = app.add_subcommand("decode", "Translate a file with beam search");
  decode_cmd->add_option("--model", decode.model, "Checkpoint (avg.ckpt)")->required();
  decode_cmd->add_option("--input", decode.input, "Source sentences, one per line")->required();
  decode_cmd->add_option("--output", decode.output, "Hypothesis file (default: stdout)");
  decode_cmd->add_option("--beam", decode.beam, "Beam size (default: config)");
  decode_cmd->add_option("--max-len", decode.max_len, "Maximum output length (default: 2J+10)");
  decode_cmd->add_option("--workers", decode.workers, "Sentences decoded in parallel");

  EvalArgs eval;
  auto* eval_cmd = app.add_subcommand("eval", "BLEU of a hypothesis file, or perplexity/BLEU of a model");
  eval_cmd->add_option("--hyps", eval.hyps, "Hypothesis file");
  eval_cmd->add_option("--refs", eval.refs, "Reference file");
  eval_cmd->add_option("--model", eval.model, "Checkpoint");
  eval_cmd->add_option("--corpus", eval.corpus, "Corpus prefix (<prefix>.src, <prefix>.tgt)");
  eval_cmd->add_option("--beam", eval.beam, "Beam size (default: config)");
  eval_cmd->add_option("--max-len", eval.max_len, "Maximum output length");
  eval_cmd->add_option("--workers", eval.workers, "Worker threads");
  eval_cmd->add_flag("--ignore-case", eval.ignore_case, "Case-insensitive BLEU");

  GradCheckArgs grad;
  auto* grad_cmd = app.add_subcommand("gradcheck", "Finite-difference gradient check");
  grad_cmd->add_option("--variant", grad.variant, "Model variant");
  grad_cmd->add_option("--dims", grad.dims, "JxIxn");
  grad_cmd->add_option("--seed", grad.seed, "Initialisation seed");
  grad_cmd->add_option("--eps", grad.epsilon, "Central difference step");
  grad_cmd->add_option("--tol", grad.tolerance, "Maximum relative error");

  GenTaskArgs gen;
  auto* gen_cmd = app.add_subcommand("gentask", "Write a synthetic parallel corpus");
  gen_cmd->add_option("--task", gen.task, "copy, reverse or digit-to-word")->required();
  gen_cmd->add_option("--out", gen.out, "Output prefix")->required();
  gen_cmd->add_option("--seed", gen.spec.seed, "Generator seed");
  gen_cmd->add_option("--samples", gen.spec.samples, "Number of pairs");
  gen_cmd->add_option("--vocab", gen.spec.vocab_size, "Number of content symbols");
  gen_cmd->add_option("--min-len", gen.spec.min_length, "Minimum length");
  gen_cmd->add_option("--max-len", gen.spec.max_length, "Maximum length");

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (*train_cmd) return train_command(train, out, err);
    if (*decode_cmd) return decode_command(decode, out);
    if (*eval_cmd) return eval_command(eval, out);
    if (*grad_cmd) return gradcheck_command(grad, out);
    if (*gen_cmd) return gentask_command(gen, out);
  } catch (const ConfigError& e) {
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const NumericError& e) {
    err << "numeric error: " << e.what() << "\n";
    return kExitNumeric;
  } catch (const DataError& e) {
    err << "data error: " << e.what() << "\n";
    return kExitData;
  } catch (const ShapeError& e) {
    err << "data error: " << e.what() << "\n";
    return kExitData;
  } catch (const std::filesystem::filesystem_error& e) {
    err << "data error: " << e.what() << "\n";
    return kExitData;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  }
  return kExitUsage;
}

}  // namespace gridnmt
