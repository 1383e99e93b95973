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

#include "gridnmt/commands.hpp"

#include <cstdio>
#include <fstream>

#include "gridnmt/error.hpp"
#include "gridnmt/rng.hpp"

namespace gridnmt {

TrainingData load_training_data(const RunConfig& config) {
  TrainingData data;
  if (config.task) {
    SyntheticTaskSpec spec;
    spec.task = *config.task;
    spec.vocab_size = config.task_vocab;
    spec.min_length = config.task_min_length;
    spec.max_length = config.task_max_length;
    spec.samples = config.train_samples;
    spec.seed = config.task_seed;
    data.train = generate_task(spec);
    spec.samples = config.dev_samples;
    spec.seed = Rng::mix(config.task_seed, 1);
    data.dev = generate_task(spec);
  } else {
    data.train = read_corpus(config.train);
    data.dev = read_corpus(config.dev);
  }
  data.train = filter_by_length(data.train, config.max_tokens);
  data.dev = filter_by_length(data.dev, config.max_tokens);
  if (data.train.size() == 0) throw DataError("training corpus is empty after length filtering");
  if (data.dev.size() == 0) throw DataError("dev corpus is empty after length filtering");
  return data;
}

TrainingRun run_training(const RunConfig& config, const std::filesystem::path& out_dir,
                         std::ostream* log) {
  validate(config);
  TrainingData data = load_training_data(config);
  TrainingRun run;
  run.source_vocab = build_vocab(data.train.source, config.vocab_limit);
  run.target_vocab = build_vocab(data.train.target, config.vocab_limit);
  const std::vector<IdPair> train = to_ids(data.train, run.source_vocab, run.target_vocab);
  const std::vector<IdPair> dev = to_ids(data.dev, run.source_vocab, run.target_vocab);
  run.model = TranslationModel::create(
      config.model_config(run.source_vocab.size(), run.target_vocab.size()), config.seed);

  if (!out_dir.empty()) {
    std::filesystem::create_directories(out_dir);
    std::ofstream cfg(out_dir / "config.cfg", std::ios::binary | std::ios::trunc);
    cfg << serialize_config(config);
    if (!cfg) throw DataError("cannot write " + (out_dir / "config.cfg").string());
    run.source_vocab.save(out_dir / "src.vocab");
    run.target_vocab.save(out_dir / "tgt.vocab");
  }
  if (log != nullptr) {
    *log << "variant " << to_string(config.variant) << ", " << train.size() << " train / "
         << dev.size() << " dev pairs, vocab " << run.source_vocab.size() << "/"
         << run.target_vocab.size() << ", " << run.model->params().total_size()
         << " parameters\n";
  }
  TrainOptions options;
  options.config = config;
  options.out_dir = out_dir;
  if (log != nullptr) {
    options.on_record = [log](const MetricRecord& r) {
      char line[160];
      std::snprintf(line, sizeof line, "step %llu  train_nll %.4f  dev_ppl %.4f\n",
                    static_cast<unsigned long long>(r.step), r.train_nll, r.dev_ppl);
      *log << line << std::flush;
    };
  }
  run.result = train_loop(*run.model, train, dev, options);
  if (log != nullptr) {
    char line[160];
    std::snprintf(line, sizeof line, "averaged %zu checkpoints: dev_ppl %.4f\n",
                  run.result.best.size(), run.result.average_dev_ppl);
    *log << line;
  }
  return run;
}

LoadedModel load_model(const std::filesystem::path& checkpoint) {
  const std::filesystem::path dir = checkpoint.parent_path();
  LoadedModel loaded;
  if (!std::filesystem::exists(dir / "config.cfg")) {
    throw DataError("missing " + (dir / "config.cfg").string() + " next to the checkpoint");
  }
  loaded.config = parse_config(dir / "config.cfg");
  loaded.source_vocab = Vocabulary::load(dir / "src.vocab");
  loaded.target_vocab = Vocabulary::load(dir / "tgt.vocab");
  Checkpoint ckpt = load_checkpoint(checkpoint);
  const std::string hash = config_hash(loaded.config);
  if (ckpt.meta.config_hash != hash) {
    throw DataError("checkpoint " + checkpoint.string() + " was written under config hash " +
                    ckpt.meta.config_hash + ", but config.cfg hashes to " + hash);
  }
  loaded.model = TranslationModel::create(
      loaded.config.model_config(loaded.source_vocab.size(), loaded.target_vocab.size()),
      loaded.config.seed);
  ckpt.restore(loaded.model->params());
  loaded.meta = ckpt.meta;
  return loaded;
}

GradCheckProblem make_gradcheck_problem(Variant variant, const GradCheckOptions& options) {
  if (options.J == 0 || options.I == 0 || options.hidden == 0) {
    throw ConfigError("gradcheck dimensions must be positive");
  }
  constexpr std::size_t kVocab = kReservedTokens + 3;
  ModelConfig config;
  config.variant = variant;
  config.source_vocab = kVocab;
  config.target_vocab = kVocab;
  config.embed = options.hidden;
  config.hidden = options.hidden;
  GradCheckProblem problem;
  problem.model = TranslationModel::create(config, options.seed);
  Rng rng(Rng::mix(options.seed, 0x67636b));
  auto content = [&]() {
    return static_cast<TokenId>(kReservedTokens + rng.index(kVocab - kReservedTokens));
  };
  problem.source.resize(options.J);
  problem.target.resize(options.I);
  for (TokenId& t : problem.source) t = content();
  for (TokenId& t : problem.target) t = content();
  problem.target.back() = kEos;
  return problem;
}

GradCheckReport gradcheck_variant(Variant variant, const GradCheckOptions& options) {
  GradCheckProblem problem = make_gradcheck_problem(variant, options);
  const TranslationModel& m = *problem.model;
  return grad_check(
      [&](ad::Tape& tape) { return m.sentence_loss(tape, problem.source, problem.target); },
      problem.model->params(), options.epsilon, options.tolerance);
}

}  // namespace gridnmt
