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
#include <memory>
#include <ostream>
#include <string>
#include <vector>

#include "gridnmt/autodiff.hpp"
#include "gridnmt/checkpoint.hpp"
#include "gridnmt/config.hpp"
#include "gridnmt/data.hpp"
#include "gridnmt/models.hpp"
#include "gridnmt/training.hpp"

namespace gridnmt {

inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 1;
inline constexpr int kExitData = 2;
inline constexpr int kExitNumeric = 3;

// Entry point of the gridnmt executable; args excludes the program name.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

// Training and dev pairs after the length filter.
struct TrainingData {
  ParallelCorpus train;
  ParallelCorpus dev;
};

TrainingData load_training_data(const RunConfig& config);

struct TrainingRun {
  Vocabulary source_vocab;
  Vocabulary target_vocab;
  std::unique_ptr<TranslationModel> model;  // holds the averaged parameters
  TrainResult result;
};

// Builds vocabularies and a fresh model, trains it, and (when out_dir is
// non-empty) writes config.cfg, src.vocab, tgt.vocab, the retained
// checkpoints, avg.ckpt and metrics.jsonl.
TrainingRun run_training(const RunConfig& config, const std::filesystem::path& out_dir,
                         std::ostream* log = nullptr);

struct LoadedModel {
  RunConfig config;
  Vocabulary source_vocab;
  Vocabulary target_vocab;
  std::unique_ptr<TranslationModel> model;
  CheckpointMeta meta;
};

// Loads a checkpoint together with config.cfg, src.vocab and tgt.vocab from
// the same directory; the config hash must match the checkpoint's.
LoadedModel load_model(const std::filesystem::path& checkpoint);

struct GradCheckOptions {
  std::size_t J = 3;
  std::size_t I = 4;
  std::size_t hidden = 5;
  std::uint64_t seed = 1;
  double epsilon = 1e-5;
  double tolerance = 1e-4;
};

// A tiny randomly initialised model with a random source and an
// EOS-terminated target of the requested lengths.
struct GradCheckProblem {
  std::unique_ptr<TranslationModel> model;
  std::vector<TokenId> source;
  std::vector<TokenId> target;
};

GradCheckProblem make_gradcheck_problem(Variant variant, const GradCheckOptions& options);

// Finite-difference check of the teacher-forced sentence loss of a tiny
// randomly initialised model over every parameter scalar.
GradCheckReport gradcheck_variant(Variant variant, const GradCheckOptions& options);

}  // namespace gridnmt
