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

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "gridnmt/autodiff.hpp"
#include "gridnmt/config.hpp"
#include "gridnmt/tensor.hpp"

namespace gridnmt {

inline constexpr int kCheckpointVersion = 1;

struct CheckpointMeta {
  std::uint64_t step = 0;
  double dev_ppl = 0.0;
  std::string config_hash;
};

// Named parameter tensors plus training metadata. On disk: a text manifest
//
//   gridnmt-checkpoint 1
//   dtype f64|f32
//   step <n>
//   dev_ppl <shortest round-trip decimal>
//   config_hash <hex>
//   params <count>
//   param <name> <d0>x<d1>... <byte offset>
//   ...
//   end
//
// followed by the little-endian IEEE-754 payload in manifest order.
struct Checkpoint {
  CheckpointMeta meta;
  DType dtype = DType::kF64;
  std::vector<std::string> names;
  std::vector<Tensor> tensors;

  static Checkpoint capture(const ParamStore& store, const CheckpointMeta& meta,
                            DType dtype = DType::kF64);
  // Copies every tensor into the store; names and shapes must match.
  void restore(ParamStore& store) const;
};

void save_checkpoint(const Checkpoint& checkpoint, const std::filesystem::path& path);
std::string serialize_checkpoint(const Checkpoint& checkpoint);
// Throws DataError on a bad manifest, version mismatch, inconsistent
// offsets, or a payload of the wrong length.
Checkpoint load_checkpoint(const std::filesystem::path& path);
Checkpoint parse_checkpoint(std::string_view bytes);

}  // namespace gridnmt
