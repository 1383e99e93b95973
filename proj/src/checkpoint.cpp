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

#include "gridnmt/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

#include "gridnmt/error.hpp"

namespace gridnmt {

namespace {

constexpr std::string_view kMagic = "gridnmt-checkpoint";

std::size_t element_bytes(DType dtype) { return dtype == DType::kF32 ? 4 : 8; }

void put_le(std::string& out, std::uint64_t bits, std::size_t bytes) {
  for (std::size_t b = 0; b < bytes; ++b) out.push_back(static_cast<char>((bits >> (8 * b)) & 0xff));
}

std::uint64_t get_le(const char* p, std::size_t bytes) {
  std::uint64_t bits = 0;
  for (std::size_t b = 0; b < bytes; ++b) {
    bits |= static_cast<std::uint64_t>(static_cast<unsigned char>(p[b])) << (8 * b);
  }
  return bits;
}

std::string shape_text(const Shape& shape) {
  std::string s;
  for (std::size_t a = 0; a < shape.rank(); ++a) {
    if (a > 0) s += 'x';
    s += std::to_string(shape[a]);
  }
  return s;
}

[[noreturn]] void corrupt(const std::string& what) {
  throw DataError("corrupt checkpoint: " + what);
}

std::uint64_t manifest_unsigned(std::string_view text, std::string_view what) {
  try {
    return parse_unsigned(text, what);
  } catch (const ConfigError&) {
    corrupt("bad " + std::string(what) + " '" + std::string(text) + "'");
  }
}

Shape parse_shape(std::string_view text) {
  std::vector<std::size_t> dims;
  while (true) {
    const auto x = text.find('x');
    dims.push_back(static_cast<std::size_t>(manifest_unsigned(text.substr(0, x), "extent")));
    if (dims.back() == 0) corrupt("zero extent");
    if (x == std::string_view::npos) break;
    text = text.substr(x + 1);
  }
  if (dims.size() > Shape::kMaxRank) corrupt("rank above 4");
  return Shape(std::span<const std::size_t>(dims));
}

// Splits "key rest" on the first space.
std::pair<std::string_view, std::string_view> split_key(std::string_view line) {
  const auto sp = line.find(' ');
  if (sp == std::string_view::npos) return {line, {}};
  return {line.substr(0, sp), line.substr(sp + 1)};
}

}  // namespace

Checkpoint Checkpoint::capture(const ParamStore& store, const CheckpointMeta& meta, DType dtype) {
  Checkpoint c;
  c.meta = meta;
  c.dtype = dtype;
  for (ParamId id = 0; id < store.size(); ++id) {
    c.names.push_back(store.name(id));
    c.tensors.push_back(store.value(id));
  }
  return c;
}

void Checkpoint::restore(ParamStore& store) const {
  if (names.size() != store.size()) {
    throw DataError("checkpoint holds " + std::to_string(names.size()) +
                    " parameters, model expects " + std::to_string(store.size()));
  }
  for (std::size_t k = 0; k < names.size(); ++k) {
    if (names[k] != store.name(k)) {
      throw DataError("checkpoint parameter '" + names[k] + "' where model expects '" +
                      store.name(k) + "'");
    }
    if (!(tensors[k].shape() == store.value(k).shape())) {
      throw DataError("checkpoint parameter '" + names[k] + "' has shape " +
                      tensors[k].shape().str() + ", model expects " +
                      store.value(k).shape().str());
    }
  }
  for (std::size_t k = 0; k < names.size(); ++k) store.set(k, tensors[k]);
}

std::string serialize_checkpoint(const Checkpoint& c) {
  if (c.names.size() != c.tensors.size()) throw DataError("checkpoint names/tensors mismatch");
  const std::size_t width = element_bytes(c.dtype);
  std::string out;
  out += std::string(kMagic) + " " + std::to_string(kCheckpointVersion) + "\n";
  out += "dtype " + std::string(to_string(c.dtype)) + "\n";
  out += "step " + std::to_string(c.meta.step) + "\n";
  out += "dev_ppl " + format_double(c.meta.dev_ppl) + "\n";
  out += "config_hash " + (c.meta.config_hash.empty() ? std::string("-") : c.meta.config_hash) +
         "\n";
  out += "params " + std::to_string(c.names.size()) + "\n";
  std::size_t offset = 0;
  for (std::size_t k = 0; k < c.names.size(); ++k) {
    const std::string& name = c.names[k];
    if (name.empty() || name.find_first_of(" \t\n") != std::string::npos) {
      throw DataError("parameter name '" + name + "' cannot be stored in a checkpoint");
    }
    out += "param " + name + " " + shape_text(c.tensors[k].shape()) + " " +
           std::to_string(offset) + "\n";
    offset += c.tensors[k].size() * width;
  }
  out += "end\n";
  out.reserve(out.size() + offset);
  for (const Tensor& t : c.tensors) {
    for (double v : t.values()) {
      if (c.dtype == DType::kF32) {
        put_le(out, std::bit_cast<std::uint32_t>(static_cast<float>(v)), 4);
      } else {
        put_le(out, std::bit_cast<std::uint64_t>(v), 8);
      }
    }
  }
  return out;
}

void save_checkpoint(const Checkpoint& checkpoint, const std::filesystem::path& path) {
  const std::string bytes = serialize_checkpoint(checkpoint);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write checkpoint " + path.string());
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw DataError("failed writing checkpoint " + path.string());
}

Checkpoint parse_checkpoint(std::string_view bytes) {
  std::size_t pos = 0;
  auto next_line = [&]() -> std::string_view {
    const auto nl = bytes.find('\n', pos);
    if (nl == std::string_view::npos || nl - pos > 4096) corrupt("truncated manifest");
    std::string_view line = bytes.substr(pos, nl - pos);
    pos = nl + 1;
    return line;
  };
  auto expect = [&](std::string_view key) {
    auto [k, rest] = split_key(next_line());
    if (k != key) corrupt("expected '" + std::string(key) + "', found '" + std::string(k) + "'");
    return rest;
  };

  if (!bytes.starts_with(kMagic)) corrupt("missing header");
  const std::string_view version = expect(kMagic);
  if (manifest_unsigned(version, "version") != kCheckpointVersion) {
    throw DataError("unsupported checkpoint version " + std::string(version) + " (expected " +
                    std::to_string(kCheckpointVersion) + ")");
  }
  Checkpoint c;
  const std::string_view dtype = expect("dtype");
  if (dtype == "f64") {
    c.dtype = DType::kF64;
  } else if (dtype == "f32") {
    c.dtype = DType::kF32;
  } else {
    corrupt("unknown dtype '" + std::string(dtype) + "'");
  }
  c.meta.step = manifest_unsigned(expect("step"), "step");
  try {
    c.meta.dev_ppl = parse_double(expect("dev_ppl"), "dev_ppl");
  } catch (const ConfigError& e) {
    corrupt(e.what());
  }
  c.meta.config_hash = std::string(expect("config_hash"));
  if (c.meta.config_hash == "-") c.meta.config_hash.clear();
  const std::uint64_t count = manifest_unsigned(expect("params"), "parameter count");
  if (count > bytes.size()) corrupt("implausible parameter count");

  const std::size_t width = element_bytes(c.dtype);
  std::vector<Shape> shapes;
  std::size_t expected_offset = 0;
  for (std::uint64_t k = 0; k < count; ++k) {
    std::string_view rest = expect("param");
    auto [name, tail] = split_key(rest);
    auto [shape, offset] = split_key(tail);
    if (name.empty() || shape.empty() || offset.empty()) corrupt("malformed param line");
    shapes.push_back(parse_shape(shape));
    if (manifest_unsigned(offset, "offset") != expected_offset) {
      corrupt("offset mismatch for parameter '" + std::string(name) + "'");
    }
    expected_offset += shapes.back().numel() * width;
    c.names.emplace_back(name);
  }
  if (next_line() != "end") corrupt("missing end of manifest");

  const std::string_view payload = bytes.substr(pos);
  if (payload.size() < expected_offset) {
    corrupt("truncated payload (" + std::to_string(payload.size()) + " of " +
            std::to_string(expected_offset) + " bytes)");
  }
  if (payload.size() > expected_offset) corrupt("trailing bytes after payload");
  const char* p = payload.data();
  for (const Shape& shape : shapes) {
    std::vector<double> values(shape.numel());
    for (double& v : values) {
      if (c.dtype == DType::kF32) {
        v = static_cast<double>(std::bit_cast<float>(static_cast<std::uint32_t>(get_le(p, 4))));
      } else {
        v = std::bit_cast<double>(get_le(p, 8));
      }
      p += width;
    }
    check_finite(values, "checkpoint payload");
    c.tensors.emplace_back(shape, std::move(values));
  }
  return c;
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot read checkpoint " + path.string());
  std::ostringstream bytes;
  bytes << in.rdbuf();
  try {
    return parse_checkpoint(bytes.str());
  } catch (const NumericError& e) {
    throw DataError(path.string() + ": " + e.what());
  } catch (const DataError& e) {
    throw DataError(path.string() + ": " + e.what());
  }
}

}  // namespace gridnmt
