// Copyright 2026 The ndst Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "ndst/error.hpp"
#include "ndst/nn/layers.hpp"

namespace ndst {

inline constexpr std::uint32_t kCheckpointVersion = 1;

struct CheckpointEntry {
  std::string name;
  std::vector<std::uint32_t> dims;
  std::vector<float> data;

  bool operator==(const CheckpointEntry&) const = default;
};

// Named arrays plus string metadata. Metadata travels inside the file as
// entries named "meta/<key>" holding the UTF-8 bytes as values.
struct Checkpoint {
  std::uint32_t version = kCheckpointVersion;
  std::vector<CheckpointEntry> entries;
  std::map<std::string, std::string> metadata;

  const CheckpointEntry* Find(const std::string& name) const;
  std::string Meta(const std::string& key) const;  // empty when absent
  bool operator==(const Checkpoint&) const = default;
};

// "NDST", u32 version, u32 count; per entry u16 name length, name, u8 ndim,
// ndim x u32 dims, f32 data; trailing u32 CRC32 of all preceding bytes.
// All integers and floats little-endian.
std::vector<std::uint8_t> SerializeCheckpoint(const Checkpoint& c);
// Throws VersionMismatch or CorruptCheckpoint.
Checkpoint ParseCheckpoint(std::span<const std::uint8_t> bytes);

void SaveCheckpoint(const Checkpoint& c, const std::filesystem::path& path);
Checkpoint LoadCheckpoint(const std::filesystem::path& path);

// Appends every entry of `store` (weights and running statistics).
template <typename T>
void AppendParams(Checkpoint& c, const nn::ParamStore<T>& store) {
  for (const auto& e : store.entries()) {
    CheckpointEntry out;
    out.name = e.name;
    for (int d : e.var->value.shape) out.dims.push_back(static_cast<std::uint32_t>(d));
    out.data.reserve(e.var->value.size());
    for (T v : e.var->value.data) out.data.push_back(static_cast<float>(v));
    c.entries.push_back(std::move(out));
  }
}

// Copies matching entries into `store`; every store entry must be present
// with the same shape (ShapeMismatch otherwise). Extra entries are ignored.
template <typename T>
void LoadParams(const Checkpoint& c, nn::ParamStore<T>& store) {
  for (const auto& e : store.entries()) {
    const CheckpointEntry* src = c.Find(e.name);
    if (src == nullptr) throw Error(ErrorCode::kShapeMismatch, "checkpoint lacks " + e.name);
    nn::Shape shape(src->dims.begin(), src->dims.end());
    if (shape != e.var->value.shape)
      throw Error(ErrorCode::kShapeMismatch, e.name + ": checkpoint " + nn::ShapeString(shape) +
                                                 ", model " + nn::ShapeString(e.var->value.shape));
    for (std::size_t i = 0; i < src->data.size(); ++i) e.var->value.data[i] = static_cast<T>(src->data[i]);
  }
}

}  // namespace ndst
