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

#include "ndst/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>

#include <zlib.h>

namespace ndst {
namespace {

constexpr char kMagic[4] = {'N', 'D', 'S', 'T'};
constexpr const char* kMetaPrefix = "meta/";

void PutU8(std::vector<std::uint8_t>& b, std::uint8_t v) { b.push_back(v); }
void PutU16(std::vector<std::uint8_t>& b, std::uint16_t v) {
  b.push_back(static_cast<std::uint8_t>(v));
  b.push_back(static_cast<std::uint8_t>(v >> 8));
}
void PutU32(std::vector<std::uint8_t>& b, std::uint32_t v) {
  for (int s = 0; s < 32; s += 8) b.push_back(static_cast<std::uint8_t>(v >> s));
}

std::uint32_t Crc32(std::span<const std::uint8_t> bytes) {
  uLong crc = crc32(0L, Z_NULL, 0);
  crc = crc32(crc, bytes.data(), static_cast<uInt>(bytes.size()));
  return static_cast<std::uint32_t>(crc);
}

class Reader {
 public:
  explicit Reader(std::span<const std::uint8_t> b) : b_(b) {}
  std::uint8_t U8() { return Take(1)[0]; }
  std::uint16_t U16() {
    const auto p = Take(2);
    return static_cast<std::uint16_t>(p[0] | (p[1] << 8));
  }
  std::uint32_t U32() {
    const auto p = Take(4);
    std::uint32_t v = 0;
    for (int i = 3; i >= 0; --i) v = (v << 8) | p[i];
    return v;
  }
  std::span<const std::uint8_t> Take(std::size_t n) {
    if (n > b_.size() - pos_)
      throw Error(ErrorCode::kCorruptCheckpoint, "checkpoint truncated at byte " + std::to_string(pos_));
    auto out = b_.subspan(pos_, n);
    pos_ += n;
    return out;
  }
  std::size_t remaining() const { return b_.size() - pos_; }

 private:
  std::span<const std::uint8_t> b_;
  std::size_t pos_ = 0;
};

void PutEntry(std::vector<std::uint8_t>& b, const CheckpointEntry& e) {
  if (e.name.size() > 0xffff) throw Error(ErrorCode::kInvalidConfig, "entry name too long");
  if (e.dims.size() > 0xff) throw Error(ErrorCode::kInvalidConfig, "too many dimensions");
  std::size_t count = 1;
  for (auto d : e.dims) count *= d;
  if (count != e.data.size())
    throw Error(ErrorCode::kShapeMismatch, e.name + ": dims do not match data length");
  PutU16(b, static_cast<std::uint16_t>(e.name.size()));
  b.insert(b.end(), e.name.begin(), e.name.end());
  PutU8(b, static_cast<std::uint8_t>(e.dims.size()));
  for (auto d : e.dims) PutU32(b, d);
  for (float v : e.data) PutU32(b, std::bit_cast<std::uint32_t>(v));
}

}  // namespace

const CheckpointEntry* Checkpoint::Find(const std::string& name) const {
  for (const auto& e : entries)
    if (e.name == name) return &e;
  return nullptr;
}

std::string Checkpoint::Meta(const std::string& key) const {
  auto it = metadata.find(key);
  return it == metadata.end() ? std::string() : it->second;
}

std::vector<std::uint8_t> SerializeCheckpoint(const Checkpoint& c) {
  std::vector<std::uint8_t> b(std::begin(kMagic), std::end(kMagic));
  PutU32(b, c.version);
  PutU32(b, static_cast<std::uint32_t>(c.entries.size() + c.metadata.size()));
  for (const auto& e : c.entries) PutEntry(b, e);
  for (const auto& [key, value] : c.metadata) {
    CheckpointEntry meta;
    meta.name = kMetaPrefix + key;
    meta.dims = {static_cast<std::uint32_t>(value.size())};
    for (unsigned char ch : value) meta.data.push_back(static_cast<float>(ch));
    PutEntry(b, meta);
  }
  PutU32(b, Crc32(b));
  return b;
}

Checkpoint ParseCheckpoint(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < 16 || std::memcmp(bytes.data(), kMagic, 4) != 0)
    throw Error(ErrorCode::kCorruptCheckpoint, "missing NDST header");
  Reader r(bytes.first(bytes.size() - 4));
  r.Take(4);
  Checkpoint c;
  c.version = r.U32();
  if (c.version != kCheckpointVersion)
    throw Error(ErrorCode::kVersionMismatch, "checkpoint version " + std::to_string(c.version) +
                                                 ", expected " + std::to_string(kCheckpointVersion));
  Reader tail(bytes.last(4));
  if (tail.U32() != Crc32(bytes.first(bytes.size() - 4)))
    throw Error(ErrorCode::kCorruptCheckpoint, "CRC32 mismatch");
  const std::uint32_t count = r.U32();
  for (std::uint32_t i = 0; i < count; ++i) {
    CheckpointEntry e;
    const auto name = r.Take(r.U16());
    e.name.assign(name.begin(), name.end());
    const std::uint8_t ndim = r.U8();
    std::uint64_t n = 1;
    for (std::uint8_t d = 0; d < ndim; ++d) {
      e.dims.push_back(r.U32());
      n *= e.dims.back();
    }
    if (n * 4 > r.remaining())
      throw Error(ErrorCode::kCorruptCheckpoint, e.name + ": data extends past the end");
    e.data.resize(n);
    for (auto& v : e.data) v = std::bit_cast<float>(r.U32());
    if (e.name.rfind(kMetaPrefix, 0) == 0) {
      std::string value;
      for (float v : e.data) value.push_back(static_cast<char>(static_cast<unsigned char>(v)));
      c.metadata[e.name.substr(std::strlen(kMetaPrefix))] = value;
    } else {
      c.entries.push_back(std::move(e));
    }
  }
  if (r.remaining() != 0) throw Error(ErrorCode::kCorruptCheckpoint, "trailing bytes after entries");
  return c;
}

void SaveCheckpoint(const Checkpoint& c, const std::filesystem::path& path) {
  const auto bytes = SerializeCheckpoint(c);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::kIoError, "cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error(ErrorCode::kIoError, "write failed for " + path.string());
}

Checkpoint LoadCheckpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kIoError, "cannot read " + path.string());
  const std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return ParseCheckpoint(bytes);
}

}  // namespace ndst
