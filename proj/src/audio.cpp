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

#include "ndst/audio.hpp"

#include <algorithm>
#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>
#include <limits>
#include <sstream>

#include "ndst/error.hpp"

namespace ndst {
namespace {

constexpr std::uint16_t kFormatPcm = 1;
constexpr std::uint16_t kFormatFloat = 3;

static_assert(std::endian::native == std::endian::little,
              "WAV and checkpoint I/O assume a little-endian host");

class ByteReader {
 public:
  explicit ByteReader(std::span<const std::uint8_t> bytes) : bytes_(bytes) {}

  std::size_t remaining() const { return bytes_.size() - pos_; }
  std::size_t pos() const { return pos_; }

  template <typename T>
  T Read() {
    if (remaining() < sizeof(T))
      throw Error(ErrorCode::kMalformedWav, "unexpected end of file");
    T value;
    std::memcpy(&value, bytes_.data() + pos_, sizeof(T));
    pos_ += sizeof(T);
    return value;
  }

  std::span<const std::uint8_t> Take(std::size_t n) {
    if (remaining() < n)
      throw Error(ErrorCode::kMalformedWav, "chunk extends past end of file");
    auto out = bytes_.subspan(pos_, n);
    pos_ += n;
    return out;
  }

  void Skip(std::size_t n) { Take(n); }

 private:
  std::span<const std::uint8_t> bytes_;
  std::size_t pos_ = 0;
};

template <typename T>
void Put(std::vector<std::uint8_t>& out, T value) {
  std::uint8_t raw[sizeof(T)];
  std::memcpy(raw, &value, sizeof(T));
  out.insert(out.end(), raw, raw + sizeof(T));
}

void PutTag(std::vector<std::uint8_t>& out, const char* tag) {
  out.insert(out.end(), tag, tag + 4);
}

bool TagIs(std::span<const std::uint8_t> tag, const char* expect) {
  return std::memcmp(tag.data(), expect, 4) == 0;
}

}  // namespace

void ValidateAudio(const AudioBuffer& buffer) {
  if (buffer.sample_rate <= 0)
    throw Error(ErrorCode::kDimensionMismatch, "sample rate must be positive");
  for (float v : buffer.samples) {
    if (!std::isfinite(v))
      throw Error(ErrorCode::kDimensionMismatch, "non-finite sample");
  }
}

std::vector<float> ResampleLinear(std::span<const float> samples, int from_rate,
                                  int to_rate) {
  if (from_rate <= 0 || to_rate <= 0)
    throw Error(ErrorCode::kDimensionMismatch, "sample rate must be positive");
  if (from_rate == to_rate) return {samples.begin(), samples.end()};
  const auto count = static_cast<std::size_t>(
      static_cast<std::int64_t>(samples.size()) * to_rate / from_rate);
  return InterpolateAt(samples, 0.0,
                       static_cast<double>(from_rate) / to_rate, count);
}

std::vector<float> InterpolateAt(std::span<const float> samples, double start,
                                 double step, std::size_t count) {
  std::vector<float> out(count, 0.0f);
  if (samples.empty()) return out;
  const std::size_t last = samples.size() - 1;
  for (std::size_t k = 0; k < count; ++k) {
    const double pos = start + step * static_cast<double>(k);
    if (pos <= 0.0) {
      out[k] = samples[0];
      continue;
    }
    const auto i = static_cast<std::size_t>(pos);
    if (i >= last) {
      out[k] = samples[last];
      continue;
    }
    const double frac = pos - static_cast<double>(i);
    out[k] = static_cast<float>((1.0 - frac) * samples[i] +
                                frac * samples[i + 1]);
  }
  return out;
}

AudioBuffer DecodeWav(std::span<const std::uint8_t> bytes, int target_rate) {
  ByteReader in(bytes);
  if (in.remaining() < 12) throw Error(ErrorCode::kMalformedWav, "too small");
  if (!TagIs(in.Take(4), "RIFF"))
    throw Error(ErrorCode::kMalformedWav, "missing RIFF tag");
  in.Read<std::uint32_t>();
  if (!TagIs(in.Take(4), "WAVE"))
    throw Error(ErrorCode::kMalformedWav, "missing WAVE tag");

  std::uint16_t format = 0, channels = 0, bits = 0;
  std::uint32_t rate = 0;
  bool have_fmt = false;
  std::span<const std::uint8_t> data;
  bool have_data = false;

  while (in.remaining() >= 8) {
    auto tag = in.Take(4);
    const auto size = in.Read<std::uint32_t>();
    if (TagIs(tag, "fmt ")) {
      if (size < 16) throw Error(ErrorCode::kMalformedWav, "short fmt chunk");
      ByteReader fmt(in.Take(size));
      format = fmt.Read<std::uint16_t>();
      channels = fmt.Read<std::uint16_t>();
      rate = fmt.Read<std::uint32_t>();
      fmt.Read<std::uint32_t>();  // byte rate
      fmt.Read<std::uint16_t>();  // block align
      bits = fmt.Read<std::uint16_t>();
      have_fmt = true;
    } else if (TagIs(tag, "data")) {
      // Some writers leave the size field at 0 or 0xFFFFFFFF while streaming.
      const std::size_t n = std::min<std::size_t>(size, in.remaining());
      data = in.Take(n);
      have_data = true;
    } else {
      in.Skip(std::min<std::size_t>(size, in.remaining()));
    }
    if (size % 2 == 1 && in.remaining() > 0) in.Skip(1);
  }
  if (!have_fmt) throw Error(ErrorCode::kMalformedWav, "missing fmt chunk");
  if (!have_data) throw Error(ErrorCode::kMalformedWav, "missing data chunk");
  if (format != kFormatPcm && format != kFormatFloat) {
    throw Error(ErrorCode::kUnsupportedFormat,
                "format code " + std::to_string(format));
  }
  if ((format == kFormatPcm && bits != 16) ||
      (format == kFormatFloat && bits != 32)) {
    throw Error(ErrorCode::kUnsupportedFormat,
                "bit depth " + std::to_string(bits));
  }
  if (channels != 1 && channels != 2) {
    throw Error(ErrorCode::kUnsupportedFormat,
                std::to_string(channels) + " channels");
  }
  if (rate == 0) throw Error(ErrorCode::kMalformedWav, "zero sample rate");

  const std::size_t frame_bytes = channels * (bits / 8);
  const std::size_t frames = data.size() / frame_bytes;
  std::vector<float> mono(frames);
  for (std::size_t f = 0; f < frames; ++f) {
    const std::uint8_t* p = data.data() + f * frame_bytes;
    float acc[2] = {0.0f, 0.0f};
    for (std::size_t c = 0; c < channels; ++c) {
      if (format == kFormatFloat) {
        std::memcpy(&acc[c], p + 4 * c, 4);
      } else {
        std::int16_t v;
        std::memcpy(&v, p + 2 * c, 2);
        acc[c] = static_cast<float>(v) / 32768.0f;
      }
    }
    mono[f] = channels == 1 ? acc[0] : 0.5f * (acc[0] + acc[1]);
  }

  AudioBuffer out;
  out.sample_rate = target_rate > 0 ? target_rate : static_cast<int>(rate);
  out.samples = ResampleLinear(mono, static_cast<int>(rate), out.sample_rate);
  return out;
}

AudioBuffer ReadWav(const std::filesystem::path& path, int target_rate) {
  std::ifstream file(path, std::ios::binary);
  if (!file) throw Error(ErrorCode::kIoError, "cannot open " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(file)),
                                  std::istreambuf_iterator<char>());
  return DecodeWav(bytes, target_rate);
}

std::vector<std::uint8_t> EncodeWav(const AudioBuffer& buffer) {
  ValidateAudio(buffer);
  const auto data_bytes = static_cast<std::uint32_t>(buffer.size() * 4);
  std::vector<std::uint8_t> out;
  out.reserve(44 + data_bytes);
  PutTag(out, "RIFF");
  Put<std::uint32_t>(out, 36 + data_bytes);
  PutTag(out, "WAVE");
  PutTag(out, "fmt ");
  Put<std::uint32_t>(out, 16);
  Put<std::uint16_t>(out, kFormatFloat);
  Put<std::uint16_t>(out, 1);
  Put<std::uint32_t>(out, static_cast<std::uint32_t>(buffer.sample_rate));
  Put<std::uint32_t>(out, static_cast<std::uint32_t>(buffer.sample_rate) * 4);
  Put<std::uint16_t>(out, 4);
  Put<std::uint16_t>(out, 32);
  PutTag(out, "data");
  Put<std::uint32_t>(out, data_bytes);
  const auto* raw = reinterpret_cast<const std::uint8_t*>(buffer.samples.data());
  out.insert(out.end(), raw, raw + data_bytes);
  return out;
}

void WriteWav(const AudioBuffer& buffer, const std::filesystem::path& path) {
  const auto bytes = EncodeWav(buffer);
  std::ofstream file(path, std::ios::binary | std::ios::trunc);
  if (!file) throw Error(ErrorCode::kIoError, "cannot write " + path.string());
  file.write(reinterpret_cast<const char*>(bytes.data()),
             static_cast<std::streamsize>(bytes.size()));
  if (!file) throw Error(ErrorCode::kIoError, "short write " + path.string());
}

float PeakAbs(std::span<const float> samples) {
  float peak = 0.0f;
  for (float v : samples) peak = std::max(peak, std::abs(v));
  return peak;
}

double Rms(std::span<const float> samples) {
  if (samples.empty()) return 0.0;
  double acc = 0.0;
  for (float v : samples) acc += static_cast<double>(v) * v;
  return std::sqrt(acc / static_cast<double>(samples.size()));
}

double RmsDbfs(std::span<const float> samples) {
  const double rms = Rms(samples);
  return rms > 0.0 ? 20.0 * std::log10(rms) : -std::numeric_limits<double>::infinity();
}

AudioBuffer PeakNormalize(const AudioBuffer& buffer, double target_dbfs) {
  const float peak = PeakAbs(buffer.samples);
  if (peak <= 0.0f)
    throw Error(ErrorCode::kSilentInput, "cannot normalize a silent buffer");
  const double scale = DbToGain(target_dbfs) / peak;
  AudioBuffer out;
  out.sample_rate = buffer.sample_rate;
  out.samples.resize(buffer.size());
  for (std::size_t i = 0; i < buffer.size(); ++i)
    out.samples[i] = static_cast<float>(buffer.samples[i] * scale);
  return out;
}

}  // namespace ndst
