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

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

namespace ndst {

// Mono signal with its sample rate. Samples are nominally in [-1, 1].
struct AudioBuffer {
  std::vector<float> samples;
  int sample_rate = 24000;

  std::size_t size() const { return samples.size(); }
  bool empty() const { return samples.empty(); }
};

// Throws kDimensionMismatch when the rate is not positive or a sample is
// not finite.
void ValidateAudio(const AudioBuffer& buffer);

// Reads PCM16 or float32 RIFF/WAVE, 1 or 2 channels. Stereo is averaged to
// mono and the result is linearly resampled to `target_rate` (native rate
// when target_rate <= 0).
AudioBuffer ReadWav(const std::filesystem::path& path, int target_rate);

// Writes a mono IEEE-float32 WAV at the buffer's rate.
void WriteWav(const AudioBuffer& buffer, const std::filesystem::path& path);

// Serialized bytes of WriteWav, exposed for callers that hash or stream.
std::vector<std::uint8_t> EncodeWav(const AudioBuffer& buffer);
AudioBuffer DecodeWav(std::span<const std::uint8_t> bytes, int target_rate);

// Linear-interpolation resampling from `from_rate` to `to_rate`. Output
// length is floor(n * to_rate / from_rate).
std::vector<float> ResampleLinear(std::span<const float> samples, int from_rate,
                                  int to_rate);

// Reads the signal at fractional positions start + k * step, k = 0..count-1,
// with linear interpolation; positions past the end read the last sample.
std::vector<float> InterpolateAt(std::span<const float> samples, double start,
                                 double step, std::size_t count);

float PeakAbs(std::span<const float> samples);
double Rms(std::span<const float> samples);
double RmsDbfs(std::span<const float> samples);
inline double DbToGain(double db) { return std::pow(10.0, db / 20.0); }

// Scales the buffer so max |x| equals 10^(target_dbfs / 20). Throws
// SilentInput when the buffer is all zeros.
AudioBuffer PeakNormalize(const AudioBuffer& buffer, double target_dbfs);

}  // namespace ndst
