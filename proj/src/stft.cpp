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

#include "ndst/stft.hpp"

#include <algorithm>
#include <cmath>

#include "ndst/error.hpp"
#include "ndst/fft.hpp"

namespace ndst {

int StftConfig::FrameCount(std::size_t length) const {
  if (length < static_cast<std::size_t>(window_len)) return 0;
  return 1 + static_cast<int>((length - window_len) / hop_len);
}

void StftConfig::Validate() const {
  if (!IsPowerOfTwo(static_cast<std::size_t>(std::max(fft_bins, 0))))
    throw Error(ErrorCode::kInvalidConfig, "fft_bins must be a power of two");
  if (window_len <= 0 || window_len > fft_bins)
    throw Error(ErrorCode::kInvalidConfig, "window_len must be in [1, fft_bins]");
  if (hop_len <= 0 || hop_len > window_len)
    throw Error(ErrorCode::kInvalidConfig, "hop_len must be in [1, window_len]");
  if (!(compression_exponent > 0.0))
    throw Error(ErrorCode::kInvalidConfig, "compression_exponent must be > 0");
}

ComplexFrames StftComplex(std::span<const float> signal, int fft_size,
                          int window_len, int hop) {
  if (signal.size() < static_cast<std::size_t>(window_len))
    throw Error(ErrorCode::kTooShort, "signal of " +
                                          std::to_string(signal.size()) +
                                          " samples is shorter than one window");
  const Fft& fft = Fft::ForSize(static_cast<std::size_t>(fft_size));
  const auto window = HannWindow(static_cast<std::size_t>(window_len));
  ComplexFrames out;
  out.fft_size = fft_size;
  out.frames = 1 + static_cast<int>((signal.size() - window_len) / hop);
  const int bins = out.bin_count();
  out.bins.resize(static_cast<std::size_t>(out.frames) * bins);
  std::vector<std::complex<double>> buf(static_cast<std::size_t>(fft_size));
  for (int t = 0; t < out.frames; ++t) {
    const std::size_t offset = static_cast<std::size_t>(t) * hop;
    std::fill(buf.begin(), buf.end(), std::complex<double>{});
    for (int n = 0; n < window_len; ++n)
      buf[n] = window[n] * static_cast<double>(signal[offset + n]);
    fft.Forward(buf);
    std::copy(buf.begin(), buf.begin() + bins,
              out.bins.begin() + static_cast<std::ptrdiff_t>(t) * bins);
  }
  return out;
}

Spectrogram StftMagnitude(const AudioBuffer& buffer, const StftConfig& config) {
  config.Validate();
  const auto frames = StftComplex(buffer.samples, config.fft_bins,
                                  config.window_len, config.hop_len);
  Spectrogram spec;
  spec.config = config;
  spec.freq_bins = config.freq_bins();
  spec.frames = frames.frames;
  spec.data.resize(static_cast<std::size_t>(spec.freq_bins) * spec.frames);
  for (int t = 0; t < spec.frames; ++t) {
    for (int f = 0; f < spec.freq_bins; ++f) {
      const double mag =
          std::abs(frames.bins[static_cast<std::size_t>(t) * spec.freq_bins + f]);
      spec.data[static_cast<std::size_t>(f) * spec.frames + t] =
          static_cast<float>(std::pow(mag, config.compression_exponent));
    }
  }
  return spec;
}

Spectrogram NormalizeSpectrogram(Spectrogram spec) {
  float peak = 0.0f;
  for (float v : spec.data) peak = std::max(peak, v);
  if (peak <= 0.0f) return spec;
  for (float& v : spec.data) v /= peak;
  return spec;
}

}  // namespace ndst
