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

#include <complex>
#include <span>
#include <vector>

#include "ndst/audio.hpp"

namespace ndst {

struct StftConfig {
  int fft_bins = 1024;
  int window_len = 512;
  int hop_len = 256;
  double compression_exponent = 0.3;

  int freq_bins() const { return fft_bins / 2 + 1; }
  // Frames for a signal of `length` samples; no center padding.
  int FrameCount(std::size_t length) const;
  void Validate() const;

  static StftConfig Paper() { return {4096, 2048, 1024, 0.3}; }
  static StftConfig Desk() { return {1024, 512, 256, 0.3}; }

  bool operator==(const StftConfig&) const = default;
};

// Compressed magnitude image, stored frequency-major:
// data[f * frames + t] for f in [0, freq_bins), t in [0, frames).
struct Spectrogram {
  int freq_bins = 0;
  int frames = 0;
  std::vector<float> data;
  StftConfig config;

  float at(int f, int t) const {
    return data[static_cast<std::size_t>(f) * frames + t];
  }
};

// One-sided complex spectra, frame-major: bins[t * (fft/2+1) + k].
struct ComplexFrames {
  int fft_size = 0;
  int frames = 0;
  std::vector<std::complex<double>> bins;

  int bin_count() const { return fft_size / 2 + 1; }
};

// Hann-windowed frames of `window_len` samples every `hop` samples, each
// zero-padded to `fft_size` and transformed.
ComplexFrames StftComplex(std::span<const float> signal, int fft_size,
                          int window_len, int hop);

// |X|^compression_exponent per bin. Throws TooShort when the buffer is
// shorter than one window.
Spectrogram StftMagnitude(const AudioBuffer& buffer, const StftConfig& config);

// Divides by the global maximum; an all-zero spectrogram passes through.
Spectrogram NormalizeSpectrogram(Spectrogram spec);

}  // namespace ndst
