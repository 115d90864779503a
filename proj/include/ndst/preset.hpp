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

#include <array>
#include <string>
#include <utility>
#include <vector>

#include "ndst/stft.hpp"

namespace ndst {

// Geometry of the convolutional audio encoder for one spectrogram shape.
struct EncoderShape {
  int freq_bins = 513;
  int frames = 127;
  std::array<int, 4> channels = {8, 16, 32, 32};
  int latent_dim = 128;

  // (height, width) at the input and after each of the four stride-2 convs.
  std::vector<std::pair<int, int>> Extents() const {
    std::vector<std::pair<int, int>> out = {{freq_bins, frames}};
    for (int i = 0; i < 4; ++i) {
      const auto [h, w] = out.back();
      out.push_back({(h - 1) / 2 + 1, (w - 1) / 2 + 1});
    }
    return out;
  }

  int FlattenSize() const {
    const auto last = Extents().back();
    return channels.back() * last.first * last.second;
  }

  bool operator==(const EncoderShape&) const = default;
};

// Sizes that must agree across data generation, the encoder and training.
// A training example is a patch of 2 * segment_len samples split into two
// segments; the encoder sees one segment at a time.
struct Preset {
  std::string name = "desk";
  int sample_rate = 24000;
  int segment_len = 32768;
  StftConfig stft = StftConfig::Desk();

  int patch_len() const { return 2 * segment_len; }

  EncoderShape encoder_shape() const {
    EncoderShape s;
    s.freq_bins = stft.freq_bins();
    s.frames = stft.FrameCount(static_cast<std::size_t>(segment_len));
    return s;
  }

  static Preset Desk() { return {"desk", 24000, 32768, StftConfig::Desk()}; }
  static Preset Paper() { return {"paper", 24000, 131072, StftConfig::Paper()}; }
  static Preset ByName(const std::string& name);
};

}  // namespace ndst
