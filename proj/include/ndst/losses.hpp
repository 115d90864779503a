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

#include <span>
#include <vector>

namespace ndst {

struct MrstftConfig {
  // Window = FFT size (Hann), hop = size / 4. Sizes longer than the signal
  // are skipped.
  std::vector<int> fft_sizes = {32, 128, 512, 2048, 8192, 32768};

  void Validate() const;
};

struct MrstftResult {
  double value = 0.0;                      // mean over active resolutions
  std::vector<double> spectral_convergence;  // per active resolution
  std::vector<double> log_magnitude;         // per active resolution
  std::vector<int> active_sizes;
};

// Mean over resolutions of spectral convergence plus mean absolute
// log-magnitude difference (log floor 1e-7). Throws LengthMismatch.
MrstftResult Mrstft(std::span<const float> pred, std::span<const float> target,
                    const MrstftConfig& cfg);

// Same value with d(loss)/d(pred) written to `grad` (resized to pred size).
double MrstftWithGradient(std::span<const float> pred, std::span<const float> target,
                          const MrstftConfig& cfg, std::vector<double>& grad);

struct E2eLossParts {
  double total = 0.0;
  double mrstft = 0.0;
  double mae = 0.0;
};

// total = mrstft + alpha * mean |pred - target|.
E2eLossParts E2eLoss(std::span<const float> pred, std::span<const float> target,
                     double alpha, const MrstftConfig& cfg);
E2eLossParts E2eLossWithGradient(std::span<const float> pred, std::span<const float> target,
                                 double alpha, const MrstftConfig& cfg,
                                 std::vector<double>& grad);

struct KlScheduleConfig {
  long total_steps = 1;
  int num_cycles = 4;
  double ramp_fraction = 0.5;
  double beta_max = 1.0;
};

// Linear cyclical schedule: within each cycle of length total/num_cycles the
// weight ramps from 0 to beta_max over the first ramp_fraction, then holds.
double KlWeight(long step, const KlScheduleConfig& cfg);

}  // namespace ndst
