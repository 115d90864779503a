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

#include "ndst/losses.hpp"

#include <algorithm>
#include <cmath>

#include "ndst/error.hpp"
#include "ndst/fft.hpp"
#include "ndst/stft.hpp"

namespace ndst {
namespace {

constexpr double kLogFloor = 1e-7;

struct Resolution {
  double sc = 0.0;
  double log_mag = 0.0;
};

// One resolution. With `grad` non-null, adds `weight` * d(sc + log_mag)/d(pred).
Resolution EvalResolution(std::span<const float> pred, std::span<const float> target, int n,
                          double weight, std::vector<double>* grad) {
  const int hop = std::max(1, n / 4);
  const auto xp = StftComplex(pred, n, n, hop);
  const auto xt = StftComplex(target, n, n, hop);
  const std::size_t count = xp.bins.size();
  std::vector<double> mp(count), mt(count);
  double diff2 = 0.0, target2 = 0.0, log_sum = 0.0;
  for (std::size_t i = 0; i < count; ++i) {
    mp[i] = std::abs(xp.bins[i]);
    mt[i] = std::abs(xt.bins[i]);
    diff2 += (mt[i] - mp[i]) * (mt[i] - mp[i]);
    target2 += mt[i] * mt[i];
    log_sum += std::abs(std::log(mt[i] + kLogFloor) - std::log(mp[i] + kLogFloor));
  }
  const double diff_norm = std::sqrt(diff2);
  const double target_norm = std::sqrt(target2);
  Resolution r;
  r.sc = diff_norm > 0.0 ? diff_norm / std::max(target_norm, 1e-12) : 0.0;
  r.log_mag = log_sum / static_cast<double>(count);
  if (grad == nullptr) return r;

  // d/d|P| of both terms, then back through |.| and the windowed DFT.
  const int bins = xp.bin_count();
  const auto window = HannWindow(static_cast<std::size_t>(n));
  const Fft& fft = Fft::ForSize(static_cast<std::size_t>(n));
  std::vector<std::complex<double>> h(static_cast<std::size_t>(n));
  for (int t = 0; t < xp.frames; ++t) {
    std::fill(h.begin(), h.end(), std::complex<double>{});
    bool any = false;
    for (int k = 0; k < bins; ++k) {
      const std::size_t i = static_cast<std::size_t>(t) * bins + k;
      double g = 0.0;
      if (diff_norm > 0.0) g += (mp[i] - mt[i]) / (diff_norm * std::max(target_norm, 1e-12));
      const double d = std::log(mt[i] + kLogFloor) - std::log(mp[i] + kLogFloor);
      if (d != 0.0) g -= (d > 0 ? 1.0 : -1.0) / ((mp[i] + kLogFloor) * static_cast<double>(count));
      if (g == 0.0 || mp[i] == 0.0) continue;
      h[k] = weight * g * std::conj(xp.bins[i]) / mp[i];
      any = true;
    }
    if (!any) continue;
    fft.Forward(h);
    const std::size_t offset = static_cast<std::size_t>(t) * hop;
    for (int m = 0; m < n; ++m) (*grad)[offset + m] += window[m] * h[m].real();
  }
  return r;
}

void RequireSameLength(std::span<const float> a, std::span<const float> b) {
  if (a.size() != b.size())
    throw Error(ErrorCode::kLengthMismatch, "prediction has " + std::to_string(a.size()) +
                                                " samples, target " + std::to_string(b.size()));
}

std::vector<int> ActiveSizes(const MrstftConfig& cfg, std::size_t length) {
  std::vector<int> out;
  for (int n : cfg.fft_sizes)
    if (static_cast<std::size_t>(n) <= length) out.push_back(n);
  return out;
}

}  // namespace

void MrstftConfig::Validate() const {
  if (fft_sizes.empty()) throw Error(ErrorCode::kInvalidConfig, "no MRSTFT resolutions");
  for (int n : fft_sizes)
    if (n < 4 || !IsPowerOfTwo(static_cast<std::size_t>(n)))
      throw Error(ErrorCode::kInvalidConfig, "MRSTFT sizes must be powers of two >= 4");
}

MrstftResult Mrstft(std::span<const float> pred, std::span<const float> target,
                    const MrstftConfig& cfg) {
  RequireSameLength(pred, target);
  cfg.Validate();
  MrstftResult out;
  out.active_sizes = ActiveSizes(cfg, pred.size());
  if (out.active_sizes.empty())
    throw Error(ErrorCode::kTooShort, "signal shorter than every MRSTFT resolution");
  for (int n : out.active_sizes) {
    const auto r = EvalResolution(pred, target, n, 0.0, nullptr);
    out.spectral_convergence.push_back(r.sc);
    out.log_magnitude.push_back(r.log_mag);
    out.value += r.sc + r.log_mag;
  }
  out.value /= static_cast<double>(out.active_sizes.size());
  return out;
}

double MrstftWithGradient(std::span<const float> pred, std::span<const float> target,
                          const MrstftConfig& cfg, std::vector<double>& grad) {
  RequireSameLength(pred, target);
  cfg.Validate();
  const auto sizes = ActiveSizes(cfg, pred.size());
  if (sizes.empty())
    throw Error(ErrorCode::kTooShort, "signal shorter than every MRSTFT resolution");
  grad.assign(pred.size(), 0.0);
  const double w = 1.0 / static_cast<double>(sizes.size());
  double value = 0.0;
  for (int n : sizes) {
    const auto r = EvalResolution(pred, target, n, w, &grad);
    value += r.sc + r.log_mag;
  }
  return value * w;
}

E2eLossParts E2eLoss(std::span<const float> pred, std::span<const float> target, double alpha,
                     const MrstftConfig& cfg) {
  E2eLossParts out;
  out.mrstft = Mrstft(pred, target, cfg).value;
  double acc = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i)
    acc += std::abs(static_cast<double>(pred[i]) - target[i]);
  out.mae = pred.empty() ? 0.0 : acc / static_cast<double>(pred.size());
  out.total = out.mrstft + alpha * out.mae;
  return out;
}

E2eLossParts E2eLossWithGradient(std::span<const float> pred, std::span<const float> target,
                                 double alpha, const MrstftConfig& cfg,
                                 std::vector<double>& grad) {
  E2eLossParts out;
  out.mrstft = MrstftWithGradient(pred, target, cfg, grad);
  double acc = 0.0;
  const double scale = alpha / static_cast<double>(std::max<std::size_t>(pred.size(), 1));
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const double d = static_cast<double>(pred[i]) - target[i];
    acc += std::abs(d);
    if (d != 0.0) grad[i] += d > 0 ? scale : -scale;
  }
  out.mae = pred.empty() ? 0.0 : acc / static_cast<double>(pred.size());
  out.total = out.mrstft + alpha * out.mae;
  return out;
}

double KlWeight(long step, const KlScheduleConfig& cfg) {
  const double cycle = static_cast<double>(cfg.total_steps) / std::max(cfg.num_cycles, 1);
  if (cycle <= 0.0) return cfg.beta_max;
  const double phase = std::fmod(static_cast<double>(step), cycle) / cycle;
  return cfg.beta_max * std::min(1.0, phase / cfg.ramp_fraction);
}

}  // namespace ndst
