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

#include "ndst/spsa.hpp"

#include <cmath>

#include "ndst/error.hpp"

namespace ndst {

void SpsaConfig::Validate() const {
  if (!(epsilon > 0.0 && epsilon < 0.5))
    throw Error(ErrorCode::kInvalidConfig, "SPSA epsilon must be in (0, 0.5)");
  if (num_draws < 1) throw Error(ErrorCode::kInvalidConfig, "SPSA num_draws must be >= 1");
}

ParamVector ClampTheta(const ParamVector& theta, double epsilon) {
  ParamVector out = theta;
  for (auto& v : out.values) v = std::clamp(v, epsilon, 1.0 - epsilon);
  return out;
}

AudioBuffer EffectForward(std::string_view effect_id, const AudioBuffer& audio,
                          const ParamVector& theta, EffectContext* ctx) {
  AudioBuffer out = Process(effect_id, audio, theta);
  if (ctx) {
    ctx->effect_id = std::string(effect_id);
    ctx->audio = audio;
    ctx->theta = theta;
  }
  return out;
}

std::vector<std::vector<int>> DrawRademacher(std::size_t dim, int count, Rng& rng) {
  std::vector<std::vector<int>> out(static_cast<std::size_t>(count), std::vector<int>(dim));
  for (auto& d : out)
    for (auto& v : d) v = Rademacher(rng);
  return out;
}

std::vector<double> SpsaEstimate(const ThetaFunction& f, std::span<const double> theta,
                                 std::span<const float> upstream, double epsilon,
                                 const std::vector<std::vector<int>>& deltas) {
  const std::size_t dim = theta.size();
  std::vector<double> grad(dim, 0.0);
  if (deltas.empty()) return grad;
  const bool silent =
      std::all_of(upstream.begin(), upstream.end(), [](float u) { return u == 0.0f; });
  if (silent) return grad;
  std::vector<double> plus(dim), minus(dim);
  for (const auto& delta : deltas) {
    if (delta.size() != dim)
      throw Error(ErrorCode::kDimensionMismatch, "perturbation length differs from theta");
    for (std::size_t i = 0; i < dim; ++i) {
      plus[i] = std::clamp(theta[i] + epsilon * delta[i], 0.0, 1.0);
      minus[i] = std::clamp(theta[i] - epsilon * delta[i], 0.0, 1.0);
    }
    const auto yp = f(plus);
    const auto ym = f(minus);
    if (yp.size() != upstream.size() || ym.size() != upstream.size())
      throw Error(ErrorCode::kLengthMismatch, "upstream gradient length differs from output");
    double dot = 0.0;
    for (std::size_t k = 0; k < upstream.size(); ++k)
      dot += static_cast<double>(upstream[k]) * (static_cast<double>(yp[k]) - ym[k]);
    const double d = dot / (2.0 * epsilon);
    for (std::size_t i = 0; i < dim; ++i) grad[i] += d * delta[i];
  }
  for (auto& g : grad) g /= static_cast<double>(deltas.size());
  return grad;
}

std::vector<double> EffectBackward(std::span<const float> upstream, const EffectContext& ctx,
                                   const SpsaConfig& cfg, Rng& rng) {
  cfg.Validate();
  if (upstream.size() != ctx.audio.samples.size())
    throw Error(ErrorCode::kLengthMismatch, "upstream gradient length differs from audio");
  const auto deltas = DrawRademacher(ctx.theta.values.size(), cfg.num_draws, rng);
  const ThetaFunction f = [&](const std::vector<double>& v) {
    return Process(ctx.effect_id, ctx.audio, ParamVector{ctx.effect_id, v}).samples;
  };
  return SpsaEstimate(f, ctx.theta.values, upstream, cfg.epsilon, deltas);
}

std::vector<double> EffectBackward(std::span<const float> upstream, const EffectContext& ctx,
                                   const SpsaConfig& cfg) {
  Rng rng(cfg.seed);
  return EffectBackward(upstream, ctx, cfg, rng);
}

}  // namespace ndst
