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

#include <algorithm>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "ndst/audio.hpp"
#include "ndst/dafx.hpp"
#include "ndst/losses.hpp"
#include "ndst/nn/tensor.hpp"
#include "ndst/random.hpp"

namespace ndst {

struct SpsaConfig {
  double epsilon = 1e-2;  // normalized parameter units
  int num_draws = 1;
  std::uint64_t seed = 0;

  void Validate() const;
};

// Clips each coordinate to [epsilon, 1 - epsilon].
ParamVector ClampTheta(const ParamVector& theta, double epsilon);

// Recorded forward call.
struct EffectContext {
  std::string effect_id;
  AudioBuffer audio;
  ParamVector theta;
};

// Same output as Process; fills `ctx` for the backward pass.
AudioBuffer EffectForward(std::string_view effect_id, const AudioBuffer& audio,
                          const ParamVector& theta, EffectContext* ctx = nullptr);

// Maps a P-vector in [0, 1]^P to an output signal.
using ThetaFunction = std::function<std::vector<float>(const std::vector<double>&)>;

// Averages d * delta over the given Rademacher vectors, where
// d = <upstream, f(clip(theta + eps*delta)) - f(clip(theta - eps*delta))> / (2 eps).
std::vector<double> SpsaEstimate(const ThetaFunction& f, std::span<const double> theta,
                                 std::span<const float> upstream, double epsilon,
                                 const std::vector<std::vector<int>>& deltas);

std::vector<std::vector<int>> DrawRademacher(std::size_t dim, int count, Rng& rng);

// Gradient of the loss w.r.t. theta given d(loss)/d(output). The gradient to
// the input audio is not estimated.
std::vector<double> EffectBackward(std::span<const float> upstream, const EffectContext& ctx,
                                   const SpsaConfig& cfg, Rng& rng);
std::vector<double> EffectBackward(std::span<const float> upstream, const EffectContext& ctx,
                                   const SpsaConfig& cfg);

struct EffectLossTerms {
  std::vector<E2eLossParts> parts;  // per example
  std::vector<AudioBuffer> outputs;
};

// Graph node: theta [N, P] -> mean over the batch of the audio-domain loss of
// effect(inputs[n], clamp(theta[n])) against targets[n]. Backward crosses the
// effect with SPSA (draws taken from `rng` during the forward call) and passes
// the clamp straight through.
template <typename T>
nn::Var<T> EffectLoss(const nn::Var<T>& theta, const std::string& effect_id,
                  const std::vector<AudioBuffer>& inputs, const std::vector<AudioBuffer>& targets,
                  double alpha, const MrstftConfig& mrstft, const SpsaConfig& spsa, Rng& rng,
                  EffectLossTerms* terms = nullptr) {
  const auto& desc = FindEffect(effect_id);
  const int batch = theta->value.shape.at(0);
  const int params = theta->value.shape.at(1);
  if (params != static_cast<int>(desc.param_count()) || inputs.size() != static_cast<std::size_t>(batch) ||
      targets.size() != inputs.size())
    throw Error(ErrorCode::kDimensionMismatch, "effect loss batch does not match theta");
  spsa.Validate();

  struct Item {
    EffectContext ctx;
    std::vector<float> upstream;
    std::vector<std::vector<int>> deltas;
  };
  auto items = std::make_shared<std::vector<Item>>(batch);
  double total = 0.0;
  if (terms) {
    terms->parts.assign(batch, {});
    terms->outputs.assign(batch, {});
  }
  for (int n = 0; n < batch; ++n) {
    ParamVector p{effect_id, std::vector<double>(params)};
    for (int i = 0; i < params; ++i) p.values[i] = static_cast<double>(theta->value.data[n * params + i]);
    Item& item = (*items)[n];
    const AudioBuffer y = EffectForward(effect_id, inputs[n], ClampTheta(p, spsa.epsilon), &item.ctx);
    std::vector<double> grad;
    const auto parts = E2eLossWithGradient(y.samples, targets[n].samples, alpha, mrstft, grad);
    item.upstream.resize(grad.size());
    for (std::size_t k = 0; k < grad.size(); ++k)
      item.upstream[k] = static_cast<float>(grad[k] / batch);
    item.deltas = DrawRademacher(static_cast<std::size_t>(params), spsa.num_draws, rng);
    total += parts.total;
    if (terms) {
      terms->parts[n] = parts;
      terms->outputs[n] = y;
    }
  }
  nn::Tensor<T> value({1});
  value.data[0] = static_cast<T>(total / batch);
  const double eps = spsa.epsilon;
  return nn::MakeNode<T>(std::move(value), {theta}, [items, eps, params](nn::Node<T>& node) {
    auto& parent = *node.parents[0];
    if (!parent.requires_grad) return;
    const double g_out = static_cast<double>(node.grad.data[0]);
    T* g = parent.GradPtr();
    for (std::size_t n = 0; n < items->size(); ++n) {
      const Item& item = (*items)[n];
      const std::string& id = item.ctx.effect_id;
      const AudioBuffer& audio = item.ctx.audio;
      const ThetaFunction f = [&](const std::vector<double>& v) {
        return Process(id, audio, ParamVector{id, v}).samples;
      };
      const auto est = SpsaEstimate(f, item.ctx.theta.values, item.upstream, eps, item.deltas);
      for (int i = 0; i < params; ++i) g[n * params + i] += static_cast<T>(g_out * est[i]);
    }
  });
}

}  // namespace ndst
