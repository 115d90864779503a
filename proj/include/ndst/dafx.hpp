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

#include <string>
#include <string_view>
#include <vector>

#include "ndst/audio.hpp"
#include "ndst/random.hpp"

namespace ndst {

enum class ParamMapping { kLinear, kLogarithmic };

struct ParamSpec {
  std::string name;
  double physical_min = 0.0;
  double physical_max = 1.0;
  ParamMapping mapping = ParamMapping::kLinear;
  std::string unit;
};

struct EffectDescriptor {
  std::string id;
  std::string effect_class;
  bool held_out = false;  // not used for encoder training
  std::vector<ParamSpec> params;  // order defines theta coordinates

  std::size_t param_count() const { return params.size(); }
  // Index of `name` in params, or -1.
  int IndexOf(std::string_view name) const;
};

// A normalized setting theta in [0, 1]^P for one effect.
struct ParamVector {
  std::string effect_id;
  std::vector<double> values;
};

// All nine effects: six training effects followed by three held-out ones.
const std::vector<EffectDescriptor>& ListEffects();

// Training rotation order used by encoder training.
const std::vector<std::string>& TrainingEffectIds();

// Throws UnknownEffect with the list of valid ids.
const EffectDescriptor& FindEffect(std::string_view id);

// Throws DimensionMismatch on wrong length, wrong effect or a coordinate
// outside [0, 1].
void ValidateTheta(const EffectDescriptor& effect, const ParamVector& theta);

double DenormalizeValue(const ParamSpec& spec, double t);
std::vector<double> Denormalize(const EffectDescriptor& effect,
                                const ParamVector& theta);

// Applies the effect. Output has the input's length and rate; all internal
// state is created and zeroed per call.
AudioBuffer Process(std::string_view effect_id, const AudioBuffer& audio,
                    const ParamVector& theta);

// Each coordinate i.i.d. uniform on [0, 1].
ParamVector RandomTheta(std::string_view effect_id, Rng& rng);

}  // namespace ndst
