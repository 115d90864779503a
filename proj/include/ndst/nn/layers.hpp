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
#include <utility>
#include <vector>

#include "ndst/nn/ops.hpp"
#include "ndst/random.hpp"

namespace ndst::nn {

// Named parameter arrays owned by one model. Buffers (running statistics)
// are stored alongside trainable weights so checkpoints capture both.
template <typename T>
class ParamStore {
 public:
  struct Entry {
    std::string name;
    Var<T> var;
    bool trainable;
  };

  Var<T> Add(const std::string& name, Tensor<T> value, bool trainable = true) {
    for (const auto& e : entries_)
      if (e.name == name)
        throw Error(ErrorCode::kShapeMismatch, "duplicate parameter name " + name);
    auto var = trainable ? Leaf(std::move(value)) : Constant(std::move(value));
    entries_.push_back({name, var, trainable});
    return var;
  }

  const std::vector<Entry>& entries() const { return entries_; }

  Var<T> Find(const std::string& name) const {
    for (const auto& e : entries_)
      if (e.name == name) return e.var;
    return nullptr;
  }

  void ZeroGrad() {
    for (auto& e : entries_) e.var->ZeroGrad();
  }

  // Freezing turns trainable leaves into constants for graph purposes.
  void SetRequiresGrad(bool on) {
    for (auto& e : entries_)
      if (e.trainable) e.var->requires_grad = on;
  }

  std::size_t ParameterCount() const {
    std::size_t n = 0;
    for (const auto& e : entries_)
      if (e.trainable) n += e.var->value.size();
    return n;
  }

 private:
  std::vector<Entry> entries_;
};

// Kaiming-uniform: U(-b, b) with b = sqrt(6 / fan_in).
template <typename T>
Tensor<T> KaimingUniform(Shape shape, int fan_in, Rng& rng) {
  Tensor<T> t(std::move(shape));
  const double bound = std::sqrt(6.0 / static_cast<double>(fan_in));
  for (auto& v : t.data) v = static_cast<T>(UniformRange(rng, -bound, bound));
  return t;
}

template <typename T>
struct Linear {
  Var<T> weight, bias;

  Linear() = default;
  Linear(ParamStore<T>& store, const std::string& name, int in, int out, Rng& rng)
      : weight(store.Add(name + ".weight", KaimingUniform<T>({out, in}, in, rng))),
        bias(store.Add(name + ".bias", Tensor<T>({out}))) {}

  Var<T> operator()(const Var<T>& x) const { return LinearOp(x, weight, bias); }
};

template <typename T>
struct Conv2d {
  Var<T> weight, bias;
  ConvGeometry geo;

  Conv2d() = default;
  Conv2d(ParamStore<T>& store, const std::string& name, int in, int out, Rng& rng,
         ConvGeometry g = {})
      : weight(store.Add(name + ".weight",
                         KaimingUniform<T>({out, in, g.kernel, g.kernel},
                                           in * g.kernel * g.kernel, rng))),
        bias(store.Add(name + ".bias", Tensor<T>({out}))),
        geo(g) {}

  Var<T> operator()(const Var<T>& x) const { return Conv2dOp(x, weight, bias, geo); }
};

template <typename T>
struct ConvTranspose2d {
  Var<T> weight, bias;
  ConvGeometry geo;

  ConvTranspose2d() = default;
  ConvTranspose2d(ParamStore<T>& store, const std::string& name, int in, int out, Rng& rng,
                  ConvGeometry g = {})
      : weight(store.Add(name + ".weight",
                         KaimingUniform<T>({in, out, g.kernel, g.kernel},
                                           in * g.kernel * g.kernel, rng))),
        bias(store.Add(name + ".bias", Tensor<T>({out}))),
        geo(g) {}

  Var<T> operator()(const Var<T>& x, int out_h, int out_w) const {
    return ConvTranspose2dOp(x, weight, bias, out_h, out_w, geo);
  }
};

template <typename T>
struct BatchNorm2d {
  Var<T> gamma, beta, running_mean, running_var;
  T momentum = T(0.1);
  T eps = T(1e-5);

  BatchNorm2d() = default;
  BatchNorm2d(ParamStore<T>& store, const std::string& name, int channels)
      : gamma(store.Add(name + ".gamma", Tensor<T>({channels}, T(1)))),
        beta(store.Add(name + ".beta", Tensor<T>({channels}))),
        running_mean(store.Add(name + ".running_mean", Tensor<T>({channels}), false)),
        running_var(store.Add(name + ".running_var", Tensor<T>({channels}, T(1)), false)) {}

  Var<T> operator()(const Var<T>& x, bool training) const {
    return BatchNorm2dOp(x, gamma, beta, running_mean->value, running_var->value, training,
                         momentum, eps);
  }
};

template <typename T>
struct LayerNorm {
  Var<T> gamma, beta;

  LayerNorm() = default;
  LayerNorm(ParamStore<T>& store, const std::string& name, int features)
      : gamma(store.Add(name + ".gamma", Tensor<T>({features}, T(1)))),
        beta(store.Add(name + ".beta", Tensor<T>({features}))) {}

  Var<T> operator()(const Var<T>& x) const { return LayerNormOp(x, gamma, beta); }
};

}  // namespace ndst::nn
