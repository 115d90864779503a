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
#include <vector>

#include "ndst/nn/layers.hpp"

namespace ndst::nn {

struct AdamConfig {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

// Adam over the trainable entries of one or more ParamStores. Entries
// without a gradient (unreachable or frozen this step) are left untouched.
template <typename T>
class Adam {
 public:
  explicit Adam(std::vector<ParamStore<T>*> stores, AdamConfig cfg = {}) : cfg_(cfg) {
    for (auto* store : stores)
      for (const auto& e : store->entries()) {
        entries_.push_back(e);
        m_.emplace_back(e.var->value.size(), 0.0);
        v_.emplace_back(e.var->value.size(), 0.0);
      }
  }
  explicit Adam(ParamStore<T>& store, AdamConfig cfg = {}) : Adam(std::vector{&store}, cfg) {}

  void Step(double lr) {
    ++t_;
    const double c1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
    const double c2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
    const auto& entries = entries_;
    for (std::size_t k = 0; k < entries.size(); ++k) {
      const auto& e = entries[k];
      if (!e.trainable || !e.var->requires_grad || !e.var->HasGrad()) continue;
      auto& w = e.var->value.data;
      const auto& g = e.var->grad.data;
      for (std::size_t i = 0; i < w.size(); ++i) {
        const double gi = g[i];
        m_[k][i] = cfg_.beta1 * m_[k][i] + (1.0 - cfg_.beta1) * gi;
        v_[k][i] = cfg_.beta2 * v_[k][i] + (1.0 - cfg_.beta2) * gi * gi;
        const double mhat = m_[k][i] / c1;
        const double vhat = v_[k][i] / c2;
        w[i] = static_cast<T>(w[i] - lr * mhat / (std::sqrt(vhat) + cfg_.eps));
      }
    }
  }

  long steps() const { return t_; }

 private:
  std::vector<typename ParamStore<T>::Entry> entries_;
  AdamConfig cfg_;
  std::vector<std::vector<double>> m_, v_;
  long t_ = 0;
};

template <typename T>
double GradientNorm(const ParamStore<T>& store) {
  double acc = 0.0;
  for (const auto& e : store.entries())
    if (e.trainable && e.var->HasGrad())
      for (T g : e.var->grad.data) acc += static_cast<double>(g) * g;
  return std::sqrt(acc);
}

// Rescales all gradients so their global L2 norm is at most `max_norm`.
// Returns the norm before clipping.
template <typename T>
double ClipGradientNorm(ParamStore<T>& store, double max_norm) {
  const double norm = GradientNorm(store);
  if (norm > max_norm && norm > 0.0) {
    const double s = max_norm / norm;
    for (const auto& e : store.entries())
      if (e.trainable && e.var->HasGrad())
        for (T& g : e.var->grad.data) g = static_cast<T>(g * s);
  }
  return norm;
}

// Global clipping across several stores.
template <typename T>
double ClipGradientNorm(const std::vector<ParamStore<T>*>& stores, double max_norm) {
  double acc = 0.0;
  for (const auto* store : stores) acc += GradientNorm(*store) * GradientNorm(*store);
  const double norm = std::sqrt(acc);
  if (norm > max_norm && norm > 0.0) {
    const double s = max_norm / norm;
    for (auto* store : stores)
      for (const auto& e : store->entries())
        if (e.trainable && e.var->HasGrad())
          for (T& g : e.var->grad.data) g = static_cast<T>(g * s);
  }
  return norm;
}

}  // namespace ndst::nn
