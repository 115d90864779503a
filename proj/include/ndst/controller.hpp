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

#include <vector>

#include "ndst/nn/layers.hpp"

namespace ndst {

// Feed-forward map from the concatenated input/reference embeddings to a
// normalized parameter setting: hidden widths 128-128-64-32, each followed
// by layer normalization and LeakyReLU(1e-3), then a sigmoid output head.
template <typename T>
class Controller {
 public:
  static constexpr T kLeakySlope = T(1e-3);

  Controller(int input_dim, int param_count, Rng& rng)
      : input_dim_(input_dim), param_count_(param_count) {
    const int widths[4] = {128, 128, 64, 32};
    int in = input_dim;
    for (int i = 0; i < 4; ++i) {
      hidden_.emplace_back(store_, "controller.fc" + std::to_string(i), in, widths[i], rng);
      norms_.emplace_back(store_, "controller.ln" + std::to_string(i), widths[i]);
      in = widths[i];
    }
    out_ = nn::Linear<T>(store_, "controller.out", in, param_count, rng);
  }

  int input_dim() const { return input_dim_; }
  int param_count() const { return param_count_; }
  Controller(const Controller&) = delete;
  Controller& operator=(const Controller&) = delete;
  Controller(Controller&&) = default;

  nn::ParamStore<T>& params() { return store_; }
  const nn::ParamStore<T>& params() const { return store_; }

  // x [N, input_dim] -> theta [N, P] in (0, 1).
  nn::Var<T> operator()(const nn::Var<T>& x) const {
    nn::Var<T> h = x;
    for (std::size_t i = 0; i < hidden_.size(); ++i)
      h = nn::LeakyRelu(norms_[i](hidden_[i](h)), kLeakySlope);
    return nn::Sigmoid(out_(h));
  }

 private:
  int input_dim_;
  int param_count_;
  nn::ParamStore<T> store_;
  std::vector<nn::Linear<T>> hidden_;
  std::vector<nn::LayerNorm<T>> norms_;
  nn::Linear<T> out_;
};

}  // namespace ndst
