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

#include <functional>
#include <vector>

#include "ndst/nn/tensor.hpp"
#include "ndst/random.hpp"

namespace ndst::nn {

struct GradCheckResult {
  double max_relative_error = 0.0;
  int coordinates_checked = 0;
};

// Compares Backward() against central finite differences with step
// h = 1e-5 * max(1, |w|) on at most `max_coordinates` coordinates sampled
// across `wrt`. `loss_fn` must rebuild the graph from the current leaf
// values on every call. Relative error is |a - n| / max(|a|, |n|, floor).
inline GradCheckResult GradientCheck(const std::function<Var<double>()>& loss_fn,
                                     const std::vector<Var<double>>& wrt,
                                     int max_coordinates = 200, std::uint64_t seed = 1,
                                     double floor = 1e-6) {
  for (const auto& v : wrt) {
    v->ZeroGrad();
    v->requires_grad = true;
  }
  Backward(loss_fn());
  std::vector<std::pair<std::size_t, std::size_t>> coords;
  for (std::size_t k = 0; k < wrt.size(); ++k)
    for (std::size_t i = 0; i < wrt[k]->value.size(); ++i) coords.push_back({k, i});
  Rng rng(seed);
  for (std::size_t i = coords.size(); i > 1; --i)
    std::swap(coords[i - 1], coords[UniformIndex(rng, i)]);
  if (coords.size() > static_cast<std::size_t>(max_coordinates))
    coords.resize(static_cast<std::size_t>(max_coordinates));

  GradCheckResult result;
  for (auto [k, i] : coords) {
    auto& w = wrt[k]->value.data[i];
    const double analytic = wrt[k]->HasGrad() ? wrt[k]->grad.data[i] : 0.0;
    const double saved = w;
    const double h = 1e-5 * std::max(1.0, std::abs(saved));
    w = saved + h;
    const double up = loss_fn()->value.data[0];
    w = saved - h;
    const double down = loss_fn()->value.data[0];
    w = saved;
    const double numeric = (up - down) / (2.0 * h);
    const double denom = std::max({std::abs(analytic), std::abs(numeric), floor});
    result.max_relative_error =
        std::max(result.max_relative_error, std::abs(analytic - numeric) / denom);
    ++result.coordinates_checked;
  }
  return result;
}

}  // namespace ndst::nn
