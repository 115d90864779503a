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
#include <cmath>
#include <cstddef>
#include <functional>
#include <memory>
#include <numeric>
#include <string>
#include <unordered_set>
#include <vector>

#include "ndst/error.hpp"

namespace ndst::nn {

using Shape = std::vector<int>;

inline std::size_t NumElements(const Shape& shape) {
  std::size_t n = 1;
  for (int d : shape) n *= static_cast<std::size_t>(d);
  return n;
}

inline std::string ShapeString(const Shape& shape) {
  std::string s = "[";
  for (std::size_t i = 0; i < shape.size(); ++i)
    s += (i ? "x" : "") + std::to_string(shape[i]);
  return s + "]";
}

// Dense row-major array.
template <typename T>
struct Tensor {
  Shape shape;
  std::vector<T> data;

  Tensor() = default;
  explicit Tensor(Shape s, T fill = T(0))
      : shape(std::move(s)), data(NumElements(shape), fill) {}
  Tensor(Shape s, std::vector<T> values) : shape(std::move(s)), data(std::move(values)) {
    if (data.size() != NumElements(shape))
      throw Error(ErrorCode::kShapeMismatch,
                  "data length does not match shape " + ShapeString(shape));
  }

  std::size_t size() const { return data.size(); }
  int dim(std::size_t i) const { return shape.at(i); }
  T* ptr() { return data.data(); }
  const T* ptr() const { return data.data(); }

  template <typename U>
  Tensor<U> Cast() const {
    Tensor<U> out;
    out.shape = shape;
    out.data.assign(data.begin(), data.end());
    return out;
  }
};

// Graph node. `grad` stays empty until a backward pass reaches the node.
template <typename T>
struct Node {
  Tensor<T> value;
  Tensor<T> grad;
  std::vector<std::shared_ptr<Node>> parents;
  std::function<void(Node&)> backward;
  bool requires_grad = false;

  T* GradPtr() {
    if (grad.data.size() != value.data.size()) grad = Tensor<T>(value.shape);
    return grad.ptr();
  }
  bool HasGrad() const { return grad.data.size() == value.data.size(); }
  void ZeroGrad() { grad = Tensor<T>(); }
};

template <typename T>
using Var = std::shared_ptr<Node<T>>;

template <typename T>
Var<T> Constant(Tensor<T> value) {
  auto node = std::make_shared<Node<T>>();
  node->value = std::move(value);
  return node;
}

// Trainable leaf.
template <typename T>
Var<T> Leaf(Tensor<T> value) {
  auto node = Constant(std::move(value));
  node->requires_grad = true;
  return node;
}

// Creates an interior node; `backward` reads node.grad and accumulates into
// the parents' gradients. Parents that do not require gradients are skipped
// by the op implementations.
template <typename T>
Var<T> MakeNode(Tensor<T> value, std::vector<Var<T>> parents,
                std::function<void(Node<T>&)> backward) {
  auto node = std::make_shared<Node<T>>();
  node->value = std::move(value);
  node->requires_grad =
      std::any_of(parents.begin(), parents.end(),
                  [](const Var<T>& p) { return p && p->requires_grad; });
  if (node->requires_grad) {
    node->parents = std::move(parents);
    node->backward = std::move(backward);
  }
  return node;
}

// Reverse-mode sweep from a scalar loss. Gradients accumulate into every
// reachable node that requires them; visiting order is a deterministic
// post-order over parent lists.
template <typename T>
void Backward(const Var<T>& loss) {
  if (loss->value.size() != 1)
    throw Error(ErrorCode::kNonScalarLoss,
                "loss has shape " + ShapeString(loss->value.shape));
  if (!loss->requires_grad) return;

  std::vector<Node<T>*> order;
  std::unordered_set<Node<T>*> seen;
  std::vector<std::pair<Node<T>*, std::size_t>> stack = {{loss.get(), 0}};
  seen.insert(loss.get());
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->parents.size()) {
      Node<T>* parent = node->parents[next++].get();
      if (parent && parent->requires_grad && seen.insert(parent).second)
        stack.push_back({parent, 0});
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }

  loss->GradPtr()[0] += T(1);
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    Node<T>* node = *it;
    if (node->backward && node->HasGrad()) node->backward(*node);
  }
}

}  // namespace ndst::nn
