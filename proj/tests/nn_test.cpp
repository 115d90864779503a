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

#include <catch2/catch_amalgamated.hpp>

#include "ndst/nn/gradcheck.hpp"
#include "ndst/nn/layers.hpp"
#include "ndst/nn/optim.hpp"

using namespace ndst;
using namespace ndst::nn;
using Catch::Approx;

namespace {

template <typename T>
Tensor<T> RandomTensor(Shape shape, Rng& rng, double lo = -1.0, double hi = 1.0) {
  Tensor<T> t(std::move(shape));
  for (auto& v : t.data) v = static_cast<T>(UniformRange(rng, lo, hi));
  return t;
}

// Scalar readout sum(y * r) with a fixed random r, so every output
// coordinate carries a distinct O(1) upstream gradient.
Var<double> Readout(const Var<double>& y, const Tensor<double>& r) {
  return Sum(Mul(y, Constant(r)));
}

}  // namespace

TEST_CASE("conv output extents follow the stride-2 recurrence", "[nn][conv]") {
  ConvGeometry geo;
  std::vector<int> h = {2049}, w = {127};
  for (int i = 0; i < 4; ++i) {
    h.push_back(detail::ConvOutExtent(h.back(), geo.kernel, geo.stride, geo.padding));
    w.push_back(detail::ConvOutExtent(w.back(), geo.kernel, geo.stride, geo.padding));
  }
  CHECK(h == std::vector<int>{2049, 1025, 513, 257, 129});
  CHECK(w == std::vector<int>{127, 64, 32, 16, 8});

  Rng rng(1);
  ParamStore<float> store;
  Conv2d<float> conv(store, "c", 1, 2, rng);
  auto x = Constant(Tensor<float>({1, 1, 65, 9}));
  auto y = conv(x);
  CHECK(y->value.shape == Shape{1, 2, 33, 5});
}

TEST_CASE("conv on a 1x1 input picks the centre tap", "[nn][conv]") {
  ParamStore<double> store;
  Rng rng(2);
  Conv2d<double> conv(store, "c", 1, 1, rng);
  auto x = Constant(Tensor<double>({1, 1, 1, 1}, 0.75));
  auto y = conv(x);
  REQUIRE(y->value.shape == Shape{1, 1, 1, 1});
  CHECK(y->value.data[0] == Approx(conv.weight->value.data[4] * 0.75));
}

TEST_CASE("transposed conv mirrors the encoder extents", "[nn][conv]") {
  ParamStore<float> store;
  Rng rng(3);
  ConvTranspose2d<float> up(store, "u", 2, 1, rng);
  std::vector<std::pair<int, int>> path = {{129, 8}, {257, 16}, {513, 32}, {1025, 64}, {2049, 127}};
  for (std::size_t i = 0; i + 1 < path.size(); ++i) {
    auto x = Constant(Tensor<float>({1, 2, path[i].first, path[i].second}));
    auto y = up(x, path[i + 1].first, path[i + 1].second);
    CHECK(y->value.shape == Shape{1, 1, path[i + 1].first, path[i + 1].second});
    for (float v : y->value.data) REQUIRE(v == 0.0f);  // zero input, zero bias
  }
  CHECK(ConvTransposeExtent(8, {}) == 15);
  auto x = Constant(Tensor<float>({1, 2, 8, 8}));
  CHECK_THROWS_AS(up(x, 20, 16), Error);
}

TEST_CASE("transposed conv is the adjoint of conv", "[nn][conv][oracle]") {
  Rng rng(4);
  for (auto [h, w] : std::vector<std::pair<int, int>>{{5, 5}, {6, 7}, {9, 4}}) {
    ParamStore<double> store;
    Conv2d<double> conv(store, "c", 2, 3, rng);
    auto zero_bias = Constant(Tensor<double>({2}));
    auto x = Constant(RandomTensor<double>({1, 2, h, w}, rng));
    auto cx = conv(x);
    // remove the bias contribution (zero-initialized, but be explicit)
    auto y = Constant(RandomTensor<double>(cx->value.shape, rng));
    auto cty = ConvTranspose2dOp(y, conv.weight, zero_bias, h, w);
    double lhs = 0.0, rhs = 0.0;
    for (std::size_t i = 0; i < cx->value.size(); ++i) lhs += cx->value.data[i] * y->value.data[i];
    for (std::size_t i = 0; i < x->value.size(); ++i) rhs += x->value.data[i] * cty->value.data[i];
    CHECK(lhs == Approx(rhs).epsilon(1e-10));
  }
}

TEST_CASE("activation values", "[nn]") {
  auto x = Constant(Tensor<double>({5}, std::vector<double>{-1.0, -50.0, 0.0, 2.0, 800.0}));
  auto lr = LeakyRelu(x, 1e-3);
  CHECK(lr->value.data[0] == Approx(-0.001));
  CHECK(lr->value.data[3] == 2.0);
  auto xf = Constant(Tensor<float>({4}, std::vector<float>{-30.0f, -3.0f, 3.0f, 15.0f}));
  auto s = Sigmoid(xf);
  for (float v : s->value.data) {
    CHECK(v > 0.0f);
    CHECK(v < 1.0f);
  }
  auto r = Relu(x);
  CHECK(r->value.data[0] == 0.0);
  CHECK(r->value.data[4] == 800.0);
}

TEST_CASE("layernorm of a constant row is zero before affine", "[nn]") {
  ParamStore<double> store;
  LayerNorm<double> ln(store, "ln", 6);
  auto x = Constant(Tensor<double>({2, 6}, 3.5));
  auto y = ln(x);
  for (double v : y->value.data) CHECK(v == 0.0);
}

TEST_CASE("backward on simple graphs", "[nn][autograd]") {
  auto w = Leaf(Tensor<double>({3}, std::vector<double>{0.5, -1.0, 2.0}));
  auto unused = Leaf(Tensor<double>({2}, 1.0));
  Tensor<double> xv({3}, std::vector<double>{1.5, -2.0, 4.0});
  auto loss = Sum(Mul(w, Constant(xv)));
  Backward(loss);
  CHECK(w->grad.data == xv.data);
  CHECK_FALSE(unused->HasGrad());

  auto vec = Mul(w, Constant(xv));
  try {
    Backward(vec);
    FAIL("expected NonScalarLoss");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::kNonScalarLoss);
  }
}

TEST_CASE("shared subexpressions accumulate gradients", "[nn][autograd]") {
  auto a = Leaf(Tensor<double>({2}, std::vector<double>{1.0, 3.0}));
  auto b = Mul(a, a);
  auto loss = Sum(Add(b, b));  // d/da 2a^2 = 4a
  Backward(loss);
  CHECK(a->grad.data[0] == Approx(4.0));
  CHECK(a->grad.data[1] == Approx(12.0));
}

TEST_CASE("gradient check: linear layer", "[nn][gradcheck]") {
  Rng rng(10);
  ParamStore<double> store;
  Linear<double> lin(store, "l", 7, 5, rng);
  auto x = Leaf(RandomTensor<double>({3, 7}, rng));
  auto r = RandomTensor<double>({3, 5}, rng);
  auto res = GradientCheck([&] { return Readout(lin(x), r); }, {lin.weight, lin.bias, x});
  CHECK(res.max_relative_error <= 1e-6);
}

TEST_CASE("gradient check: two-layer MLP with leaky relu", "[nn][gradcheck]") {
  Rng rng(11);
  ParamStore<double> store;
  Linear<double> l1(store, "l1", 6, 8, rng), l2(store, "l2", 8, 3, rng);
  auto x = Leaf(RandomTensor<double>({4, 6}, rng));
  auto r = RandomTensor<double>({4, 3}, rng);
  // Keep pre-activations away from the kink by at least 1e-3.
  auto pre = l1(x);
  for (double v : pre->value.data) REQUIRE(std::abs(v) > 1e-3);
  auto res = GradientCheck([&] { return Readout(l2(LeakyRelu(l1(x), 1e-3)), r); },
                           {l1.weight, l1.bias, l2.weight, l2.bias, x});
  CHECK(res.max_relative_error <= 1e-5);
}

TEST_CASE("gradient check: conv2d + batchnorm in training mode", "[nn][gradcheck]") {
  Rng rng(12);
  ParamStore<double> store;
  Conv2d<double> conv(store, "c", 2, 3, rng);
  BatchNorm2d<double> bn(store, "bn", 3);
  auto x = Leaf(RandomTensor<double>({4, 2, 7, 6}, rng));
  auto r = RandomTensor<double>({4, 3, 4, 3}, rng);
  auto res = GradientCheck([&] { return Readout(bn(conv(x), true), r); },
                           {conv.weight, conv.bias, bn.gamma, bn.beta, x});
  CHECK(res.max_relative_error <= 1e-4);
}

TEST_CASE("gradient check: remaining primitives", "[nn][gradcheck]") {
  Rng rng(13);
  ParamStore<double> store;
  ConvTranspose2d<double> up(store, "u", 3, 2, rng);
  LayerNorm<double> ln(store, "ln", 5);
  for (auto& v : ln.gamma->value.data) v = UniformRange(rng, 0.5, 1.5);
  BatchNorm2d<double> bn(store, "bn", 3);
  for (auto& v : bn.running_var->value.data) v = UniformRange(rng, 0.5, 2.0);

  auto img = Leaf(RandomTensor<double>({2, 3, 4, 5}, rng));
  auto r_up = RandomTensor<double>({2, 2, 8, 9}, rng);
  CHECK(GradientCheck([&] { return Readout(up(img, 8, 9), r_up); },
                      {up.weight, up.bias, img})
            .max_relative_error <= 1e-4);

  auto r_bn = RandomTensor<double>({2, 3, 4, 5}, rng);
  CHECK(GradientCheck([&] { return Readout(bn(img, false), r_bn); },
                      {bn.gamma, bn.beta, img})
            .max_relative_error <= 1e-4);

  auto row = Leaf(RandomTensor<double>({3, 5}, rng));
  auto r_row = RandomTensor<double>({3, 5}, rng);
  CHECK(GradientCheck([&] { return Readout(ln(row), r_row); }, {ln.gamma, ln.beta, row})
            .max_relative_error <= 1e-4);
  CHECK(GradientCheck([&] { return Readout(Sigmoid(row), r_row); }, {row})
            .max_relative_error <= 1e-4);
  CHECK(GradientCheck([&] { return Readout(Exp(row), r_row); }, {row}).max_relative_error <=
        1e-4);
  CHECK(GradientCheck([&] { return Mean(Square(Sub(row, Scale(row, 0.3)))); }, {row})
            .max_relative_error <= 1e-4);
  auto other = Leaf(RandomTensor<double>({3, 2}, rng));
  auto r_cat = RandomTensor<double>({3, 7}, rng);
  CHECK(GradientCheck([&] { return Readout(ConcatColumns(row, other), r_cat); }, {row, other})
            .max_relative_error <= 1e-4);
  auto r_flat = RandomTensor<double>({2, 60}, rng);
  CHECK(GradientCheck([&] { return Readout(Reshape(img, {2, 60}), r_flat); }, {img})
            .max_relative_error <= 1e-4);
}

TEST_CASE("batchnorm inference is a per-channel affine map", "[nn][property]") {
  Rng rng(14);
  ParamStore<double> store;
  BatchNorm2d<double> bn(store, "bn", 2);
  // Train the running statistics on a few batches.
  for (int i = 0; i < 5; ++i) bn(Constant(RandomTensor<double>({3, 2, 4, 4}, rng, 1.0, 3.0)), true);
  auto probe = [&](double v, int channel) {
    Tensor<double> t({1, 2, 1, 1});
    t.data[channel] = v;
    return bn(Constant(t), false)->value.data[channel];
  };
  for (int c = 0; c < 2; ++c) {
    const double b = probe(0.0, c);
    const double slope = probe(1.0, c) - b;
    for (double v : {-3.0, 0.5, 7.0}) CHECK(probe(v, c) == Approx(b + slope * v).epsilon(1e-12));
  }
  CHECK(bn.running_mean->value.data[0] == Approx(2.0 * (1.0 - std::pow(0.9, 5))).epsilon(0.1));
}

TEST_CASE("forward is deterministic", "[nn]") {
  auto run = [] {
    Rng rng(15);
    ParamStore<float> store;
    Conv2d<float> conv(store, "c", 1, 4, rng);
    BatchNorm2d<float> bn(store, "bn", 4);
    auto x = Constant(RandomTensor<float>({2, 1, 9, 9}, rng));
    return Relu(bn(conv(x), true))->value.data;
  };
  CHECK(run() == run());
}

TEST_CASE("adam decreases a quadratic and clipping bounds the norm", "[nn][optim]") {
  ParamStore<double> store;
  auto w = store.Add("w", Tensor<double>({4}, std::vector<double>{3, -2, 1, 5}));
  Adam<double> adam(store);
  double first = 0.0, last = 0.0;
  for (int step = 0; step < 200; ++step) {
    store.ZeroGrad();
    auto loss = Sum(Square(w));
    if (step == 0) first = loss->value.data[0];
    last = loss->value.data[0];
    Backward(loss);
    adam.Step(0.05);
  }
  CHECK(last < 0.1 * first);

  store.ZeroGrad();
  Backward(Scale(Sum(Square(w)), 1000.0));
  ClipGradientNorm(store, 5.0);
  CHECK(GradientNorm(store) == Approx(5.0));
}
