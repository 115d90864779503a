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

#include "ndst/controller.hpp"
#include "ndst/nn/gradcheck.hpp"
#include "ndst/nn/optim.hpp"
#include "ndst/vae.hpp"

using namespace ndst;
using namespace ndst::nn;
using Catch::Approx;

namespace {

template <typename T>
Tensor<T> RandomTensor(Shape shape, Rng& rng, double lo = 0.0, double hi = 1.0) {
  Tensor<T> t(std::move(shape));
  for (auto& v : t.data) v = static_cast<T>(UniformRange(rng, lo, hi));
  return t;
}

EncoderShape TinyShape() {
  EncoderShape s;
  s.freq_bins = 17;
  s.frames = 9;
  return s;
}

}  // namespace

TEST_CASE("paper preset geometry", "[vae]") {
  const auto shape = Preset::Paper().encoder_shape();
  CHECK(shape.freq_bins == 2049);
  CHECK(shape.frames == 127);
  CHECK(shape.FlattenSize() == 33024);
  const auto desk = Preset::Desk().encoder_shape();
  CHECK(desk.freq_bins == 513);
  CHECK(desk.frames == 127);
  CHECK(desk.FlattenSize() == 32 * 33 * 8);
}

TEST_CASE("paper preset encodes to 128-d and decodes to the input shape", "[vae][slow]") {
  Rng rng(1);
  SpectroVae<float> vae(Preset::Paper().encoder_shape(), rng);
  auto x = Constant(RandomTensor<float>({1, 1, 2049, 127}, rng));
  auto code = vae.encoder.Encode(x, false);
  CHECK(code.mu->value.shape == Shape{1, 128});
  CHECK(code.log_var->value.shape == Shape{1, 128});
  auto y = vae.decoder.Decode(code.z, false);
  CHECK(y->value.shape == Shape{1, 1, 2049, 127});
}

TEST_CASE("encode/decode contracts on the desk preset", "[vae]") {
  Rng rng(2);
  const auto shape = Preset::Desk().encoder_shape();
  SpectroVae<float> vae(shape, rng);
  auto x = Constant(RandomTensor<float>({2, 1, shape.freq_bins, shape.frames}, rng));

  auto det = vae.encoder.Encode(x, false);
  CHECK(det.z->value.data == det.mu->value.data);

  Rng s1(10), s2(11);
  auto a = vae.encoder.Encode(x, false, &s1);
  auto b = vae.encoder.Encode(x, false, &s2);
  CHECK(a.mu->value.data == b.mu->value.data);
  CHECK(a.log_var->value.data == b.log_var->value.data);
  CHECK(a.z->value.data != b.z->value.data);

  auto y1 = vae.decoder.Decode(det.z, false);
  auto y2 = vae.decoder.Decode(det.z, false);
  CHECK(y1->value.shape == x->value.shape);
  CHECK(y1->value.data == y2->value.data);
  for (float v : y1->value.data) REQUIRE((v >= 0.0f && v <= 1.0f));

  auto wrong = Constant(Tensor<float>({1, 1, 100, 127}));
  CHECK_THROWS_AS(vae.encoder.Encode(wrong, false), Error);
  CHECK_THROWS_AS(vae.decoder.Decode(Constant(Tensor<float>({1, 64})), false), Error);
}

TEST_CASE("vae loss terms", "[vae][loss]") {
  auto target = Constant(Tensor<double>({1, 1, 2, 2}, std::vector<double>{0.1, 0.2, 0.3, 0.4}));
  LatentCode<double> zero{Constant(Tensor<double>({1, 4})), Constant(Tensor<double>({1, 4})),
                          nullptr};
  auto l0 = ComputeVaeLoss(target, target, zero, 1.0);
  CHECK(l0.reconstruction == 0.0);
  CHECK(l0.kl == 0.0);
  CHECK(l0.total->value.data[0] == 0.0);

  LatentCode<double> one{Constant(Tensor<double>({1, 1}, 1.0)), Constant(Tensor<double>({1, 1})),
                         nullptr};
  auto l1 = ComputeVaeLoss(target, target, one, 1.0);
  CHECK(l1.kl == Approx(0.5));

  auto recon = Constant(Tensor<double>({1, 1, 2, 2}, 0.5));
  auto l2 = ComputeVaeLoss(recon, target, one, 0.0);
  CHECK(l2.total->value.data[0] == Approx(l2.reconstruction));
  CHECK(l2.reconstruction == Approx((0.16 + 0.09 + 0.04 + 0.01) / 4));
  auto l3 = ComputeVaeLoss(recon, target, one, 0.3);
  CHECK(l3.total->value.data[0] == Approx(l3.reconstruction + 0.3 * l3.kl));

  CHECK_THROWS_AS(ComputeVaeLoss(Constant(Tensor<double>({1, 1, 2, 3})), target, one, 1.0),
                  Error);
}

TEST_CASE("kl term is non-negative", "[vae][property]") {
  Rng rng(3);
  auto target = Constant(Tensor<double>({2, 1, 1, 1}));
  for (int trial = 0; trial < 200; ++trial) {
    LatentCode<double> code{Constant(RandomTensor<double>({2, 16}, rng, -3, 3)),
                            Constant(RandomTensor<double>({2, 16}, rng, -6, 4)), nullptr};
    REQUIRE(ComputeVaeLoss(target, target, code, 1.0).kl >= -1e-6);
  }
}

TEST_CASE("one optimization step lowers reconstruction on a fixed batch", "[vae]") {
  Rng rng(4);
  const auto shape = TinyShape();
  SpectroVae<float> vae(shape, rng);
  Adam<float> adam({&vae.encoder.params(), &vae.decoder.params()});
  auto x = Constant(RandomTensor<float>({4, 1, shape.freq_bins, shape.frames}, rng));
  auto step_loss = [&] {
    auto code = vae.encoder.Encode(x, true);
    return ComputeVaeLoss(vae.decoder.Decode(code.z, true), x, code, 0.0);
  };
  vae.encoder.params().ZeroGrad();
  vae.decoder.params().ZeroGrad();
  auto before = step_loss();
  Backward(before.total);
  adam.Step(5e-4);
  auto after = step_loss();
  CHECK(after.reconstruction < before.reconstruction);
}

TEST_CASE("gradient check: full encoder stack", "[vae][gradcheck]") {
  Rng rng(5);
  Encoder<double> enc(TinyShape(), rng);
  auto x = Constant(RandomTensor<double>({3, 1, 17, 9}, rng));
  auto r1 = RandomTensor<double>({3, 128}, rng, -1, 1);
  auto r2 = RandomTensor<double>({3, 128}, rng, -1, 1);
  std::vector<Var<double>> wrt;
  for (const auto& e : enc.params().entries())
    if (e.trainable) wrt.push_back(e.var);
  auto res = GradientCheck(
      [&] {
        auto code = enc.Encode(x, true);
        return Add(Sum(Mul(code.mu, Constant(r1))), Sum(Mul(code.log_var, Constant(r2))));
      },
      wrt, 200, 7);
  CHECK(res.coordinates_checked == 200);
  CHECK(res.max_relative_error <= 1e-3);
}

TEST_CASE("gradient check: full decoder stack with vae loss", "[vae][gradcheck]") {
  Rng rng(6);
  SpectroVae<double> vae(TinyShape(), rng);
  auto x = Constant(RandomTensor<double>({2, 1, 17, 9}, rng));
  std::vector<Var<double>> wrt;
  for (auto* store : {&vae.encoder.params(), &vae.decoder.params()})
    for (const auto& e : store->entries())
      if (e.trainable) wrt.push_back(e.var);
  auto res = GradientCheck(
      [&] {
        Rng eps(99);  // same noise on every evaluation
        auto code = vae.encoder.Encode(x, true, &eps);
        return ComputeVaeLoss(vae.decoder.Decode(code.z, true), x, code, 0.5).total;
      },
      wrt, 200, 8);
  CHECK(res.max_relative_error <= 1e-3);
}

TEST_CASE("controller shape and gradient check", "[controller][gradcheck]") {
  Rng rng(7);
  Controller<double> ctl(256, 3, rng);
  auto x = Leaf(RandomTensor<double>({4, 256}, rng, -1, 1));
  auto y = ctl(x);
  CHECK(y->value.shape == Shape{4, 3});
  for (double v : y->value.data) CHECK((v > 0.0 && v < 1.0));
  auto r = RandomTensor<double>({4, 3}, rng, -1, 1);
  std::vector<Var<double>> wrt = {x};
  for (const auto& e : ctl.params().entries()) wrt.push_back(e.var);
  auto res = GradientCheck([&] { return Sum(Mul(ctl(x), Constant(r))); }, wrt, 200, 9);
  CHECK(res.max_relative_error <= 1e-3);
}
