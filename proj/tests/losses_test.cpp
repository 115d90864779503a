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

#include <cmath>
#include <vector>

#include "ndst/error.hpp"
#include "ndst/losses.hpp"
#include "ndst/random.hpp"

using namespace ndst;
using Catch::Approx;

namespace {

std::vector<float> Noise(std::size_t n, std::uint64_t seed, double scale = 0.5) {
  Rng rng(seed);
  std::vector<float> out(n);
  for (auto& v : out) v = static_cast<float>(scale * StandardNormal(rng));
  return out;
}

MrstftConfig SmallConfig() {
  MrstftConfig cfg;
  cfg.fft_sizes = {32, 128, 512};
  return cfg;
}

}  // namespace

TEST_CASE("mrstft default resolutions", "[losses]") {
  MrstftConfig cfg;
  CHECK(cfg.fft_sizes == std::vector<int>{32, 128, 512, 2048, 8192, 32768});
}

TEST_CASE("mrstft identical and sign-flipped inputs give zero", "[losses]") {
  const auto x = Noise(4096, 1);
  std::vector<float> neg(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) neg[i] = -x[i];
  MrstftConfig cfg;
  const auto same = Mrstft(x, x, cfg);
  CHECK(same.value == 0.0);
  CHECK(same.active_sizes == std::vector<int>{32, 128, 512, 2048});
  CHECK(Mrstft(neg, x, cfg).value == Approx(0.0).margin(1e-9));
  CHECK(Mrstft(x, neg, cfg).value == Approx(0.0).margin(1e-9));
}

TEST_CASE("mrstft of silence against noise has unit spectral convergence", "[losses]") {
  const auto t = Noise(16384, 2);
  const std::vector<float> p(t.size(), 0.0f);
  const auto r = Mrstft(p, t, MrstftConfig{});
  REQUIRE(r.active_sizes.size() == 5);
  for (double sc : r.spectral_convergence) CHECK(sc == Approx(1.0).margin(1e-6));
  CHECK(r.value > 1.0);
}

TEST_CASE("mrstft is nonnegative and symmetric in magnitude ordering", "[losses]") {
  for (std::uint64_t s = 0; s < 8; ++s) {
    const auto a = Noise(2048, 10 + s);
    const auto b = Noise(2048, 20 + s, 0.1);
    CHECK(Mrstft(a, b, SmallConfig()).value >= 0.0);
  }
}

TEST_CASE("mrstft length errors", "[losses]") {
  const auto a = Noise(1000, 3);
  const auto b = Noise(999, 4);
  CHECK_THROWS_MATCHES(Mrstft(a, b, SmallConfig()), Error,
                       Catch::Matchers::Predicate<Error>(
                           [](const Error& e) { return e.code() == ErrorCode::kLengthMismatch; }));
  CHECK_THROWS_AS(E2eLoss(a, b, 100.0, SmallConfig()), Error);
  const auto tiny = Noise(16, 5);
  CHECK_THROWS_AS(Mrstft(tiny, tiny, SmallConfig()), Error);
}

TEST_CASE("mrstft resolutions longer than the signal are skipped", "[losses]") {
  const auto a = Noise(200, 6);
  const auto b = Noise(200, 7);
  const auto r = Mrstft(a, b, SmallConfig());
  CHECK(r.active_sizes == std::vector<int>{32, 128});
}

TEST_CASE("mrstft gradient matches finite differences", "[losses]") {
  const auto target = Noise(700, 8);
  auto pred = Noise(700, 9, 0.3);
  const auto cfg = SmallConfig();
  std::vector<double> grad;
  const double value = MrstftWithGradient(pred, target, cfg, grad);
  CHECK(value == Approx(Mrstft(pred, target, cfg).value).epsilon(1e-12));
  REQUIRE(grad.size() == pred.size());

  Rng rng(42);
  int checked = 0;
  double worst = 0.0;
  for (int trial = 0; trial < 40; ++trial) {
    const std::size_t i = UniformIndex(rng, pred.size());
    const float orig = pred[i];
    const float h = 1e-3f;
    pred[i] = orig + h;
    const double up = Mrstft(pred, target, cfg).value;
    const float step_up = pred[i] - orig;
    pred[i] = orig - h;
    const double down = Mrstft(pred, target, cfg).value;
    const float step_down = orig - pred[i];
    pred[i] = orig;
    const double numeric = (up - down) / (static_cast<double>(step_up) + step_down);
    const double rel = std::abs(numeric - grad[i]) /
                       std::max({std::abs(numeric), std::abs(grad[i]), 1e-4});
    worst = std::max(worst, rel);
    ++checked;
  }
  CHECK(checked == 40);
  CHECK(worst < 2e-2);
}

TEST_CASE("e2e loss composition", "[losses]") {
  const auto t = Noise(4096, 11);
  const auto zero = E2eLoss(t, t, 100.0, MrstftConfig{});
  CHECK(zero.total == 0.0);
  CHECK(zero.mrstft == 0.0);
  CHECK(zero.mae == 0.0);

  std::vector<float> shifted(t.size());
  for (std::size_t i = 0; i < t.size(); ++i) shifted[i] = t[i] + 0.01f;
  const auto parts = E2eLoss(shifted, t, 100.0, MrstftConfig{});
  CHECK(parts.mae == Approx(0.01).margin(1e-6));
  CHECK(parts.total - parts.mrstft == Approx(1.0).margin(1e-4));

  const auto p = Noise(4096, 12);
  const auto no_mae = E2eLoss(p, t, 0.0, MrstftConfig{});
  CHECK(no_mae.total == no_mae.mrstft);
}

TEST_CASE("e2e loss gradient adds the scaled sign of the error", "[losses]") {
  const auto t = Noise(600, 13);
  const auto p = Noise(600, 14);
  const auto cfg = SmallConfig();
  std::vector<double> g_mr, g_e2e;
  MrstftWithGradient(p, t, cfg, g_mr);
  const auto parts = E2eLossWithGradient(p, t, 100.0, cfg, g_e2e);
  CHECK(parts.total == Approx(E2eLoss(p, t, 100.0, cfg).total).epsilon(1e-12));
  for (std::size_t i = 0; i < p.size(); ++i) {
    const double sign = p[i] > t[i] ? 1.0 : -1.0;
    CHECK(g_e2e[i] - g_mr[i] == Approx(sign * 100.0 / 600.0).epsilon(1e-9));
  }
}

TEST_CASE("kl weight cyclical schedule", "[losses]") {
  KlScheduleConfig cfg{.total_steps = 400, .num_cycles = 4, .ramp_fraction = 0.5, .beta_max = 1.0};
  CHECK(KlWeight(0, cfg) == 0.0);
  CHECK(KlWeight(100, cfg) == 0.0);
  CHECK(KlWeight(300, cfg) == 0.0);
  CHECK(KlWeight(25, cfg) == Approx(0.5));
  CHECK(KlWeight(50, cfg) == 1.0);
  CHECK(KlWeight(99, cfg) == 1.0);
  double prev = -1.0;
  for (long s = 0; s < 50; ++s) {
    const double w = KlWeight(s, cfg);
    CHECK(w >= prev);
    CHECK(w == KlWeight(s + 100, cfg));
    prev = w;
  }
  cfg.beta_max = 0.25;
  CHECK(KlWeight(75, cfg) == 0.25);
  for (long s = 0; s < 400; ++s) {
    const double w = KlWeight(s, cfg);
    CHECK(w >= 0.0);
    CHECK(w <= 0.25);
  }
}
