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
#include <complex>
#include <cstring>
#include <filesystem>
#include <numbers>
#include <random>

#include "ndst/audio.hpp"
#include "ndst/error.hpp"
#include "ndst/fft.hpp"
#include "ndst/stft.hpp"

using namespace ndst;
using Catch::Approx;

namespace {

std::filesystem::path TempPath(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / "ndst_audio_test";
  std::filesystem::create_directories(dir);
  return dir / name;
}

// Hand-rolled WAV writer so the reader is checked against an independent
// encoder.
std::vector<std::uint8_t> RawWav(std::uint16_t format, std::uint16_t channels,
                                 std::uint32_t rate, std::uint16_t bits,
                                 const std::vector<std::uint8_t>& payload) {
  std::vector<std::uint8_t> out;
  auto put = [&](const void* p, std::size_t n) {
    auto* b = static_cast<const std::uint8_t*>(p);
    out.insert(out.end(), b, b + n);
  };
  auto u32 = [&](std::uint32_t v) { put(&v, 4); };
  auto u16 = [&](std::uint16_t v) { put(&v, 2); };
  put("RIFF", 4);
  u32(static_cast<std::uint32_t>(36 + payload.size()));
  put("WAVE", 4);
  put("fmt ", 4);
  u32(16);
  u16(format);
  u16(channels);
  u32(rate);
  u32(rate * channels * bits / 8);
  u16(static_cast<std::uint16_t>(channels * bits / 8));
  u16(bits);
  put("LIST", 4);  // unrelated chunk that must be skipped
  u32(4);
  put("INFO", 4);
  put("data", 4);
  u32(static_cast<std::uint32_t>(payload.size()));
  out.insert(out.end(), payload.begin(), payload.end());
  return out;
}

std::vector<float> Noise(std::size_t n, unsigned seed) {
  std::mt19937 rng(seed);
  std::uniform_real_distribution<float> dist(-1.0f, 1.0f);
  std::vector<float> x(n);
  for (auto& v : x) v = dist(rng);
  return x;
}

}  // namespace

TEST_CASE("wav float32 mono reads back bit-identical", "[audio][wav]") {
  AudioBuffer b{Noise(1000, 1), 24000};
  auto path = TempPath("mono.wav");
  WriteWav(b, path);
  auto r = ReadWav(path, 24000);
  REQUIRE(r.sample_rate == 24000);
  REQUIRE(r.samples.size() == 1000);
  REQUIRE(std::memcmp(r.samples.data(), b.samples.data(), 4000) == 0);
}

TEST_CASE("wav round trip of one second of noise is bit exact", "[audio][wav]") {
  AudioBuffer b{Noise(24000, 7), 24000};
  auto bytes = EncodeWav(b);
  auto r = DecodeWav(bytes, 24000);
  REQUIRE(r.samples == b.samples);
}

TEST_CASE("wav data chunk sizes", "[audio][wav]") {
  AudioBuffer empty{{}, 24000};
  auto e = EncodeWav(empty);
  std::uint32_t size;
  std::memcpy(&size, e.data() + 40, 4);
  CHECK(size == 0);
  CHECK(DecodeWav(e, 24000).samples.empty());

  AudioBuffer one_second{std::vector<float>(24000, 0.25f), 24000};
  auto b = EncodeWav(one_second);
  std::memcpy(&size, b.data() + 40, 4);
  CHECK(size == 96000);
  CHECK(b.size() == 44 + 96000);
}

TEST_CASE("stereo pcm16 with opposite channels mixes to silence", "[audio][wav]") {
  std::vector<std::uint8_t> payload;
  const std::int16_t left = 16384, right = -16384;
  for (int i = 0; i < 100; ++i) {
    payload.insert(payload.end(), reinterpret_cast<const std::uint8_t*>(&left),
                   reinterpret_cast<const std::uint8_t*>(&left) + 2);
    payload.insert(payload.end(), reinterpret_cast<const std::uint8_t*>(&right),
                   reinterpret_cast<const std::uint8_t*>(&right) + 2);
  }
  auto r = DecodeWav(RawWav(1, 2, 24000, 16, payload), 24000);
  REQUIRE(r.samples.size() == 100);
  for (float v : r.samples) CHECK(v == 0.0f);
}

TEST_CASE("resampling 48k to 24k matches a brute-force interpolation oracle",
          "[audio][wav]") {
  auto src = Noise(1000, 3);
  std::vector<std::uint8_t> payload(src.size() * 4);
  std::memcpy(payload.data(), src.data(), payload.size());
  auto r = DecodeWav(RawWav(3, 1, 48000, 32, payload), 24000);
  REQUIRE(r.samples.size() == 500);
  for (std::size_t n = 0; n < 500; ++n) {
    // Output instant n sits at source time n / 24000 s = source index 2n.
    const double t = static_cast<double>(n) / 24000.0 * 48000.0;
    const auto i0 = static_cast<std::size_t>(std::floor(t));
    const double frac = t - static_cast<double>(i0);
    const double expect =
        i0 + 1 < src.size() ? (1 - frac) * src[i0] + frac * src[i0 + 1] : src[i0];
    CHECK(r.samples[n] == Approx(expect).margin(1e-7));
  }
}

TEST_CASE("wav reader rejects malformed and unsupported files", "[audio][wav]") {
  std::vector<std::uint8_t> junk = {'R', 'I', 'F', 'X', 0, 0, 0, 0, 'W', 'A', 'V', 'E'};
  try {
    DecodeWav(junk, 24000);
    FAIL("expected MalformedWav");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::kMalformedWav);
  }
  std::vector<std::uint8_t> payload(8, 0);
  try {
    DecodeWav(RawWav(2, 1, 24000, 16, payload), 24000);  // MS ADPCM
    FAIL("expected UnsupportedFormat");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::kUnsupportedFormat);
  }
  auto ok = RawWav(3, 1, 24000, 32, payload);
  ok.resize(30);
  CHECK_THROWS_AS(DecodeWav(ok, 24000), Error);
  CHECK_THROWS_AS(ReadWav(TempPath("does_not_exist.wav"), 24000), Error);
}

TEST_CASE("peak normalization", "[audio][normalize]") {
  AudioBuffer sine;
  for (int n = 0; n < 2400; ++n)
    sine.samples.push_back(static_cast<float>(std::sin(2 * std::numbers::pi * 100 * n / 24000.0)));
  sine.samples[600] = 1.0f;
  auto out = PeakNormalize(sine, -12.0);
  CHECK(PeakAbs(out.samples) == Approx(0.251189).margin(1e-6));

  auto again = PeakNormalize(out, -12.0);
  for (std::size_t i = 0; i < out.size(); ++i)
    CHECK(again.samples[i] == Approx(out.samples[i]).margin(1e-6));

  // Shape preserved: single positive scale factor.
  const double k = out.samples[100] / sine.samples[100];
  CHECK(k > 0);
  for (std::size_t i = 1; i < out.size(); i += 37)
    CHECK(out.samples[i] == Approx(k * sine.samples[i]).margin(1e-6));

  AudioBuffer silent{std::vector<float>(100, 0.0f), 24000};
  try {
    PeakNormalize(silent, -12.0);
    FAIL("expected SilentInput");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::kSilentInput);
  }
}

TEST_CASE("peak normalization is idempotent on random buffers", "[audio][property]") {
  std::mt19937 rng(11);
  for (int trial = 0; trial < 50; ++trial) {
    const auto n = std::uniform_int_distribution<int>(1, 500)(rng);
    const double target = std::uniform_real_distribution<double>(-40, 0)(rng);
    AudioBuffer b{Noise(static_cast<std::size_t>(n), rng()), 24000};
    auto once = PeakNormalize(b, target);
    auto twice = PeakNormalize(once, target);
    for (std::size_t i = 0; i < once.size(); ++i)
      REQUIRE(twice.samples[i] == Approx(once.samples[i]).margin(1e-6));
  }
}

TEST_CASE("fft matches a direct DFT", "[audio][fft]") {
  const std::size_t n = 64;
  auto x = Noise(n, 5);
  std::vector<std::complex<double>> buf(x.begin(), x.end());
  Fft(n).Forward(buf);
  for (std::size_t k = 0; k < n; ++k) {
    std::complex<double> acc;
    for (std::size_t t = 0; t < n; ++t)
      acc += static_cast<double>(x[t]) *
             std::polar(1.0, -2 * std::numbers::pi * double(k * t) / double(n));
    CHECK(std::abs(acc - buf[k]) < 1e-9);
  }
  CHECK_THROWS_AS(Fft(48), Error);
}

TEST_CASE("stft frame count and shape", "[audio][stft]") {
  AudioBuffer b{std::vector<float>(131072, 0.0f), 24000};
  auto spec = StftMagnitude(b, StftConfig::Paper());
  CHECK(spec.freq_bins == 2049);
  CHECK(spec.frames == 127);
  for (float v : spec.data) REQUIRE(v == 0.0f);

  AudioBuffer desk{Noise(32768, 2), 24000};
  auto d = StftMagnitude(desk, StftConfig::Desk());
  CHECK(d.freq_bins == 513);
  CHECK(d.frames == 127);

  AudioBuffer shorty{Noise(100, 2), 24000};
  try {
    StftMagnitude(shorty, StftConfig::Desk());
    FAIL("expected TooShort");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::kTooShort);
  }
}

TEST_CASE("stft of a bin-centred sine peaks at that bin", "[audio][stft]") {
  StftConfig cfg{256, 128, 64, 0.3};
  const int k = 19;
  const double f = k * 24000.0 / cfg.fft_bins;
  AudioBuffer b;
  for (int n = 0; n < 2048; ++n)
    b.samples.push_back(static_cast<float>(std::sin(2 * std::numbers::pi * f * n / 24000.0)));
  auto spec = StftMagnitude(b, cfg);
  for (int t = 0; t < spec.frames; ++t) {
    int best = 0;
    for (int q = 1; q < spec.freq_bins; ++q)
      if (spec.at(q, t) > spec.at(best, t)) best = q;
    CHECK(best == k);
  }
  // Direct DFT of the first frame, windowed and zero-padded.
  auto window = HannWindow(cfg.window_len);
  for (int q : {0, 5, k, 40, 128}) {
    std::complex<double> acc;
    for (int n = 0; n < cfg.window_len; ++n)
      acc += window[n] * static_cast<double>(b.samples[n]) *
             std::polar(1.0, -2 * std::numbers::pi * q * n / double(cfg.fft_bins));
    CHECK(spec.at(q, 0) == Approx(std::pow(std::abs(acc), 0.3)).epsilon(1e-5).margin(1e-5));
  }
}

TEST_CASE("stft is scale covariant under compression", "[audio][stft][property]") {
  AudioBuffer b{Noise(4096, 9), 24000};
  AudioBuffer twice = b;
  for (auto& v : twice.samples) v *= 2.0f;
  auto s1 = StftMagnitude(b, StftConfig::Desk());
  auto s2 = StftMagnitude(twice, StftConfig::Desk());
  const double g = std::pow(2.0, 0.3);
  for (std::size_t i = 0; i < s1.data.size(); ++i)
    REQUIRE(s2.data[i] == Approx(g * s1.data[i]).epsilon(1e-5).margin(1e-12));
  auto again = StftMagnitude(b, StftConfig::Desk());
  CHECK(again.data == s1.data);
}

TEST_CASE("spectrogram normalization", "[audio][stft]") {
  Spectrogram s;
  s.freq_bins = 2;
  s.frames = 3;
  s.data = {0.5f, 4.0f, 1.0f, 2.0f, 0.0f, 3.0f};
  auto n = NormalizeSpectrogram(s);
  CHECK(*std::max_element(n.data.begin(), n.data.end()) == 1.0f);
  for (std::size_t i = 0; i < s.data.size(); ++i)
    for (std::size_t j = 0; j < s.data.size(); ++j)
      if (s.data[i] < s.data[j]) CHECK(n.data[i] < n.data[j]);
  Spectrogram z = s;
  std::fill(z.data.begin(), z.data.end(), 0.0f);
  CHECK(NormalizeSpectrogram(z).data == z.data);
}
