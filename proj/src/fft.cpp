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

#include "ndst/fft.hpp"

#include <cmath>
#include <map>
#include <memory>
#include <mutex>
#include <numbers>

#include <fftw3.h>

#include "ndst/error.hpp"

namespace ndst {

bool IsPowerOfTwo(std::size_t n) { return n != 0 && (n & (n - 1)) == 0; }

namespace {

std::mutex& PlannerMutex() {
  static std::mutex m;
  return m;
}

}  // namespace

Fft::Fft(std::size_t size) : size_(size) {
  if (!IsPowerOfTwo(size))
    throw Error(ErrorCode::kDimensionMismatch,
                "FFT size must be a power of two, got " + std::to_string(size));
  std::vector<std::complex<double>> scratch(size);
  auto* buf = reinterpret_cast<fftw_complex*>(scratch.data());
  std::lock_guard<std::mutex> lock(PlannerMutex());
  plan_ = fftw_plan_dft_1d(static_cast<int>(size), buf, buf, FFTW_FORWARD,
                           FFTW_ESTIMATE | FFTW_UNALIGNED);
  if (plan_ == nullptr) throw Error(ErrorCode::kNumericFailure, "FFTW planning failed");
}

Fft::~Fft() {
  std::lock_guard<std::mutex> lock(PlannerMutex());
  fftw_destroy_plan(static_cast<fftw_plan>(plan_));
}

void Fft::Forward(std::span<std::complex<double>> data) const {
  if (data.size() != size_)
    throw Error(ErrorCode::kDimensionMismatch, "FFT input size mismatch");
  auto* buf = reinterpret_cast<fftw_complex*>(data.data());
  fftw_execute_dft(static_cast<fftw_plan>(plan_), buf, buf);
}

const Fft& Fft::ForSize(std::size_t size) {
  thread_local std::map<std::size_t, std::unique_ptr<Fft>> cache;
  auto& slot = cache[size];
  if (!slot) slot = std::make_unique<Fft>(size);
  return *slot;
}

std::vector<double> HannWindow(std::size_t length) {
  std::vector<double> w(length);
  for (std::size_t n = 0; n < length; ++n)
    w[n] = 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * static_cast<double>(n) /
                                static_cast<double>(length));
  return w;
}

}  // namespace ndst
