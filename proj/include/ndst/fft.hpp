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

#include <complex>
#include <cstddef>
#include <span>
#include <vector>

namespace ndst {

// Complex FFT plan (FFTW) for power-of-two sizes. Execution is thread-safe;
// planning is serialized internally.
class Fft {
 public:
  explicit Fft(std::size_t size);
  ~Fft();
  Fft(const Fft&) = delete;
  Fft& operator=(const Fft&) = delete;

  std::size_t size() const { return size_; }

  // In-place forward transform, X[k] = sum_n x[n] exp(-2 pi i k n / N).
  void Forward(std::span<std::complex<double>> data) const;

  // Shared per-thread plan for `size`.
  static const Fft& ForSize(std::size_t size);

 private:
  std::size_t size_;
  void* plan_ = nullptr;
};

bool IsPowerOfTwo(std::size_t n);

// Periodic Hann window, w[n] = 0.5 - 0.5 cos(2 pi n / N).
std::vector<double> HannWindow(std::size_t length);

}  // namespace ndst
