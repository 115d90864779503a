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

// Small stateful building blocks for the effects. Every block starts from
// zero state; effects construct them inside Process.

#include <algorithm>
#include <cmath>
#include <numbers>
#include <vector>

namespace ndst::dsp {

inline double TimeCoefficient(double seconds, double rate) {
  if (seconds <= 0.0) return 0.0;
  return std::exp(-1.0 / (seconds * rate));
}

class OnePoleLowpass {
 public:
  OnePoleLowpass(double cutoff_hz, double rate) {
    const double fc = std::clamp(cutoff_hz, 1e-3, 0.49 * rate);
    a_ = 1.0 - std::exp(-2.0 * std::numbers::pi * fc / rate);
  }
  double Process(double x) {
    y_ += a_ * (x - y_);
    return y_;
  }

 private:
  double a_ = 1.0;
  double y_ = 0.0;
};

class OnePoleHighpass {
 public:
  OnePoleHighpass(double cutoff_hz, double rate) : lp_(cutoff_hz, rate) {}
  double Process(double x) { return x - lp_.Process(x); }

 private:
  OnePoleLowpass lp_;
};

// y[n] = x[n] - x[n-1] + R y[n-1], R = exp(-2 pi fc / rate).
class DcBlocker {
 public:
  DcBlocker(double cutoff_hz, double rate)
      : r_(std::exp(-2.0 * std::numbers::pi * cutoff_hz / rate)) {}
  double Process(double x) {
    const double y = x - x1_ + r_ * y1_;
    x1_ = x;
    y1_ = y;
    return y;
  }

 private:
  double r_;
  double x1_ = 0.0;
  double y1_ = 0.0;
};

// Direct-form-I biquad with RBJ cookbook coefficients.
class Biquad {
 public:
  static Biquad Lowpass(double freq, double q, double rate) {
    return Design(freq, q, rate, false);
  }
  static Biquad Highpass(double freq, double q, double rate) {
    return Design(freq, q, rate, true);
  }

  double Process(double x) {
    const double y = b0_ * x + b1_ * x1_ + b2_ * x2_ - a1_ * y1_ - a2_ * y2_;
    x2_ = x1_;
    x1_ = x;
    y2_ = y1_;
    y1_ = y;
    return y;
  }

 private:
  static Biquad Design(double freq, double q, double rate, bool highpass) {
    const double f = std::clamp(freq, 1.0, 0.49 * rate);
    const double w0 = 2.0 * std::numbers::pi * f / rate;
    const double c = std::cos(w0);
    const double alpha = std::sin(w0) / (2.0 * q);
    const double a0 = 1.0 + alpha;
    Biquad bq;
    if (highpass) {
      bq.b0_ = (1.0 + c) / 2.0 / a0;
      bq.b1_ = -(1.0 + c) / a0;
    } else {
      bq.b0_ = (1.0 - c) / 2.0 / a0;
      bq.b1_ = (1.0 - c) / a0;
    }
    bq.b2_ = bq.b0_;
    bq.a1_ = -2.0 * c / a0;
    bq.a2_ = (1.0 - alpha) / a0;
    return bq;
  }

  double b0_ = 1.0, b1_ = 0.0, b2_ = 0.0, a1_ = 0.0, a2_ = 0.0;
  double x1_ = 0.0, x2_ = 0.0, y1_ = 0.0, y2_ = 0.0;
};

// Fourth-order Linkwitz-Riley section: two cascaded Butterworth biquads.
class LinkwitzRiley4 {
 public:
  LinkwitzRiley4(double freq, double rate, bool highpass)
      : a_(highpass ? Biquad::Highpass(freq, std::numbers::sqrt2 / 2, rate)
                    : Biquad::Lowpass(freq, std::numbers::sqrt2 / 2, rate)),
        b_(a_) {}
  double Process(double x) { return b_.Process(a_.Process(x)); }

 private:
  Biquad a_;
  Biquad b_;
};

// Circular history with linear-interpolated fractional reads.
class DelayLine {
 public:
  explicit DelayLine(std::size_t max_delay)
      : buf_(max_delay + 2, 0.0) {}

  void Push(double v) {
    head_ = (head_ + 1) % buf_.size();
    buf_[head_] = v;
  }

  // Value `delay` samples before the most recently pushed one.
  double ReadBack(double delay) const {
    const double d = std::clamp(delay, 0.0, static_cast<double>(buf_.size() - 2));
    const auto whole = static_cast<std::size_t>(d);
    const double frac = d - static_cast<double>(whole);
    const std::size_t n = buf_.size();
    const double a = buf_[(head_ + n - whole) % n];
    const double b = buf_[(head_ + n - whole - 1) % n];
    return (1.0 - frac) * a + frac * b;
  }

 private:
  std::vector<double> buf_;
  std::size_t head_ = 0;
};

// Peak envelope with separate attack/release time constants (seconds).
class EnvelopeFollower {
 public:
  EnvelopeFollower(double attack_s, double release_s, double rate)
      : attack_(TimeCoefficient(attack_s, rate)),
        release_(TimeCoefficient(release_s, rate)) {}
  double Process(double x) {
    const double level = std::abs(x);
    const double c = level > env_ ? attack_ : release_;
    env_ = c * env_ + (1.0 - c) * level;
    return env_;
  }

 private:
  double attack_;
  double release_;
  double env_ = 0.0;
};

inline double LinearToDb(double v) { return 20.0 * std::log10(std::max(v, 1e-12)); }
inline double DbToLinear(double db) { return std::pow(10.0, db / 20.0); }

// Static compression curve: gain (linear) for an envelope level.
inline double CompressorGain(double env, double threshold_db, double ratio) {
  const double over = LinearToDb(env) - threshold_db;
  if (over <= 0.0) return 1.0;
  return DbToLinear(-over * (1.0 - 1.0 / ratio));
}

}  // namespace ndst::dsp
