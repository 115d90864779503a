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

#include "ndst/dafx.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <numbers>
#include <span>

#include "dsp_blocks.hpp"
#include "ndst/error.hpp"

namespace ndst {
namespace {

using dsp::DbToLinear;
constexpr double kTwoPi = 2.0 * std::numbers::pi;

ParamSpec Lin(std::string name, double lo, double hi, std::string unit = "") {
  return {std::move(name), lo, hi, ParamMapping::kLinear, std::move(unit)};
}
ParamSpec Log(std::string name, double lo, double hi, std::string unit = "") {
  return {std::move(name), lo, hi, ParamMapping::kLogarithmic, std::move(unit)};
}
ParamSpec OutputDb(double lo = -20.0, double hi = 12.0) {
  return Lin("output_db", lo, hi, "dB");
}

std::vector<EffectDescriptor> BuildRegistry() {
  return {
      {"ambience", "reverb", false,
       {Lin("mix", 0, 1), Lin("size_m", 1, 50, "m"), Lin("hf_damp", 0, 1),
        OutputDb()}},
      {"combo", "amp simulator", false,
       {Log("hpf_freq", 20, 2000, "Hz"), Lin("hpf_reso", 0.5, 10, "Q"),
        Lin("drive_s_h", 0, 1), Lin("bias", -0.5, 0.5), OutputDb()}},
      {"delay", "delay", false,
       {Log("l_delay_ms", 1, 1000, "ms"), Log("r_delay", 0.25, 4, "ratio"),
        Lin("feedback", 0, 0.95), Lin("fb_tone_lo_hi", 0, 1),
        Lin("fb_mix", 0, 1)}},
      {"dynamics", "compressor/limiter/gate", false,
       {Lin("thresh_db", -60, 0, "dB"), Lin("ratio", 1, 20, "ratio"),
        OutputDb(), Log("attack_s", 1e-4, 0.1, "s"),
        Log("release_ms", 10, 1000, "ms"), Lin("limiter_db", -12, 0, "dB"),
        Lin("gate_thr_db", -80, -20, "dB"), Log("gate_att_s", 1e-4, 0.1, "s"),
        Log("gate_rel_ms", 10, 1000, "ms"), Lin("mix", 0, 1)}},
      {"overdrive", "soft distortion", false,
       {Lin("muffle", 0, 1), Log("drive", 1, 100, "gain"),
        OutputDb(-20.0, 20.0)}},
      {"ringmod", "ring modulation", false,
       {Lin("freq_hz", 0, 1000, "Hz"), Lin("fine_hz", 0, 10, "Hz"),
        Lin("feedback", 0, 0.95)}},
      {"leslie", "rotary speaker simulator", true,
       {Log("rate_hz", 0.1, 8, "Hz"), Lin("doppler_depth", 0, 1),
        Lin("am_depth", 0, 1), OutputDb()}},
      {"multiband", "multi-band compressor", true,
       {Log("xover_lo", 50, 500, "Hz"), Log("xover_hi", 500, 8000, "Hz"),
        Lin("comp_lo", 0, 1), Lin("comp_mid", 0, 1), Lin("comp_hi", 0, 1),
        OutputDb()}},
      {"flanger", "tape-flanging simulator", true,
       {Log("rate_hz", 0.01, 5, "Hz"), Lin("depth_ms", 0.1, 10, "ms"),
        Lin("feedback", -0.95, 0.95), Lin("mix", 0, 1)}},
  };
}

using Samples = std::span<const float>;
using Physical = std::vector<double>;

// --- reverb: four damped feedback combs into two series all-passes.
std::vector<double> Ambience(Samples x, const Physical& p, double rate) {
  const double mix = p[0], size = p[1], damp = p[2];
  constexpr double kCombMs[4] = {29.7, 37.1, 41.1, 43.7};
  constexpr double kCombGain = 0.84;
  constexpr double kAllpassMs[2] = {5.0, 1.7};
  constexpr double kAllpassGain = 0.7;

  struct Comb {
    dsp::DelayLine line;
    double delay;
    double lp = 0.0;
  };
  std::vector<Comb> combs;
  for (double ms : kCombMs) {
    const double d = std::max(1.0, std::round(ms * size / 25.0 * rate / 1000.0));
    combs.push_back({dsp::DelayLine(static_cast<std::size_t>(d)), d});
  }
  struct Allpass {
    dsp::DelayLine line;
    double delay;
  };
  std::vector<Allpass> allpasses;
  for (double ms : kAllpassMs) {
    const double d = std::max(1.0, std::round(ms * rate / 1000.0));
    allpasses.push_back({dsp::DelayLine(static_cast<std::size_t>(d)), d});
  }

  std::vector<double> y(x.size());
  for (std::size_t n = 0; n < x.size(); ++n) {
    double acc = 0.0;
    for (auto& c : combs) {
      const double out = c.line.ReadBack(c.delay - 1.0);
      c.lp = (1.0 - damp) * out + damp * c.lp;
      c.line.Push(x[n] + kCombGain * c.lp);
      acc += out;
    }
    double v = 0.25 * acc;
    for (auto& a : allpasses) {
      const double delayed = a.line.ReadBack(a.delay - 1.0);
      const double w = v + kAllpassGain * delayed;
      a.line.Push(w);
      v = -kAllpassGain * w + delayed;
    }
    y[n] = (1.0 - mix) * x[n] + mix * v;
  }
  return y;
}

// --- amp simulator: high-pass, bias, blended tanh/hard-clip shaper, DC block.
std::vector<double> Combo(Samples x, const Physical& p, double rate) {
  const double freq = p[0], q = p[1], s = p[2], bias = p[3];
  auto hpf = dsp::Biquad::Highpass(freq, q, rate);
  dsp::DcBlocker dc(10.0, rate);
  std::vector<double> y(x.size());
  for (std::size_t n = 0; n < x.size(); ++n) {
    const double v = 3.0 * (hpf.Process(x[n]) + bias);
    const double shaped = (1.0 - s) * std::tanh(v) + s * std::clamp(v, -1.0, 1.0);
    y[n] = dc.Process(shaped);
  }
  return y;
}

// --- two-tap feedback delay with a tilting feedback tone filter.
std::vector<double> Delay(Samples x, const Physical& p, double rate) {
  const double max_delay = 2.0 * rate;  // 2000 ms
  const double left = std::clamp(p[0] * rate / 1000.0, 1.0, max_delay);
  const double right = std::clamp(left * p[1], 1.0, max_delay);
  const double feedback = p[2], tone = p[3], mix = p[4];
  const double lp_amount = tone < 0.5 ? (0.5 - tone) / 0.5 : 0.0;
  const double hp_amount = tone > 0.5 ? (tone - 0.5) / 0.5 : 0.0;
  dsp::OnePoleLowpass lp(200.0, rate);
  dsp::OnePoleHighpass hp(10000.0, rate);
  dsp::DelayLine line(static_cast<std::size_t>(std::ceil(max_delay)) + 1);

  std::vector<double> y(x.size());
  for (std::size_t n = 0; n < x.size(); ++n) {
    const double wet = 0.5 * (line.ReadBack(left - 1.0) + line.ReadBack(right - 1.0));
    double fb = wet;
    const double low = lp.Process(fb);
    const double high = hp.Process(fb);
    fb = lp_amount * low + hp_amount * high + (1.0 - lp_amount - hp_amount) * fb;
    line.Push(x[n] + feedback * fb);
    y[n] = (1.0 - mix) * x[n] + mix * wet;
  }
  return y;
}

// --- compressor -> limiter -> gate on the wet path, mixed with dry.
std::vector<double> Dynamics(Samples x, const Physical& p, double rate) {
  const double thresh = p[0], ratio = p[1], attack = p[3];
  const double release = p[4] / 1000.0, limiter = DbToLinear(p[5]);
  const double gate_thr = p[6], gate_att = p[7], gate_rel = p[8] / 1000.0;
  const double mix = p[9];

  dsp::EnvelopeFollower comp_env(attack, release, rate);
  dsp::EnvelopeFollower limit_env(0.0, 0.05, rate);
  dsp::EnvelopeFollower gate_env(1e-3, 0.05, rate);
  const double open_coef = dsp::TimeCoefficient(gate_att, rate);
  const double close_coef = dsp::TimeCoefficient(gate_rel, rate);
  double gate = 0.0;

  std::vector<double> y(x.size());
  for (std::size_t n = 0; n < x.size(); ++n) {
    const double in = x[n];
    double wet = in * dsp::CompressorGain(comp_env.Process(in), thresh, ratio);
    const double peak = limit_env.Process(wet);
    if (peak > limiter) wet *= limiter / peak;
    const double target = dsp::LinearToDb(gate_env.Process(in)) >= gate_thr ? 1.0 : 0.0;
    const double c = target > gate ? open_coef : close_coef;
    gate = c * gate + (1.0 - c) * target;
    y[n] = (1.0 - mix) * in + mix * gate * wet;
  }
  return y;
}

// --- normalized tanh saturation followed by a sweepable low-pass.
std::vector<double> Overdrive(Samples x, const Physical& p, double rate) {
  const double cutoff = 10000.0 * std::pow(0.01, p[0]);
  const double g = p[1];
  const double norm = std::tanh(g);
  dsp::OnePoleLowpass lp(cutoff, rate);
  std::vector<double> y(x.size());
  for (std::size_t n = 0; n < x.size(); ++n)
    y[n] = lp.Process(std::tanh(g * x[n]) / norm);
  return y;
}

// --- sine ring modulator with output feedback.
std::vector<double> RingMod(Samples x, const Physical& p, double rate) {
  const double freq = p[0] + p[1], feedback = p[2];
  const double step = kTwoPi * freq / rate;
  std::vector<double> y(x.size());
  double prev = 0.0;
  for (std::size_t n = 0; n < x.size(); ++n) {
    const double phase = std::fmod(step * static_cast<double>(n), kTwoPi);
    prev = (x[n] + feedback * prev) * std::sin(phase);
    y[n] = prev;
  }
  return y;
}

// --- rotary speaker: one LFO drives a 0..2 ms doppler delay and tremolo.
std::vector<double> Leslie(Samples x, const Physical& p, double rate) {
  const double lfo_hz = p[0], doppler = p[1], am = p[2];
  const double max_delay = 2e-3 * rate;
  dsp::DelayLine line(static_cast<std::size_t>(std::ceil(max_delay)) + 1);
  std::vector<double> y(x.size());
  for (std::size_t n = 0; n < x.size(); ++n) {
    const double lfo = std::sin(kTwoPi * lfo_hz * static_cast<double>(n) / rate);
    line.Push(x[n]);
    const double delayed = line.ReadBack(doppler * 0.5 * max_delay * (1.0 + lfo));
    y[n] = (1.0 - 0.5 * am * (1.0 - lfo)) * delayed;
  }
  return y;
}

// --- three-band split, per-band compression, sum.
std::vector<double> MultiBand(Samples x, const Physical& p, double rate) {
  const double lo = p[0], hi = std::max(p[1], p[0]);
  dsp::LinkwitzRiley4 low_lp(lo, rate, false), low_hp(lo, rate, true);
  dsp::LinkwitzRiley4 high_lp(hi, rate, false), high_hp(hi, rate, true);
  struct Band {
    dsp::EnvelopeFollower env;
    double threshold_db;
    double ratio;
  };
  std::vector<Band> bands;
  for (int b = 0; b < 3; ++b) {
    const double amount = p[2 + b];
    bands.push_back({dsp::EnvelopeFollower(5e-3, 0.150, rate), -40.0 * amount,
                     1.0 + 9.0 * amount});
  }
  std::vector<double> y(x.size());
  for (std::size_t n = 0; n < x.size(); ++n) {
    const double low = low_lp.Process(x[n]);
    const double rest = low_hp.Process(x[n]);
    const double split[3] = {low, high_lp.Process(rest), high_hp.Process(rest)};
    double acc = 0.0;
    for (int b = 0; b < 3; ++b) {
      auto& band = bands[b];
      acc += split[b] * dsp::CompressorGain(band.env.Process(split[b]),
                                            band.threshold_db, band.ratio);
    }
    y[n] = acc;
  }
  return y;
}

// --- thru-zero flanger: a swept delay passes through a fixed reference
// delay, and the swept path is subtracted so the two cancel at crossing.
std::vector<double> Flanger(Samples x, const Physical& p, double rate) {
  const double lfo_hz = p[0], depth = p[1] * rate / 1000.0;
  const double feedback = p[2], mix = p[3];
  dsp::DelayLine dry(static_cast<std::size_t>(std::ceil(depth)) + 1);
  dsp::DelayLine swept(static_cast<std::size_t>(std::ceil(2.0 * depth)) + 1);
  std::vector<double> y(x.size());
  double last = 0.0;
  for (std::size_t n = 0; n < x.size(); ++n) {
    const double sweep =
        depth * (1.0 - std::cos(kTwoPi * lfo_hz * static_cast<double>(n) / rate));
    dry.Push(x[n]);
    swept.Push(x[n] + feedback * last);
    const double reference = dry.ReadBack(depth);
    last = swept.ReadBack(sweep);
    y[n] = reference - mix * last;
  }
  return y;
}

using Processor = std::function<std::vector<double>(Samples, const Physical&, double)>;

const Processor& ProcessorFor(std::string_view id) {
  static const std::vector<std::pair<std::string, Processor>> table = {
      {"ambience", Ambience}, {"combo", Combo},         {"delay", Delay},
      {"dynamics", Dynamics}, {"overdrive", Overdrive}, {"ringmod", RingMod},
      {"leslie", Leslie},     {"multiband", MultiBand}, {"flanger", Flanger},
  };
  for (const auto& [name, fn] : table)
    if (name == id) return fn;
  FindEffect(id);  // throws UnknownEffect
  throw Error(ErrorCode::kUnknownEffect, std::string(id));
}

}  // namespace

int EffectDescriptor::IndexOf(std::string_view name) const {
  for (std::size_t i = 0; i < params.size(); ++i)
    if (params[i].name == name) return static_cast<int>(i);
  return -1;
}

const std::vector<EffectDescriptor>& ListEffects() {
  static const std::vector<EffectDescriptor> registry = BuildRegistry();
  return registry;
}

const std::vector<std::string>& TrainingEffectIds() {
  static const std::vector<std::string> ids = {"ambience", "combo",     "delay",
                                               "dynamics", "overdrive", "ringmod"};
  return ids;
}

const EffectDescriptor& FindEffect(std::string_view id) {
  for (const auto& e : ListEffects())
    if (e.id == id) return e;
  std::string valid;
  for (const auto& e : ListEffects()) valid += (valid.empty() ? "" : ", ") + e.id;
  throw Error(ErrorCode::kUnknownEffect,
              "unknown effect '" + std::string(id) + "'; valid ids: " + valid);
}

void ValidateTheta(const EffectDescriptor& effect, const ParamVector& theta) {
  if (!theta.effect_id.empty() && theta.effect_id != effect.id)
    throw Error(ErrorCode::kDimensionMismatch,
                "theta for '" + theta.effect_id + "' given to '" + effect.id + "'");
  if (theta.values.size() != effect.param_count())
    throw Error(ErrorCode::kDimensionMismatch,
                effect.id + " expects " + std::to_string(effect.param_count()) +
                    " parameters, got " + std::to_string(theta.values.size()));
  for (double t : theta.values)
    if (!(t >= 0.0 && t <= 1.0))
      throw Error(ErrorCode::kDimensionMismatch, "theta coordinate outside [0, 1]");
}

double DenormalizeValue(const ParamSpec& spec, double t) {
  if (spec.mapping == ParamMapping::kLogarithmic)
    return spec.physical_min * std::pow(spec.physical_max / spec.physical_min, t);
  return spec.physical_min + t * (spec.physical_max - spec.physical_min);
}

std::vector<double> Denormalize(const EffectDescriptor& effect,
                                const ParamVector& theta) {
  ValidateTheta(effect, theta);
  std::vector<double> out(effect.param_count());
  for (std::size_t i = 0; i < out.size(); ++i)
    out[i] = DenormalizeValue(effect.params[i], theta.values[i]);
  return out;
}

AudioBuffer Process(std::string_view effect_id, const AudioBuffer& audio,
                    const ParamVector& theta) {
  const auto& effect = FindEffect(effect_id);
  const auto physical = Denormalize(effect, theta);
  if (audio.sample_rate <= 0)
    throw Error(ErrorCode::kDimensionMismatch, "sample rate must be positive");
  const auto core = ProcessorFor(effect_id)(audio.samples, physical,
                                            static_cast<double>(audio.sample_rate));
  const int out_index = effect.IndexOf("output_db");
  const double gain = out_index >= 0 ? DbToLinear(physical[out_index]) : 1.0;
  AudioBuffer out;
  out.sample_rate = audio.sample_rate;
  out.samples.resize(core.size());
  for (std::size_t n = 0; n < core.size(); ++n) {
    const double v = core[n] * gain;
    out.samples[n] = std::isfinite(v) ? static_cast<float>(v) : 0.0f;
  }
  return out;
}

ParamVector RandomTheta(std::string_view effect_id, Rng& rng) {
  const auto& effect = FindEffect(effect_id);
  ParamVector theta{effect.id, std::vector<double>(effect.param_count())};
  for (auto& v : theta.values) v = Uniform01(rng);
  return theta;
}

}  // namespace ndst
