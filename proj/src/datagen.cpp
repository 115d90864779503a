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

#include "ndst/datagen.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>

#include <json.hpp>

#include "ndst/error.hpp"

namespace ndst {
namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;
constexpr double kSourcePeak = 0.9;
constexpr const char* kManifestName = "ndst_manifest.json";

void ScaleToPeak(std::vector<float>& x, double peak) {
  const double p = PeakAbs(x);
  if (p <= 0.0) return;
  const double g = peak / p;
  for (auto& v : x) v = static_cast<float>(v * g);
}

double LogUniform(Rng& rng, double lo, double hi) {
  return lo * std::pow(hi / lo, Uniform01(rng));
}

std::vector<float> Harmonic(Rng& rng, int sr, std::size_t length) {
  std::vector<float> out(length, 0.0f);
  std::size_t pos = 0;
  while (pos < length) {
    const auto dur = static_cast<std::size_t>(UniformRange(rng, 0.15, 0.6) * sr);
    const double f0 = LogUniform(rng, 80.0, 400.0);
    const double decay = UniformRange(rng, 1.0, 8.0);
    const int partials = std::min(30, static_cast<int>(0.45 * sr / f0));
    std::vector<double> phase(partials);
    for (auto& p : phase) p = kTwoPi * Uniform01(rng);
    const std::size_t end = std::min(length, pos + dur);
    const double attack = 0.005 * sr;
    for (std::size_t n = pos; n < end; ++n) {
      const double t = static_cast<double>(n - pos) / sr;
      const double env = std::min(1.0, static_cast<double>(n - pos) / attack) * std::exp(-decay * t);
      double acc = 0.0;
      for (int k = 1; k <= partials; ++k) acc += std::sin(kTwoPi * f0 * k * t + phase[k - 1]) / k;
      out[n] = static_cast<float>(env * acc);
    }
    pos = end;
  }
  return out;
}

std::vector<float> NoiseBurst(Rng& rng, int sr, std::size_t length) {
  std::vector<float> out(length);
  const double rate = UniformRange(rng, 0.5, 6.0);
  const double phi = kTwoPi * Uniform01(rng);
  const double cutoff = LogUniform(rng, 500.0, 10000.0);
  const double a = std::exp(-kTwoPi * cutoff / sr);
  double lp = 0.0;
  for (std::size_t n = 0; n < length; ++n) {
    const double t = static_cast<double>(n) / sr;
    const double c = 0.5 - 0.5 * std::cos(kTwoPi * rate * t + phi);
    const double env = 0.15 + 0.85 * c * c;
    lp = (1.0 - a) * StandardNormal(rng) + a * lp;
    out[n] = static_cast<float>(env * lp);
  }
  return out;
}

std::vector<float> Chirp(int sr, std::size_t length) {
  std::vector<float> out(length);
  const double f0 = 100.0;
  const double f1 = std::min(8000.0, 0.45 * sr);
  const double dur = static_cast<double>(length) / sr;
  for (std::size_t n = 0; n < length; ++n) {
    const double t = static_cast<double>(n) / sr;
    out[n] = static_cast<float>(0.5 * std::sin(kTwoPi * (f0 * t + 0.5 * (f1 - f0) * t * t / dur)));
  }
  return out;
}

// Glottal-like pulses through three formant resonators that move per syllable.
std::vector<float> PulseTrain(Rng& rng, int sr, std::size_t length) {
  std::vector<float> out(length);
  const double base_f0 = LogUniform(rng, 90.0, 220.0);
  const double vib_rate = UniformRange(rng, 3.0, 6.0);
  const std::array<double, 3> bw = {80.0, 120.0, 160.0};
  std::array<double, 3> formant{};
  std::array<double, 3> y1{}, y2{};
  std::size_t next_syllable = 0;
  double phase = 0.0;
  for (std::size_t n = 0; n < length; ++n) {
    if (n == next_syllable) {
      formant = {UniformRange(rng, 300, 900), UniformRange(rng, 900, 2500),
                 UniformRange(rng, 2400, std::min(3500.0, 0.45 * sr))};
      next_syllable = n + static_cast<std::size_t>(UniformRange(rng, 0.15, 0.35) * sr);
    }
    const double t = static_cast<double>(n) / sr;
    const double f0 = base_f0 * (1.0 + 0.03 * std::sin(kTwoPi * vib_rate * t));
    phase += f0 / sr;
    double excitation = 0.02 * StandardNormal(rng);
    if (phase >= 1.0) {
      phase -= 1.0;
      excitation += 1.0;
    }
    double acc = 0.0;
    for (int i = 0; i < 3; ++i) {
      const double r = std::exp(-std::numbers::pi * bw[i] / sr);
      const double y = excitation + 2.0 * r * std::cos(kTwoPi * formant[i] / sr) * y1[i] - r * r * y2[i];
      y2[i] = y1[i];
      y1[i] = y;
      acc += y * (1.0 - r);
    }
    out[n] = static_cast<float>(acc);
  }
  return out;
}

bool HasWavExtension(const std::filesystem::path& p) {
  std::string ext = p.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
  return ext == ".wav";
}

std::vector<ManifestEntry> ReadManifest(const std::filesystem::path& file) {
  std::vector<ManifestEntry> out;
  std::ifstream in(file);
  if (!in) return out;
  try {
    const auto j = nlohmann::json::parse(in);
    for (const auto& e : j.at("files"))
      out.push_back({e.at("path").get<std::string>(), e.at("length").get<std::uint64_t>(),
                     e.at("rate").get<int>(), e.at("bytes").get<std::uint64_t>()});
  } catch (const nlohmann::json::exception&) {
    out.clear();
  }
  return out;
}

void WriteManifest(const std::filesystem::path& file, const std::vector<ManifestEntry>& entries) {
  nlohmann::json files = nlohmann::json::array();
  for (const auto& e : entries)
    files.push_back({{"path", e.path}, {"length", e.length}, {"rate", e.rate}, {"bytes", e.bytes}});
  std::ofstream out(file);
  if (out) out << nlohmann::json{{"files", files}}.dump(1) << "\n";
}

}  // namespace

const std::vector<SourceKind>& AllSourceKinds() {
  static const std::vector<SourceKind> kinds = {SourceKind::kHarmonic, SourceKind::kNoiseBurst,
                                                SourceKind::kChirp, SourceKind::kPulseTrain};
  return kinds;
}

std::string SourceKindName(SourceKind kind) {
  switch (kind) {
    case SourceKind::kHarmonic: return "harmonic";
    case SourceKind::kNoiseBurst: return "noise_burst";
    case SourceKind::kChirp: return "chirp";
    case SourceKind::kPulseTrain: return "pulse_train";
  }
  return "unknown";
}

AudioBuffer SynthSource(Rng& rng, SourceKind kind, int sample_rate, std::size_t length) {
  AudioBuffer out;
  out.sample_rate = sample_rate;
  switch (kind) {
    case SourceKind::kHarmonic: out.samples = Harmonic(rng, sample_rate, length); break;
    case SourceKind::kNoiseBurst: out.samples = NoiseBurst(rng, sample_rate, length); break;
    case SourceKind::kChirp: out.samples = Chirp(sample_rate, length); break;
    case SourceKind::kPulseTrain: out.samples = PulseTrain(rng, sample_rate, length); break;
  }
  ScaleToPeak(out.samples, kSourcePeak);
  return out;
}

Corpus Corpus::Synthetic(int sample_rate, int patch_len) {
  if (sample_rate <= 0 || patch_len < 2)
    throw Error(ErrorCode::kInvalidConfig, "corpus needs a positive rate and patch length");
  Corpus c;
  c.sample_rate_ = sample_rate;
  c.patch_len_ = patch_len;
  return c;
}

Corpus Corpus::FromDirectory(const std::filesystem::path& root, int sample_rate, int patch_len) {
  Corpus c = Synthetic(sample_rate, patch_len);
  std::error_code ec;
  if (!std::filesystem::is_directory(root, ec))
    throw Error(ErrorCode::kIoError, "corpus directory not found: " + root.string());
  c.root_ = root;

  const auto manifest_path = root / kManifestName;
  std::map<std::string, ManifestEntry> cached;
  for (auto& e : ReadManifest(manifest_path)) cached[e.path] = e;

  std::vector<std::filesystem::path> files;
  for (const auto& item : std::filesystem::recursive_directory_iterator(root))
    if (item.is_regular_file() && HasWavExtension(item.path())) files.push_back(item.path());
  std::sort(files.begin(), files.end());

  bool changed = cached.size() != files.size();
  for (const auto& f : files) {
    const std::string rel = std::filesystem::relative(f, root).generic_string();
    const auto bytes = static_cast<std::uint64_t>(std::filesystem::file_size(f));
    auto it = cached.find(rel);
    if (it != cached.end() && it->second.bytes == bytes) {
      c.entries_.push_back(it->second);
      continue;
    }
    // Decode at the native rate to learn the length.
    const AudioBuffer native = ReadWav(f, 0);
    c.entries_.push_back({rel, native.samples.size(), native.sample_rate, bytes});
    changed = true;
  }
  if (c.entries_.empty())
    throw Error(ErrorCode::kNoNonSilentAudio, "no .wav files under " + root.string());
  if (changed) WriteManifest(manifest_path, c.entries_);
  return c;
}

const AudioBuffer& Corpus::Load(std::size_t index) const {
  auto it = cache_.find(index);
  if (it != cache_.end()) return it->second;
  AudioBuffer a = ReadWav(root_ / entries_.at(index).path, sample_rate_);
  return cache_.emplace(index, std::move(a)).first->second;
}

std::size_t MarginLength(std::size_t patch_len) {
  const double ratio = std::pow(2.0, kMaxPitchShiftSemitones / 12.0);
  return static_cast<std::size_t>(std::ceil(static_cast<double>(patch_len - 1) * ratio)) + 2;
}

AudioBuffer SamplePatch(const Corpus& corpus, Rng& rng, std::size_t length) {
  for (int attempt = 0; attempt < kPatchRetries; ++attempt) {
    AudioBuffer source;
    const AudioBuffer* src = &source;
    if (corpus.synthetic()) {
      const auto& kinds = AllSourceKinds();
      const SourceKind kind = kinds[UniformIndex(rng, kinds.size())];
      source = SynthSource(rng, kind, corpus.sample_rate(),
                           std::max<std::size_t>(2 * static_cast<std::size_t>(corpus.patch_len()), length));
    } else {
      src = &corpus.Load(UniformIndex(rng, corpus.entries().size()));
    }
    if (src->samples.size() < length) continue;
    const std::size_t offset = UniformIndex(rng, src->samples.size() - length + 1);
    AudioBuffer patch;
    patch.sample_rate = corpus.sample_rate();
    patch.samples.assign(src->samples.begin() + static_cast<std::ptrdiff_t>(offset),
                         src->samples.begin() + static_cast<std::ptrdiff_t>(offset + length));
    if (RmsDbfs(patch.samples) > kSilenceThresholdDbfs) return patch;
  }
  throw Error(ErrorCode::kNoNonSilentAudio,
              "no window of " + std::to_string(length) + " samples above " +
                  std::to_string(static_cast<int>(kSilenceThresholdDbfs)) + " dBFS after " +
                  std::to_string(kPatchRetries) + " draws");
}

AudioBuffer SamplePatch(const Corpus& corpus, Rng& rng) {
  return SamplePatch(corpus, rng, static_cast<std::size_t>(corpus.patch_len()));
}

AudioBuffer AugmentWith(const AudioBuffer& source, double semitones, double offset,
                        std::size_t out_len) {
  const double ratio = std::pow(2.0, semitones / 12.0);
  const double last = offset + static_cast<double>(out_len - 1) * ratio;
  if (offset < 0.0 || last > static_cast<double>(source.samples.size() - 1) + 1e-9)
    throw Error(ErrorCode::kTooShort, "source too short for the requested shift and crop");
  AudioBuffer out;
  out.sample_rate = source.sample_rate;
  out.samples = InterpolateAt(source.samples, offset, ratio, out_len);
  return out;
}

AudioBuffer Augment(const AudioBuffer& source, Rng& rng, std::size_t out_len) {
  const double semitones = UniformRange(rng, -kMaxPitchShiftSemitones, kMaxPitchShiftSemitones);
  const double ratio = std::pow(2.0, semitones / 12.0);
  const double span = static_cast<double>(out_len - 1) * ratio;
  const double room = static_cast<double>(source.samples.size() - 1) - span;
  if (room < 0.0) throw Error(ErrorCode::kTooShort, "source shorter than the augmentation margin");
  return AugmentWith(source, semitones, Uniform01(rng) * room, out_len);
}

PairedExample MakePairWith(const AudioBuffer& patch, const ParamVector& theta, Side side) {
  if (patch.samples.size() < 2)
    throw Error(ErrorCode::kTooShort, "patch needs at least two samples");
  const AudioBuffer effected = PeakNormalize(Process(theta.effect_id, patch, theta), kPairPeakDbfs);
  const AudioBuffer dry = PeakNormalize(patch, kPairPeakDbfs);
  const std::size_t half = patch.samples.size() / 2;
  auto segment = [&](const AudioBuffer& a, Side s) {
    AudioBuffer out;
    out.sample_rate = a.sample_rate;
    const std::size_t begin = s == Side::kA ? 0 : half;
    out.samples.assign(a.samples.begin() + static_cast<std::ptrdiff_t>(begin),
                       a.samples.begin() + static_cast<std::ptrdiff_t>(begin + half));
    return out;
  };
  const Side other = side == Side::kA ? Side::kB : Side::kA;
  PairedExample ex;
  ex.input_seg = segment(dry, side);
  ex.ref_seg = segment(effected, other);
  ex.truth_seg = segment(effected, side);
  ex.theta = theta;
  ex.side = side;
  return ex;
}

PairedExample MakePair(const AudioBuffer& patch, std::string_view effect_id, Rng& rng) {
  ParamVector theta = RandomTheta(effect_id, rng);
  const Side side = (rng() >> 63) ? Side::kB : Side::kA;
  return MakePairWith(patch, theta, side);
}

PairedExample GenerateExample(const Corpus& corpus, std::string_view effect_id, Rng& rng) {
  const auto patch_len = static_cast<std::size_t>(corpus.patch_len());
  const AudioBuffer source = SamplePatch(corpus, rng, MarginLength(patch_len));
  const AudioBuffer patch = Augment(source, rng, patch_len);
  for (int attempt = 0; attempt < 8; ++attempt) {
    try {
      return MakePair(patch, effect_id, rng);
    } catch (const Error& e) {
      if (e.code() != ErrorCode::kSilentInput) throw;
    }
  }
  throw Error(ErrorCode::kDataGenerationFailed,
              "effect " + std::string(effect_id) + " produced silence for 8 parameter draws");
}

}  // namespace ndst
