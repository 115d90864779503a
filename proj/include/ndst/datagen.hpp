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

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "ndst/audio.hpp"
#include "ndst/dafx.hpp"
#include "ndst/random.hpp"

namespace ndst {

inline constexpr double kSilenceThresholdDbfs = -45.0;
inline constexpr int kPatchRetries = 32;
inline constexpr double kMaxPitchShiftSemitones = 2.0;
inline constexpr double kPairPeakDbfs = -12.0;

enum class SourceKind { kHarmonic, kNoiseBurst, kChirp, kPulseTrain };

const std::vector<SourceKind>& AllSourceKinds();
std::string SourceKindName(SourceKind kind);

// Synthetic program material of `length` samples, peak <= 1.
AudioBuffer SynthSource(Rng& rng, SourceKind kind, int sample_rate, std::size_t length);

struct ManifestEntry {
  std::string path;  // relative to the corpus root
  std::uint64_t length = 0;  // frames at the file's native rate
  int rate = 0;
  std::uint64_t bytes = 0;
};

// Source audio: either the synthetic generator or a directory of WAV files
// (scanned recursively; a JSON manifest is cached in the directory).
class Corpus {
 public:
  static Corpus Synthetic(int sample_rate, int patch_len);
  static Corpus FromDirectory(const std::filesystem::path& root, int sample_rate, int patch_len);

  bool synthetic() const { return root_.empty(); }
  int sample_rate() const { return sample_rate_; }
  int patch_len() const { return patch_len_; }
  const std::filesystem::path& root() const { return root_; }
  const std::vector<ManifestEntry>& entries() const { return entries_; }

  // Whole file `index` resampled to sample_rate (cached).
  const AudioBuffer& Load(std::size_t index) const;

 private:
  int sample_rate_ = 24000;
  int patch_len_ = 0;
  std::filesystem::path root_;
  std::vector<ManifestEntry> entries_;
  mutable std::map<std::size_t, AudioBuffer> cache_;
};

// Source samples needed so any pitch shift within +-2 semitones still fills
// `patch_len` output samples.
std::size_t MarginLength(std::size_t patch_len);

// Random window of `length` samples with RMS above -45 dBFS; up to 32 draws
// of file and offset, then NoNonSilentAudio.
AudioBuffer SamplePatch(const Corpus& corpus, Rng& rng, std::size_t length);
AudioBuffer SamplePatch(const Corpus& corpus, Rng& rng);

// Pitch shift by resampling with ratio 2^(semitones/12), then crop
// `out_len` samples starting at source position `offset`.
AudioBuffer AugmentWith(const AudioBuffer& source, double semitones, double offset,
                        std::size_t out_len);
// Shift uniform in [-2, 2] semitones, offset uniform over the valid range.
AudioBuffer Augment(const AudioBuffer& source, Rng& rng, std::size_t out_len);

enum class Side { kA, kB };

struct PairedExample {
  AudioBuffer input_seg;  // unaffected segment `side`
  AudioBuffer ref_seg;    // effected other segment
  AudioBuffer truth_seg;  // effected segment `side`
  ParamVector theta;
  Side side = Side::kA;
};

// Effect with the given theta and side; both signals peak-normalized to
// -12 dBFS before splitting into halves. Throws SilentInput.
PairedExample MakePairWith(const AudioBuffer& patch, const ParamVector& theta, Side side);
PairedExample MakePair(const AudioBuffer& patch, std::string_view effect_id, Rng& rng);

// Full pipeline: sample, augment, effect, normalize, split. Draws whose
// effected output is silent are redrawn (up to 8 times, then
// DataGenerationFailed).
PairedExample GenerateExample(const Corpus& corpus, std::string_view effect_id, Rng& rng);

// Independent stream for example `index` of a dataset seeded by `seed`.
inline Rng ExampleRng(std::uint64_t seed, std::uint64_t index) { return DeriveRng(seed, index); }

}  // namespace ndst
