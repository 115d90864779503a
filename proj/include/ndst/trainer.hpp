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
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "ndst/checkpoint.hpp"
#include "ndst/controller.hpp"
#include "ndst/datagen.hpp"
#include "ndst/losses.hpp"
#include "ndst/preset.hpp"
#include "ndst/spsa.hpp"
#include "ndst/vae.hpp"

namespace ndst {

// One line of the training log. NaN marks a column that does not apply.
struct MetricRow {
  int epoch = 0;
  long step = 0;
  std::string split;  // train | val
  double loss = 0.0;
  double recon = 0.0;
  double kl = 0.0;
  double kl_weight = 0.0;
  double mrstft = 0.0;
  double mae = 0.0;
  double lr = 0.0;
};

class MetricLog {
 public:
  void Add(const MetricRow& row) { rows_.push_back(row); }
  const std::vector<MetricRow>& rows() const { return rows_; }
  // Header: epoch,step,split,loss,recon,kl,kl_weight,mrstft,mae,lr
  std::string ToCsv() const;
  void WriteCsv(const std::filesystem::path& path) const;

 private:
  std::vector<MetricRow> rows_;
};

using ProgressFn = std::function<void(const MetricRow&)>;

// Compressed magnitude spectrogram scaled to a peak of 1.
Spectrogram SegmentSpectrogram(const AudioBuffer& segment, const StftConfig& cfg);

struct VaeTrainConfig {
  Preset preset = Preset::Desk();
  double lr = 5e-4;
  int epochs = 6;
  int train_examples = 96;  // per epoch
  int val_examples = 16;
  int batch_size = 8;
  std::vector<std::string> effects = TrainingEffectIds();
  int kl_cycles = 4;
  double kl_ramp = 0.5;
  double beta_max = 1e-4;
  std::uint64_t seed = 1;
  std::uint64_t val_seed = 1000003;

  void Validate() const;
};

struct VaeTrainResult {
  Checkpoint checkpoint;  // best-validation weights
  MetricLog log;
  int best_epoch = 0;
  double best_val_loss = 0.0;
  std::vector<std::string> epoch_effects;
};

// Effect used for training epoch `epoch`.
const std::string& EpochEffect(const VaeTrainConfig& cfg, int epoch);

VaeTrainResult TrainVae(const VaeTrainConfig& cfg, const Corpus& corpus,
                        const ProgressFn& progress = {});

// Encoder for `preset`, loaded from a VAE or e2e checkpoint.
Encoder<float> LoadEncoder(const Checkpoint& c, const Preset& preset);

// Siamese encoder + controller for one effect.
class StyleModel {
 public:
  StyleModel(const Preset& preset, const std::string& effect_id, Rng& init);
  static StyleModel FromCheckpoint(const Checkpoint& c);

  const Preset& preset() const { return preset_; }
  const std::string& effect_id() const { return effect_id_; }
  Encoder<float>& encoder() { return encoder_; }
  const Encoder<float>& encoder() const { return encoder_; }
  Controller<float>& controller() { return controller_; }
  const Controller<float>& controller() const { return controller_; }

  // Posterior means of segment spectrograms, [N, latent].
  Var<float> Embed(const std::vector<AudioBuffer>& segments, bool encoder_training) const;
  // theta [N, P] from concatenated input and reference embeddings.
  Var<float> Predict(const std::vector<AudioBuffer>& inputs, const std::vector<AudioBuffer>& refs,
                     bool encoder_training) const;
  std::vector<ParamVector> PredictTheta(const std::vector<AudioBuffer>& inputs,
                                        const std::vector<AudioBuffer>& refs) const;

  Checkpoint ToCheckpoint() const;

 private:
  Preset preset_;
  std::string effect_id_;
  Encoder<float> encoder_;
  Controller<float> controller_;
};

struct E2eTrainConfig {
  Preset preset = Preset::Desk();
  std::string effect_id = "overdrive";
  double lr = 1e-3;
  int epochs = 8;
  int train_examples = 128;  // per epoch
  int val_examples = 32;
  int batch_size = 8;
  double alpha = 100.0;
  SpsaConfig spsa;
  MrstftConfig mrstft;
  bool freeze_encoder = true;
  std::vector<double> lr_drops = {0.8, 0.95};
  double lr_drop_factor = 10.0;
  double clip_norm = 0.0;  // 0 disables clipping
  std::uint64_t seed = 2;
  std::uint64_t val_seed = 2000003;

  // Trainable, randomly initialized encoder: lr 3e-5, clipping at norm 5.
  static E2eTrainConfig Untrained();
  void Validate() const;
};

// Step learning rate: base divided by `factor` at each drop point passed.
double ScheduledLr(double base, const std::vector<double>& drops, double factor, long step,
                   long total_steps);

struct E2eTrainResult {
  Checkpoint checkpoint;  // best-validation weights
  MetricLog log;
  int best_epoch = 0;
  double best_val_loss = 0.0;
};

// `encoder` null trains from a fresh encoder. Throws NumericFailure when a
// loss turns non-finite.
E2eTrainResult TrainE2e(const E2eTrainConfig& cfg, const Checkpoint* encoder, const Corpus& corpus,
                        const ProgressFn& progress = {});

struct StyleMatchResult {
  ParamVector theta;
  std::vector<double> physical;
  AudioBuffer output;
};

// Both signals peak-normalized to -12 dBFS; the first segment of each
// (zero-padded when short) is embedded; output = effect(input, theta).
StyleMatchResult StyleMatch(const AudioBuffer& input, const AudioBuffer& reference,
                            const std::string& effect_id, const Checkpoint& e2e);

}  // namespace ndst
