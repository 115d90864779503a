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

#include "ndst/trainer.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <sstream>

#include "ndst/error.hpp"
#include "ndst/nn/optim.hpp"

namespace ndst {
namespace {

constexpr std::uint64_t kInitStream = 0x1a2b3c;
constexpr std::uint64_t kSamplerStream = 0x5a3e;
constexpr std::uint64_t kSpsaStream = 0x5b5a;
constexpr double kNa = std::numeric_limits<double>::quiet_NaN();

void RequireMatchingCorpus(const Corpus& corpus, const Preset& preset) {
  if (corpus.patch_len() != preset.patch_len() || corpus.sample_rate() != preset.sample_rate)
    throw Error(ErrorCode::kInvalidConfig,
                "corpus patch " + std::to_string(corpus.patch_len()) + " @ " +
                    std::to_string(corpus.sample_rate()) + " Hz does not match preset " + preset.name);
}

std::string FormatCell(double v) {
  if (std::isnan(v)) return "";
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.9g", v);
  return buf;
}

long StepsPerEpoch(int examples, int batch) { return (examples + batch - 1) / batch; }

// Examples [begin, end) of a dataset, one derived stream per index.
std::vector<PairedExample> Examples(const Corpus& corpus, std::uint64_t seed, long begin, long end,
                                    const std::function<std::string(long)>& effect_of) {
  std::vector<PairedExample> out;
  for (long i = begin; i < end; ++i) {
    Rng rng = ExampleRng(seed, static_cast<std::uint64_t>(i));
    out.push_back(GenerateExample(corpus, effect_of(i), rng));
  }
  return out;
}

}  // namespace

std::string MetricLog::ToCsv() const {
  std::ostringstream out;
  out << "epoch,step,split,loss,recon,kl,kl_weight,mrstft,mae,lr\n";
  for (const auto& r : rows_)
    out << r.epoch << ',' << r.step << ',' << r.split << ',' << FormatCell(r.loss) << ','
        << FormatCell(r.recon) << ',' << FormatCell(r.kl) << ',' << FormatCell(r.kl_weight) << ','
        << FormatCell(r.mrstft) << ',' << FormatCell(r.mae) << ',' << FormatCell(r.lr) << '\n';
  return out.str();
}

void MetricLog::WriteCsv(const std::filesystem::path& path) const {
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::kIoError, "cannot write " + path.string());
  out << ToCsv();
}

Spectrogram SegmentSpectrogram(const AudioBuffer& segment, const StftConfig& cfg) {
  return NormalizeSpectrogram(StftMagnitude(segment, cfg));
}

void VaeTrainConfig::Validate() const {
  if (!(lr > 0.0)) throw Error(ErrorCode::kInvalidConfig, "vae lr must be > 0");
  if (epochs < 1) throw Error(ErrorCode::kInvalidConfig, "vae epochs must be >= 1");
  if (train_examples < 1 || val_examples < 1 || batch_size < 1)
    throw Error(ErrorCode::kInvalidConfig, "vae example counts and batch size must be >= 1");
  if (effects.empty()) throw Error(ErrorCode::kInvalidConfig, "vae effect rotation is empty");
  for (const auto& e : effects) FindEffect(e);
  if (kl_cycles < 1) throw Error(ErrorCode::kInvalidConfig, "kl cycles must be >= 1");
  if (!(kl_ramp > 0.0 && kl_ramp <= 1.0)) throw Error(ErrorCode::kInvalidConfig, "kl ramp must be in (0, 1]");
  if (!(beta_max >= 0.0)) throw Error(ErrorCode::kInvalidConfig, "beta_max must be >= 0");
}

const std::string& EpochEffect(const VaeTrainConfig& cfg, int epoch) {
  return cfg.effects[static_cast<std::size_t>(epoch) % cfg.effects.size()];
}

VaeTrainResult TrainVae(const VaeTrainConfig& cfg, const Corpus& corpus, const ProgressFn& progress) {
  cfg.Validate();
  RequireMatchingCorpus(corpus, cfg.preset);
  const EncoderShape shape = cfg.preset.encoder_shape();
  Rng init = DeriveRng(cfg.seed, kInitStream);
  SpectroVae<float> vae(shape, init);
  Rng sampler = DeriveRng(cfg.seed, kSamplerStream);
  nn::Adam<float> opt({&vae.encoder.params(), &vae.decoder.params()});

  const long steps_per_epoch = StepsPerEpoch(cfg.train_examples, cfg.batch_size);
  const KlScheduleConfig kl{steps_per_epoch * cfg.epochs, cfg.kl_cycles, cfg.kl_ramp, cfg.beta_max};

  // Fixed validation set spanning every effect in the rotation.
  std::vector<Spectrogram> val_specs;
  for (const auto& ex : Examples(corpus, cfg.val_seed, 0, cfg.val_examples,
                                 [&](long i) { return cfg.effects[i % cfg.effects.size()]; }))
    val_specs.push_back(SegmentSpectrogram(ex.ref_seg, cfg.preset.stft));

  VaeTrainResult result;
  result.best_val_loss = std::numeric_limits<double>::infinity();
  long step = 0;
  auto log = [&](const MetricRow& row) {
    result.log.Add(row);
    if (progress) progress(row);
  };

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    const std::string& effect = EpochEffect(cfg, epoch);
    result.epoch_effects.push_back(effect);
    const long first = static_cast<long>(epoch) * cfg.train_examples;
    for (long b = 0; b < steps_per_epoch; ++b) {
      const long begin = first + b * cfg.batch_size;
      const long end = std::min(first + cfg.train_examples, begin + cfg.batch_size);
      std::vector<Spectrogram> specs;
      for (const auto& ex : Examples(corpus, cfg.seed, begin, end, [&](long) { return effect; }))
        specs.push_back(SegmentSpectrogram(ex.ref_seg, cfg.preset.stft));
      auto x = nn::Constant(SpectrogramBatch<float>(specs));
      const auto code = vae.encoder.Encode(x, true, &sampler);
      const auto recon = vae.decoder.Decode(code.z, true);
      const double w = KlWeight(step, kl);
      const auto loss = ComputeVaeLoss(recon, x, code, w);
      nn::Backward(loss.total);
      opt.Step(cfg.lr);
      vae.encoder.params().ZeroGrad();
      vae.decoder.params().ZeroGrad();
      const double total = loss.total->value.data[0];
      if (!std::isfinite(total))
        throw Error(ErrorCode::kNumericFailure, "vae loss is not finite at step " + std::to_string(step));
      log({epoch, step, "train", total, loss.reconstruction, loss.kl, w, kNa, kNa, cfg.lr});
      ++step;
    }

    double recon_sum = 0.0, kl_sum = 0.0;
    for (std::size_t b = 0; b < val_specs.size(); b += static_cast<std::size_t>(cfg.batch_size)) {
      const std::size_t e = std::min(val_specs.size(), b + static_cast<std::size_t>(cfg.batch_size));
      std::vector<Spectrogram> batch(val_specs.begin() + static_cast<std::ptrdiff_t>(b),
                                     val_specs.begin() + static_cast<std::ptrdiff_t>(e));
      auto x = nn::Constant(SpectrogramBatch<float>(batch));
      const auto code = vae.encoder.Encode(x, false);
      const auto recon = vae.decoder.Decode(code.z, false);
      const auto loss = ComputeVaeLoss(recon, x, code, cfg.beta_max);
      recon_sum += loss.reconstruction * static_cast<double>(e - b);
      kl_sum += loss.kl * static_cast<double>(e - b);
    }
    const double n = static_cast<double>(val_specs.size());
    const double val_loss = recon_sum / n + cfg.beta_max * kl_sum / n;
    log({epoch, step, "val", val_loss, recon_sum / n, kl_sum / n, cfg.beta_max, kNa, kNa, cfg.lr});
    if (val_loss < result.best_val_loss) {
      result.best_val_loss = val_loss;
      result.best_epoch = epoch;
      Checkpoint c;
      AppendParams(c, vae.encoder.params());
      AppendParams(c, vae.decoder.params());
      c.metadata = {{"kind", "vae"}, {"preset", cfg.preset.name}};
      result.checkpoint = std::move(c);
    }
  }
  result.checkpoint.metadata["best_epoch"] = std::to_string(result.best_epoch);
  return result;
}

Encoder<float> LoadEncoder(const Checkpoint& c, const Preset& preset) {
  const std::string stored = c.Meta("preset");
  if (!stored.empty() && stored != preset.name)
    throw Error(ErrorCode::kShapeMismatch, "checkpoint preset " + stored + " vs " + preset.name);
  Rng rng(0);
  Encoder<float> enc(preset.encoder_shape(), rng);
  LoadParams(c, enc.params());
  return enc;
}

StyleModel::StyleModel(const Preset& preset, const std::string& effect_id, Rng& init)
    : preset_(preset),
      effect_id_(FindEffect(effect_id).id),
      encoder_(preset.encoder_shape(), init),
      controller_(2 * preset.encoder_shape().latent_dim,
                  static_cast<int>(FindEffect(effect_id).param_count()), init) {}

StyleModel StyleModel::FromCheckpoint(const Checkpoint& c) {
  if (c.Meta("kind") != "e2e")
    throw Error(ErrorCode::kShapeMismatch, "not a style-matching checkpoint");
  Rng rng(0);
  StyleModel model(Preset::ByName(c.Meta("preset")), c.Meta("effect_id"), rng);
  LoadParams(c, model.encoder_.params());
  LoadParams(c, model.controller_.params());
  return model;
}

Var<float> StyleModel::Embed(const std::vector<AudioBuffer>& segments, bool encoder_training) const {
  std::vector<Spectrogram> specs;
  for (const auto& s : segments) specs.push_back(SegmentSpectrogram(s, preset_.stft));
  return encoder_.Encode(nn::Constant(SpectrogramBatch<float>(specs)), encoder_training).mu;
}

Var<float> StyleModel::Predict(const std::vector<AudioBuffer>& inputs,
                               const std::vector<AudioBuffer>& refs, bool encoder_training) const {
  if (inputs.size() != refs.size())
    throw Error(ErrorCode::kDimensionMismatch, "input and reference batches differ in size");
  return controller_(nn::ConcatColumns(Embed(inputs, encoder_training), Embed(refs, encoder_training)));
}

std::vector<ParamVector> StyleModel::PredictTheta(const std::vector<AudioBuffer>& inputs,
                                                  const std::vector<AudioBuffer>& refs) const {
  const auto theta = Predict(inputs, refs, false);
  const int p = theta->value.shape[1];
  std::vector<ParamVector> out;
  for (std::size_t n = 0; n < inputs.size(); ++n) {
    ParamVector v{effect_id_, std::vector<double>(static_cast<std::size_t>(p))};
    for (int i = 0; i < p; ++i) v.values[i] = theta->value.data[n * p + i];
    out.push_back(std::move(v));
  }
  return out;
}

Checkpoint StyleModel::ToCheckpoint() const {
  Checkpoint c;
  AppendParams(c, encoder_.params());
  AppendParams(c, controller_.params());
  c.metadata = {{"kind", "e2e"}, {"preset", preset_.name}, {"effect_id", effect_id_}};
  return c;
}

E2eTrainConfig E2eTrainConfig::Untrained() {
  E2eTrainConfig c;
  c.lr = 3e-5;
  c.clip_norm = 5.0;
  c.freeze_encoder = false;
  return c;
}

void E2eTrainConfig::Validate() const {
  FindEffect(effect_id);
  if (!(lr > 0.0)) throw Error(ErrorCode::kInvalidConfig, "e2e lr must be > 0");
  if (epochs < 1) throw Error(ErrorCode::kInvalidConfig, "e2e epochs must be >= 1");
  if (train_examples < 1 || val_examples < 1 || batch_size < 1)
    throw Error(ErrorCode::kInvalidConfig, "e2e example counts and batch size must be >= 1");
  if (!(alpha >= 0.0)) throw Error(ErrorCode::kInvalidConfig, "alpha must be >= 0");
  double prev = 0.0;
  for (double d : lr_drops) {
    if (!(d > prev && d < 1.0))
      throw Error(ErrorCode::kInvalidConfig, "lr drop points must increase strictly within (0, 1)");
    prev = d;
  }
  if (!(lr_drop_factor > 0.0)) throw Error(ErrorCode::kInvalidConfig, "lr drop factor must be > 0");
  if (!(clip_norm >= 0.0)) throw Error(ErrorCode::kInvalidConfig, "clip norm must be >= 0");
  spsa.Validate();
  mrstft.Validate();
}

double ScheduledLr(double base, const std::vector<double>& drops, double factor, long step,
                   long total_steps) {
  const double progress = total_steps > 0 ? static_cast<double>(step) / static_cast<double>(total_steps) : 0.0;
  double lr = base;
  for (double d : drops)
    if (progress >= d) lr /= factor;
  return lr;
}

E2eTrainResult TrainE2e(const E2eTrainConfig& cfg, const Checkpoint* encoder, const Corpus& corpus,
                        const ProgressFn& progress) {
  cfg.Validate();
  RequireMatchingCorpus(corpus, cfg.preset);
  Rng init = DeriveRng(cfg.seed, kInitStream);
  StyleModel model(cfg.preset, cfg.effect_id, init);
  if (encoder != nullptr) LoadParams(*encoder, model.encoder().params());
  if (cfg.freeze_encoder) model.encoder().params().SetRequiresGrad(false);

  std::vector<nn::ParamStore<float>*> stores = {&model.controller().params()};
  if (!cfg.freeze_encoder) stores.push_back(&model.encoder().params());
  nn::Adam<float> opt(stores);
  Rng spsa_rng = DeriveRng(cfg.seed, kSpsaStream);

  const auto effect_of = [&](long) { return cfg.effect_id; };
  const auto val = Examples(corpus, cfg.val_seed, 0, cfg.val_examples, effect_of);
  const long steps_per_epoch = StepsPerEpoch(cfg.train_examples, cfg.batch_size);
  const long total_steps = steps_per_epoch * cfg.epochs;
  const bool encoder_training = !cfg.freeze_encoder;

  E2eTrainResult result;
  result.best_val_loss = std::numeric_limits<double>::infinity();
  auto log = [&](const MetricRow& row) {
    result.log.Add(row);
    if (progress) progress(row);
  };

  long step = 0;
  double lr = cfg.lr;
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    const long first = static_cast<long>(epoch) * cfg.train_examples;
    for (long b = 0; b < steps_per_epoch; ++b) {
      const long begin = first + b * cfg.batch_size;
      const long end = std::min(first + cfg.train_examples, begin + cfg.batch_size);
      std::vector<AudioBuffer> inputs, refs, truths;
      for (auto& ex : Examples(corpus, cfg.seed, begin, end, effect_of)) {
        inputs.push_back(std::move(ex.input_seg));
        refs.push_back(std::move(ex.ref_seg));
        truths.push_back(std::move(ex.truth_seg));
      }
      const auto theta = model.Predict(inputs, refs, encoder_training);
      EffectLossTerms terms;
      const auto loss = EffectLoss(theta, cfg.effect_id, inputs, truths, cfg.alpha, cfg.mrstft,
                                   cfg.spsa, spsa_rng, &terms);
      const double total = loss->value.data[0];
      if (!std::isfinite(total))
        throw Error(ErrorCode::kNumericFailure, "e2e loss is not finite at step " + std::to_string(step));
      nn::Backward(loss);
      if (cfg.clip_norm > 0.0) nn::ClipGradientNorm(stores, cfg.clip_norm);
      lr = ScheduledLr(cfg.lr, cfg.lr_drops, cfg.lr_drop_factor, step, total_steps);
      opt.Step(lr);
      for (auto* s : stores) s->ZeroGrad();
      double mr = 0.0, mae = 0.0;
      for (const auto& p : terms.parts) {
        mr += p.mrstft;
        mae += p.mae;
      }
      const double n = static_cast<double>(terms.parts.size());
      log({epoch, step, "train", total, kNa, kNa, kNa, mr / n, mae / n, lr});
      ++step;
    }

    double loss_sum = 0.0, mr_sum = 0.0, mae_sum = 0.0;
    for (std::size_t b = 0; b < val.size(); b += static_cast<std::size_t>(cfg.batch_size)) {
      const std::size_t e = std::min(val.size(), b + static_cast<std::size_t>(cfg.batch_size));
      std::vector<AudioBuffer> inputs, refs;
      for (std::size_t i = b; i < e; ++i) {
        inputs.push_back(val[i].input_seg);
        refs.push_back(val[i].ref_seg);
      }
      const auto thetas = model.PredictTheta(inputs, refs);
      for (std::size_t i = b; i < e; ++i) {
        const auto y = Process(cfg.effect_id, val[i].input_seg, ClampTheta(thetas[i - b], cfg.spsa.epsilon));
        const auto parts = E2eLoss(y.samples, val[i].truth_seg.samples, cfg.alpha, cfg.mrstft);
        loss_sum += parts.total;
        mr_sum += parts.mrstft;
        mae_sum += parts.mae;
      }
    }
    const double n = static_cast<double>(val.size());
    const double val_loss = loss_sum / n;
    if (!std::isfinite(val_loss))
      throw Error(ErrorCode::kNumericFailure, "e2e validation loss is not finite");
    log({epoch, step, "val", val_loss, kNa, kNa, kNa, mr_sum / n, mae_sum / n, lr});
    if (val_loss < result.best_val_loss) {
      result.best_val_loss = val_loss;
      result.best_epoch = epoch;
      result.checkpoint = model.ToCheckpoint();
    }
  }
  result.checkpoint.metadata["best_epoch"] = std::to_string(result.best_epoch);
  result.checkpoint.metadata["encoder"] = encoder == nullptr ? "fresh" : "pretrained";
  return result;
}

StyleMatchResult StyleMatch(const AudioBuffer& input, const AudioBuffer& reference,
                            const std::string& effect_id, const Checkpoint& e2e) {
  const std::string trained_for = e2e.Meta("effect_id");
  if (trained_for != effect_id)
    throw Error(ErrorCode::kEffectMismatch,
                "checkpoint was trained for '" + trained_for + "', requested '" + effect_id + "'");
  const StyleModel model = StyleModel::FromCheckpoint(e2e);
  const Preset& preset = model.preset();
  auto prepare = [&](const AudioBuffer& a) {
    AudioBuffer r = a;
    if (r.sample_rate != preset.sample_rate) {
      r.samples = ResampleLinear(a.samples, a.sample_rate, preset.sample_rate);
      r.sample_rate = preset.sample_rate;
    }
    return PeakNormalize(r, kPairPeakDbfs);
  };
  auto first_segment = [&](const AudioBuffer& a) {
    AudioBuffer s;
    s.sample_rate = a.sample_rate;
    s.samples.assign(static_cast<std::size_t>(preset.segment_len), 0.0f);
    std::copy_n(a.samples.begin(), std::min(a.samples.size(), s.samples.size()), s.samples.begin());
    return s;
  };
  const AudioBuffer in = prepare(input);
  const AudioBuffer ref = prepare(reference);
  StyleMatchResult out;
  out.theta = ClampTheta(model.PredictTheta({first_segment(in)}, {first_segment(ref)})[0],
                         SpsaConfig{}.epsilon);
  out.physical = Denormalize(FindEffect(effect_id), out.theta);
  out.output = Process(effect_id, in, out.theta);
  return out;
}

}  // namespace ndst
