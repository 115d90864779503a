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

// ndst: command-line front end for data generation, training and analysis.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "ndst/analysis.hpp"
#include "ndst/checkpoint.hpp"
#include "ndst/datagen.hpp"
#include "ndst/error.hpp"
#include "ndst/trainer.hpp"

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;
using namespace ndst;

namespace {

json Defaults() {
  const VaeTrainConfig vae;
  const E2eTrainConfig e2e;
  return {
      {"preset", "desk"},
      {"seed", 1},
      {"corpus", ""},
      {"vae",
       {{"lr", vae.lr},
        {"epochs", vae.epochs},
        {"train_examples", vae.train_examples},
        {"val_examples", vae.val_examples},
        {"batch_size", vae.batch_size},
        {"kl_cycles", vae.kl_cycles},
        {"kl_ramp", vae.kl_ramp},
        {"beta_max", vae.beta_max}}},
      {"e2e",
       {{"effect", e2e.effect_id},
        {"lr", nullptr},  // null: 1e-3 frozen, 3e-5 trainable
        {"epochs", e2e.epochs},
        {"train_examples", e2e.train_examples},
        {"val_examples", e2e.val_examples},
        {"batch_size", e2e.batch_size},
        {"alpha", e2e.alpha},
        {"freeze_encoder", e2e.freeze_encoder},
        {"lr_drops", e2e.lr_drops},
        {"lr_drop_factor", e2e.lr_drop_factor},
        {"clip_norm", nullptr}}},  // null: 0 frozen, 5 trainable
      {"spsa", {{"epsilon", e2e.spsa.epsilon}, {"num_draws", e2e.spsa.num_draws}}},
      {"mrstft", {{"fft_sizes", e2e.mrstft.fft_sizes}}},
      {"analysis",
       {{"per_class", 200},
        {"train_fraction", 0.85},
        {"pca_k", 128},
        {"trees", 100},
        {"max_depth", 16},
        {"mmi_samples", 10000},
        {"eval_examples", 200}}},
  };
}

[[noreturn]] void ConfigError(const std::string& what) { throw Error(ErrorCode::kInvalidConfig, what); }

// Overlays `got` on `base`, rejecting keys the defaults do not know.
void Overlay(json& base, const json& got, const std::string& where) {
  if (!got.is_object()) ConfigError(where + " must be an object");
  for (const auto& [key, value] : got.items()) {
    if (!base.contains(key)) ConfigError("unknown config key '" + where + key + "'");
    if (base[key].is_object())
      Overlay(base[key], value, where + key + ".");
    else
      base[key] = value;
  }
}

template <typename T>
T Get(const json& j, const char* key) {
  try {
    return j.at(key).get<T>();
  } catch (const json::exception& e) {
    ConfigError(std::string("config key '") + key + "': " + e.what());
  }
}

struct Common {
  std::string config;
  std::optional<std::string> preset;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> corpus;
  std::string out;
};

struct Run {
  json cfg;
  Preset preset;
  std::uint64_t seed = 1;
  fs::path dir;
};

Run Resolve(const Common& c, const std::string& command, const std::function<void(json&)>& overrides) {
  Run run;
  run.cfg = Defaults();
  if (!c.config.empty()) {
    std::ifstream in(c.config);
    if (!in) ConfigError("cannot open config '" + c.config + "'");
    json file;
    try {
      file = json::parse(in);
    } catch (const json::exception& e) {
      ConfigError("config '" + c.config + "' is not valid JSON: " + e.what());
    }
    Overlay(run.cfg, file, "");
  }
  if (c.preset) run.cfg["preset"] = *c.preset;
  if (c.seed) run.cfg["seed"] = *c.seed;
  if (c.corpus) run.cfg["corpus"] = *c.corpus;
  if (overrides) overrides(run.cfg);
  run.preset = Preset::ByName(Get<std::string>(run.cfg, "preset"));
  run.seed = Get<std::uint64_t>(run.cfg, "seed");
  run.dir = c.out.empty() ? fs::path("runs") / command : fs::path(c.out);
  fs::create_directories(run.dir);
  std::ofstream(run.dir / "config.json") << run.cfg.dump(2) << '\n';
  return run;
}

Corpus LoadCorpus(const Run& run) {
  const auto root = Get<std::string>(run.cfg, "corpus");
  if (root.empty()) return Corpus::Synthetic(run.preset.sample_rate, run.preset.patch_len());
  return Corpus::FromDirectory(root, run.preset.sample_rate, run.preset.patch_len());
}

MrstftConfig MrstftFrom(const json& cfg) {
  MrstftConfig m;
  m.fft_sizes = Get<std::vector<int>>(cfg.at("mrstft"), "fft_sizes");
  m.Validate();
  return m;
}

VaeTrainConfig VaeFrom(const Run& run) {
  const json& v = run.cfg.at("vae");
  VaeTrainConfig c;
  c.preset = run.preset;
  c.lr = Get<double>(v, "lr");
  c.epochs = Get<int>(v, "epochs");
  c.train_examples = Get<int>(v, "train_examples");
  c.val_examples = Get<int>(v, "val_examples");
  c.batch_size = Get<int>(v, "batch_size");
  c.kl_cycles = Get<int>(v, "kl_cycles");
  c.kl_ramp = Get<double>(v, "kl_ramp");
  c.beta_max = Get<double>(v, "beta_max");
  c.seed = run.seed;
  c.val_seed = run.seed + 1000002;
  c.Validate();
  return c;
}

E2eTrainConfig E2eFrom(const Run& run) {
  const json& e = run.cfg.at("e2e");
  const bool freeze = Get<bool>(e, "freeze_encoder");
  E2eTrainConfig c = freeze ? E2eTrainConfig{} : E2eTrainConfig::Untrained();
  c.preset = run.preset;
  c.effect_id = Get<std::string>(e, "effect");
  if (!e.at("lr").is_null()) c.lr = Get<double>(e, "lr");
  if (!e.at("clip_norm").is_null()) c.clip_norm = Get<double>(e, "clip_norm");
  c.epochs = Get<int>(e, "epochs");
  c.train_examples = Get<int>(e, "train_examples");
  c.val_examples = Get<int>(e, "val_examples");
  c.batch_size = Get<int>(e, "batch_size");
  c.alpha = Get<double>(e, "alpha");
  c.lr_drops = Get<std::vector<double>>(e, "lr_drops");
  c.lr_drop_factor = Get<double>(e, "lr_drop_factor");
  c.spsa.epsilon = Get<double>(run.cfg.at("spsa"), "epsilon");
  c.spsa.num_draws = Get<int>(run.cfg.at("spsa"), "num_draws");
  c.mrstft = MrstftFrom(run.cfg);
  c.seed = run.seed + 1;
  c.val_seed = run.seed + 2000002;
  c.Validate();
  return c;
}

void CheckEffect(const std::string& id) {
  try {
    FindEffect(id);
  } catch (const Error&) {
    std::string ids;
    for (const auto& e : ListEffects()) ids += (ids.empty() ? "" : ", ") + e.id;
    ConfigError("unknown effect '" + id + "'; valid ids: " + ids);
  }
}

json ThetaJson(const ParamVector& theta) {
  const auto& desc = FindEffect(theta.effect_id);
  const auto physical = Denormalize(desc, theta);
  json params = json::object();
  for (std::size_t i = 0; i < desc.params.size(); ++i)
    params[desc.params[i].name] = {{"normalized", theta.values[i]}, {"physical", physical[i]},
                                   {"unit", desc.params[i].unit}};
  return {{"effect", theta.effect_id}, {"params", params}};
}

json ReportJson(const ClassificationReport& r) {
  return {{"accuracy", r.accuracy},
          {"macro_f1", r.macro_f1},
          {"per_class_accuracy", r.per_class_accuracy},
          {"per_class_f1", r.per_class_f1}};
}

void WriteText(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::kIoError, "cannot write " + path.string());
  out << text;
}

void Summary(json j) { std::cout << j.dump() << std::endl; }

ProgressFn Progress() {
  return [](const MetricRow& r) {
    if (r.split != "val") return;
    std::fprintf(stderr, "epoch %d step %ld val loss %.6g\n", r.epoch, r.step, r.loss);
  };
}

int ExitCodeFor(ErrorCode code) {
  switch (code) {
    case ErrorCode::kInvalidConfig:
    case ErrorCode::kUnknownEffect:
      return 2;
    case ErrorCode::kMalformedWav:
    case ErrorCode::kUnsupportedFormat:
    case ErrorCode::kIoError:
    case ErrorCode::kSilentInput:
    case ErrorCode::kTooShort:
    case ErrorCode::kLengthMismatch:
    case ErrorCode::kNoNonSilentAudio:
    case ErrorCode::kDataGenerationFailed:
      return 3;
    case ErrorCode::kShapeMismatch:
    case ErrorCode::kEffectMismatch:
    case ErrorCode::kVersionMismatch:
    case ErrorCode::kCorruptCheckpoint:
      return 4;
    case ErrorCode::kNumericFailure:
    case ErrorCode::kDegenerateCovariance:
    case ErrorCode::kSingleClass:
      return 5;
    default:
      return 1;
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"ndst: audio effect style matching"};
  app.require_subcommand(1);
  Common common;
  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", common.config, "JSON run config");
    sub->add_option("--preset", common.preset, "desk | paper");
    sub->add_option("--seed", common.seed, "base seed");
    sub->add_option("--corpus", common.corpus, "WAV directory (empty: synthetic)");
    sub->add_option("--out", common.out, "run directory");
  };

  std::optional<std::string> effect;
  std::optional<int> count;
  std::string vae_path, model_path, input_path, ref_path;
  std::optional<bool> freeze;

  auto* gen = app.add_subcommand("gen-data", "write paired examples as WAV triples");
  add_common(gen);
  gen->add_option("--effect", effect)->required();
  gen->add_option("--count", count)->required();

  auto* tvae = app.add_subcommand("train-vae", "train the spectrogram VAE");
  add_common(tvae);

  auto* te2e = app.add_subcommand("train-e2e", "train the style-matching controller");
  add_common(te2e);
  te2e->add_option("--effect", effect);
  te2e->add_option("--vae", vae_path, "pretrained VAE checkpoint");
  te2e->add_option("--freeze-encoder", freeze);

  auto* sm = app.add_subcommand("style-match", "match an input to a reference");
  add_common(sm);
  sm->add_option("--model", model_path)->required();
  sm->add_option("--input", input_path)->required();
  sm->add_option("--ref", ref_path)->required();

  auto* ecls = app.add_subcommand("eval-classifier", "RF on embeddings vs PCA features");
  add_common(ecls);
  ecls->add_option("--vae", vae_path)->required();
  ecls->add_option("--count", count, "examples per effect");

  auto* emmi = app.add_subcommand("eval-mmi", "maximum mutual information per parameter");
  add_common(emmi);
  emmi->add_option("--vae", vae_path)->required();
  emmi->add_option("--effect", effect);
  emmi->add_option("--count", count, "parameter draws");

  auto* ee2e = app.add_subcommand("eval-e2e", "MRSTFT against the no-effect baseline");
  add_common(ee2e);
  ee2e->add_option("--model", model_path)->required();
  ee2e->add_option("--count", count, "held-out pairs");

  auto* desc = app.add_subcommand("describe-effect", "print effect descriptors as JSON");
  desc->add_option("--effect", effect);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }

  try {
    if (desc->parsed()) {
      json all = json::array();
      for (const auto& e : ListEffects()) {
        if (effect && e.id != *effect) continue;
        json params = json::array();
        for (const auto& p : e.params)
          params.push_back({{"name", p.name},
                            {"min", p.physical_min},
                            {"max", p.physical_max},
                            {"mapping", p.mapping == ParamMapping::kLinear ? "linear" : "log"},
                            {"unit", p.unit}});
        all.push_back({{"id", e.id}, {"class", e.effect_class}, {"held_out", e.held_out}, {"params", params}});
      }
      if (effect) CheckEffect(*effect);
      Summary(effect ? all[0] : all);
      return 0;
    }

    if (gen->parsed()) {
      CheckEffect(*effect);
      if (*count < 1) ConfigError("--count must be positive");
      const Run run = Resolve(common, "gen-data", {});
      const Corpus corpus = LoadCorpus(run);
      json thetas = json::array();
      for (int i = 0; i < *count; ++i) {
        Rng rng = ExampleRng(run.seed, static_cast<std::uint64_t>(i));
        const auto ex = GenerateExample(corpus, *effect, rng);
        char stem[32];
        std::snprintf(stem, sizeof stem, "ex%05d", i);
        WriteWav(ex.input_seg, run.dir / (std::string(stem) + "_input.wav"));
        WriteWav(ex.ref_seg, run.dir / (std::string(stem) + "_ref.wav"));
        WriteWav(ex.truth_seg, run.dir / (std::string(stem) + "_truth.wav"));
        json t = ThetaJson(ex.theta);
        t["index"] = i;
        t["side"] = ex.side == Side::kA ? "A" : "B";
        thetas.push_back(t);
      }
      WriteText(run.dir / "thetas.json", thetas.dump(2) + "\n");
      Summary({{"command", "gen-data"}, {"effect", *effect}, {"count", *count}, {"out", run.dir.string()}});
      return 0;
    }

    if (tvae->parsed()) {
      const Run run = Resolve(common, "train-vae", {});
      const VaeTrainConfig cfg = VaeFrom(run);
      const auto result = TrainVae(cfg, LoadCorpus(run), Progress());
      SaveCheckpoint(result.checkpoint, run.dir / "vae.ckpt");
      result.log.WriteCsv(run.dir / "metrics.csv");
      Summary({{"command", "train-vae"},
               {"best_epoch", result.best_epoch},
               {"best_val_loss", result.best_val_loss},
               {"checkpoint", (run.dir / "vae.ckpt").string()}});
      return 0;
    }

    if (te2e->parsed()) {
      const Run run = Resolve(common, "train-e2e", [&](json& cfg) {
        if (effect) cfg["e2e"]["effect"] = *effect;
        if (freeze) cfg["e2e"]["freeze_encoder"] = *freeze;
      });
      const E2eTrainConfig cfg = E2eFrom(run);
      CheckEffect(cfg.effect_id);
      std::optional<Checkpoint> vae;
      if (!vae_path.empty()) vae = LoadCheckpoint(vae_path);
      if (cfg.freeze_encoder && !vae) ConfigError("a frozen encoder needs --vae");
      const auto result = TrainE2e(cfg, vae ? &*vae : nullptr, LoadCorpus(run), Progress());
      SaveCheckpoint(result.checkpoint, run.dir / "e2e.ckpt");
      result.log.WriteCsv(run.dir / "metrics.csv");
      Summary({{"command", "train-e2e"},
               {"effect", cfg.effect_id},
               {"lr", cfg.lr},
               {"freeze_encoder", cfg.freeze_encoder},
               {"best_epoch", result.best_epoch},
               {"best_val_loss", result.best_val_loss},
               {"checkpoint", (run.dir / "e2e.ckpt").string()}});
      return 0;
    }

    if (sm->parsed()) {
      const Run run = Resolve(common, "style-match", {});
      const Checkpoint ckpt = LoadCheckpoint(model_path);
      const std::string id = ckpt.Meta("effect_id");
      const auto input = ReadWav(input_path, run.preset.sample_rate);
      const auto ref = ReadWav(ref_path, run.preset.sample_rate);
      const auto result = StyleMatch(input, ref, id, ckpt);
      WriteWav(result.output, run.dir / "matched.wav");
      WriteText(run.dir / "params.json", ThetaJson(result.theta).dump(2) + "\n");
      Summary({{"command", "style-match"}, {"effect", id}, {"theta", result.theta.values},
               {"physical", result.physical}, {"output", (run.dir / "matched.wav").string()}});
      return 0;
    }

    if (ecls->parsed()) {
      const Run run = Resolve(common, "eval-classifier", [&](json& cfg) {
        if (count) cfg["analysis"]["per_class"] = *count;
      });
      const json& a = run.cfg.at("analysis");
      const auto encoder = LoadEncoder(LoadCheckpoint(vae_path), run.preset);
      const auto data = BuildClassificationData(encoder, run.preset, LoadCorpus(run), TrainingEffectIds(),
                                                Get<int>(a, "per_class"), run.seed + 3000000);
      ForestConfig forest;
      forest.trees = Get<int>(a, "trees");
      forest.max_depth = Get<int>(a, "max_depth");
      forest.seed = run.seed;
      const auto cmp = CompareClassifiers(data, Get<double>(a, "train_fraction"), Get<int>(a, "pca_k"),
                                          forest, run.seed);
      WriteText(run.dir / "confusion_encoder.csv", cmp.encoder.ConfusionCsv());
      WriteText(run.dir / "confusion_pca.csv", cmp.pca.ConfusionCsv());
      json report = {{"classes", data.class_names},
                     {"train_rows", cmp.train_rows},
                     {"test_rows", cmp.test_rows},
                     {"encoder", ReportJson(cmp.encoder)},
                     {"pca", ReportJson(cmp.pca)}};
      WriteText(run.dir / "classifier.json", report.dump(2) + "\n");
      Summary({{"command", "eval-classifier"},
               {"encoder_accuracy", cmp.encoder.accuracy},
               {"pca_accuracy", cmp.pca.accuracy},
               {"encoder_macro_f1", cmp.encoder.macro_f1},
               {"pca_macro_f1", cmp.pca.macro_f1}});
      return 0;
    }

    if (emmi->parsed()) {
      const Run run = Resolve(common, "eval-mmi", [&](json& cfg) {
        if (count) cfg["analysis"]["mmi_samples"] = *count;
      });
      const std::string id = effect.value_or("overdrive");
      CheckEffect(id);
      const auto encoder = LoadEncoder(LoadCheckpoint(vae_path), run.preset);
      Rng rng = DeriveRng(run.seed, 4);
      const auto report = MmiTable(id, encoder, run.preset.stft, FixedAnalysisAudio(run.preset, run.seed),
                                   Get<int>(run.cfg.at("analysis"), "mmi_samples"), rng);
      std::ostringstream csv;
      csv.precision(6);
      csv << "param,mmi\n";
      json rows = json::array();
      for (const auto& r : report.rows) {
        csv << r.param << ',' << r.mmi << '\n';
        rows.push_back({{"param", r.param}, {"mmi", r.mmi}});
      }
      WriteText(run.dir / ("mmi_" + id + ".csv"), csv.str());
      Summary({{"command", "eval-mmi"}, {"effect", id}, {"samples", report.samples}, {"rows", rows}});
      return 0;
    }

    if (ee2e->parsed()) {
      const Run run = Resolve(common, "eval-e2e", [&](json& cfg) {
        if (count) cfg["analysis"]["eval_examples"] = *count;
      });
      const auto model = StyleModel::FromCheckpoint(LoadCheckpoint(model_path));
      if (model.preset().name != run.preset.name) ConfigError("model preset differs from the run preset");
      const auto report = EvalE2e(model, LoadCorpus(run), Get<int>(run.cfg.at("analysis"), "eval_examples"),
                                  run.seed + 4000000, MrstftFrom(run.cfg));
      WriteText(run.dir / "e2e_eval.csv", report.ToCsv());
      Summary({{"command", "eval-e2e"},
               {"effect", report.effect_id},
               {"examples", report.examples},
               {"baseline", report.baseline},
               {"model", report.model},
               {"random", report.random}});
      return 0;
    }
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << std::endl;
    return ExitCodeFor(e.code());
  } catch (const fs::filesystem_error& e) {
    std::cerr << "error: " << e.what() << std::endl;
    return 3;
  }
  return 1;
}
