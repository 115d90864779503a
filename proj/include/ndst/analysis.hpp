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
#include <functional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "ndst/datagen.hpp"
#include "ndst/losses.hpp"
#include "ndst/preset.hpp"
#include "ndst/trainer.hpp"
#include "ndst/vae.hpp"

namespace ndst {

// ---- PCA ----

struct PcaModel {
  Eigen::VectorXd mean;        // D
  Eigen::MatrixXd components;  // K x D, orthonormal rows
  Eigen::VectorXd eigenvalues; // K, non-increasing (sample covariance)

  // (x - mean) * components^T.
  Eigen::MatrixXd Transform(const Eigen::MatrixXd& x) const;
};

// Top-k principal axes of the rows of `x`. Uses the N x N Gram matrix when
// D > N. Rank deficiency shows up as zero eigenvalues.
PcaModel PcaFit(const Eigen::MatrixXd& x, int k);

// ---- Random forest ----

struct ForestConfig {
  int trees = 100;
  int max_depth = 16;
  int min_samples_split = 2;
  int max_features = 0;  // 0 = floor(sqrt(D))
  std::uint64_t seed = 0;
};

class RandomForest {
 public:
  // Gini splits on bootstrap samples. Throws SingleClass.
  static RandomForest Train(const Eigen::MatrixXd& x, const std::vector<int>& labels,
                            int num_classes, const ForestConfig& cfg = {});

  int PredictRow(const Eigen::Ref<const Eigen::RowVectorXd>& row) const;
  std::vector<int> Predict(const Eigen::MatrixXd& x) const;
  int num_classes() const { return num_classes_; }
  std::size_t tree_count() const { return trees_.size(); }

  struct Node {
    int feature = -1;  // -1 for a leaf
    double threshold = 0.0;
    int left = -1;
    int right = -1;
    int label = 0;
  };

 private:
  int num_classes_ = 0;
  std::vector<std::vector<Node>> trees_;
};

struct ClassificationReport {
  double accuracy = 0.0;
  double macro_f1 = 0.0;
  std::vector<double> per_class_accuracy;  // recall per true class
  std::vector<double> per_class_f1;
  std::vector<std::vector<int>> confusion;  // [true][predicted]
  std::vector<std::string> class_names;

  std::string ConfusionCsv() const;
};

ClassificationReport EvaluateClassifier(const std::vector<int>& truth, const std::vector<int>& predicted,
                                        int num_classes);

// ---- CCA and mutual information ----

struct CcaResult {
  Eigen::MatrixXd projected;  // N x k canonical variates of X
  std::vector<double> correlations;
  Eigen::MatrixXd x_weights;  // Dx x k
};

// Centers both sides and adds 1e-6 * mean-diagonal ridge to each covariance.
// Throws DimensionMismatch or DegenerateCovariance.
CcaResult CcaProject(const Eigen::MatrixXd& x, const Eigen::MatrixXd& y, int k = 2);

// Equal-width 2-D histogram estimate in nats; zero range on either side
// gives 0. Throws TooShort below 100 samples.
double MutualInfo(const std::vector<double>& a, const std::vector<double>& b, int bins = 32);

// ---- Embeddings ----

// Posterior means (deterministic mode) of segment spectrograms, N x latent.
Eigen::MatrixXd EmbedSegments(const Encoder<float>& encoder, const StftConfig& stft,
                              const std::vector<AudioBuffer>& segments, int batch = 32);

struct ClassificationData {
  Eigen::MatrixXd embeddings;  // N x latent
  Eigen::MatrixXd spectra;     // N x (F * T) flattened normalized spectrograms
  std::vector<int> labels;
  std::vector<std::string> class_names;
};

// `per_class` effected reference segments for each effect, labelled by effect.
ClassificationData BuildClassificationData(const Encoder<float>& encoder, const Preset& preset,
                                           const Corpus& corpus, const std::vector<std::string>& effects,
                                           int per_class, std::uint64_t seed);

struct ClassifierComparison {
  ClassificationReport encoder;
  ClassificationReport pca;
  int train_rows = 0;
  int test_rows = 0;
};

// Shuffled split, RF on embeddings vs RF on k-D PCA of the spectra (PCA fit
// on the training rows only).
ClassifierComparison CompareClassifiers(const ClassificationData& data, double train_fraction = 0.85,
                                        int pca_k = 128, const ForestConfig& forest = {},
                                        std::uint64_t split_seed = 0);

struct MmiEntry {
  std::string param;
  double mmi = 0.0;
};

struct MmiReport {
  std::string effect_id;
  int samples = 0;
  std::vector<MmiEntry> rows;  // sorted by descending MMI
  std::vector<double> correlations;

  double Find(const std::string& param) const;  // NaN when absent
};

// CCA of embeddings against theta (k = 2), then per parameter the larger
// mutual information with either canonical axis.
MmiReport MmiFromEmbeddings(const std::string& effect_id, const Eigen::MatrixXd& embeddings,
                            const Eigen::MatrixXd& thetas, const std::vector<std::string>& names);

// n random settings applied to `audio` (one segment), each output
// peak-normalized to -12 dBFS and embedded.
MmiReport MmiTable(const std::string& effect_id, const Encoder<float>& encoder, const StftConfig& stft,
                   const AudioBuffer& audio, int n, Rng& rng);

// Seeded harmonic source cut to one segment, the fixed datapoint for MmiTable.
AudioBuffer FixedAnalysisAudio(const Preset& preset, std::uint64_t seed);

// ---- End-to-end evaluation ----

struct E2eEvalRow {
  double baseline = 0.0;  // input_seg vs truth_seg
  double model = 0.0;     // effect(input_seg, predicted theta) vs truth_seg
  double random = 0.0;    // effect(input_seg, random theta) vs truth_seg
};

struct E2eEvalReport {
  std::string effect_id;
  int examples = 0;
  double baseline = 0.0;
  double model = 0.0;
  double random = 0.0;
  std::vector<E2eEvalRow> rows;

  std::string ToCsv() const;
};

// Replaces the model's prediction; used to test the evaluation plumbing.
using ThetaOverride = std::function<ParamVector(const PairedExample&)>;

E2eEvalReport EvalE2e(const StyleModel& model, const Corpus& corpus, int n, std::uint64_t seed,
                      const MrstftConfig& mrstft = {}, const ThetaOverride& override_theta = {});

}  // namespace ndst
