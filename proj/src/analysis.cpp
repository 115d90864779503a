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

#include "ndst/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>

#include "ndst/error.hpp"

namespace ndst {
namespace {

using Eigen::MatrixXd;
using Eigen::VectorXd;

// Eigen-decomposition sorted by descending eigenvalue.
void SortedEigen(const MatrixXd& sym, VectorXd& values, MatrixXd& vectors) {
  Eigen::SelfAdjointEigenSolver<MatrixXd> solver(sym);
  if (solver.info() != Eigen::Success)
    throw Error(ErrorCode::kNumericFailure, "eigen-decomposition did not converge");
  values = solver.eigenvalues().reverse();
  vectors = solver.eigenvectors().rowwise().reverse();
}

MatrixXd InverseSqrt(const MatrixXd& cov, const char* side) {
  Eigen::SelfAdjointEigenSolver<MatrixXd> solver(cov);
  if (solver.info() != Eigen::Success)
    throw Error(ErrorCode::kNumericFailure, "eigen-decomposition did not converge");
  const VectorXd& l = solver.eigenvalues();
  if (!(l.minCoeff() > 0.0))
    throw Error(ErrorCode::kDegenerateCovariance,
                std::string(side) + " covariance is singular after the ridge");
  return solver.eigenvectors() * l.cwiseSqrt().cwiseInverse().asDiagonal() *
         solver.eigenvectors().transpose();
}

int Majority(const std::vector<int>& counts) {
  return static_cast<int>(std::max_element(counts.begin(), counts.end()) - counts.begin());
}

MatrixXd Rows(const MatrixXd& m, const std::vector<int>& idx) {
  MatrixXd out(static_cast<Eigen::Index>(idx.size()), m.cols());
  for (std::size_t i = 0; i < idx.size(); ++i) out.row(static_cast<Eigen::Index>(i)) = m.row(idx[i]);
  return out;
}

std::vector<int> Pick(const std::vector<int>& v, const std::vector<int>& idx) {
  std::vector<int> out;
  for (int i : idx) out.push_back(v[i]);
  return out;
}

MatrixXd EmbedSpectrograms(const Encoder<float>& encoder, const std::vector<Spectrogram>& specs) {
  auto mu = encoder.Encode(nn::Constant(SpectrogramBatch<float>(specs)), false).mu;
  const int n = mu->value.shape[0], d = mu->value.shape[1];
  MatrixXd out(n, d);
  for (int r = 0; r < n; ++r)
    for (int c = 0; c < d; ++c) out(r, c) = mu->value.data[static_cast<std::size_t>(r) * d + c];
  return out;
}

}  // namespace

// ---- PCA ----

MatrixXd PcaModel::Transform(const MatrixXd& x) const {
  if (x.cols() != mean.size())
    throw Error(ErrorCode::kDimensionMismatch, "PCA input width differs from the fitted data");
  return (x.rowwise() - mean.transpose()) * components.transpose();
}

PcaModel PcaFit(const MatrixXd& x, int k) {
  const Eigen::Index n = x.rows(), d = x.cols();
  if (k < 1 || k > d || (d > n && k > n) || n < 2)
    throw Error(ErrorCode::kInvalidConfig, "PCA needs 1 <= k <= D and k <= N when D > N");
  PcaModel model;
  model.mean = x.colwise().mean().transpose();
  const MatrixXd xc = x.rowwise() - model.mean.transpose();
  VectorXd values;
  MatrixXd vectors;
  model.components.resize(k, d);
  model.eigenvalues.resize(k);
  const double denom = static_cast<double>(n - 1);
  if (d <= n) {
    MatrixXd cov = MatrixXd::Zero(d, d);
    cov.selfadjointView<Eigen::Lower>().rankUpdate(xc.transpose());
    cov.triangularView<Eigen::StrictlyUpper>() = cov.transpose();
    SortedEigen(cov / denom, values, vectors);
    for (int i = 0; i < k; ++i) {
      model.eigenvalues(i) = std::max(0.0, values(i));
      model.components.row(i) = vectors.col(i).transpose();
    }
  } else {
    // Gram trick: covariance eigenvectors are xc^T u / sqrt(lambda).
    MatrixXd gram = MatrixXd::Zero(n, n);
    gram.selfadjointView<Eigen::Lower>().rankUpdate(xc);
    gram.triangularView<Eigen::StrictlyUpper>() = gram.transpose();
    SortedEigen(gram, values, vectors);
    const double tiny = std::max(values(0), 0.0) * 1e-12;
    const MatrixXd proj = xc.transpose() * vectors.leftCols(k);
    for (int i = 0; i < k; ++i) {
      const double l = values(i);
      if (l > tiny) {
        model.eigenvalues(i) = l / denom;
        model.components.row(i) = (proj.col(i) / std::sqrt(l)).transpose();
      } else {
        model.eigenvalues(i) = 0.0;
        model.components.row(i).setZero();
      }
    }
  }
  return model;
}

// ---- Random forest ----

RandomForest RandomForest::Train(const MatrixXd& x, const std::vector<int>& labels, int num_classes,
                                 const ForestConfig& cfg) {
  const int n = static_cast<int>(x.rows());
  const int d = static_cast<int>(x.cols());
  if (static_cast<int>(labels.size()) != n || n == 0)
    throw Error(ErrorCode::kDimensionMismatch, "labels and rows differ in count");
  for (int y : labels)
    if (y < 0 || y >= num_classes) throw Error(ErrorCode::kDimensionMismatch, "label out of range");
  if (std::all_of(labels.begin(), labels.end(), [&](int y) { return y == labels[0]; }))
    throw Error(ErrorCode::kSingleClass, "training labels contain a single class");
  if (cfg.trees < 1 || cfg.max_depth < 0 || cfg.min_samples_split < 2)
    throw Error(ErrorCode::kInvalidConfig, "invalid forest configuration");
  const int mtry = cfg.max_features > 0 ? std::min(d, cfg.max_features)
                                        : std::max(1, static_cast<int>(std::sqrt(static_cast<double>(d))));

  RandomForest forest;
  forest.num_classes_ = num_classes;
  std::vector<int> features(static_cast<std::size_t>(d));
  std::vector<std::pair<double, int>> column;
  std::vector<int> left_counts(static_cast<std::size_t>(num_classes));

  for (int t = 0; t < cfg.trees; ++t) {
    Rng rng = DeriveRng(cfg.seed, static_cast<std::uint64_t>(t));
    std::vector<int> sample(static_cast<std::size_t>(n));
    for (auto& s : sample) s = static_cast<int>(UniformIndex(rng, static_cast<std::uint64_t>(n)));

    std::vector<Node> tree;
    struct Pending {
      int node;
      int depth;
      std::vector<int> rows;
    };
    std::vector<Pending> stack;
    tree.push_back({});
    stack.push_back({0, 0, std::move(sample)});
    while (!stack.empty()) {
      Pending cur = std::move(stack.back());
      stack.pop_back();
      std::vector<int> counts(static_cast<std::size_t>(num_classes), 0);
      for (int r : cur.rows) ++counts[labels[r]];
      tree[cur.node].label = Majority(counts);
      const int size = static_cast<int>(cur.rows.size());
      const bool pure = counts[tree[cur.node].label] == size;
      if (pure || cur.depth >= cfg.max_depth || size < cfg.min_samples_split) continue;

      std::iota(features.begin(), features.end(), 0);
      double best_impurity = std::numeric_limits<double>::infinity();
      int best_feature = -1;
      double best_threshold = 0.0;
      for (int m = 0; m < mtry; ++m) {
        const int j = m + static_cast<int>(UniformIndex(rng, static_cast<std::uint64_t>(d - m)));
        std::swap(features[m], features[j]);
        const int f = features[m];
        column.clear();
        for (int r : cur.rows) column.push_back({x(r, f), labels[r]});
        std::sort(column.begin(), column.end());
        if (column.front().first == column.back().first) continue;
        std::fill(left_counts.begin(), left_counts.end(), 0);
        double left_sq = 0.0;
        double right_sq = 0.0;
        for (int c : counts) right_sq += static_cast<double>(c) * c;
        for (int i = 0; i + 1 < size; ++i) {
          const int y = column[i].second;
          const int rc = counts[y] - left_counts[y];
          left_sq += 2.0 * left_counts[y] + 1.0;
          right_sq -= 2.0 * rc - 1.0;
          ++left_counts[y];
          if (column[i].first == column[i + 1].first) continue;
          const double nl = i + 1, nr = size - i - 1;
          // Weighted Gini: (nl (1 - sum pl^2) + nr (1 - sum pr^2)) / n.
          const double impurity = (nl - left_sq / nl + nr - right_sq / nr) / size;
          if (impurity < best_impurity) {
            best_impurity = impurity;
            best_feature = f;
            best_threshold = 0.5 * (column[i].first + column[i + 1].first);
          }
        }
      }
      if (best_feature < 0) continue;
      std::vector<int> left, right;
      for (int r : cur.rows) (x(r, best_feature) <= best_threshold ? left : right).push_back(r);
      const int li = static_cast<int>(tree.size());
      tree.push_back({});
      tree.push_back({});
      tree[cur.node].feature = best_feature;
      tree[cur.node].threshold = best_threshold;
      tree[cur.node].left = li;
      tree[cur.node].right = li + 1;
      stack.push_back({li + 1, cur.depth + 1, std::move(right)});
      stack.push_back({li, cur.depth + 1, std::move(left)});
    }
    forest.trees_.push_back(std::move(tree));
  }
  return forest;
}

int RandomForest::PredictRow(const Eigen::Ref<const Eigen::RowVectorXd>& row) const {
  std::vector<int> votes(static_cast<std::size_t>(num_classes_), 0);
  for (const auto& tree : trees_) {
    int i = 0;
    while (tree[i].feature >= 0) i = row(tree[i].feature) <= tree[i].threshold ? tree[i].left : tree[i].right;
    ++votes[tree[i].label];
  }
  return Majority(votes);
}

std::vector<int> RandomForest::Predict(const MatrixXd& x) const {
  std::vector<int> out;
  for (Eigen::Index r = 0; r < x.rows(); ++r) out.push_back(PredictRow(x.row(r)));
  return out;
}

ClassificationReport EvaluateClassifier(const std::vector<int>& truth, const std::vector<int>& predicted,
                                        int num_classes) {
  if (truth.size() != predicted.size() || truth.empty())
    throw Error(ErrorCode::kDimensionMismatch, "prediction and truth counts differ");
  ClassificationReport r;
  r.confusion.assign(num_classes, std::vector<int>(num_classes, 0));
  int correct = 0;
  for (std::size_t i = 0; i < truth.size(); ++i) {
    ++r.confusion.at(truth[i]).at(predicted[i]);
    correct += truth[i] == predicted[i];
  }
  r.accuracy = static_cast<double>(correct) / static_cast<double>(truth.size());
  for (int c = 0; c < num_classes; ++c) {
    int row = 0, col = 0;
    for (int k = 0; k < num_classes; ++k) {
      row += r.confusion[c][k];
      col += r.confusion[k][c];
    }
    const double tp = r.confusion[c][c];
    const double recall = row > 0 ? tp / row : 0.0;
    const double precision = col > 0 ? tp / col : 0.0;
    r.per_class_accuracy.push_back(recall);
    r.per_class_f1.push_back(precision + recall > 0 ? 2 * precision * recall / (precision + recall) : 0.0);
  }
  r.macro_f1 = std::accumulate(r.per_class_f1.begin(), r.per_class_f1.end(), 0.0) / num_classes;
  return r;
}

std::string ClassificationReport::ConfusionCsv() const {
  std::ostringstream out;
  auto name = [&](std::size_t i) { return i < class_names.size() ? class_names[i] : std::to_string(i); };
  out << "true\\predicted";
  for (std::size_t c = 0; c < confusion.size(); ++c) out << ',' << name(c);
  out << '\n';
  for (std::size_t r = 0; r < confusion.size(); ++r) {
    out << name(r);
    for (int v : confusion[r]) out << ',' << v;
    out << '\n';
  }
  return out.str();
}

// ---- CCA and mutual information ----

CcaResult CcaProject(const MatrixXd& x, const MatrixXd& y, int k) {
  const Eigen::Index n = x.rows();
  if (y.rows() != n) throw Error(ErrorCode::kDimensionMismatch, "CCA sides differ in row count");
  if (n <= x.cols() + y.cols())
    throw Error(ErrorCode::kDimensionMismatch, "CCA needs more rows than combined columns");
  if (k < 1 || k > std::min(x.cols(), y.cols()))
    throw Error(ErrorCode::kInvalidConfig, "CCA k must be within 1..min(Dx, Dy)");
  const MatrixXd xc = x.rowwise() - x.colwise().mean();
  const MatrixXd yc = y.rowwise() - y.colwise().mean();
  const double denom = static_cast<double>(n - 1);
  MatrixXd cxx = xc.transpose() * xc / denom;
  MatrixXd cyy = yc.transpose() * yc / denom;
  const MatrixXd cxy = xc.transpose() * yc / denom;
  if (!(cxx.diagonal().minCoeff() > 0.0) || !(cyy.diagonal().minCoeff() > 0.0))
    throw Error(ErrorCode::kDegenerateCovariance, "CCA input has a constant column");
  cxx.diagonal().array() += 1e-6 * cxx.diagonal().mean();
  cyy.diagonal().array() += 1e-6 * cyy.diagonal().mean();
  const MatrixXd kx = InverseSqrt(cxx, "X");
  const MatrixXd ky = InverseSqrt(cyy, "Y");
  Eigen::JacobiSVD<MatrixXd> svd(kx * cxy * ky, Eigen::ComputeThinU | Eigen::ComputeThinV);
  CcaResult out;
  out.x_weights = kx * svd.matrixU().leftCols(k);
  out.projected = xc * out.x_weights;
  for (int i = 0; i < k; ++i) out.correlations.push_back(std::clamp(svd.singularValues()(i), 0.0, 1.0));
  return out;
}

double MutualInfo(const std::vector<double>& a, const std::vector<double>& b, int bins) {
  if (a.size() != b.size()) throw Error(ErrorCode::kDimensionMismatch, "MI inputs differ in length");
  if (a.size() < 100) throw Error(ErrorCode::kTooShort, "MI needs at least 100 samples");
  if (bins < 2) throw Error(ErrorCode::kInvalidConfig, "MI needs at least 2 bins");
  const auto [amin, amax] = std::minmax_element(a.begin(), a.end());
  const auto [bmin, bmax] = std::minmax_element(b.begin(), b.end());
  const double ra = *amax - *amin, rb = *bmax - *bmin;
  if (!(ra > 0.0) || !(rb > 0.0)) return 0.0;
  auto bin = [bins](double v, double lo, double range) {
    return std::min(bins - 1, static_cast<int>((v - lo) / range * bins));
  };
  std::vector<double> joint(static_cast<std::size_t>(bins) * bins, 0.0);
  std::vector<double> pa(bins, 0.0), pb(bins, 0.0);
  const double w = 1.0 / static_cast<double>(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    const int ia = bin(a[i], *amin, ra), ib = bin(b[i], *bmin, rb);
    joint[static_cast<std::size_t>(ia) * bins + ib] += w;
    pa[ia] += w;
    pb[ib] += w;
  }
  double mi = 0.0;
  for (int i = 0; i < bins; ++i)
    for (int j = 0; j < bins; ++j) {
      const double p = joint[static_cast<std::size_t>(i) * bins + j];
      if (p > 0.0) mi += p * std::log(p / (pa[i] * pb[j]));
    }
  return std::max(0.0, mi);
}

// ---- Embeddings ----

MatrixXd EmbedSegments(const Encoder<float>& encoder, const StftConfig& stft,
                       const std::vector<AudioBuffer>& segments, int batch) {
  MatrixXd out(static_cast<Eigen::Index>(segments.size()), encoder.shape().latent_dim);
  for (std::size_t b = 0; b < segments.size(); b += static_cast<std::size_t>(batch)) {
    const std::size_t e = std::min(segments.size(), b + static_cast<std::size_t>(batch));
    std::vector<Spectrogram> specs;
    for (std::size_t i = b; i < e; ++i) specs.push_back(SegmentSpectrogram(segments[i], stft));
    out.middleRows(static_cast<Eigen::Index>(b), static_cast<Eigen::Index>(e - b)) =
        EmbedSpectrograms(encoder, specs);
  }
  return out;
}

ClassificationData BuildClassificationData(const Encoder<float>& encoder, const Preset& preset,
                                           const Corpus& corpus, const std::vector<std::string>& effects,
                                           int per_class, std::uint64_t seed) {
  if (effects.empty() || per_class < 1)
    throw Error(ErrorCode::kInvalidConfig, "classification data needs effects and examples");
  const int n = static_cast<int>(effects.size()) * per_class;
  const EncoderShape shape = encoder.shape();
  ClassificationData data;
  data.class_names = effects;
  data.embeddings.resize(n, shape.latent_dim);
  data.spectra.resize(n, static_cast<Eigen::Index>(shape.freq_bins) * shape.frames);
  constexpr int kBatch = 32;
  std::vector<Spectrogram> pending;
  int filled = 0;
  auto flush = [&] {
    if (pending.empty()) return;
    data.embeddings.middleRows(filled, static_cast<Eigen::Index>(pending.size())) =
        EmbedSpectrograms(encoder, pending);
    filled += static_cast<int>(pending.size());
    pending.clear();
  };
  for (int i = 0; i < n; ++i) {
    const int label = i / per_class;
    Rng rng = ExampleRng(seed, static_cast<std::uint64_t>(i));
    const auto ex = GenerateExample(corpus, effects[label], rng);
    Spectrogram spec = SegmentSpectrogram(ex.ref_seg, preset.stft);
    for (std::size_t j = 0; j < spec.data.size(); ++j) data.spectra(i, static_cast<Eigen::Index>(j)) = spec.data[j];
    data.labels.push_back(label);
    pending.push_back(std::move(spec));
    if (static_cast<int>(pending.size()) == kBatch) flush();
  }
  flush();
  return data;
}

ClassifierComparison CompareClassifiers(const ClassificationData& data, double train_fraction, int pca_k,
                                        const ForestConfig& forest, std::uint64_t split_seed) {
  const int n = static_cast<int>(data.labels.size());
  if (!(train_fraction > 0.0 && train_fraction < 1.0))
    throw Error(ErrorCode::kInvalidConfig, "train fraction must be in (0, 1)");
  std::vector<int> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), 0);
  Rng rng(split_seed);
  for (int i = n - 1; i > 0; --i)
    std::swap(order[i], order[UniformIndex(rng, static_cast<std::uint64_t>(i + 1))]);
  const int n_train = static_cast<int>(std::lround(train_fraction * n));
  const std::vector<int> train(order.begin(), order.begin() + n_train);
  const std::vector<int> test(order.begin() + n_train, order.end());
  const int classes = static_cast<int>(data.class_names.size());
  const auto y_train = Pick(data.labels, train);
  const auto y_test = Pick(data.labels, test);

  ClassifierComparison out;
  out.train_rows = n_train;
  out.test_rows = n - n_train;
  {
    const auto rf = RandomForest::Train(Rows(data.embeddings, train), y_train, classes, forest);
    out.encoder = EvaluateClassifier(y_test, rf.Predict(Rows(data.embeddings, test)), classes);
  }
  {
    PcaModel pca;
    {
      const MatrixXd spectra_train = Rows(data.spectra, train);
      pca = PcaFit(spectra_train, pca_k);
    }
    const MatrixXd f_train = pca.Transform(Rows(data.spectra, train));
    const MatrixXd f_test = pca.Transform(Rows(data.spectra, test));
    const auto rf = RandomForest::Train(f_train, y_train, classes, forest);
    out.pca = EvaluateClassifier(y_test, rf.Predict(f_test), classes);
  }
  out.encoder.class_names = data.class_names;
  out.pca.class_names = data.class_names;
  return out;
}

double MmiReport::Find(const std::string& param) const {
  for (const auto& r : rows)
    if (r.param == param) return r.mmi;
  return std::numeric_limits<double>::quiet_NaN();
}

MmiReport MmiFromEmbeddings(const std::string& effect_id, const MatrixXd& embeddings, const MatrixXd& thetas,
                            const std::vector<std::string>& names) {
  if (thetas.cols() != static_cast<Eigen::Index>(names.size()))
    throw Error(ErrorCode::kDimensionMismatch, "one name per theta column required");
  const auto cca = CcaProject(embeddings, thetas, 2);
  MmiReport report;
  report.effect_id = effect_id;
  report.samples = static_cast<int>(embeddings.rows());
  report.correlations = cca.correlations;
  std::vector<std::vector<double>> axes;
  for (int a = 0; a < 2; ++a) {
    const VectorXd col = cca.projected.col(a);
    axes.emplace_back(col.data(), col.data() + col.size());
  }
  for (Eigen::Index j = 0; j < thetas.cols(); ++j) {
    const VectorXd col = thetas.col(j);
    const std::vector<double> param(col.data(), col.data() + col.size());
    double best = 0.0;
    for (const auto& axis : axes) best = std::max(best, MutualInfo(param, axis));
    report.rows.push_back({names[j], best});
  }
  std::stable_sort(report.rows.begin(), report.rows.end(),
                   [](const MmiEntry& a, const MmiEntry& b) { return a.mmi > b.mmi; });
  return report;
}

MmiReport MmiTable(const std::string& effect_id, const Encoder<float>& encoder, const StftConfig& stft,
                   const AudioBuffer& audio, int n, Rng& rng) {
  const auto& desc = FindEffect(effect_id);
  const int p = static_cast<int>(desc.param_count());
  MatrixXd thetas(n, p);
  MatrixXd embeddings(n, encoder.shape().latent_dim);
  constexpr int kBatch = 32;
  std::vector<Spectrogram> pending;
  int filled = 0;
  for (int i = 0; i < n; ++i) {
    const ParamVector theta = RandomTheta(effect_id, rng);
    for (int j = 0; j < p; ++j) thetas(i, j) = theta.values[j];
    AudioBuffer y = Process(effect_id, audio, theta);
    try {
      y = PeakNormalize(y, kPairPeakDbfs);
    } catch (const Error& e) {
      if (e.code() != ErrorCode::kSilentInput) throw;
    }
    pending.push_back(SegmentSpectrogram(y, stft));
    if (static_cast<int>(pending.size()) == kBatch || i + 1 == n) {
      embeddings.middleRows(filled, static_cast<Eigen::Index>(pending.size())) =
          EmbedSpectrograms(encoder, pending);
      filled += static_cast<int>(pending.size());
      pending.clear();
    }
  }
  std::vector<std::string> names;
  for (const auto& spec : desc.params) names.push_back(spec.name);
  return MmiFromEmbeddings(effect_id, embeddings, thetas, names);
}

AudioBuffer FixedAnalysisAudio(const Preset& preset, std::uint64_t seed) {
  Rng rng(seed);
  return SynthSource(rng, SourceKind::kHarmonic, preset.sample_rate,
                     static_cast<std::size_t>(preset.segment_len));
}

// ---- End-to-end evaluation ----

std::string E2eEvalReport::ToCsv() const {
  std::ostringstream out;
  out.precision(9);
  out << "index,baseline,model,random\n";
  for (std::size_t i = 0; i < rows.size(); ++i)
    out << i << ',' << rows[i].baseline << ',' << rows[i].model << ',' << rows[i].random << '\n';
  return out.str();
}

E2eEvalReport EvalE2e(const StyleModel& model, const Corpus& corpus, int n, std::uint64_t seed,
                      const MrstftConfig& mrstft, const ThetaOverride& override_theta) {
  if (n < 1) throw Error(ErrorCode::kInvalidConfig, "evaluation needs at least one example");
  const std::string& effect = model.effect_id();
  E2eEvalReport report;
  report.effect_id = effect;
  report.examples = n;
  constexpr int kBatch = 16;
  for (int b = 0; b < n; b += kBatch) {
    const int e = std::min(n, b + kBatch);
    std::vector<PairedExample> exs;
    for (int i = b; i < e; ++i) {
      Rng rng = ExampleRng(seed, static_cast<std::uint64_t>(i));
      exs.push_back(GenerateExample(corpus, effect, rng));
    }
    std::vector<ParamVector> thetas;
    if (override_theta) {
      for (const auto& ex : exs) thetas.push_back(override_theta(ex));
    } else {
      std::vector<AudioBuffer> inputs, refs;
      for (const auto& ex : exs) {
        inputs.push_back(ex.input_seg);
        refs.push_back(ex.ref_seg);
      }
      for (const auto& t : model.PredictTheta(inputs, refs)) thetas.push_back(ClampTheta(t, SpsaConfig{}.epsilon));
    }
    for (int i = b; i < e; ++i) {
      const auto& ex = exs[i - b];
      Rng random_rng = DeriveRng(seed ^ 0x9e3779b97f4a7c15ull, static_cast<std::uint64_t>(i));
      const ParamVector random_theta = RandomTheta(effect, random_rng);
      E2eEvalRow row;
      row.baseline = Mrstft(ex.input_seg.samples, ex.truth_seg.samples, mrstft).value;
      row.model = Mrstft(Process(effect, ex.input_seg, thetas[i - b]).samples, ex.truth_seg.samples, mrstft).value;
      row.random = Mrstft(Process(effect, ex.input_seg, random_theta).samples, ex.truth_seg.samples, mrstft).value;
      report.rows.push_back(row);
    }
  }
  for (const auto& r : report.rows) {
    report.baseline += r.baseline;
    report.model += r.model;
    report.random += r.random;
  }
  report.baseline /= n;
  report.model /= n;
  report.random /= n;
  return report;
}

}  // namespace ndst
