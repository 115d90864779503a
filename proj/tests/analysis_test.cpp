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

#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <numeric>

#include "ndst/analysis.hpp"
#include "ndst/error.hpp"

using namespace ndst;
using Catch::Approx;
using Eigen::MatrixXd;

namespace {

ErrorCode CodeOf(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("no error thrown");
  return ErrorCode::kIoError;
}

MatrixXd Gaussian(int rows, int cols, Rng& rng) {
  MatrixXd m(rows, cols);
  for (int r = 0; r < rows; ++r)
    for (int c = 0; c < cols; ++c) m(r, c) = StandardNormal(rng);
  return m;
}

std::vector<double> Column(const MatrixXd& m, int c) {
  std::vector<double> out(static_cast<std::size_t>(m.rows()));
  for (Eigen::Index r = 0; r < m.rows(); ++r) out[r] = m(r, c);
  return out;
}

// Six well-separated Gaussian blobs in 8-D.
void Blobs(int per_class, Rng& rng, MatrixXd& x, std::vector<int>& y) {
  x = Gaussian(6 * per_class, 8, rng) * 0.3;
  y.clear();
  for (int i = 0; i < 6 * per_class; ++i) {
    const int c = i / per_class;
    x(i, c) += 5.0;
    y.push_back(c);
  }
}

const Corpus& DeskCorpus() {
  static const Corpus corpus = Corpus::Synthetic(24000, Preset::Desk().patch_len());
  return corpus;
}

}  // namespace

TEST_CASE("pca recovers a dominant direction", "[analysis]") {
  Rng rng(1);
  const int n = 500;
  MatrixXd x(n, 5);
  Eigen::VectorXd dir(5);
  dir << 1, 2, -1, 0.5, 3;
  dir.normalize();
  for (int i = 0; i < n; ++i) {
    const double t = 10.0 * StandardNormal(rng);
    for (int j = 0; j < 5; ++j) x(i, j) = t * dir(j) + 0.01 * StandardNormal(rng) + 7.0;
  }
  const auto pca = PcaFit(x, 3);
  const double total = (x.rowwise() - x.colwise().mean()).squaredNorm() / (n - 1);
  CHECK(pca.eigenvalues(0) / total >= 0.999);
  CHECK(std::abs(pca.components.row(0).dot(dir.transpose())) == Approx(1.0).margin(1e-4));
  CHECK(pca.eigenvalues(0) >= pca.eigenvalues(1));
  CHECK(pca.eigenvalues(1) >= pca.eigenvalues(2));
}

TEST_CASE("pca components are orthonormal in both regimes", "[analysis]") {
  Rng rng(2);
  for (const auto& [n, d] : {std::pair{200, 12}, std::pair{30, 400}}) {
    const MatrixXd x = Gaussian(n, d, rng);
    const auto pca = PcaFit(x, 10);
    const MatrixXd gram = pca.components * pca.components.transpose();
    CHECK((gram - MatrixXd::Identity(10, 10)).cwiseAbs().maxCoeff() <= 1e-6);
  }
}

TEST_CASE("full-rank pca reconstructs the data", "[analysis]") {
  Rng rng(3);
  const MatrixXd x = Gaussian(60, 6, rng);
  const auto pca = PcaFit(x, 6);
  const MatrixXd back = (pca.Transform(x) * pca.components).rowwise() + pca.mean.transpose();
  CHECK((back - x).cwiseAbs().maxCoeff() <= 1e-9);
  // Gram and covariance paths agree on the spectrum.
  const MatrixXd wide = x.transpose();
  const auto a = PcaFit(wide, 5);
  MatrixXd wc = wide.rowwise() - wide.colwise().mean();
  Eigen::SelfAdjointEigenSolver<MatrixXd> es(wc.transpose() * wc / (wide.rows() - 1));
  for (int i = 0; i < 5; ++i) CHECK(a.eigenvalues(i) == Approx(es.eigenvalues().reverse()(i)).epsilon(1e-8));
  CHECK(CodeOf([&] { PcaFit(x, 7); }) == ErrorCode::kInvalidConfig);
}

TEST_CASE("random forest separates blobs", "[analysis]") {
  Rng rng(4);
  MatrixXd xtr, xte;
  std::vector<int> ytr, yte;
  Blobs(100, rng, xtr, ytr);
  Blobs(50, rng, xte, yte);
  const auto rf = RandomForest::Train(xtr, ytr, 6, {.trees = 30, .seed = 1});
  CHECK(rf.tree_count() == 30);
  const auto report = EvaluateClassifier(yte, rf.Predict(xte), 6);
  CHECK(report.accuracy >= 0.99);
  CHECK(report.macro_f1 >= 0.99);
}

TEST_CASE("random forest is at chance on shuffled labels", "[analysis]") {
  Rng rng(5);
  MatrixXd xtr, xte;
  std::vector<int> ytr, yte;
  Blobs(150, rng, xtr, ytr);
  Blobs(150, rng, xte, yte);
  for (int i = static_cast<int>(ytr.size()) - 1; i > 0; --i)
    std::swap(ytr[i], ytr[UniformIndex(rng, static_cast<std::uint64_t>(i + 1))]);
  const auto rf = RandomForest::Train(xtr, ytr, 6, {.trees = 30, .seed = 1});
  const auto report = EvaluateClassifier(yte, rf.Predict(xte), 6);
  CHECK(report.accuracy == Approx(1.0 / 6.0).margin(0.08));
}

TEST_CASE("random forest is deterministic and rejects one class", "[analysis]") {
  Rng rng(6);
  MatrixXd x;
  std::vector<int> y;
  Blobs(20, rng, x, y);
  x += Gaussian(static_cast<int>(x.rows()), 8, rng) * 3.0;
  const auto a = RandomForest::Train(x, y, 6, {.trees = 10, .seed = 3});
  const auto b = RandomForest::Train(x, y, 6, {.trees = 10, .seed = 3});
  const MatrixXd probe = Gaussian(200, 8, rng) * 3.0;
  CHECK(a.Predict(probe) == b.Predict(probe));
  const std::vector<int> single(y.size(), 2);
  CHECK(CodeOf([&] { RandomForest::Train(x, single, 6); }) == ErrorCode::kSingleClass);
}

TEST_CASE("classification report metrics", "[analysis]") {
  const std::vector<int> truth{0, 0, 1, 1, 2, 2};
  const std::vector<int> pred{0, 1, 1, 1, 2, 0};
  auto r = EvaluateClassifier(truth, pred, 3);
  CHECK(r.accuracy == Approx(4.0 / 6.0));
  CHECK(r.confusion[0][1] == 1);
  CHECK(r.per_class_accuracy[1] == Approx(1.0));
  // Class 0: precision 1/2, recall 1/2; class 1: 2/3, 1; class 2: 1, 1/2.
  CHECK(r.macro_f1 == Approx((0.5 + 0.8 + 2.0 / 3.0) / 3.0));
  r.class_names = {"a", "b", "c"};
  CHECK(r.ConfusionCsv() == "true\\predicted,a,b,c\na,1,1,0\nb,0,2,0\nc,1,0,1\n");
}

TEST_CASE("cca finds linear relations and not independent ones", "[analysis]") {
  Rng rng(7);
  const MatrixXd x = Gaussian(2000, 5, rng);
  MatrixXd mix(5, 3);
  mix.setRandom();
  const MatrixXd y = x * mix;
  const auto linked = CcaProject(x, y, 2);
  REQUIRE(linked.projected.cols() == 2);
  CHECK(linked.correlations[0] >= 0.999);
  CHECK(linked.correlations[1] >= 0.999);

  const auto indep = CcaProject(Gaussian(5000, 5, rng), Gaussian(5000, 3, rng), 2);
  CHECK(indep.correlations[0] <= 0.2);

  // Affine maps of either side leave the correlations unchanged.
  MatrixXd y2 = y * 3.0;
  y2.col(1) = y2.col(1) * -0.1;
  y2.array() += 4.0;
  const auto moved = CcaProject(x, y2, 2);
  CHECK(moved.correlations[0] == Approx(linked.correlations[0]).margin(1e-6));
  CHECK(moved.correlations[1] == Approx(linked.correlations[1]).margin(1e-6));

  CHECK(CodeOf([&] { CcaProject(x, y.topRows(10), 2); }) == ErrorCode::kDimensionMismatch);
  MatrixXd degenerate = y;
  degenerate.col(2).setZero();
  CHECK(CodeOf([&] { CcaProject(x, degenerate, 2); }) == ErrorCode::kDegenerateCovariance);
}

TEST_CASE("mutual information oracles", "[analysis]") {
  Rng rng(8);
  std::vector<double> a(20000), b(20000);
  for (auto& v : a) v = Uniform01(rng);
  for (auto& v : b) v = Uniform01(rng);
  CHECK(MutualInfo(a, a) == Approx(std::log(32.0)).margin(0.05));
  CHECK(MutualInfo(a, b) <= 0.08);
  CHECK(MutualInfo(a, b) == Approx(MutualInfo(b, a)).margin(1e-9));
  CHECK(MutualInfo(a, std::vector<double>(a.size(), 3.0)) == 0.0);
  CHECK(CodeOf([&] { MutualInfo(std::vector<double>(50, 0.0), std::vector<double>(50, 0.0)); }) ==
        ErrorCode::kTooShort);
}

TEST_CASE("mmi of unrelated parameters is small", "[analysis]") {
  Rng rng(9);
  const MatrixXd emb = Gaussian(10000, 16, rng);
  MatrixXd theta(10000, 2);
  for (int i = 0; i < 10000; ++i) {
    theta(i, 0) = Uniform01(rng);
    theta(i, 1) = 1.0 / (1.0 + std::exp(-emb(i, 3)));
  }
  const auto r = MmiFromEmbeddings("x", emb, theta, {"noise", "linked"});
  CHECK(r.rows.front().param == "linked");
  CHECK(r.Find("noise") <= 0.1);
  CHECK(r.Find("linked") > 1.0);
  CHECK(std::isnan(r.Find("absent")));
}

TEST_CASE("embeddings come from the encoder posterior mean", "[analysis]") {
  Rng init(10);
  StyleModel model(Preset::Desk(), "overdrive", init);
  const auto audio = FixedAnalysisAudio(Preset::Desk(), 4);
  REQUIRE(static_cast<int>(audio.size()) == Preset::Desk().segment_len);
  const std::vector<AudioBuffer> segs{audio, audio};
  const MatrixXd e = EmbedSegments(model.encoder(), Preset::Desk().stft, segs, 1);
  const auto mu = model.Embed(segs, false);
  for (int c = 0; c < e.cols(); ++c) {
    CHECK(e(0, c) == Approx(mu->value.data[c]).margin(1e-6));
    CHECK(e(1, c) == e(0, c));
  }
}

TEST_CASE("e2e evaluation plumbing", "[analysis]") {
  Rng init_a(11), init_b(12);
  const StyleModel a(Preset::Desk(), "dynamics", init_a);
  const StyleModel b(Preset::Desk(), "dynamics", init_b);
  const MrstftConfig small{{32, 128, 512, 2048}};
  const auto ra = EvalE2e(a, DeskCorpus(), 6, 5, small);
  const auto rb = EvalE2e(b, DeskCorpus(), 6, 5, small);
  REQUIRE(ra.rows.size() == 6);
  for (int i = 0; i < 6; ++i) {
    CHECK(ra.rows[i].baseline == rb.rows[i].baseline);
    CHECK(ra.rows[i].random == rb.rows[i].random);
  }

  // Trim-only dynamics at 0 dB is the identity, so the model term equals the baseline.
  const auto& desc = FindEffect("dynamics");
  const auto identity = [&](const PairedExample&) {
    Rng r(0);
    ParamVector t = RandomTheta("dynamics", r);
    t.values[desc.IndexOf("mix")] = 0.0;
    t.values[desc.IndexOf("output_db")] = 20.0 / 32.0;
    return t;
  };
  const auto hooked = EvalE2e(a, DeskCorpus(), 6, 5, small, identity);
  for (int i = 0; i < 6; ++i) CHECK(hooked.rows[i].model == Approx(hooked.rows[i].baseline).epsilon(1e-4));

  // The oracle settings beat random ones on average.
  const auto oracle = EvalE2e(a, DeskCorpus(), 6, 5, small, [](const PairedExample& ex) { return ex.theta; });
  CHECK(oracle.model < oracle.random);
  CHECK(oracle.ToCsv().rfind("index,baseline,model,random\n0,", 0) == 0);
}
