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

#include <vector>

#include "ndst/nn/layers.hpp"
#include "ndst/preset.hpp"
#include "ndst/stft.hpp"

namespace ndst {

using nn::Var;

// Packs normalized spectrograms of one shape into an [N, 1, F, T] tensor.
template <typename T>
nn::Tensor<T> SpectrogramBatch(const std::vector<Spectrogram>& specs) {
  if (specs.empty()) throw Error(ErrorCode::kShapeMismatch, "empty spectrogram batch");
  const int f = specs[0].freq_bins, t = specs[0].frames;
  nn::Tensor<T> out({static_cast<int>(specs.size()), 1, f, t});
  std::size_t k = 0;
  for (const auto& s : specs) {
    if (s.freq_bins != f || s.frames != t)
      throw Error(ErrorCode::kShapeMismatch, "spectrograms in a batch differ in shape");
    for (float v : s.data) out.data[k++] = static_cast<T>(v);
  }
  return out;
}

template <typename T>
struct LatentCode {
  Var<T> mu;       // [N, latent]
  Var<T> log_var;  // [N, latent]
  Var<T> z;        // mu when sampling is disabled
};

// Four stride-2 conv blocks (conv, batchnorm, ReLU), flatten, and two
// linear heads for the posterior mean and log-variance.
template <typename T>
class Encoder {
 public:
  Encoder(const EncoderShape& shape, Rng& rng) : shape_(shape) {
    int in = 1;
    for (int i = 0; i < 4; ++i) {
      const std::string name = "encoder.conv" + std::to_string(i);
      convs_.emplace_back(store_, name, in, shape.channels[i], rng);
      norms_.emplace_back(store_, "encoder.bn" + std::to_string(i), shape.channels[i]);
      in = shape.channels[i];
    }
    mu_head_ = nn::Linear<T>(store_, "encoder.mu", shape.FlattenSize(), shape.latent_dim, rng);
    log_var_head_ =
        nn::Linear<T>(store_, "encoder.log_var", shape.FlattenSize(), shape.latent_dim, rng);
  }

  const EncoderShape& shape() const { return shape_; }
  Encoder(const Encoder&) = delete;
  Encoder& operator=(const Encoder&) = delete;
  Encoder(Encoder&&) = default;

  nn::ParamStore<T>& params() { return store_; }
  const nn::ParamStore<T>& params() const { return store_; }

  // `spec` is [N, 1, F, T]. With `sampler` null the code is deterministic
  // (z = mu); otherwise z = mu + exp(log_var / 2) * eps, eps ~ N(0, I).
  LatentCode<T> Encode(const Var<T>& spec, bool training, Rng* sampler = nullptr) const {
    const auto& s = spec->value.shape;
    if (s.size() != 4 || s[1] != 1 || s[2] != shape_.freq_bins || s[3] != shape_.frames)
      throw Error(ErrorCode::kShapeMismatch,
                  "encoder expects [N, 1, " + std::to_string(shape_.freq_bins) + ", " +
                      std::to_string(shape_.frames) + "], got " + nn::ShapeString(s));
    Var<T> h = spec;
    for (int i = 0; i < 4; ++i) h = nn::Relu(norms_[i](convs_[i](h), training));
    h = nn::Reshape(h, {s[0], shape_.FlattenSize()});
    LatentCode<T> code;
    code.mu = mu_head_(h);
    code.log_var = log_var_head_(h);
    if (sampler == nullptr) {
      code.z = code.mu;
    } else {
      nn::Tensor<T> eps(code.mu->value.shape);
      for (auto& e : eps.data) e = static_cast<T>(StandardNormal(*sampler));
      code.z = nn::Add(code.mu,
                       nn::Mul(nn::Exp(nn::Scale(code.log_var, T(0.5))), nn::Constant(eps)));
    }
    return code;
  }

 private:
  EncoderShape shape_;
  nn::ParamStore<T> store_;
  std::vector<nn::Conv2d<T>> convs_;
  std::vector<nn::BatchNorm2d<T>> norms_;
  nn::Linear<T> mu_head_, log_var_head_;
};

// Mirror of the encoder: linear to the flattened conv volume, then four
// stride-2 transposed convs back to the input extent, sigmoid output.
template <typename T>
class Decoder {
 public:
  Decoder(const EncoderShape& shape, Rng& rng) : shape_(shape) {
    input_ = nn::Linear<T>(store_, "decoder.input", shape.latent_dim, shape.FlattenSize(), rng);
    const auto& ch = shape.channels;
    const int outs[4] = {ch[2], ch[1], ch[0], 1};
    int in = ch[3];
    for (int i = 0; i < 4; ++i) {
      ups_.emplace_back(store_, "decoder.up" + std::to_string(i), in, outs[i], rng);
      if (i < 3) norms_.emplace_back(store_, "decoder.bn" + std::to_string(i), outs[i]);
      in = outs[i];
    }
  }

  Decoder(const Decoder&) = delete;
  Decoder& operator=(const Decoder&) = delete;
  Decoder(Decoder&&) = default;

  nn::ParamStore<T>& params() { return store_; }
  const nn::ParamStore<T>& params() const { return store_; }

  // z [N, latent] -> [N, 1, F, T] in (0, 1).
  Var<T> Decode(const Var<T>& z, bool training) const {
    const auto& s = z->value.shape;
    if (s.size() != 2 || s[1] != shape_.latent_dim)
      throw Error(ErrorCode::kShapeMismatch,
                  "decoder expects [N, " + std::to_string(shape_.latent_dim) + "], got " +
                      nn::ShapeString(s));
    const auto extents = shape_.Extents();
    const auto [h4, w4] = extents[4];
    Var<T> h = nn::Reshape(input_(z), {s[0], shape_.channels[3], h4, w4});
    for (int i = 0; i < 4; ++i) {
      const auto [th, tw] = extents[3 - i];
      h = ups_[i](h, th, tw);
      h = i < 3 ? nn::Relu(norms_[i](h, training)) : nn::Sigmoid(h);
    }
    return h;
  }

 private:
  EncoderShape shape_;
  nn::ParamStore<T> store_;
  nn::Linear<T> input_;
  std::vector<nn::ConvTranspose2d<T>> ups_;
  std::vector<nn::BatchNorm2d<T>> norms_;
};

template <typename T>
struct SpectroVae {
  Encoder<T> encoder;
  Decoder<T> decoder;

  SpectroVae(const EncoderShape& shape, Rng& rng) : encoder(shape, rng), decoder(shape, rng) {}
};

template <typename T>
struct VaeLoss {
  Var<T> total;
  double reconstruction = 0.0;
  double kl = 0.0;
  double kl_weight = 0.0;
};

// total = mean squared error + kl_weight * KL(q(z|x) || N(0, I)), with the
// KL summed over latent dimensions and averaged over the batch.
template <typename T>
VaeLoss<T> ComputeVaeLoss(const Var<T>& recon, const Var<T>& target,
                          const LatentCode<T>& code, double kl_weight) {
  if (recon->value.shape != target->value.shape)
    throw Error(ErrorCode::kShapeMismatch, "reconstruction " +
                                               nn::ShapeString(recon->value.shape) +
                                               " vs target " +
                                               nn::ShapeString(target->value.shape));
  auto mse = nn::Mean(nn::Square(nn::Sub(recon, target)));
  const T batch = static_cast<T>(code.mu->value.shape[0]);
  // -0.5 * sum(1 + lv - mu^2 - exp(lv)) / batch
  auto inner = nn::Sub(nn::Sub(nn::AddScalar(code.log_var, T(1)), nn::Square(code.mu)),
                       nn::Exp(code.log_var));
  auto kl = nn::Scale(nn::Sum(inner), T(-0.5) / batch);
  VaeLoss<T> out;
  out.reconstruction = mse->value.data[0];
  out.kl = kl->value.data[0];
  out.kl_weight = kl_weight;
  out.total = nn::Add(mse, nn::Scale(kl, static_cast<T>(kl_weight)));
  return out;
}

}  // namespace ndst
