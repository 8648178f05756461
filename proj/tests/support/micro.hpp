// Copyright 2026 The midstate Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <torch/torch.h>

#include <functional>
#include <vector>

#include "midstate/nets.hpp"
#include "midstate/restorer.hpp"

namespace midstate::testing {

/// Tiny double-precision networks: 32x32 images, 8x8 latents with two
/// channels, one UNet level.
inline UNetConfig micro_unet() {
  UNetConfig c;
  c.latent_channels = 2;
  c.base_channels = 2;
  c.channel_mult = {1};
  c.context_dim = 4;
  c.temb_dim = 4;
  c.heads = 1;
  c.groups = 1;
  return c;
}

inline constexpr int kMicroResolution = 32;

template <class M>
M as_double(M module) {
  module->to(torch::kDouble);
  return module;
}

/// Restorer modules around micro networks; `seed` fixes the initialization.
inline RestorerModules micro_restorer_modules(uint64_t seed = 3) {
  torch::manual_seed(seed);
  RestorerModules m;
  m.resolution = kMicroResolution;
  m.schedule = NoiseSchedule::linear();
  m.sequence = TimestepSequence::uniform_alpha_bar(m.schedule, 4, 20);
  const auto unet = micro_unet();
  m.autoencoder = as_double(Autoencoder(AutoencoderConfig{3, 2, unet.latent_channels}));
  m.backbone = as_double(UNet(unet));
  m.visual_features = as_double(AttributeClassifier(ClassifierConfig{2, 11}));
  m.perceptual_features = as_double(AttributeClassifier(ClassifierConfig{2, 11}));
  m.attribute_embedder = as_double(AttributeEmbedder(11, unet.context_dim));
  const int tokens = (kMicroResolution / 16) * (kMicroResolution / 16);
  m.visual_encoder = as_double(VisualEncoder(VisualEncoderConfig{8, unet.context_dim, tokens, 1}));
  m.spatial_encoder = as_double(SpatialEncoder(unet, 3, 2, m.sequence.taus[1]));
  m.spatial_encoder->initialize_from(m.backbone);
  m.discriminator = as_double(Discriminator(2));
  return m;
}

/// Fills every zero-initialized output projection with small random values
/// so gradients reach the inner layers.
inline void randomize_zero_init(torch::nn::Module& module, double scale = 0.3) {
  torch::NoGradGuard guard;
  for (auto& p : module.parameters(true))
    if (p.abs().max().item<double>() == 0.0) p.copy_(torch::randn_like(p) * scale);
}

struct FdResult {
  double max_rel_error = 0;
  int64_t checked = 0;
};

/// Central differences of `loss` against the analytic gradient in each
/// parameter: |analytic - numeric| / max(|analytic|, |numeric|, floor).
inline FdResult finite_difference_check(const std::vector<torch::Tensor>& params,
                                        const std::function<torch::Tensor()>& loss, double h = 1e-6,
                                        double floor = 1e-6) {
  for (auto p : params)
    if (p.grad().defined()) p.mutable_grad().zero_();
  loss().backward();
  FdResult result;
  torch::NoGradGuard guard;
  for (auto p : params) {
    const auto analytic = p.grad().clone().flatten();
    auto flat = p.view(-1);
    for (int64_t i = 0; i < flat.numel(); ++i) {
      const double orig = flat[i].item<double>();
      flat[i].fill_(orig + h);
      const double up = loss().item<double>();
      flat[i].fill_(orig - h);
      const double down = loss().item<double>();
      flat[i].fill_(orig);
      const double numeric = (up - down) / (2 * h);
      const double a = analytic[i].item<double>();
      const double scale = std::max(std::abs(a), std::abs(numeric));
      const double err = std::abs(a - numeric) / std::max(scale, floor);
      result.max_rel_error = std::max(result.max_rel_error, err);
      ++result.checked;
    }
  }
  return result;
}

}  // namespace midstate::testing
