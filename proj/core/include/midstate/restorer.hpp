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

#include <atomic>
#include <memory>
#include <optional>
#include <string>

#include "midstate/consistency.hpp"
#include "midstate/image.hpp"
#include "midstate/nets.hpp"

namespace midstate {

enum class Conditioning { kVisual, kNull, kAttribute };
enum class LossMode { kImageLosses, kNaiveDiffusion };

std::string to_string(Conditioning c);
std::string to_string(LossMode m);
Conditioning parse_conditioning(const std::string& s);
LossMode parse_loss_mode(const std::string& s);

struct RestorerConfig {
  /// 1 = start from pure noise, 2 = insert the LQ latent after the first
  /// noise-add (default), 3 and 4 = shorter suffixes.
  int start_step = 2;
  Conditioning conditioning = Conditioning::kVisual;
  bool spatial_injection = true;
  LossMode loss_mode = LossMode::kImageLosses;
  double lambda_adv = 0.1;
  bool perceptual = true;
  bool adversarial = true;
  double learning_rate = 2e-5;
  double disc_learning_rate = 2e-5;

  void validate(int sequence_steps) const;
  friend bool operator==(const RestorerConfig&, const RestorerConfig&) = default;
};
void to_json(nlohmann::json& j, const RestorerConfig& c);
void from_json(const nlohmann::json& j, RestorerConfig& c);

/// Networks used by the restorer. The autoencoder, backbone, feature
/// extractors and attribute embedder are frozen; the visual encoder, spatial
/// encoder and discriminator train.
struct RestorerModules {
  int resolution = 64;
  NoiseSchedule schedule = NoiseSchedule::linear();
  BoundaryParams boundary;
  TimestepSequence sequence;
  Autoencoder autoencoder{nullptr};
  UNet backbone{nullptr};
  AttributeClassifier visual_features{nullptr};
  AttributeClassifier perceptual_features{nullptr};
  AttributeEmbedder attribute_embedder{nullptr};
  VisualEncoder visual_encoder{nullptr};
  SpatialEncoder spatial_encoder{nullptr};
  Discriminator discriminator{nullptr};

  void freeze();
};

struct RestoreResult {
  torch::Tensor image;  // [B, 3, H, W]
  Trajectory trajectory;
};

/// Restoration with the LQ latent treated as the sampler's state after the
/// first noise-add. Inference is reentrant on frozen weights.
class Restorer {
 public:
  Restorer(RestorerModules modules, RestorerConfig config);

  /// c_v = VE(Phi(x_l)), [B, K, d]; throws InputError on a resolution mismatch.
  torch::Tensor visual_embedding(const torch::Tensor& x_l);
  /// Context tokens for the configured conditioning source.
  torch::Tensor context(const torch::Tensor& x_l);
  /// f_v = SE(x_l, c_v); one residual per encoder level plus the mid block.
  SpatialResiduals spatial_features(const torch::Tensor& x_l, const torch::Tensor& latent, const torch::Tensor& c_v);

  /// Batched restoration of images in [0, 1]. Gradients are kept when grad
  /// mode is enabled.
  RestoreResult restore(const torch::Tensor& x_l, Rng& rng);
  Image restore(const Image& x_l, Rng& rng);

  /// Replaces f_theta, e.g. with a rigged constant map.
  void set_origin_override(OriginFn f) { origin_override_ = std::move(f); }
  void clear_origin_override() { origin_override_.reset(); }

  int64_t backbone_evaluations() const { return backbone_evals_.load(); }
  int64_t encodes() const { return encodes_.load(); }
  int64_t decodes() const { return decodes_.load(); }
  void reset_counters();

  RestorerModules& modules() { return modules_; }
  const RestorerConfig& config() const { return config_; }
  void set_config(const RestorerConfig& config);

 private:
  RestorerModules modules_;
  RestorerConfig config_;
  std::optional<OriginFn> origin_override_;
  std::atomic<int64_t> backbone_evals_{0}, encodes_{0}, decodes_{0};
};

struct LossTerms {
  torch::Tensor l1, lper, ladv, total;
};

struct StepStats {
  double l1 = 0, lper = 0, ladv = 0, total = 0;
};

/// log D(real) + log(1 - D(fake)) averaged over patches, probabilities
/// clamped to [eps, 1 - eps]. The discriminator maximizes it.
torch::Tensor adversarial_objective(const torch::Tensor& d_real, const torch::Tensor& d_fake, double eps = 1e-6);
/// Sum over the two feature depths of the mean squared feature difference.
torch::Tensor perceptual_loss(AttributeClassifier& features, const torch::Tensor& a, const torch::Tensor& b);

/// Owns the generator (VE + SE) and discriminator optimizers.
class RestorerTrainer {
 public:
  explicit RestorerTrainer(Restorer& restorer);

  /// Losses for one batch with gradients attached to the unrolled sampler.
  LossTerms compute_losses(const torch::Tensor& x_h, const torch::Tensor& x_l, Rng& rng);
  /// Losses for a given restoration, split out for the identity checks.
  LossTerms losses_from(const torch::Tensor& x_h, const torch::Tensor& x_rec);

  StepStats training_step(const torch::Tensor& x_h, const torch::Tensor& x_l, Rng& rng);
  /// Value of the discriminator objective before the ascent step.
  double discriminator_step(const torch::Tensor& x_h, const torch::Tensor& x_rec);
  double discriminator_objective(const torch::Tensor& x_h, const torch::Tensor& x_rec);

  /// Noise-prediction loss on E(x_h) with spatial residuals from x_l at one
  /// timestep; only valid in naive-diffusion mode.
  double naive_controlnet_step(const torch::Tensor& x_h, const torch::Tensor& x_l, Rng& rng);
  torch::Tensor naive_controlnet_loss(const torch::Tensor& x_h, const torch::Tensor& x_l, const torch::Tensor& t,
                                      const torch::Tensor& eps);
  /// Replaces the backbone's noise predictor in naive mode.
  void set_epsilon_override(EpsilonFn fn) { eps_override_ = std::move(fn); }

 private:
  Restorer& restorer_;
  std::unique_ptr<torch::optim::Adam> generator_opt_, disc_opt_;
  std::optional<EpsilonFn> eps_override_;
};

}  // namespace midstate
