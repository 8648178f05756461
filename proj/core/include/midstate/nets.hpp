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

#include <nlohmann/json.hpp>
#include <torch/torch.h>

#include <vector>

namespace midstate {

/// One residual map per encoder level followed by one for the mid block.
using SpatialResiduals = std::vector<torch::Tensor>;

struct UNetConfig {
  int latent_channels = 4;
  int base_channels = 32;
  std::vector<int> channel_mult = {1, 2};
  int context_dim = 32;
  int temb_dim = 64;
  int heads = 2;
  int groups = 8;

  int level_channels(size_t level) const { return base_channels * channel_mult.at(level); }
  size_t levels() const { return channel_mult.size(); }
  void validate() const;
  friend bool operator==(const UNetConfig&, const UNetConfig&) = default;
};
void to_json(nlohmann::json& j, const UNetConfig& c);
void from_json(const nlohmann::json& j, UNetConfig& c);

/// Sinusoidal embedding of integer timesteps, shape [B, dim].
torch::Tensor timestep_embedding(const torch::Tensor& tau, int dim, torch::ScalarType dtype = torch::kFloat);

class ResBlockImpl : public torch::nn::Module {
 public:
  ResBlockImpl(int in, int out, int temb_dim, int groups);
  torch::Tensor forward(const torch::Tensor& x, const torch::Tensor& temb);

 private:
  torch::nn::GroupNorm norm1_{nullptr}, norm2_{nullptr};
  torch::nn::Conv2d conv1_{nullptr}, conv2_{nullptr}, skip_{nullptr};
  torch::nn::Linear temb_proj_{nullptr};
};
TORCH_MODULE(ResBlock);

/// Pre-norm multi-head attention with image features as queries and context
/// tokens as keys and values. Key/value projections carry no bias, so an
/// all-zero context contributes only the output bias.
class CrossAttentionImpl : public torch::nn::Module {
 public:
  CrossAttentionImpl(int channels, int context_dim, int heads, int groups);
  torch::Tensor forward(const torch::Tensor& x, const torch::Tensor& context);

 private:
  int heads_;
  torch::nn::GroupNorm norm_{nullptr};
  torch::nn::Linear to_q_{nullptr}, to_k_{nullptr}, to_v_{nullptr}, to_out_{nullptr};
};
TORCH_MODULE(CrossAttention);

struct EncoderFeatures {
  std::vector<torch::Tensor> skips;  // one per level, after attention (+ residual)
  torch::Tensor mid;                 // after the mid attention (+ residual)
};

/// Time embedding, input convolution, down levels and mid block. Shared by
/// the UNet and, as a trainable copy, by the spatial encoder.
class UNetEncoderImpl : public torch::nn::Module {
 public:
  explicit UNetEncoderImpl(const UNetConfig& config);

  torch::Tensor embed_time(const torch::Tensor& tau);
  /// `h` is the already projected input ([B, base_channels, H, W]).
  EncoderFeatures forward(torch::Tensor h, const torch::Tensor& temb, const torch::Tensor& context,
                          const SpatialResiduals* residuals = nullptr);

  torch::nn::Conv2d conv_in{nullptr};

 private:
  UNetConfig config_;
  torch::nn::Sequential time_mlp_{nullptr};
  torch::nn::ModuleList res_{nullptr}, attn_{nullptr}, down_{nullptr};
  ResBlock mid_res_{nullptr};
  CrossAttention mid_attn_{nullptr};
};
TORCH_MODULE(UNetEncoder);

/// Epsilon-predicting UNet over latents with cross-attention at every level.
class UNetImpl : public torch::nn::Module {
 public:
  explicit UNetImpl(const UNetConfig& config);

  torch::Tensor forward(const torch::Tensor& z, const torch::Tensor& tau, const torch::Tensor& context,
                        const SpatialResiduals* residuals = nullptr);

  const UNetConfig& config() const { return config_; }
  /// Expected residual shapes (without batch) for a latent of side `size`.
  std::vector<std::vector<int64_t>> residual_shapes(int64_t size) const;

  UNetEncoder encoder{nullptr};

 private:
  UNetConfig config_;
  torch::nn::ModuleList up_res_{nullptr}, up_attn_{nullptr}, up_sample_{nullptr};
  torch::nn::GroupNorm out_norm_{nullptr};
  torch::nn::Conv2d out_conv_{nullptr};
};
TORCH_MODULE(UNet);

/// Maps the normalized attribute vector to one token per attribute; the
/// teacher's stand-in for text conditioning.
class AttributeEmbedderImpl : public torch::nn::Module {
 public:
  AttributeEmbedderImpl(int attributes, int context_dim);
  torch::Tensor forward(const torch::Tensor& attributes);

 private:
  torch::Tensor weight_, bias_;
};
TORCH_MODULE(AttributeEmbedder);

struct AutoencoderConfig {
  int image_channels = 3;
  int base_channels = 16;
  int latent_channels = 4;
  friend bool operator==(const AutoencoderConfig&, const AutoencoderConfig&) = default;
};
void to_json(nlohmann::json& j, const AutoencoderConfig& c);
void from_json(const nlohmann::json& j, AutoencoderConfig& c);

/// Plain convolutional autoencoder with a x4 spatial reduction. encode()
/// multiplies by the stored latent scale so latents have roughly unit std.
class AutoencoderImpl : public torch::nn::Module {
 public:
  explicit AutoencoderImpl(const AutoencoderConfig& config);
  torch::Tensor encode(const torch::Tensor& image);
  torch::Tensor decode(const torch::Tensor& latent);
  torch::Tensor encode_unscaled(const torch::Tensor& image);
  void set_latent_scale(double scale);
  double latent_scale() const;

 private:
  torch::nn::Sequential encoder_{nullptr}, decoder_{nullptr};
  torch::Tensor scale_;
};
TORCH_MODULE(Autoencoder);

struct ClassifierConfig {
  int base_channels = 16;
  int outputs = 11;
  int feature_channels() const { return 4 * base_channels; }
  friend bool operator==(const ClassifierConfig&, const ClassifierConfig&) = default;
};
void to_json(nlohmann::json& j, const ClassifierConfig& c);
void from_json(const nlohmann::json& j, ClassifierConfig& c);

struct ClassifierFeatures {
  torch::Tensor shallow;  // [B, 2c, H/4, W/4]
  torch::Tensor deep;     // [B, 4c, H/16, W/16]
};

/// Small strided CNN regressing face attributes. Frozen copies serve as the
/// general visual feature extractor, the perceptual feature stack and the
/// metric feature space.
class AttributeClassifierImpl : public torch::nn::Module {
 public:
  explicit AttributeClassifierImpl(const ClassifierConfig& config);
  ClassifierFeatures features(const torch::Tensor& image);
  /// Deep feature map as tokens, [B, (H/16)*(W/16), 4c].
  torch::Tensor tokens(const torch::Tensor& image);
  /// Spatially pooled deep features, [B, 4c].
  torch::Tensor pooled(const torch::Tensor& image);
  /// Attribute predictions, [B, outputs].
  torch::Tensor forward(const torch::Tensor& image);

 private:
  torch::nn::Conv2d c1_{nullptr}, c2_{nullptr}, c3_{nullptr}, c4_{nullptr};
  torch::nn::Linear head_{nullptr};
};
TORCH_MODULE(AttributeClassifier);

/// Patch discriminator; outputs per-patch probabilities in (0, 1).
class DiscriminatorImpl : public torch::nn::Module {
 public:
  explicit DiscriminatorImpl(int base_channels);
  torch::Tensor forward(const torch::Tensor& image);

 private:
  torch::nn::Sequential net_{nullptr};
};
TORCH_MODULE(Discriminator);

struct VisualEncoderConfig {
  int input_dim = 64;
  int context_dim = 32;
  int tokens = 16;
  int heads = 2;
  friend bool operator==(const VisualEncoderConfig&, const VisualEncoderConfig&) = default;
};
void to_json(nlohmann::json& j, const VisualEncoderConfig& c);
void from_json(const nlohmann::json& j, VisualEncoderConfig& c);

/// Projects frozen image tokens into the backbone's context width and mixes
/// them with one self-attention block.
class VisualEncoderImpl : public torch::nn::Module {
 public:
  explicit VisualEncoderImpl(const VisualEncoderConfig& config);
  torch::Tensor forward(const torch::Tensor& tokens);
  const VisualEncoderConfig& config() const { return config_; }

 private:
  VisualEncoderConfig config_;
  torch::nn::Linear in_proj_{nullptr}, qkv_{nullptr}, attn_out_{nullptr}, fc1_{nullptr}, fc2_{nullptr};
  torch::nn::LayerNorm norm1_{nullptr}, norm2_{nullptr}, norm_out_{nullptr};
  torch::Tensor position_;
};
TORCH_MODULE(VisualEncoder);

/// Trainable copy of the backbone encoder driven by the LQ latent plus a
/// pixel hint branch, emitting residuals through zero-initialized 1x1
/// projections. The time embedding is taken at a fixed reference timestep.
class SpatialEncoderImpl : public torch::nn::Module {
 public:
  SpatialEncoderImpl(const UNetConfig& unet, int image_channels, int hint_channels, int reference_timestep);

  /// Copies conv_in, time embedding, down levels and mid block weights.
  void initialize_from(UNet& backbone);
  SpatialResiduals forward(const torch::Tensor& image, const torch::Tensor& latent, const torch::Tensor& context);

  int reference_timestep() const { return reference_timestep_; }
  void set_reference_timestep(int t) { reference_timestep_ = t; }

 private:
  int reference_timestep_;
  UNetEncoder encoder_{nullptr};
  torch::nn::Sequential hint_{nullptr};
  torch::nn::ModuleList zero_convs_{nullptr};
};
TORCH_MODULE(SpatialEncoder);

/// Copies every parameter and buffer of `src` into `dst` by name.
void copy_module_state(torch::nn::Module& dst, const torch::nn::Module& src);
void set_requires_grad(torch::nn::Module& module, bool flag);
int64_t count_parameters(const torch::nn::Module& module, bool trainable_only = false);

}  // namespace midstate
