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

#include "midstate/nets.hpp"

#include <cmath>
#include <string>

#include "midstate/errors.hpp"

namespace midstate {

namespace nn = torch::nn;
namespace F = torch::nn::functional;

namespace {

nn::Conv2d conv(int in, int out, int k, int stride = 1, int pad = -1) {
  if (pad < 0) pad = k / 2;
  return nn::Conv2d(nn::Conv2dOptions(in, out, k).stride(stride).padding(pad));
}

nn::Conv2d zero_conv(int channels) {
  auto c = nn::Conv2d(nn::Conv2dOptions(channels, channels, 1));
  torch::NoGradGuard guard;
  c->weight.zero_();
  c->bias.zero_();
  return c;
}

}  // namespace

void UNetConfig::validate() const {
  if (channel_mult.empty()) throw ConfigError("UNet needs at least one level");
  if (temb_dim % 2 != 0) throw ConfigError("temb_dim must be even");
  for (size_t i = 0; i < levels(); ++i) {
    const int ch = level_channels(i);
    if (ch % groups != 0) throw ConfigError("UNet channels must be divisible by groups");
    if (ch % heads != 0) throw ConfigError("UNet channels must be divisible by heads");
  }
}

void to_json(nlohmann::json& j, const UNetConfig& c) {
  j = {{"latent_channels", c.latent_channels}, {"base_channels", c.base_channels},
       {"channel_mult", c.channel_mult},       {"context_dim", c.context_dim},
       {"temb_dim", c.temb_dim},               {"heads", c.heads},
       {"groups", c.groups}};
}

void from_json(const nlohmann::json& j, UNetConfig& c) {
  j.at("latent_channels").get_to(c.latent_channels);
  j.at("base_channels").get_to(c.base_channels);
  j.at("channel_mult").get_to(c.channel_mult);
  j.at("context_dim").get_to(c.context_dim);
  j.at("temb_dim").get_to(c.temb_dim);
  j.at("heads").get_to(c.heads);
  j.at("groups").get_to(c.groups);
}

void to_json(nlohmann::json& j, const AutoencoderConfig& c) {
  j = {{"image_channels", c.image_channels}, {"base_channels", c.base_channels}, {"latent_channels", c.latent_channels}};
}

void from_json(const nlohmann::json& j, AutoencoderConfig& c) {
  j.at("image_channels").get_to(c.image_channels);
  j.at("base_channels").get_to(c.base_channels);
  j.at("latent_channels").get_to(c.latent_channels);
}

void to_json(nlohmann::json& j, const ClassifierConfig& c) {
  j = {{"base_channels", c.base_channels}, {"outputs", c.outputs}};
}

void from_json(const nlohmann::json& j, ClassifierConfig& c) {
  j.at("base_channels").get_to(c.base_channels);
  j.at("outputs").get_to(c.outputs);
}

void to_json(nlohmann::json& j, const VisualEncoderConfig& c) {
  j = {{"input_dim", c.input_dim}, {"context_dim", c.context_dim}, {"tokens", c.tokens}, {"heads", c.heads}};
}

void from_json(const nlohmann::json& j, VisualEncoderConfig& c) {
  j.at("input_dim").get_to(c.input_dim);
  j.at("context_dim").get_to(c.context_dim);
  j.at("tokens").get_to(c.tokens);
  j.at("heads").get_to(c.heads);
}

torch::Tensor timestep_embedding(const torch::Tensor& tau, int dim, torch::ScalarType dtype) {
  const int half = dim / 2;
  auto opts = torch::TensorOptions().dtype(dtype);
  auto freqs = torch::exp(-std::log(10000.0) * torch::arange(half, opts) / half);
  auto args = tau.to(dtype).unsqueeze(1) * freqs.unsqueeze(0);
  return torch::cat({torch::cos(args), torch::sin(args)}, 1);
}

ResBlockImpl::ResBlockImpl(int in, int out, int temb_dim, int groups)
    : norm1_(register_module("norm1", nn::GroupNorm(nn::GroupNormOptions(groups, in)))),
      norm2_(register_module("norm2", nn::GroupNorm(nn::GroupNormOptions(groups, out)))),
      conv1_(register_module("conv1", conv(in, out, 3))),
      conv2_(register_module("conv2", conv(out, out, 3))),
      temb_proj_(register_module("temb_proj", nn::Linear(temb_dim, out))) {
  if (in != out) skip_ = register_module("skip", conv(in, out, 1));
}

torch::Tensor ResBlockImpl::forward(const torch::Tensor& x, const torch::Tensor& temb) {
  auto h = conv1_(F::silu(norm1_(x)));
  h = h + temb_proj_(temb).unsqueeze(-1).unsqueeze(-1);
  h = conv2_(F::silu(norm2_(h)));
  return (skip_ ? skip_(x) : x) + h;
}

CrossAttentionImpl::CrossAttentionImpl(int channels, int context_dim, int heads, int groups)
    : heads_(heads),
      norm_(register_module("norm", nn::GroupNorm(nn::GroupNormOptions(groups, channels)))),
      to_q_(register_module("to_q", nn::Linear(nn::LinearOptions(channels, channels).bias(false)))),
      to_k_(register_module("to_k", nn::Linear(nn::LinearOptions(context_dim, channels).bias(false)))),
      to_v_(register_module("to_v", nn::Linear(nn::LinearOptions(context_dim, channels).bias(false)))),
      to_out_(register_module("to_out", nn::Linear(channels, channels))) {}

torch::Tensor CrossAttentionImpl::forward(const torch::Tensor& x, const torch::Tensor& context) {
  const auto b = x.size(0), c = x.size(1), h = x.size(2), w = x.size(3);
  const auto k_len = context.size(1);
  const auto head_dim = c / heads_;
  auto tokens = norm_(x).flatten(2).transpose(1, 2);  // [B, HW, C]
  auto q = to_q_(tokens).view({b, h * w, heads_, head_dim}).transpose(1, 2);
  auto k = to_k_(context).view({b, k_len, heads_, head_dim}).transpose(1, 2);
  auto v = to_v_(context).view({b, k_len, heads_, head_dim}).transpose(1, 2);
  auto attn = torch::softmax(torch::matmul(q, k.transpose(-1, -2)) / std::sqrt(static_cast<double>(head_dim)), -1);
  auto out = torch::matmul(attn, v).transpose(1, 2).reshape({b, h * w, c});
  out = to_out_(out).transpose(1, 2).view({b, c, h, w});
  return x + out;
}

UNetEncoderImpl::UNetEncoderImpl(const UNetConfig& config) : config_(config) {
  config.validate();
  conv_in = register_module("conv_in", conv(config.latent_channels, config.base_channels, 3));
  time_mlp_ = register_module(
      "time_mlp", nn::Sequential(nn::Linear(config.temb_dim, config.temb_dim), nn::SiLU(),
                                 nn::Linear(config.temb_dim, config.temb_dim)));
  res_ = register_module("res", nn::ModuleList());
  attn_ = register_module("attn", nn::ModuleList());
  down_ = register_module("down", nn::ModuleList());
  int prev = config.base_channels;
  for (size_t i = 0; i < config.levels(); ++i) {
    const int ch = config.level_channels(i);
    res_->push_back(ResBlock(prev, ch, config.temb_dim, config.groups));
    attn_->push_back(CrossAttention(ch, config.context_dim, config.heads, config.groups));
    if (i + 1 < config.levels()) down_->push_back(conv(ch, ch, 3, 2, 1));
    prev = ch;
  }
  mid_res_ = register_module("mid_res", ResBlock(prev, prev, config.temb_dim, config.groups));
  mid_attn_ = register_module("mid_attn", CrossAttention(prev, config.context_dim, config.heads, config.groups));
}

torch::Tensor UNetEncoderImpl::embed_time(const torch::Tensor& tau) {
  return time_mlp_->forward(timestep_embedding(tau, config_.temb_dim, conv_in->weight.scalar_type()));
}

EncoderFeatures UNetEncoderImpl::forward(torch::Tensor h, const torch::Tensor& temb, const torch::Tensor& context,
                                         const SpatialResiduals* residuals) {
  const auto levels = config_.levels();
  if (residuals && residuals->size() != levels + 1)
    throw InputError("expected " + std::to_string(levels + 1) + " spatial residuals");
  EncoderFeatures out;
  for (size_t i = 0; i < levels; ++i) {
    h = res_[i]->as<ResBlock>()->forward(h, temb);
    h = attn_[i]->as<CrossAttention>()->forward(h, context);
    if (residuals) h = h + (*residuals)[i];
    out.skips.push_back(h);
    if (i + 1 < levels) h = down_[i]->as<nn::Conv2d>()->forward(h);
  }
  h = mid_res_(h, temb);
  h = mid_attn_(h, context);
  if (residuals) h = h + residuals->back();
  out.mid = h;
  return out;
}

UNetImpl::UNetImpl(const UNetConfig& config) : config_(config) {
  encoder = register_module("encoder", UNetEncoder(config));
  up_res_ = register_module("up_res", nn::ModuleList());
  up_attn_ = register_module("up_attn", nn::ModuleList());
  up_sample_ = register_module("up_sample", nn::ModuleList());
  int prev = config.level_channels(config.levels() - 1);
  for (size_t k = 0; k < config.levels(); ++k) {
    const size_t i = config.levels() - 1 - k;
    const int ch = config.level_channels(i);
    up_res_->push_back(ResBlock(prev + ch, ch, config.temb_dim, config.groups));
    up_attn_->push_back(CrossAttention(ch, config.context_dim, config.heads, config.groups));
    if (i > 0) up_sample_->push_back(conv(ch, ch, 3));
    prev = ch;
  }
  out_norm_ = register_module("out_norm", nn::GroupNorm(nn::GroupNormOptions(config.groups, config.base_channels)));
  out_conv_ = register_module("out_conv", conv(config.base_channels, config.latent_channels, 3));
}

torch::Tensor UNetImpl::forward(const torch::Tensor& z, const torch::Tensor& tau, const torch::Tensor& context,
                                const SpatialResiduals* residuals) {
  auto temb = encoder->embed_time(tau);
  auto feats = encoder->forward(encoder->conv_in(z), temb, context, residuals);
  auto h = feats.mid;
  for (size_t k = 0; k < config_.levels(); ++k) {
    const size_t i = config_.levels() - 1 - k;
    h = up_res_[k]->as<ResBlock>()->forward(torch::cat({h, feats.skips[i]}, 1), temb);
    h = up_attn_[k]->as<CrossAttention>()->forward(h, context);
    if (i > 0) {
      h = F::interpolate(h, F::InterpolateFuncOptions().scale_factor(std::vector<double>{2.0, 2.0}).mode(torch::kNearest));
      h = up_sample_[k]->as<nn::Conv2d>()->forward(h);
    }
  }
  return out_conv_(F::silu(out_norm_(h)));
}

std::vector<std::vector<int64_t>> UNetImpl::residual_shapes(int64_t size) const {
  std::vector<std::vector<int64_t>> shapes;
  int64_t s = size;
  for (size_t i = 0; i < config_.levels(); ++i) {
    shapes.push_back({config_.level_channels(i), s, s});
    if (i + 1 < config_.levels()) s = (s + 1) / 2;
  }
  shapes.push_back({config_.level_channels(config_.levels() - 1), s, s});
  return shapes;
}

AttributeEmbedderImpl::AttributeEmbedderImpl(int attributes, int context_dim) {
  weight_ = register_parameter("weight", torch::randn({attributes, context_dim}) * 0.5);
  bias_ = register_parameter("bias", torch::randn({attributes, context_dim}) * 0.5);
}

torch::Tensor AttributeEmbedderImpl::forward(const torch::Tensor& attributes) {
  return attributes.unsqueeze(-1) * weight_ + bias_;
}

AutoencoderImpl::AutoencoderImpl(const AutoencoderConfig& config) {
  const int b = config.base_channels, c2 = 2 * config.base_channels;
  encoder_ = register_module(
      "encoder", nn::Sequential(conv(config.image_channels, b, 3), nn::SiLU(), conv(b, c2, 4, 2, 1), nn::SiLU(),
                                conv(c2, c2, 3), nn::SiLU(), conv(c2, c2, 4, 2, 1), nn::SiLU(),
                                conv(c2, config.latent_channels, 3)));
  decoder_ = register_module(
      "decoder",
      nn::Sequential(conv(config.latent_channels, c2, 3), nn::SiLU(),
                     nn::ConvTranspose2d(nn::ConvTranspose2dOptions(c2, c2, 4).stride(2).padding(1)), nn::SiLU(),
                     conv(c2, c2, 3), nn::SiLU(),
                     nn::ConvTranspose2d(nn::ConvTranspose2dOptions(c2, b, 4).stride(2).padding(1)), nn::SiLU(),
                     conv(b, config.image_channels, 3)));
  scale_ = register_buffer("latent_scale", torch::ones({1}));
}

torch::Tensor AutoencoderImpl::encode_unscaled(const torch::Tensor& image) { return encoder_->forward(image * 2.0 - 1.0); }

torch::Tensor AutoencoderImpl::encode(const torch::Tensor& image) {
  return encode_unscaled(image) * scale_.to(image.scalar_type());
}

torch::Tensor AutoencoderImpl::decode(const torch::Tensor& latent) {
  auto x = decoder_->forward(latent / scale_.to(latent.scalar_type()));
  return (x + 1.0) * 0.5;
}

void AutoencoderImpl::set_latent_scale(double scale) {
  torch::NoGradGuard guard;
  scale_.fill_(scale);
}

double AutoencoderImpl::latent_scale() const { return scale_.item<double>(); }

AttributeClassifierImpl::AttributeClassifierImpl(const ClassifierConfig& config) {
  const int c = config.base_channels;
  c1_ = register_module("c1", conv(3, c, 3, 2, 1));
  c2_ = register_module("c2", conv(c, 2 * c, 3, 2, 1));
  c3_ = register_module("c3", conv(2 * c, 4 * c, 3, 2, 1));
  c4_ = register_module("c4", conv(4 * c, 4 * c, 3, 2, 1));
  head_ = register_module("head", nn::Linear(4 * c, config.outputs));
}

ClassifierFeatures AttributeClassifierImpl::features(const torch::Tensor& image) {
  auto h = F::silu(c1_(image * 2.0 - 1.0));
  auto shallow = F::silu(c2_(h));
  auto deep = F::silu(c4_(F::silu(c3_(shallow))));
  return {shallow, deep};
}

torch::Tensor AttributeClassifierImpl::tokens(const torch::Tensor& image) {
  return features(image).deep.flatten(2).transpose(1, 2);
}

torch::Tensor AttributeClassifierImpl::pooled(const torch::Tensor& image) {
  return features(image).deep.mean({2, 3});
}

torch::Tensor AttributeClassifierImpl::forward(const torch::Tensor& image) { return head_(pooled(image)); }

DiscriminatorImpl::DiscriminatorImpl(int base_channels) {
  const int c = base_channels;
  net_ = register_module("net", nn::Sequential(conv(3, c, 4, 2, 1), nn::SiLU(), conv(c, 2 * c, 4, 2, 1), nn::SiLU(),
                                               conv(2 * c, 1, 3)));
}

torch::Tensor DiscriminatorImpl::forward(const torch::Tensor& image) {
  return torch::sigmoid(net_->forward(image * 2.0 - 1.0));
}

VisualEncoderImpl::VisualEncoderImpl(const VisualEncoderConfig& config) : config_(config) {
  const int d = config.context_dim;
  if (d % config.heads != 0) throw ConfigError("visual encoder width must be divisible by heads");
  in_proj_ = register_module("in_proj", nn::Linear(config.input_dim, d));
  position_ = register_parameter("position", torch::randn({config.tokens, d}) * 0.02);
  norm1_ = register_module("norm1", nn::LayerNorm(nn::LayerNormOptions({d})));
  qkv_ = register_module("qkv", nn::Linear(d, 3 * d));
  attn_out_ = register_module("attn_out", nn::Linear(d, d));
  norm2_ = register_module("norm2", nn::LayerNorm(nn::LayerNormOptions({d})));
  fc1_ = register_module("fc1", nn::Linear(d, 2 * d));
  fc2_ = register_module("fc2", nn::Linear(2 * d, d));
  norm_out_ = register_module("norm_out", nn::LayerNorm(nn::LayerNormOptions({d})));
}

torch::Tensor VisualEncoderImpl::forward(const torch::Tensor& tokens) {
  if (tokens.size(1) != config_.tokens || tokens.size(2) != config_.input_dim)
    throw InputError("visual encoder expects [B, " + std::to_string(config_.tokens) + ", " +
                     std::to_string(config_.input_dim) + "] tokens");
  const auto b = tokens.size(0), k = tokens.size(1);
  const int d = config_.context_dim, heads = config_.heads, hd = d / heads;
  auto x = in_proj_(tokens) + position_;
  auto qkv = qkv_(norm1_(x)).view({b, k, 3, heads, hd}).permute({2, 0, 3, 1, 4});
  auto attn = torch::softmax(torch::matmul(qkv[0], qkv[1].transpose(-1, -2)) / std::sqrt(static_cast<double>(hd)), -1);
  x = x + attn_out_(torch::matmul(attn, qkv[2]).transpose(1, 2).reshape({b, k, d}));
  x = x + fc2_(F::silu(fc1_(norm2_(x))));
  return norm_out_(x);
}

SpatialEncoderImpl::SpatialEncoderImpl(const UNetConfig& unet, int image_channels, int hint_channels,
                                       int reference_timestep)
    : reference_timestep_(reference_timestep) {
  encoder_ = register_module("encoder", UNetEncoder(unet));
  auto last = conv(hint_channels, unet.base_channels, 3, 2, 1);
  {
    torch::NoGradGuard guard;
    last->weight.zero_();
    last->bias.zero_();
  }
  hint_ = register_module("hint", nn::Sequential(conv(image_channels, hint_channels, 3, 2, 1), nn::SiLU(), last));
  zero_convs_ = register_module("zero_convs", nn::ModuleList());
  for (size_t i = 0; i < unet.levels(); ++i) zero_convs_->push_back(zero_conv(unet.level_channels(i)));
  zero_convs_->push_back(zero_conv(unet.level_channels(unet.levels() - 1)));
}

void SpatialEncoderImpl::initialize_from(UNet& backbone) { copy_module_state(*encoder_, *backbone->encoder); }

SpatialResiduals SpatialEncoderImpl::forward(const torch::Tensor& image, const torch::Tensor& latent,
                                             const torch::Tensor& context) {
  const auto b = latent.size(0);
  auto tau = torch::full({b}, reference_timestep_, torch::kLong);
  auto temb = encoder_->embed_time(tau);
  auto h = encoder_->conv_in(latent) + hint_->forward(image * 2.0 - 1.0);
  auto feats = encoder_->forward(h, temb, context);
  SpatialResiduals out;
  for (size_t i = 0; i < feats.skips.size(); ++i) out.push_back(zero_convs_[i]->as<nn::Conv2d>()->forward(feats.skips[i]));
  out.push_back(zero_convs_[feats.skips.size()]->as<nn::Conv2d>()->forward(feats.mid));
  return out;
}

void copy_module_state(torch::nn::Module& dst, const torch::nn::Module& src) {
  torch::NoGradGuard guard;
  auto src_params = src.named_parameters(true);
  for (auto& item : dst.named_parameters(true)) {
    const auto* found = src_params.find(item.key());
    if (!found) throw ConfigError("copy_module_state: missing parameter " + item.key());
    item.value().copy_(*found);
  }
  auto src_buffers = src.named_buffers(true);
  for (auto& item : dst.named_buffers(true)) {
    const auto* found = src_buffers.find(item.key());
    if (!found) throw ConfigError("copy_module_state: missing buffer " + item.key());
    item.value().copy_(*found);
  }
}

void set_requires_grad(torch::nn::Module& module, bool flag) {
  for (auto& p : module.parameters(true)) p.set_requires_grad(flag);
}

int64_t count_parameters(const torch::nn::Module& module, bool trainable_only) {
  int64_t n = 0;
  for (const auto& p : module.parameters(true))
    if (!trainable_only || p.requires_grad()) n += p.numel();
  return n;
}

}  // namespace midstate
