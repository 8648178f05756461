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

#include "midstate/restorer.hpp"

#include <string>

#include "midstate/errors.hpp"

namespace midstate {

std::string to_string(Conditioning c) {
  switch (c) {
    case Conditioning::kVisual: return "visual";
    case Conditioning::kNull: return "null";
    case Conditioning::kAttribute: return "attribute";
  }
  return "visual";
}

std::string to_string(LossMode m) { return m == LossMode::kImageLosses ? "image" : "naive-diffusion"; }

Conditioning parse_conditioning(const std::string& s) {
  if (s == "visual") return Conditioning::kVisual;
  if (s == "null") return Conditioning::kNull;
  if (s == "attribute") return Conditioning::kAttribute;
  throw ConfigError("unknown conditioning '" + s + "' (visual|null|attribute)");
}

LossMode parse_loss_mode(const std::string& s) {
  if (s == "image") return LossMode::kImageLosses;
  if (s == "naive-diffusion") return LossMode::kNaiveDiffusion;
  throw ConfigError("unknown loss mode '" + s + "' (image|naive-diffusion)");
}

void RestorerConfig::validate(int sequence_steps) const {
  if (start_step < 1 || start_step > sequence_steps)
    throw ConfigError("start_step " + std::to_string(start_step) + " outside [1, " + std::to_string(sequence_steps) +
                      "]");
  if (lambda_adv < 0) throw ConfigError("lambda_adv must be non-negative");
  if (learning_rate <= 0 || disc_learning_rate <= 0) throw ConfigError("learning rates must be positive");
}

void to_json(nlohmann::json& j, const RestorerConfig& c) {
  j = {{"start_step", c.start_step},
       {"conditioning", to_string(c.conditioning)},
       {"spatial_injection", c.spatial_injection},
       {"loss_mode", to_string(c.loss_mode)},
       {"lambda_adv", c.lambda_adv},
       {"perceptual", c.perceptual},
       {"adversarial", c.adversarial},
       {"learning_rate", c.learning_rate},
       {"disc_learning_rate", c.disc_learning_rate}};
}

void from_json(const nlohmann::json& j, RestorerConfig& c) {
  j.at("start_step").get_to(c.start_step);
  c.conditioning = parse_conditioning(j.at("conditioning").get<std::string>());
  j.at("spatial_injection").get_to(c.spatial_injection);
  c.loss_mode = parse_loss_mode(j.at("loss_mode").get<std::string>());
  j.at("lambda_adv").get_to(c.lambda_adv);
  j.at("perceptual").get_to(c.perceptual);
  j.at("adversarial").get_to(c.adversarial);
  j.at("learning_rate").get_to(c.learning_rate);
  j.at("disc_learning_rate").get_to(c.disc_learning_rate);
}

void RestorerModules::freeze() {
  for (torch::nn::Module* m : std::initializer_list<torch::nn::Module*>{
           autoencoder.get(), backbone.get(), visual_features.get(), perceptual_features.get(),
           attribute_embedder.get()}) {
    set_requires_grad(*m, false);
    m->eval();
  }
}

Restorer::Restorer(RestorerModules modules, RestorerConfig config)
    : modules_(std::move(modules)), config_(config) {
  modules_.sequence.validate(modules_.schedule);
  config_.validate(modules_.sequence.steps());
  modules_.freeze();
}

void Restorer::set_config(const RestorerConfig& config) {
  config.validate(modules_.sequence.steps());
  config_ = config;
}

void Restorer::reset_counters() {
  backbone_evals_ = 0;
  encodes_ = 0;
  decodes_ = 0;
}

torch::Tensor Restorer::visual_embedding(const torch::Tensor& x_l) {
  if (x_l.dim() != 4 || x_l.size(2) != modules_.resolution || x_l.size(3) != modules_.resolution)
    throw InputError("visual feature extractor expects " + std::to_string(modules_.resolution) + "x" +
                     std::to_string(modules_.resolution) + " images");
  return modules_.visual_encoder->forward(modules_.visual_features->tokens(x_l));
}

torch::Tensor Restorer::context(const torch::Tensor& x_l) {
  switch (config_.conditioning) {
    case Conditioning::kVisual: return visual_embedding(x_l);
    case Conditioning::kNull: {
      const auto& ve = modules_.visual_encoder->config();
      return null_context(x_l.size(0), ve.tokens, ve.context_dim, x_l.options());
    }
    case Conditioning::kAttribute: return modules_.attribute_embedder->forward(modules_.visual_features->forward(x_l));
  }
  throw ConfigError("unknown conditioning");
}

SpatialResiduals Restorer::spatial_features(const torch::Tensor& x_l, const torch::Tensor& latent,
                                            const torch::Tensor& c_v) {
  return modules_.spatial_encoder->forward(x_l, latent, c_v);
}

RestoreResult Restorer::restore(const torch::Tensor& x_l, Rng& rng) {
  auto ctx = context(x_l);
  ++encodes_;
  auto z_l = modules_.autoencoder->encode(x_l);
  SpatialResiduals residuals;
  if (config_.spatial_injection) residuals = spatial_features(x_l, z_l, ctx);
  const SpatialResiduals* res = config_.spatial_injection ? &residuals : nullptr;

  OriginFn base = origin_override_
                      ? *origin_override_
                      : ConsistencyFunction(epsilon_fn(modules_.backbone), modules_.schedule, modules_.boundary)
                            .as_origin_fn();
  OriginFn f = [&](const torch::Tensor& z, const torch::Tensor& tau, const torch::Tensor& c,
                   const SpatialResiduals* r) {
    ++backbone_evals_;
    return base(z, tau, c, r);
  };

  RestoreResult out;
  if (config_.start_step == 1) {
    out.trajectory = multistep_sample(f, modules_.schedule, ctx, modules_.sequence, z_l.sizes(), rng, res,
                                      z_l.options());
  } else {
    out.trajectory =
        multistep_continue(f, modules_.schedule, z_l, ctx, modules_.sequence, config_.start_step - 1, rng, res);
  }
  ++decodes_;
  out.image = modules_.autoencoder->decode(out.trajectory.origins.back());
  return out;
}

Image Restorer::restore(const Image& x_l, Rng& rng) {
  torch::NoGradGuard guard;
  const auto dtype = modules_.autoencoder->parameters().front().scalar_type();
  auto batch = to_tensor(x_l).unsqueeze(0).to(dtype);
  return from_tensor(restore(batch, rng).image[0]);
}

torch::Tensor adversarial_objective(const torch::Tensor& d_real, const torch::Tensor& d_fake, double eps) {
  return d_real.clamp(eps, 1.0 - eps).log().mean() + (1.0 - d_fake.clamp(eps, 1.0 - eps)).log().mean();
}

torch::Tensor perceptual_loss(AttributeClassifier& features, const torch::Tensor& a, const torch::Tensor& b) {
  const auto fa = features->features(a);
  const auto fb = features->features(b);
  return (fa.shallow - fb.shallow).pow(2).mean() + (fa.deep - fb.deep).pow(2).mean();
}

RestorerTrainer::RestorerTrainer(Restorer& restorer) : restorer_(restorer) {
  auto& m = restorer_.modules();
  const auto& cfg = restorer_.config();
  std::vector<torch::Tensor> params;
  if (cfg.conditioning == Conditioning::kVisual)
    for (auto& p : m.visual_encoder->parameters()) params.push_back(p);
  if (cfg.spatial_injection)
    for (auto& p : m.spatial_encoder->parameters()) params.push_back(p);
  set_requires_grad(*m.visual_encoder, cfg.conditioning == Conditioning::kVisual);
  set_requires_grad(*m.spatial_encoder, cfg.spatial_injection);
  if (params.empty()) throw ConfigError("restorer configuration has no trainable parameters");
  generator_opt_ = std::make_unique<torch::optim::Adam>(params, torch::optim::AdamOptions(cfg.learning_rate));
  disc_opt_ = std::make_unique<torch::optim::Adam>(m.discriminator->parameters(),
                                                   torch::optim::AdamOptions(cfg.disc_learning_rate));
}

LossTerms RestorerTrainer::losses_from(const torch::Tensor& x_h, const torch::Tensor& x_rec) {
  auto& m = restorer_.modules();
  const auto& cfg = restorer_.config();
  LossTerms out;
  out.l1 = (x_rec - x_h).abs().mean();
  out.lper = cfg.perceptual ? perceptual_loss(m.perceptual_features, x_rec, x_h) : torch::zeros_like(out.l1);
  out.ladv = cfg.adversarial ? adversarial_objective(m.discriminator->forward(x_h), m.discriminator->forward(x_rec))
                             : torch::zeros_like(out.l1);
  out.total = out.l1 + out.lper + cfg.lambda_adv * out.ladv;
  return out;
}

LossTerms RestorerTrainer::compute_losses(const torch::Tensor& x_h, const torch::Tensor& x_l, Rng& rng) {
  return losses_from(x_h, restorer_.restore(x_l, rng).image);
}

StepStats RestorerTrainer::training_step(const torch::Tensor& x_h, const torch::Tensor& x_l, Rng& rng) {
  if (restorer_.config().loss_mode != LossMode::kImageLosses)
    throw ConfigError("training_step requires the image-loss mode");
  auto& disc = *restorer_.modules().discriminator;
  set_requires_grad(disc, false);
  generator_opt_->zero_grad();
  const auto x_rec = restorer_.restore(x_l, rng).image;
  const auto terms = losses_from(x_h, x_rec);
  terms.total.backward();
  generator_opt_->step();
  set_requires_grad(disc, true);
  if (restorer_.config().adversarial) discriminator_step(x_h, x_rec.detach());
  return {terms.l1.item<double>(), terms.lper.item<double>(), terms.ladv.item<double>(), terms.total.item<double>()};
}

double RestorerTrainer::discriminator_objective(const torch::Tensor& x_h, const torch::Tensor& x_rec) {
  auto& disc = restorer_.modules().discriminator;
  return adversarial_objective(disc->forward(x_h), disc->forward(x_rec.detach())).item<double>();
}

double RestorerTrainer::discriminator_step(const torch::Tensor& x_h, const torch::Tensor& x_rec) {
  auto& disc = restorer_.modules().discriminator;
  disc_opt_->zero_grad();
  auto objective = adversarial_objective(disc->forward(x_h), disc->forward(x_rec.detach()));
  (-objective).backward();
  disc_opt_->step();
  return objective.item<double>();
}

torch::Tensor RestorerTrainer::naive_controlnet_loss(const torch::Tensor& x_h, const torch::Tensor& x_l,
                                                     const torch::Tensor& t, const torch::Tensor& eps) {
  if (restorer_.config().loss_mode != LossMode::kNaiveDiffusion)
    throw ConfigError("naive ControlNet training requires loss_mode = naive-diffusion");
  auto& m = restorer_.modules();
  torch::Tensor z_h, z_l;
  {
    torch::NoGradGuard guard;
    z_h = m.autoencoder->encode(x_h);
    z_l = m.autoencoder->encode(x_l);
  }
  const auto z_t = forward_diffuse(m.schedule, z_h, t, eps);
  const auto ctx = restorer_.context(x_l);
  SpatialResiduals residuals;
  if (restorer_.config().spatial_injection) residuals = restorer_.spatial_features(x_l, z_l, ctx);
  const SpatialResiduals* res = restorer_.config().spatial_injection ? &residuals : nullptr;
  const auto eps_hat = eps_override_ ? (*eps_override_)(z_t, t, ctx, res) : m.backbone->forward(z_t, t, ctx, res);
  return (eps_hat - eps).pow(2).mean();
}

double RestorerTrainer::naive_controlnet_step(const torch::Tensor& x_h, const torch::Tensor& x_l, Rng& rng) {
  auto& m = restorer_.modules();
  const auto b = x_h.size(0);
  const auto t = rng.randint(1, m.schedule.steps() + 1, {b});
  const int64_t res = restorer_.modules().resolution / 4;
  const auto c = m.backbone->config().latent_channels;
  const auto eps = rng.randn({b, c, res, res}, x_h.options());
  generator_opt_->zero_grad();
  auto loss = naive_controlnet_loss(x_h, x_l, t, eps);
  loss.backward();
  generator_opt_->step();
  return loss.item<double>();
}

}  // namespace midstate
