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


#include <gtest/gtest.h>

#include <cmath>

#include "micro.hpp"
#include "midstate/checkpoint.hpp"
#include "midstate/errors.hpp"
#include "midstate/restorer.hpp"

namespace midstate {
namespace {

using testing::kMicroResolution;
using testing::micro_restorer_modules;

const auto kF64 = torch::TensorOptions().dtype(torch::kDouble);

torch::Tensor images(int64_t n, uint64_t seed) {
  Rng rng(seed);
  return rng.rand({n, 3, kMicroResolution, kMicroResolution}, kF64);
}

RestorerConfig toy_config() {
  RestorerConfig c;
  c.learning_rate = 1e-3;
  c.disc_learning_rate = 1e-3;
  return c;
}

TEST(RestorerConfig, ValidationAndNames) {
  RestorerConfig c;
  EXPECT_NO_THROW(c.validate(4));
  for (int bad : {0, 5}) {
    c.start_step = bad;
    EXPECT_THROW(c.validate(4), ConfigError);
  }
  c = RestorerConfig{};
  c.lambda_adv = -1;
  EXPECT_THROW(c.validate(4), ConfigError);
  EXPECT_EQ(parse_conditioning("attribute"), Conditioning::kAttribute);
  EXPECT_EQ(parse_loss_mode(to_string(LossMode::kNaiveDiffusion)), LossMode::kNaiveDiffusion);
  EXPECT_THROW(parse_conditioning("text"), ConfigError);
  nlohmann::json j = toy_config();
  EXPECT_EQ(j.get<RestorerConfig>(), toy_config());
}

TEST(Restorer, InvalidStartStepIsRejected) {
  RestorerConfig c;
  c.start_step = 5;
  EXPECT_THROW(Restorer(micro_restorer_modules(), c), ConfigError);
  Restorer r(micro_restorer_modules(), RestorerConfig{});
  EXPECT_THROW(r.set_config(c), ConfigError);
}

TEST(Restorer, VisualEmbeddingShapeDeterminismAndResolution) {
  Restorer r(micro_restorer_modules(), RestorerConfig{});
  const auto x = images(3, 1);
  torch::NoGradGuard guard;
  const auto a = r.visual_embedding(x), b = r.visual_embedding(x);
  EXPECT_EQ(a.sizes(), (std::vector<int64_t>{3, 4, 4}));
  EXPECT_TRUE(torch::equal(a, b));
  EXPECT_THROW(r.visual_embedding(torch::rand({1, 3, 64, 64}, kF64)), InputError);
}

TEST(Restorer, ContextFollowsConditioningSource) {
  torch::NoGradGuard guard;
  const auto x = images(2, 2);
  RestorerConfig c;
  c.conditioning = Conditioning::kNull;
  Restorer null_r(micro_restorer_modules(), c);
  const auto ctx = null_r.context(x);
  EXPECT_EQ(ctx.sizes(), (std::vector<int64_t>{2, 4, 4}));
  EXPECT_EQ(ctx.abs().sum().item<double>(), 0.0);
  c.conditioning = Conditioning::kAttribute;
  Restorer attr_r(micro_restorer_modules(), c);
  auto& m = attr_r.modules();
  EXPECT_TRUE(torch::equal(attr_r.context(x), m.attribute_embedder->forward(m.visual_features->forward(x))));
}

TEST(SpatialEncoder, ResidualShapesMatchBackboneAndStartAtZero) {
  auto m = micro_restorer_modules();
  Restorer r(m, RestorerConfig{});
  torch::NoGradGuard guard;
  const auto x = images(2, 3);
  const auto latent = m.autoencoder->encode(x);
  const auto res = r.spatial_features(x, latent, r.visual_embedding(x));
  const auto shapes = m.backbone->residual_shapes(latent.size(-1));
  ASSERT_EQ(res.size(), shapes.size());
  for (size_t i = 0; i < res.size(); ++i) {
    std::vector<int64_t> full{2};
    full.insert(full.end(), shapes[i].begin(), shapes[i].end());
    EXPECT_EQ(res[i].sizes(), full);
    EXPECT_EQ(res[i].abs().max().item<double>(), 0.0);
  }
}

TEST(Restorer, ZeroInitInjectionIsBitNeutral) {
  Restorer r(micro_restorer_modules(), RestorerConfig{});
  torch::NoGradGuard guard;
  const auto x = images(2, 4);
  for (int start : {1, 2, 3, 4}) {
    auto on = r.config();
    on.start_step = start;
    on.spatial_injection = true;
    r.set_config(on);
    Rng a(10);
    const auto with = r.restore(x, a).image;
    auto off = on;
    off.spatial_injection = false;
    r.set_config(off);
    Rng b(10);
    EXPECT_TRUE(torch::equal(with, r.restore(x, b).image)) << "start_step " << start;
  }
}

TEST(Restorer, BackboneEvaluationCountsPerStartStep) {
  Restorer r(micro_restorer_modules(), RestorerConfig{});
  torch::NoGradGuard guard;
  const auto x = images(2, 5);
  Rng rng(1);
  r.restore(x, rng);
  EXPECT_EQ(r.backbone_evaluations(), 3);
  EXPECT_EQ(r.encodes(), 1);
  EXPECT_EQ(r.decodes(), 1);
  for (auto [start, evals] : {std::pair{1, 4}, {2, 3}, {3, 2}, {4, 1}}) {
    auto c = r.config();
    c.start_step = start;
    r.set_config(c);
    r.reset_counters();
    const auto out = r.restore(x, rng);
    EXPECT_EQ(r.backbone_evaluations(), evals) << "start_step " << start;
    EXPECT_EQ(out.trajectory.origins.size(), static_cast<size_t>(evals));
  }
}

TEST(Restorer, RiggedConstantOriginDecodesConstant) {
  Restorer r(micro_restorer_modules(), RestorerConfig{});
  torch::NoGradGuard guard;
  const auto zstar = torch::randn({1, 2, 8, 8}, kF64);
  r.set_origin_override([&](const torch::Tensor& z, const torch::Tensor&, const torch::Tensor&,
                            const SpatialResiduals*) { return zstar.expand(z.sizes()); });
  const auto expected = r.modules().autoencoder->decode(zstar);
  for (uint64_t seed : {1, 2}) {
    Rng rng(seed);
    const auto out = r.restore(images(2, seed), rng).image;
    EXPECT_TRUE(torch::equal(out[0], expected[0]));
    EXPECT_TRUE(torch::equal(out[1], expected[0]));
  }
}

TEST(Restorer, ImageOverloadMatchesBatchPath) {
  Restorer r(micro_restorer_modules(), RestorerConfig{});
  const auto x = images(1, 6).to(torch::kFloat).to(torch::kDouble);
  const Image img = from_tensor(x[0].to(torch::kFloat));
  Rng a(3), b(3);
  const Image out = r.restore(img, a);
  torch::NoGradGuard guard;
  const Image batch = from_tensor(r.restore(to_tensor(img).unsqueeze(0).to(torch::kDouble), b).image[0]);
  EXPECT_EQ(out, batch);
  for (float v : out.data) ASSERT_TRUE(v >= 0.0f && v <= 1.0f);
}

TEST(Losses, IdentityReconstructionAndLinearity) {
  Restorer r(micro_restorer_modules(), toy_config());
  RestorerTrainer trainer(r);
  const auto x_h = images(2, 7);
  const auto same = trainer.losses_from(x_h, x_h);
  EXPECT_EQ(same.l1.item<double>(), 0.0);
  EXPECT_EQ(same.lper.item<double>(), 0.0);
  auto c = toy_config();
  c.lambda_adv = 0.0;
  r.set_config(c);
  const auto x_rec = images(2, 8);
  const auto t = trainer.losses_from(x_h, x_rec);
  EXPECT_EQ(t.total.item<double>(), (t.l1 + t.lper).item<double>());
  c.perceptual = false;
  c.adversarial = false;
  r.set_config(c);
  const auto l1_only = trainer.losses_from(x_h, x_rec);
  EXPECT_EQ(l1_only.total.item<double>(), (x_rec - x_h).abs().mean().item<double>());
}

TEST(Losses, PerceptualIsShallowPlusDeepMse) {
  auto m = micro_restorer_modules();
  const auto a = images(2, 9), b = images(2, 10);
  const auto fa = m.perceptual_features->features(a), fb = m.perceptual_features->features(b);
  const double expected = (fa.shallow - fb.shallow).pow(2).mean().item<double>() +
                          (fa.deep - fb.deep).pow(2).mean().item<double>();
  EXPECT_NEAR(perceptual_loss(m.perceptual_features, a, b).item<double>(), expected, 1e-14);
}

TEST(Losses, TrainingStepGradientMatchesFiniteDifferences) {
  auto m = micro_restorer_modules(5);
  testing::randomize_zero_init(*m.spatial_encoder);
  Restorer r(m, toy_config());
  RestorerTrainer trainer(r);
  std::vector<torch::Tensor> params;
  for (auto& p : m.visual_encoder->parameters()) params.push_back(p);
  for (auto& p : m.spatial_encoder->parameters()) params.push_back(p);
  int64_t count = 0;
  for (auto& p : params) count += p.numel();
  ASSERT_LE(count, 1000);
  const auto x_h = images(2, 11), x_l = images(2, 12);
  const auto loss = [&] {
    Rng rng(13);
    return trainer.compute_losses(x_h, x_l, rng).total;
  };
  const auto result = testing::finite_difference_check(params, loss);
  EXPECT_EQ(result.checked, count);
  EXPECT_LE(result.max_rel_error, 1e-3);
}

TEST(Losses, GradientsReachZeroInitializedProjections) {
  auto m = micro_restorer_modules(6);
  Restorer r(m, toy_config());
  RestorerTrainer trainer(r);
  Rng rng(1);
  trainer.compute_losses(images(2, 14), images(2, 15), rng).total.backward();
  double se = 0, ve = 0;
  for (auto& p : m.spatial_encoder->parameters())
    if (p.grad().defined()) se += p.grad().abs().sum().item<double>();
  for (auto& p : m.visual_encoder->parameters())
    if (p.grad().defined()) ve += p.grad().abs().sum().item<double>();
  EXPECT_GT(se, 0.0);
  EXPECT_GT(ve, 0.0);
}

TEST(Discriminator, ObjectiveClosedForms) {
  const auto half = torch::full({4, 1}, 0.5, kF64);
  EXPECT_NEAR(adversarial_objective(half, half).item<double>(), 2 * std::log(0.5), 1e-15);
  EXPECT_NEAR(adversarial_objective(half, half).item<double>(), -1.3863, 1e-4);
  const double perfect = adversarial_objective(torch::ones({4, 1}, kF64), torch::zeros({4, 1}, kF64)).item<double>();
  EXPECT_LT(perfect, 0.0);
  EXPECT_GT(perfect, -1e-5);
  double prev = -1e9;
  for (double p : {0.6, 0.9, 0.99, 0.999}) {
    const double v =
        adversarial_objective(torch::full({1}, p, kF64), torch::full({1}, 1 - p, kF64)).item<double>();
    EXPECT_GT(v, prev);
    EXPECT_LT(v, 0.0);
    prev = v;
  }
}

TEST(Discriminator, SingleStepAscends) {
  Restorer r(micro_restorer_modules(7), toy_config());
  RestorerTrainer trainer(r);
  const auto x_h = images(4, 16), x_rec = images(4, 17) * 0.5;
  const double before = trainer.discriminator_objective(x_h, x_rec);
  EXPECT_EQ(trainer.discriminator_step(x_h, x_rec), before);
  EXPECT_GE(trainer.discriminator_objective(x_h, x_rec), before);
}

TEST(Training, StepKeepsFrozenModulesAndMovesTrainableOnes) {
  auto m = micro_restorer_modules(8);
  Restorer r(m, toy_config());
  RestorerTrainer trainer(r);
  const auto frozen = [&] {
    return std::vector<uint64_t>{module_checksum(*m.autoencoder), module_checksum(*m.backbone),
                                 module_checksum(*m.visual_features), module_checksum(*m.perceptual_features),
                                 module_checksum(*m.attribute_embedder)};
  };
  const auto before = frozen();
  const auto ve = module_checksum(*m.visual_encoder), se = module_checksum(*m.spatial_encoder),
             disc = module_checksum(*m.discriminator);
  Rng rng(2);
  for (int i = 0; i < 5; ++i) {
    const auto stats = trainer.training_step(images(2, 20 + i), images(2, 40 + i), rng);
    EXPECT_TRUE(std::isfinite(stats.total));
    EXPECT_NEAR(stats.total, stats.l1 + stats.lper + 0.1 * stats.ladv, 1e-12);
  }
  EXPECT_EQ(frozen(), before);
  EXPECT_NE(module_checksum(*m.visual_encoder), ve);
  EXPECT_NE(module_checksum(*m.spatial_encoder), se);
  EXPECT_NE(module_checksum(*m.discriminator), disc);
}

TEST(Training, DisabledBranchesStayUntouched) {
  auto m = micro_restorer_modules(9);
  auto c = toy_config();
  c.spatial_injection = false;
  c.adversarial = false;
  Restorer r(m, c);
  RestorerTrainer trainer(r);
  const auto se = module_checksum(*m.spatial_encoder), disc = module_checksum(*m.discriminator);
  Rng rng(3);
  trainer.training_step(images(2, 1), images(2, 2), rng);
  EXPECT_EQ(module_checksum(*m.spatial_encoder), se);
  EXPECT_EQ(module_checksum(*m.discriminator), disc);
  c.conditioning = Conditioning::kNull;
  EXPECT_THROW(RestorerTrainer(*std::make_unique<Restorer>(micro_restorer_modules(), c)), ConfigError);
}

TEST(NaiveMode, PerfectPredictorGivesZeroLoss) {
  auto c = toy_config();
  c.loss_mode = LossMode::kNaiveDiffusion;
  Restorer r(micro_restorer_modules(10), c);
  RestorerTrainer trainer(r);
  const auto x_h = images(2, 3), x_l = images(2, 4);
  const auto& s = r.modules().schedule;
  torch::Tensor z_h;
  {
    torch::NoGradGuard guard;
    z_h = r.modules().autoencoder->encode(x_h);
  }
  trainer.set_epsilon_override([&](const torch::Tensor& z, const torch::Tensor& t, const torch::Tensor&,
                                   const SpatialResiduals*) { return (z - s.alpha(t, z) * z_h) / s.sigma(t, z); });
  Rng rng(4);
  const auto t = torch::tensor({5, 900});
  const auto loss = trainer.naive_controlnet_loss(x_h, x_l, t, rng.randn(z_h.sizes(), kF64));
  EXPECT_LT(loss.item<double>(), 1e-20);
}

TEST(NaiveMode, LossNonNegativeAndModeGuards) {
  auto c = toy_config();
  c.loss_mode = LossMode::kNaiveDiffusion;
  Restorer r(micro_restorer_modules(11), c);
  RestorerTrainer trainer(r);
  Rng rng(5);
  for (int i = 0; i < 3; ++i) EXPECT_GE(trainer.naive_controlnet_step(images(2, i), images(2, 10 + i), rng), 0.0);
  EXPECT_THROW(trainer.training_step(images(1, 1), images(1, 2), rng), ConfigError);
  Restorer image_mode(micro_restorer_modules(11), toy_config());
  RestorerTrainer image_trainer(image_mode);
  EXPECT_THROW(image_trainer.naive_controlnet_step(images(1, 1), images(1, 2), rng), ConfigError);
}

}  // namespace
}  // namespace midstate
