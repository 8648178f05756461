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
#include "midstate/diffusion.hpp"
#include "midstate/errors.hpp"
#include "midstate/schedule.hpp"

namespace midstate {
namespace {

using testing::micro_unet;

const auto kF64 = torch::TensorOptions().dtype(torch::kDouble);

TEST(Schedule, LinearBetasAccumulateByProduct) {
  const auto s = NoiseSchedule::linear(1000, 1e-4, 2e-2);
  double prod = 1;
  for (int t = 1; t <= 1000; ++t) {
    const double beta = 1e-4 + (2e-2 - 1e-4) * (t - 1) / 999.0;
    prod *= 1 - beta;
    ASSERT_NEAR(s.alpha_bar(t), prod, 1e-12) << t;
  }
  EXPECT_EQ(s.alpha_bar(0), 1.0);
  EXPECT_EQ(s.steps(), 1000);
}

TEST(Schedule, VariancePreservedOverFullSchedule) {
  const auto s = NoiseSchedule::linear();
  for (int t = 0; t <= s.steps(); ++t) ASSERT_NEAR(s.alpha(t) * s.alpha(t) + s.sigma(t) * s.sigma(t), 1.0, 1e-12);
}

TEST(Schedule, InvalidTablesAndTimestepsAreRejected) {
  EXPECT_THROW(NoiseSchedule::from_table({0.9, 0.5}), ConfigError);
  EXPECT_THROW(NoiseSchedule::from_table({1.0, 0.5, 0.6}), ConfigError);
  EXPECT_THROW(NoiseSchedule::linear(0), ConfigError);
  EXPECT_THROW(NoiseSchedule::linear(10, 0.1, 0.01), ConfigError);
  const auto s = NoiseSchedule::linear();
  EXPECT_THROW(s.check(1001), ScheduleError);
  EXPECT_THROW(s.check(-1), ScheduleError);
  EXPECT_THROW(forward_diffuse(s, torch::zeros({2}), 5, torch::zeros({3})), InputError);
}

TEST(ForwardDiffuse, ZeroTimestepIsIdentity) {
  const auto s = NoiseSchedule::linear();
  const auto z0 = torch::randn({4, 2, 3, 3});
  EXPECT_TRUE(torch::equal(forward_diffuse(s, z0, 0, torch::randn_like(z0)), z0));
}

TEST(ForwardDiffuse, HandEvaluatedScalar) {
  const auto s = NoiseSchedule::from_table({1.0, 0.81});
  const auto out = forward_diffuse(s, torch::full({1}, 1.0, kF64), 1, torch::full({1}, 0.5, kF64));
  EXPECT_NEAR(out.item<double>(), 0.9 * 1.0 + std::sqrt(0.19) * 0.5, 1e-15);
  EXPECT_NEAR(out.item<double>(), 1.11795, 1e-5);
}

TEST(ForwardDiffuse, MonteCarloMomentsMatchSchedule) {
  const auto s = NoiseSchedule::linear();
  constexpr int64_t n = 100000;
  constexpr int t = 400;
  Rng rng(21);
  const double z0 = 0.7;
  const auto eps = rng.randn({n}, kF64);
  const auto x = forward_diffuse(s, torch::full({n}, z0, kF64), t, eps);
  const double mean = x.mean().item<double>(), var = x.var().item<double>();
  const double sig2 = s.sigma(t) * s.sigma(t);
  EXPECT_NEAR(mean, s.alpha(t) * z0, 3 * std::sqrt(sig2 / n));
  EXPECT_NEAR(var, sig2, 3 * sig2 * std::sqrt(2.0 / (n - 1)));
}

TEST(ForwardDiffuse, TensorTimestepsMatchScalarPath) {
  const auto s = NoiseSchedule::linear();
  const auto z0 = torch::randn({3, 2, 4, 4}, kF64), eps = torch::randn({3, 2, 4, 4}, kF64);
  const auto t = torch::tensor({1, 500, 1000}, torch::kLong);
  const auto batched = forward_diffuse(s, z0, t, eps);
  for (int i = 0; i < 3; ++i)
    EXPECT_TRUE(torch::equal(batched[i], forward_diffuse(s, z0[i], t[i].item<int>(), eps[i])));
}

TEST(PredictX0, InvertsForwardDiffuse) {
  const auto s = NoiseSchedule::linear();
  Rng rng(3);
  const auto z0 = rng.randn({10000, 4}, kF64);
  for (int k = 0; k < 20; ++k) {
    const int t = 1 + k * 999 / 19;
    const auto eps = rng.randn({10000, 4}, kF64);
    const auto back = predict_x0(s, forward_diffuse(s, z0, t, eps), t, eps);
    ASSERT_LE((back - z0).abs().max().item<double>(), 1e-12) << "t=" << t;
  }
}

TEST(PredictX0, IdentityAtUnitAlphaBarAndHandScalar) {
  const auto s = NoiseSchedule::from_table({1.0, 0.81});
  const auto x = torch::randn({5}, kF64);
  EXPECT_TRUE(torch::equal(predict_x0(s, x, 0, torch::randn_like(x)), x));
  const auto v = predict_x0(s, torch::full({1}, 0.9, kF64), 1, torch::full({1}, 0.5, kF64));
  EXPECT_NEAR(v.item<double>(), (0.9 - std::sqrt(0.19) * 0.5) / 0.9, 1e-15);
  EXPECT_NEAR(v.item<double>(), 0.75784, 1e-5);
}

TEST(PredictX0, ZeroAlphaBarIsASingularity) {
  const auto s = NoiseSchedule::from_table({1.0, 0.5, 0.0});
  EXPECT_THROW(predict_x0(s, torch::ones({2}), 2, torch::ones({2})), SingularityError);
  EXPECT_THROW(predict_x0(s, torch::ones({2, 1}), torch::tensor({1, 2}), torch::ones({2, 1})), SingularityError);
}

TEST(OdeSolverStep, EndpointsAndOrdering) {
  const auto s = NoiseSchedule::linear();
  const auto z = torch::randn({2, 3}, kF64), e = torch::randn({2, 3}, kF64);
  EXPECT_TRUE(torch::equal(ode_solver_step(s, z, 300, 300, e), z));
  EXPECT_TRUE(torch::equal(ode_solver_step(s, z, 300, 0, e), predict_x0(s, z, 300, e)));
  EXPECT_THROW(ode_solver_step(s, z, 300, 301, e), OrderingError);
  const auto t = torch::tensor({300, 300}), same = torch::tensor({300, 0});
  const auto out = ode_solver_step(s, z, t, same, e);
  EXPECT_TRUE(torch::equal(out[0], z[0]));
  EXPECT_TRUE(torch::equal(out[1], predict_x0(s, z, 300, e)[1]));
  EXPECT_THROW(ode_solver_step(s, z, t, torch::tensor({301, 0}), e), OrderingError);
}

TEST(OdeSolverStep, ChainedStepsEqualDirectStep) {
  const auto s = NoiseSchedule::linear();
  const auto z = torch::randn({64}, kF64), e = torch::randn({64}, kF64);
  for (auto [t, m, u] : {std::tuple{900, 500, 100}, {1000, 980, 960}, {200, 100, 1}}) {
    const auto chained = ode_solver_step(s, ode_solver_step(s, z, t, m, e), m, u, e);
    EXPECT_LE((chained - ode_solver_step(s, z, t, u, e)).abs().max().item<double>(), 1e-12);
  }
}

TEST(TeacherLoss, PerfectPredictorGivesZero) {
  const auto s = NoiseSchedule::linear();
  const auto z0 = torch::randn({64, 2, 4, 4}, kF64);
  EpsilonFn perfect = [&](const torch::Tensor& z, const torch::Tensor& t, const torch::Tensor&,
                          const SpatialResiduals*) { return (z - s.alpha(t, z) * z0) / s.sigma(t, z); };
  Rng rng(1);
  EXPECT_LE(teacher_loss(perfect, s, z0, torch::zeros({64, 1, 4}, kF64), rng).loss.item<double>(), 1e-20);
}

TEST(TeacherLoss, ZeroPredictorEstimatesUnitNoiseEnergy) {
  const auto s = NoiseSchedule::linear();
  const auto z0 = torch::randn({10000, 1, 1, 1}, kF64);
  EpsilonFn zero = [](const torch::Tensor& z, const torch::Tensor&, const torch::Tensor&, const SpatialResiduals*) {
    return torch::zeros_like(z);
  };
  Rng rng(2);
  const auto out = teacher_loss(zero, s, z0, torch::zeros({10000, 1, 4}, kF64), rng);
  EXPECT_NEAR(out.loss.item<double>(), 1.0, 3 * std::sqrt(2.0 / 10000));
  EXPECT_GE(out.t.min().item<int64_t>(), 1);
  EXPECT_LE(out.t.max().item<int64_t>(), 1000);
}

TEST(TeacherLoss, GradientMatchesFiniteDifferences) {
  torch::manual_seed(4);
  auto unet = testing::as_double(UNet(micro_unet()));
  testing::randomize_zero_init(*unet);
  const auto params = unet->parameters();
  ASSERT_LE(count_parameters(*unet), 1000);
  const auto s = NoiseSchedule::linear();
  const auto z0 = torch::randn({2, 2, 8, 8}, kF64), ctx = torch::randn({2, 3, 4}, kF64);
  auto model = epsilon_fn(unet);
  const auto loss = [&] {
    Rng rng(9);
    return teacher_loss(model, s, z0, ctx, rng).loss;
  };
  const auto result = testing::finite_difference_check(params, loss);
  EXPECT_GT(result.checked, 100);
  EXPECT_LE(result.max_rel_error, 1e-3);
}

TEST(UNet, NullResidualsEqualZeroResiduals) {
  torch::manual_seed(5);
  auto unet = testing::as_double(UNet(micro_unet()));
  testing::randomize_zero_init(*unet);
  const auto z = torch::randn({2, 2, 8, 8}, kF64), ctx = torch::randn({2, 3, 4}, kF64);
  const auto tau = torch::tensor({10, 700});
  SpatialResiduals zeros;
  for (const auto& shape : unet->residual_shapes(8)) {
    std::vector<int64_t> full{2};
    full.insert(full.end(), shape.begin(), shape.end());
    zeros.push_back(torch::zeros(full, kF64));
  }
  torch::NoGradGuard guard;
  EXPECT_TRUE(torch::equal(unet->forward(z, tau, ctx, nullptr), unet->forward(z, tau, ctx, &zeros)));
}

TEST(TeacherLoss, TrainingReducesHeldOutLoss) {
  torch::manual_seed(6);
  auto unet = UNet(micro_unet());
  const auto s = NoiseSchedule::linear();
  // Structured latents: smooth ramps with a random sign.
  const auto ramp = torch::linspace(-1, 1, 8).view({1, 1, 1, 8}).expand({256, 2, 8, 8});
  const auto z0 = ramp * torch::sign(torch::randn({256, 1, 1, 1}));
  const auto ctx = torch::zeros({256, 1, 4});
  auto model = epsilon_fn(unet);
  const auto held_out = [&] {
    torch::NoGradGuard guard;
    Rng rng(100);
    return teacher_loss(model, s, z0, ctx, rng).loss.item<double>();
  };
  const double before = held_out();
  torch::optim::Adam opt(unet->parameters(), torch::optim::AdamOptions(1e-2));
  Rng rng(7);
  for (int i = 0; i < 150; ++i) {
    opt.zero_grad();
    teacher_loss(model, s, z0, ctx, rng).loss.backward();
    opt.step();
  }
  EXPECT_LT(held_out(), 0.9 * before);
}

}  // namespace
}  // namespace midstate
