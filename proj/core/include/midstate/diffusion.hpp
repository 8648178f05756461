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
#include <functional>

#include "midstate/nets.hpp"
#include "midstate/rng.hpp"
#include "midstate/schedule.hpp"

namespace midstate {

/// Any noise predictor eps(z, tau, context, residuals). Tests substitute
/// closed-form predictors; production code wraps a UNet.
using EpsilonFn = std::function<torch::Tensor(const torch::Tensor& z, const torch::Tensor& tau,
                                              const torch::Tensor& context, const SpatialResiduals* residuals)>;

EpsilonFn epsilon_fn(UNet unet);
/// Increments `counter` once per call.
EpsilonFn counted(EpsilonFn fn, std::atomic<int64_t>& counter);

/// All-zero context of `tokens` tokens; the unconditional input.
torch::Tensor null_context(int64_t batch, int64_t tokens, int64_t context_dim,
                           const torch::TensorOptions& options = torch::kFloat);

struct TeacherLoss {
  torch::Tensor loss;  // mean squared error per element
  torch::Tensor t;     // sampled timesteps, uniform in [1, T]
  torch::Tensor eps;   // sampled noise
};

/// Noise-prediction loss on one batch of clean latents.
TeacherLoss teacher_loss(const EpsilonFn& model, const NoiseSchedule& schedule, const torch::Tensor& z0,
                         const torch::Tensor& context, Rng& rng);

}  // namespace midstate
