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

#include "midstate/diffusion.hpp"

namespace midstate {

EpsilonFn epsilon_fn(UNet unet) {
  return [unet](const torch::Tensor& z, const torch::Tensor& tau, const torch::Tensor& context,
                const SpatialResiduals* residuals) mutable { return unet->forward(z, tau, context, residuals); };
}

EpsilonFn counted(EpsilonFn fn, std::atomic<int64_t>& counter) {
  return [fn = std::move(fn), &counter](const torch::Tensor& z, const torch::Tensor& tau, const torch::Tensor& context,
                                        const SpatialResiduals* residuals) {
    counter.fetch_add(1, std::memory_order_relaxed);
    return fn(z, tau, context, residuals);
  };
}

torch::Tensor null_context(int64_t batch, int64_t tokens, int64_t context_dim, const torch::TensorOptions& options) {
  return torch::zeros({batch, tokens, context_dim}, options);
}

TeacherLoss teacher_loss(const EpsilonFn& model, const NoiseSchedule& schedule, const torch::Tensor& z0,
                         const torch::Tensor& context, Rng& rng) {
  TeacherLoss out;
  out.t = rng.randint(1, schedule.steps() + 1, {z0.size(0)});
  out.eps = rng.randn(z0.sizes(), z0.options());
  const auto z_t = forward_diffuse(schedule, z0, out.t, out.eps);
  out.loss = (out.eps - model(z_t, out.t, context, nullptr)).pow(2).mean();
  return out;
}

}  // namespace midstate
