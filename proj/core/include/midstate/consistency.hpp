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

#include "midstate/diffusion.hpp"

namespace midstate {

/// Origin predictor f(z, tau, context, residuals) -> z0.
using OriginFn = std::function<torch::Tensor(const torch::Tensor& z, const torch::Tensor& tau,
                                             const torch::Tensor& context, const SpatialResiduals* residuals)>;

struct BoundaryParams {
  double sigma_data = 0.5;
  double timestep_scaling = 10.0;
  int min_timestep = 0;
};

struct BoundaryCoefficients {
  double c_skip;
  double c_out;
};

/// c_skip = sd^2 / ((k dt)^2 + sd^2), c_out = k dt / sqrt((k dt)^2 + sd^2),
/// dt = tau - min_timestep. Exactly (1, 0) at the minimum timestep.
BoundaryCoefficients boundary_coefficients(int tau, const BoundaryParams& params = {});

/// f(z, tau) = c_skip z + c_out x0_hat(z, tau, eps(z, tau)). At the minimum
/// timestep the input is returned unchanged.
class ConsistencyFunction {
 public:
  ConsistencyFunction(EpsilonFn eps, NoiseSchedule schedule, BoundaryParams params = {});

  torch::Tensor operator()(const torch::Tensor& z, const torch::Tensor& tau, const torch::Tensor& context,
                           const SpatialResiduals* residuals = nullptr) const;
  OriginFn as_origin_fn() const;

  const NoiseSchedule& schedule() const { return schedule_; }
  const BoundaryParams& params() const { return params_; }

 private:
  EpsilonFn eps_;
  NoiseSchedule schedule_;
  BoundaryParams params_;
};

/// taus[0] is the pure-noise step; taus[1..] are the noise-add levels
/// tau_1 > ... > tau_{N-1}. N = taus.size().
struct TimestepSequence {
  std::vector<int> taus;

  int steps() const { return static_cast<int>(taus.size()); }
  void validate(const NoiseSchedule& schedule) const;

  /// N points whose alpha_bar values are spaced uniformly on [0, 1) and
  /// snapped to multiples of `grid_stride`; taus[0] = T.
  static TimestepSequence uniform_alpha_bar(const NoiseSchedule& schedule, int steps, int grid_stride);
  friend bool operator==(const TimestepSequence&, const TimestepSequence&) = default;
};

struct Trajectory {
  std::vector<int> taus;
  std::vector<torch::Tensor> states;   // noisy input at each evaluated step
  std::vector<torch::Tensor> origins;  // f output at each evaluated step
};

/// Multistep sampling from pure noise: N origin evaluations.
Trajectory multistep_sample(const OriginFn& f, const NoiseSchedule& schedule, const torch::Tensor& context,
                            const TimestepSequence& seq,
                            at::IntArrayRef latent_shape, Rng& rng, const SpatialResiduals* residuals = nullptr,
                            const torch::TensorOptions& options = torch::kFloat);

/// Treats `z0` as the origin estimate before noise-add level `first_level`
/// (1-based into the noise-add levels) and runs the remaining levels.
Trajectory multistep_continue(const OriginFn& f, const NoiseSchedule& schedule, torch::Tensor z0,
                              const torch::Tensor& context,
                              const TimestepSequence& seq, int first_level, Rng& rng,
                              const SpatialResiduals* residuals = nullptr);

/// Timesteps {0, stride, 2 stride, ..., T}; requires T % stride == 0.
std::vector<int> distillation_grid(const NoiseSchedule& schedule, int stride);
void check_adjacent(const torch::Tensor& t, const torch::Tensor& s, int stride, int max_timestep);

/// Squared-L2 consistency distillation loss for explicit (t, s, eps):
/// d(f_student(z_t, t), f_target(solver(z_t, t -> s, eps_teacher), s)).
/// Teacher and target run without gradients.
torch::Tensor consistency_distillation_loss(const EpsilonFn& teacher, const OriginFn& student,
                                            const OriginFn& target, const NoiseSchedule& schedule,
                                            const torch::Tensor& z0, const torch::Tensor& context,
                                            const torch::Tensor& t, const torch::Tensor& s, const torch::Tensor& eps);

struct DistillConfig {
  int grid_stride = 20;
  double ema_decay = 0.95;
  double learning_rate = 3e-4;
  BoundaryParams boundary;
};

/// Owns the student optimizer and the EMA target. The teacher is frozen.
class ConsistencyDistiller {
 public:
  ConsistencyDistiller(UNet teacher, UNet student, UNet target, NoiseSchedule schedule, DistillConfig config);

  /// Samples adjacent grid pairs and noise, takes one optimizer step, then
  /// updates the EMA target. Returns the pre-step loss.
  double step(const torch::Tensor& z0, const torch::Tensor& context, Rng& rng);
  double step(const torch::Tensor& z0, const torch::Tensor& context, const torch::Tensor& t,
              const torch::Tensor& s, const torch::Tensor& eps);

  /// Mean || f(z_t, t) - f(z_s, s) || over adjacent pairs, with z_s taken from
  /// the teacher solver on the same trajectory.
  double self_consistency_error(const torch::Tensor& z0, const torch::Tensor& context, Rng& rng);

  UNet student() const { return student_; }
  UNet target() const { return target_; }
  const DistillConfig& config() const { return config_; }

 private:
  void update_target();

  UNet teacher_, student_, target_;
  NoiseSchedule schedule_;
  DistillConfig config_;
  std::unique_ptr<torch::optim::Adam> optimizer_;
};

/// Descending timesteps round(k T / count), k = count..1.
std::vector<int> ddpm_grid(int max_timestep, int step_count);

struct DdpmTrajectory {
  std::vector<int> timesteps;
  std::vector<torch::Tensor> states;
  std::vector<torch::Tensor> x0_hats;
  torch::Tensor sample;
};

/// Ancestral reverse chain over ddpm_grid; every step also records x0_hat.
DdpmTrajectory ddpm_reference_sample(const EpsilonFn& teacher, const NoiseSchedule& schedule,
                                     const torch::Tensor& context, int step_count, at::IntArrayRef latent_shape,
                                     Rng& rng, const torch::TensorOptions& options = torch::kFloat);

}  // namespace midstate
