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

#include "midstate/consistency.hpp"

#include <cmath>
#include <string>

#include "midstate/errors.hpp"

namespace midstate {

BoundaryCoefficients boundary_coefficients(int tau, const BoundaryParams& params) {
  const double dt = params.timestep_scaling * (tau - params.min_timestep);
  const double sd2 = params.sigma_data * params.sigma_data;
  return {sd2 / (dt * dt + sd2), dt / std::sqrt(dt * dt + sd2)};
}

ConsistencyFunction::ConsistencyFunction(EpsilonFn eps, NoiseSchedule schedule, BoundaryParams params)
    : eps_(std::move(eps)), schedule_(std::move(schedule)), params_(params) {}

torch::Tensor ConsistencyFunction::operator()(const torch::Tensor& z, const torch::Tensor& tau,
                                              const torch::Tensor& context, const SpatialResiduals* residuals) const {
  const auto x0 = predict_x0(schedule_, z, tau, eps_(z, tau, context, residuals));
  const double k = params_.timestep_scaling, sd2 = params_.sigma_data * params_.sigma_data;
  std::vector<int64_t> shape(z.dim(), 1);
  shape[0] = -1;
  auto dt = (tau.to(z.scalar_type()) - params_.min_timestep).mul(k).view(shape);
  auto denom = dt * dt + sd2;
  auto out = (sd2 / denom) * z + (dt / denom.sqrt()) * x0;
  return torch::where((tau == params_.min_timestep).view(shape), z, out);
}

OriginFn ConsistencyFunction::as_origin_fn() const {
  return [self = *this](const torch::Tensor& z, const torch::Tensor& tau, const torch::Tensor& context,
                        const SpatialResiduals* residuals) { return self(z, tau, context, residuals); };
}

void TimestepSequence::validate(const NoiseSchedule& schedule) const {
  if (taus.empty()) throw ConfigError("timestep sequence is empty");
  for (size_t i = 0; i < taus.size(); ++i) {
    if (taus[i] < 1 || taus[i] > schedule.steps())
      throw ConfigError("timestep " + std::to_string(taus[i]) + " outside [1, T]");
    if (i > 0 && taus[i] >= taus[i - 1]) throw ConfigError("timestep sequence must be strictly decreasing");
  }
}

TimestepSequence TimestepSequence::uniform_alpha_bar(const NoiseSchedule& schedule, int steps, int grid_stride) {
  if (steps < 1) throw ConfigError("sampler needs at least one step");
  const auto grid = distillation_grid(schedule, grid_stride);
  TimestepSequence seq;
  seq.taus.push_back(schedule.steps());
  for (int k = 1; k < steps; ++k) {
    const double target = static_cast<double>(k) / steps;
    int best = grid[1];
    for (size_t i = 1; i < grid.size(); ++i)
      if (std::abs(schedule.alpha_bar(grid[i]) - target) < std::abs(schedule.alpha_bar(best) - target)) best = grid[i];
    if (best >= seq.taus.back()) best = seq.taus.back() - grid_stride;
    seq.taus.push_back(best);
  }
  seq.validate(schedule);
  return seq;
}

namespace {

torch::Tensor full_tau(int64_t batch, int tau) { return torch::full({batch}, tau, torch::kLong); }

void run_levels(Trajectory& traj, const OriginFn& f, const NoiseSchedule& schedule, torch::Tensor z0,
                const torch::Tensor& context, const TimestepSequence& seq, size_t first, Rng& rng,
                const SpatialResiduals* residuals) {
  for (size_t n = first; n < seq.taus.size(); ++n) {
    const int tau = seq.taus[n];
    auto eps = rng.randn(z0.sizes(), z0.options());
    auto z = forward_diffuse(schedule, z0, tau, eps);
    z0 = f(z, full_tau(z.size(0), tau), context, residuals);
    traj.taus.push_back(tau);
    traj.states.push_back(z);
    traj.origins.push_back(z0);
  }
}

}  // namespace

Trajectory multistep_sample(const OriginFn& f, const NoiseSchedule& schedule, const torch::Tensor& context,
                            const TimestepSequence& seq, at::IntArrayRef latent_shape, Rng& rng,
                            const SpatialResiduals* residuals, const torch::TensorOptions& options) {
  seq.validate(schedule);
  Trajectory traj;
  const int tau0 = seq.taus[0];
  auto z = schedule.sigma(tau0) * rng.randn(latent_shape, options);
  auto z0 = f(z, full_tau(z.size(0), tau0), context, residuals);
  traj.taus.push_back(tau0);
  traj.states.push_back(z);
  traj.origins.push_back(z0);
  run_levels(traj, f, schedule, z0, context, seq, 1, rng, residuals);
  return traj;
}

Trajectory multistep_continue(const OriginFn& f, const NoiseSchedule& schedule, torch::Tensor z0,
                              const torch::Tensor& context, const TimestepSequence& seq, int first_level, Rng& rng,
                              const SpatialResiduals* residuals) {
  seq.validate(schedule);
  if (first_level < 1 || first_level >= seq.steps())
    throw ConfigError("noise-add level " + std::to_string(first_level) + " outside [1, " +
                      std::to_string(seq.steps() - 1) + "]");
  Trajectory traj;
  run_levels(traj, f, schedule, std::move(z0), context, seq, static_cast<size_t>(first_level), rng, residuals);
  return traj;
}

std::vector<int> distillation_grid(const NoiseSchedule& schedule, int stride) {
  if (stride < 1 || schedule.steps() % stride != 0)
    throw ConfigError("grid stride must divide the schedule length");
  std::vector<int> grid;
  for (int t = 0; t <= schedule.steps(); t += stride) grid.push_back(t);
  return grid;
}

void check_adjacent(const torch::Tensor& t, const torch::Tensor& s, int stride, int max_timestep) {
  const bool ok = (t - s == stride).all().item<bool>() && (t.remainder(stride) == 0).all().item<bool>() &&
                  (s >= 0).all().item<bool>() && (t <= max_timestep).all().item<bool>();
  if (!ok) throw ScheduleError("distillation pairs must be adjacent points of the stride-" + std::to_string(stride) + " grid");
}

torch::Tensor consistency_distillation_loss(const EpsilonFn& teacher, const OriginFn& student,
                                            const OriginFn& target, const NoiseSchedule& schedule,
                                            const torch::Tensor& z0, const torch::Tensor& context,
                                            const torch::Tensor& t, const torch::Tensor& s, const torch::Tensor& eps) {
  const auto z_t = forward_diffuse(schedule, z0, t, eps);
  torch::Tensor anchor;
  {
    torch::NoGradGuard guard;
    const auto eps_hat = teacher(z_t, t, context, nullptr);
    const auto z_s = ode_solver_step(schedule, z_t, t, s, eps_hat);
    anchor = target(z_s, s, context, nullptr);
  }
  return (student(z_t, t, context, nullptr) - anchor).pow(2).mean();
}

ConsistencyDistiller::ConsistencyDistiller(UNet teacher, UNet student, UNet target, NoiseSchedule schedule,
                                           DistillConfig config)
    : teacher_(std::move(teacher)),
      student_(std::move(student)),
      target_(std::move(target)),
      schedule_(std::move(schedule)),
      config_(config) {
  distillation_grid(schedule_, config_.grid_stride);
  set_requires_grad(*teacher_, false);
  set_requires_grad(*target_, false);
  set_requires_grad(*student_, true);
  optimizer_ = std::make_unique<torch::optim::Adam>(student_->parameters(),
                                                    torch::optim::AdamOptions(config_.learning_rate));
}

double ConsistencyDistiller::step(const torch::Tensor& z0, const torch::Tensor& context, Rng& rng) {
  const int cells = schedule_.steps() / config_.grid_stride;
  auto t = rng.randint(1, cells + 1, {z0.size(0)}) * config_.grid_stride;
  auto s = t - config_.grid_stride;
  auto eps = rng.randn(z0.sizes(), z0.options());
  return step(z0, context, t, s, eps);
}

double ConsistencyDistiller::step(const torch::Tensor& z0, const torch::Tensor& context, const torch::Tensor& t,
                                  const torch::Tensor& s, const torch::Tensor& eps) {
  check_adjacent(t, s, config_.grid_stride, schedule_.steps());
  const ConsistencyFunction student(epsilon_fn(student_), schedule_, config_.boundary);
  const ConsistencyFunction target(epsilon_fn(target_), schedule_, config_.boundary);
  optimizer_->zero_grad();
  auto loss = consistency_distillation_loss(epsilon_fn(teacher_), student.as_origin_fn(), target.as_origin_fn(),
                                            schedule_, z0, context, t, s, eps);
  loss.backward();
  optimizer_->step();
  update_target();
  return loss.item<double>();
}

void ConsistencyDistiller::update_target() {
  torch::NoGradGuard guard;
  const double mu = config_.ema_decay;
  auto src = student_->parameters(true);
  auto dst = target_->parameters(true);
  for (size_t i = 0; i < dst.size(); ++i) dst[i].mul_(mu).add_(src[i], 1.0 - mu);
}

double ConsistencyDistiller::self_consistency_error(const torch::Tensor& z0, const torch::Tensor& context, Rng& rng) {
  torch::NoGradGuard guard;
  const int cells = schedule_.steps() / config_.grid_stride;
  auto t = rng.randint(1, cells + 1, {z0.size(0)}) * config_.grid_stride;
  auto s = t - config_.grid_stride;
  auto eps = rng.randn(z0.sizes(), z0.options());
  const ConsistencyFunction f(epsilon_fn(student_), schedule_, config_.boundary);
  const auto z_t = forward_diffuse(schedule_, z0, t, eps);
  const auto z_s = ode_solver_step(schedule_, z_t, t, s, teacher_->forward(z_t, t, context, nullptr));
  const auto diff = f(z_t, t, context) - f(z_s, s, context);
  return diff.flatten(1).norm(2, 1).mean().item<double>();
}

std::vector<int> ddpm_grid(int max_timestep, int step_count) {
  if (step_count < 1 || step_count > max_timestep) throw ConfigError("DDPM step count outside [1, T]");
  std::vector<int> grid;
  for (int k = step_count; k >= 1; --k) {
    const int t = static_cast<int>(std::lround(static_cast<double>(k) * max_timestep / step_count));
    if (grid.empty() || t < grid.back()) grid.push_back(t);
  }
  return grid;
}

DdpmTrajectory ddpm_reference_sample(const EpsilonFn& teacher, const NoiseSchedule& schedule,
                                     const torch::Tensor& context, int step_count, at::IntArrayRef latent_shape,
                                     Rng& rng, const torch::TensorOptions& options) {
  DdpmTrajectory out;
  out.timesteps = ddpm_grid(schedule.steps(), step_count);
  auto x = rng.randn(latent_shape, options);
  for (size_t k = 0; k < out.timesteps.size(); ++k) {
    const int t = out.timesteps[k];
    const int s = k + 1 < out.timesteps.size() ? out.timesteps[k + 1] : 0;
    const auto eps_hat = teacher(x, full_tau(x.size(0), t), context, nullptr);
    const auto x0 = predict_x0(schedule, x, t, eps_hat);
    out.states.push_back(x);
    out.x0_hats.push_back(x0);
    if (s == 0) {
      x = x0;
      continue;
    }
    // Posterior q(x_s | x_t, x0) for the strided chain.
    const double ab_t = schedule.alpha_bar(t), ab_s = schedule.alpha_bar(s);
    const double ratio = ab_t / ab_s;
    const double coef_x0 = std::sqrt(ab_s) * (1.0 - ratio) / (1.0 - ab_t);
    const double coef_xt = std::sqrt(ratio) * (1.0 - ab_s) / (1.0 - ab_t);
    const double var = (1.0 - ab_s) / (1.0 - ab_t) * (1.0 - ratio);
    x = coef_x0 * x0 + coef_xt * x + std::sqrt(var) * rng.randn(latent_shape, options);
  }
  out.sample = x;
  return out;
}

}  // namespace midstate
