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

#include "midstate/schedule.hpp"

#include <torch/torch.h>

#include <cmath>
#include <string>

#include "midstate/errors.hpp"

namespace midstate {

NoiseSchedule::NoiseSchedule(std::vector<double> alpha_bar) : alpha_bar_(std::move(alpha_bar)) {
  alpha_.reserve(alpha_bar_.size());
  sigma_.reserve(alpha_bar_.size());
  for (double ab : alpha_bar_) {
    alpha_.push_back(std::sqrt(ab));
    sigma_.push_back(std::sqrt(1.0 - ab));
  }
}

NoiseSchedule NoiseSchedule::linear(int steps, double beta_start, double beta_end) {
  if (steps < 1) throw ConfigError("schedule needs at least one step");
  if (!(beta_start > 0 && beta_end < 1 && beta_start <= beta_end)) throw ConfigError("invalid beta range");
  std::vector<double> ab(steps + 1);
  ab[0] = 1.0;
  for (int t = 1; t <= steps; ++t) {
    const double beta = steps == 1 ? beta_start : beta_start + (beta_end - beta_start) * (t - 1) / (steps - 1);
    ab[t] = ab[t - 1] * (1.0 - beta);
  }
  return NoiseSchedule(std::move(ab));
}

NoiseSchedule NoiseSchedule::from_table(std::vector<double> alpha_bar) {
  if (alpha_bar.size() < 2 || alpha_bar[0] != 1.0) throw ConfigError("alpha_bar table must start at 1");
  for (size_t i = 1; i < alpha_bar.size(); ++i)
    if (!(alpha_bar[i] < alpha_bar[i - 1] && alpha_bar[i] >= 0.0))
      throw ConfigError("alpha_bar table must be strictly decreasing and non-negative");
  return NoiseSchedule(std::move(alpha_bar));
}

void NoiseSchedule::check(int t) const {
  if (t < 0 || t > steps())
    throw ScheduleError("timestep " + std::to_string(t) + " outside [0, " + std::to_string(steps()) + "]");
}

void NoiseSchedule::check(const torch::Tensor& t) const {
  if (t.numel() == 0) return;
  const auto lo = t.min().item<int64_t>(), hi = t.max().item<int64_t>();
  if (lo < 0 || hi > steps())
    throw ScheduleError("timestep tensor outside [0, " + std::to_string(steps()) + "]");
}

double NoiseSchedule::alpha_bar(int t) const {
  check(t);
  return alpha_bar_[t];
}

double NoiseSchedule::alpha(int t) const {
  check(t);
  return alpha_[t];
}

double NoiseSchedule::sigma(int t) const {
  check(t);
  return sigma_[t];
}

torch::Tensor NoiseSchedule::gather(const std::vector<double>& values, const torch::Tensor& t,
                                    const torch::Tensor& like) const {
  check(t);
  auto table = torch::tensor(values, torch::kDouble);
  auto picked = table.index_select(0, t.to(torch::kLong).flatten()).to(like.scalar_type());
  std::vector<int64_t> shape(like.dim(), 1);
  shape[0] = picked.size(0);
  return picked.view(shape);
}

torch::Tensor NoiseSchedule::alpha(const torch::Tensor& t, const torch::Tensor& like) const {
  return gather(alpha_, t, like);
}

torch::Tensor NoiseSchedule::sigma(const torch::Tensor& t, const torch::Tensor& like) const {
  return gather(sigma_, t, like);
}

torch::Tensor forward_diffuse(const NoiseSchedule& schedule, const torch::Tensor& z0, int t, const torch::Tensor& eps) {
  if (!z0.sizes().equals(eps.sizes())) throw InputError("forward_diffuse: eps shape differs from z0");
  return schedule.alpha(t) * z0 + schedule.sigma(t) * eps;
}

torch::Tensor forward_diffuse(const NoiseSchedule& schedule, const torch::Tensor& z0, const torch::Tensor& t,
                              const torch::Tensor& eps) {
  if (!z0.sizes().equals(eps.sizes())) throw InputError("forward_diffuse: eps shape differs from z0");
  return schedule.alpha(t, z0) * z0 + schedule.sigma(t, z0) * eps;
}

torch::Tensor predict_x0(const NoiseSchedule& schedule, const torch::Tensor& x_t, int t, const torch::Tensor& eps_hat) {
  if (schedule.alpha_bar(t) == 0.0) throw SingularityError("predict_x0 at a timestep with alpha_bar == 0");
  return (x_t - schedule.sigma(t) * eps_hat) / schedule.alpha(t);
}

torch::Tensor predict_x0(const NoiseSchedule& schedule, const torch::Tensor& x_t, const torch::Tensor& t,
                         const torch::Tensor& eps_hat) {
  auto alpha = schedule.alpha(t, x_t);
  if ((alpha == 0).any().item<bool>()) throw SingularityError("predict_x0 at a timestep with alpha_bar == 0");
  return (x_t - schedule.sigma(t, x_t) * eps_hat) / alpha;
}

torch::Tensor ode_solver_step(const NoiseSchedule& schedule, const torch::Tensor& z_t, int t, int s,
                              const torch::Tensor& eps_hat) {
  schedule.check(t);
  schedule.check(s);
  if (s > t) throw OrderingError("ode_solver_step requires s <= t");
  if (s == t) return z_t;
  const auto x0 = predict_x0(schedule, z_t, t, eps_hat);
  if (s == 0) return x0;
  return schedule.alpha(s) * x0 + schedule.sigma(s) * eps_hat;
}

torch::Tensor ode_solver_step(const NoiseSchedule& schedule, const torch::Tensor& z_t, const torch::Tensor& t,
                              const torch::Tensor& s, const torch::Tensor& eps_hat) {
  if ((s > t).any().item<bool>()) throw OrderingError("ode_solver_step requires s <= t");
  const auto x0 = predict_x0(schedule, z_t, t, eps_hat);
  auto out = schedule.alpha(s, z_t) * x0 + schedule.sigma(s, z_t) * eps_hat;
  // Endpoints are returned exactly rather than through the round trip.
  std::vector<int64_t> shape(z_t.dim(), 1);
  shape[0] = -1;
  out = torch::where((s == 0).view(shape), x0, out);
  return torch::where((s == t).view(shape), z_t, out);
}

}  // namespace midstate
