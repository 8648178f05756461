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

#include <torch/types.h>

#include <span>
#include <vector>

namespace midstate {

/// Variance-preserving discrete schedule: alpha_bar[0] = 1, strictly
/// decreasing to alpha_bar[T], alpha(t) = sqrt(alpha_bar) and
/// sigma(t) = sqrt(1 - alpha_bar).
class NoiseSchedule {
 public:
  /// Linear betas over t = 1..T, accumulated by product.
  static NoiseSchedule linear(int steps = 1000, double beta_start = 1e-4, double beta_end = 2e-2);
  /// Validates monotonicity and the endpoint.
  static NoiseSchedule from_table(std::vector<double> alpha_bar);

  int steps() const { return static_cast<int>(alpha_bar_.size()) - 1; }
  double alpha_bar(int t) const;
  double alpha(int t) const;
  double sigma(int t) const;
  std::span<const double> table() const { return alpha_bar_; }

  /// Per-sample coefficients gathered for an int64 timestep tensor of shape
  /// [B]; returned with shape [B, 1, ..., 1] matching `like`.
  torch::Tensor alpha(const torch::Tensor& t, const torch::Tensor& like) const;
  torch::Tensor sigma(const torch::Tensor& t, const torch::Tensor& like) const;

  void check(int t) const;
  void check(const torch::Tensor& t) const;

  friend bool operator==(const NoiseSchedule&, const NoiseSchedule&) = default;

 private:
  explicit NoiseSchedule(std::vector<double> alpha_bar);
  torch::Tensor gather(const std::vector<double>& values, const torch::Tensor& t, const torch::Tensor& like) const;

  std::vector<double> alpha_bar_;
  std::vector<double> alpha_;
  std::vector<double> sigma_;
};

/// sqrt(ab_t) z0 + sqrt(1 - ab_t) eps.
torch::Tensor forward_diffuse(const NoiseSchedule& schedule, const torch::Tensor& z0, int t, const torch::Tensor& eps);
torch::Tensor forward_diffuse(const NoiseSchedule& schedule, const torch::Tensor& z0, const torch::Tensor& t,
                              const torch::Tensor& eps);

/// (x_t - sqrt(1 - ab_t) eps_hat) / sqrt(ab_t); throws SingularityError when ab_t == 0.
torch::Tensor predict_x0(const NoiseSchedule& schedule, const torch::Tensor& x_t, int t, const torch::Tensor& eps_hat);
torch::Tensor predict_x0(const NoiseSchedule& schedule, const torch::Tensor& x_t, const torch::Tensor& t,
                         const torch::Tensor& eps_hat);

/// Deterministic jump from t to s <= t keeping eps_hat fixed. s == t returns
/// z_t; s > t throws OrderingError.
torch::Tensor ode_solver_step(const NoiseSchedule& schedule, const torch::Tensor& z_t, int t, int s,
                              const torch::Tensor& eps_hat);
torch::Tensor ode_solver_step(const NoiseSchedule& schedule, const torch::Tensor& z_t, const torch::Tensor& t,
                              const torch::Tensor& s, const torch::Tensor& eps_hat);

}  // namespace midstate
