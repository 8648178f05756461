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
#include <span>
#include <vector>

#include "midstate/consistency.hpp"
#include "midstate/image.hpp"

namespace midstate {

using DecodeFn = std::function<torch::Tensor(const torch::Tensor& latent)>;
using EncodeFn = std::function<torch::Tensor(const torch::Tensor& image)>;
/// Images [B, 3, H, W] -> features [B, m].
using FeatureFn = std::function<torch::Tensor(const torch::Tensor& images)>;

/// Frozen pieces shared by the analysis procedures.
struct AnalysisStack {
  NoiseSchedule schedule = NoiseSchedule::linear();
  TimestepSequence sequence;
  OriginFn origin;
  EncodeFn encode;
  DecodeFn decode;
  FeatureFn features;
  /// Unconditional context for one sample, [1, K, d].
  torch::Tensor null_context;
  /// Latent shape of one sample, [C, h, w].
  std::vector<int64_t> latent_shape;
  int batch = 50;
};

struct StepReport {
  std::vector<int> candidates;  // 1-based noise-add levels; 1 = 2nd-step insertion
  std::vector<int> timesteps;
  std::vector<double> distances;
  int selected = 0;
  int images = 0;
  /// Features behind each distance: LQ side and model side, one per candidate.
  std::vector<torch::Tensor> lq_features, model_features;
};

/// 1-based argmin; ties resolve to the earliest candidate.
int select_argmin(std::span<const double> distances);
StepReport report_from_distances(std::vector<double> distances);

/// For each noise-add level k, compares features of decoded LQ latents noised
/// to tau_k against decoded model intermediates (unconditional origin before
/// level k, noised to tau_k). Input order does not matter.
StepReport select_start_step(std::span<const Image> lq_images, const AnalysisStack& stack, Rng& rng,
                             int min_images = 100);

/// Per-step decoded images for `count` samples: one [count, 3, H, W] tensor
/// per step.
using StepSampler = std::function<std::vector<torch::Tensor>(int64_t count, Rng& rng)>;
using IdentityFn = std::function<double(const Image& a, const Image& b)>;

struct SamplerStats {
  double ssim = 0;
  double hdist = 0;
  double identity = 0;
  int steps = 0;
};

struct SemanticReport {
  int n_seeds = 0;
  uint64_t seed = 0;
  SamplerStats consistency, reference;
  double ssim_diff() const { return consistency.ssim - reference.ssim; }
  double hdist_diff() const { return consistency.hdist - reference.hdist; }
  double identity_diff() const { return consistency.identity - reference.identity; }
};

/// Mean pairwise SSIM, HDist and identity-proxy distance across the steps of
/// each run. Both samplers get the same random stream.
SemanticReport semantic_consistency_report(const StepSampler& consistency, const StepSampler& reference,
                                           const IdentityFn& identity, int n_seeds, const Rng& rng,
                                           int batch = 50);
SamplerStats step_statistics(const std::vector<torch::Tensor>& steps, const IdentityFn& identity);

struct GapRow {
  int t = 0;
  double psnr = 0;
};

/// For each t (descending), mean PSNR between the decoded x0 estimate at t and
/// the decoded final sample of the same DDPM chain.
std::vector<GapRow> x0_gap_report(const EpsilonFn& teacher, const AnalysisStack& stack, int step_count,
                                  std::vector<int> t_list, int n_seeds, const Rng& rng);

/// Per-step images for a consistency run from pure noise.
StepSampler consistency_step_sampler(const AnalysisStack& stack);
/// Per-step x0 estimates of the DDPM chain at the sequence's timesteps.
StepSampler ddpm_step_sampler(const EpsilonFn& teacher, const AnalysisStack& stack, int step_count);

}  // namespace midstate
