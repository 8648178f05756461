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

#include "midstate/analysis.hpp"

#include <algorithm>
#include <numeric>

#include "midstate/errors.hpp"
#include "midstate/metrics.hpp"

namespace midstate {

namespace {

std::vector<int64_t> batch_shape(const AnalysisStack& stack, int64_t count) {
  std::vector<int64_t> shape{count};
  shape.insert(shape.end(), stack.latent_shape.begin(), stack.latent_shape.end());
  return shape;
}

torch::Tensor context_for(const AnalysisStack& stack, int64_t count) {
  return stack.null_context.expand({count, stack.null_context.size(1), stack.null_context.size(2)}).contiguous();
}

torch::Tensor decoded_features(const AnalysisStack& stack, const torch::Tensor& latent) {
  return stack.features(stack.decode(latent).clamp(0.0, 1.0)).to(torch::kDouble);
}

}  // namespace

int select_argmin(std::span<const double> distances) {
  if (distances.empty()) throw InputError("no candidate distances");
  size_t best = 0;
  for (size_t i = 1; i < distances.size(); ++i)
    if (distances[i] < distances[best]) best = i;
  return static_cast<int>(best) + 1;
}

StepReport report_from_distances(std::vector<double> distances) {
  StepReport report;
  report.candidates.resize(distances.size());
  std::iota(report.candidates.begin(), report.candidates.end(), 1);
  report.selected = select_argmin(distances);
  report.distances = std::move(distances);
  return report;
}

StepReport select_start_step(std::span<const Image> lq_images, const AnalysisStack& stack, Rng& rng,
                             int min_images) {
  if (static_cast<int>(lq_images.size()) < min_images)
    throw StatisticalError("start-step selection needs at least " + std::to_string(min_images) + " images, got " +
                           std::to_string(lq_images.size()));
  const int levels = stack.sequence.steps() - 1;
  if (levels < 1) throw ConfigError("start-step selection needs at least one noise-add level");
  torch::NoGradGuard guard;

  // Canonical order by content so the result ignores input order.
  std::vector<std::pair<uint64_t, size_t>> keyed;
  for (size_t i = 0; i < lq_images.size(); ++i)
    keyed.emplace_back(fnv1a64(lq_images[i].data.data(), lq_images[i].data.size() * sizeof(float)), i);
  std::sort(keyed.begin(), keyed.end());
  std::vector<Image> ordered;
  for (const auto& [key, i] : keyed) ordered.push_back(lq_images[i]);

  Rng lq_rng = rng.child("lq");
  Rng model_rng = rng.child("model");
  const auto n = static_cast<int64_t>(ordered.size());
  std::vector<std::vector<torch::Tensor>> feats_a(levels), feats_b(levels);
  for (int64_t start = 0; start < n; start += stack.batch) {
    const int64_t count = std::min<int64_t>(stack.batch, n - start);
    const auto images = stack_images(std::span<const Image>(ordered).subspan(start, count));
    const auto z_l = stack.encode(images);
    const auto traj = multistep_sample(stack.origin, stack.schedule, context_for(stack, count), stack.sequence,
                                       z_l.sizes(), model_rng, nullptr, z_l.options());
    for (int k = 1; k <= levels; ++k) {
      const int tau = stack.sequence.taus[k];
      const auto eps = lq_rng.randn(z_l.sizes(), z_l.options());
      feats_a[k - 1].push_back(decoded_features(stack, forward_diffuse(stack.schedule, z_l, tau, eps)));
      feats_b[k - 1].push_back(decoded_features(stack, traj.states[k]));
    }
  }
  std::vector<double> distances;
  StepReport partial;
  for (int k = 1; k <= levels; ++k) {
    partial.lq_features.push_back(torch::cat(feats_a[k - 1]));
    partial.model_features.push_back(torch::cat(feats_b[k - 1]));
    distances.push_back(frechet_distance(partial.lq_features.back(), partial.model_features.back()));
  }
  auto report = report_from_distances(std::move(distances));
  report.timesteps.assign(stack.sequence.taus.begin() + 1, stack.sequence.taus.end());
  report.images = static_cast<int>(n);
  report.lq_features = std::move(partial.lq_features);
  report.model_features = std::move(partial.model_features);
  return report;
}

SamplerStats step_statistics(const std::vector<torch::Tensor>& steps, const IdentityFn& identity) {
  SamplerStats stats;
  stats.steps = static_cast<int>(steps.size());
  if (steps.size() < 2) throw InputError("pairwise step statistics need at least two steps");
  const auto count = steps.front().size(0);
  for (int64_t i = 0; i < count; ++i) {
    std::vector<Image> imgs;
    for (const auto& s : steps) imgs.push_back(from_tensor(s[i]));
    double ss = 0, hd = 0, id = 0;
    int pairs = 0;
    for (size_t a = 0; a < imgs.size(); ++a)
      for (size_t b = a + 1; b < imgs.size(); ++b) {
        ss += ssim(imgs[a], imgs[b]);
        hd += hist_distance(imgs[a], imgs[b]);
        if (identity) id += identity(imgs[a], imgs[b]);
        ++pairs;
      }
    stats.ssim += ss / pairs;
    stats.hdist += hd / pairs;
    stats.identity += id / pairs;
  }
  stats.ssim /= static_cast<double>(count);
  stats.hdist /= static_cast<double>(count);
  stats.identity /= static_cast<double>(count);
  return stats;
}

SemanticReport semantic_consistency_report(const StepSampler& consistency, const StepSampler& reference,
                                           const IdentityFn& identity, int n_seeds, const Rng& rng, int batch) {
  if (n_seeds < 1) throw ConfigError("semantic report needs at least one seed");
  SemanticReport report;
  report.n_seeds = n_seeds;
  report.seed = rng.seed();
  const Rng base = rng.child("semantic");
  auto run = [&](const StepSampler& sampler) {
    Rng r = base.clone();
    SamplerStats total;
    for (int start = 0; start < n_seeds; start += batch) {
      const int count = std::min(batch, n_seeds - start);
      const auto stats = step_statistics(sampler(count, r), identity);
      total.ssim += stats.ssim * count;
      total.hdist += stats.hdist * count;
      total.identity += stats.identity * count;
      total.steps = stats.steps;
    }
    total.ssim /= n_seeds;
    total.hdist /= n_seeds;
    total.identity /= n_seeds;
    return total;
  };
  torch::NoGradGuard guard;
  report.consistency = run(consistency);
  report.reference = run(reference);
  return report;
}

std::vector<GapRow> x0_gap_report(const EpsilonFn& teacher, const AnalysisStack& stack, int step_count,
                                  std::vector<int> t_list, int n_seeds, const Rng& rng) {
  if (n_seeds < 1) throw ConfigError("x0 gap report needs at least one seed");
  const auto grid = ddpm_grid(stack.schedule.steps(), step_count);
  std::sort(t_list.begin(), t_list.end(), std::greater<>());
  t_list.erase(std::unique(t_list.begin(), t_list.end()), t_list.end());
  std::vector<size_t> index;
  for (int t : t_list) {
    const auto it = std::find(grid.begin(), grid.end(), t);
    if (it == grid.end()) throw ConfigError("timestep " + std::to_string(t) + " is not on the DDPM grid");
    index.push_back(static_cast<size_t>(it - grid.begin()));
  }
  torch::NoGradGuard guard;
  std::vector<GapRow> rows;
  for (int t : t_list) rows.push_back({t, 0.0});
  Rng r = rng.child("x0-gap");
  for (int start = 0; start < n_seeds; start += stack.batch) {
    const int count = std::min(stack.batch, n_seeds - start);
    const auto opts = stack.null_context.options();
    const auto traj = ddpm_reference_sample(teacher, stack.schedule, context_for(stack, count), step_count,
                                            batch_shape(stack, count), r, opts);
    const auto final_images = unstack_images(stack.decode(traj.sample));
    for (size_t j = 0; j < t_list.size(); ++j) {
      const auto est = unstack_images(stack.decode(traj.x0_hats[index[j]]));
      for (int i = 0; i < count; ++i) rows[j].psnr += psnr(est[i], final_images[i]);
    }
  }
  for (auto& row : rows) row.psnr /= n_seeds;
  return rows;
}

StepSampler consistency_step_sampler(const AnalysisStack& stack) {
  return [&stack](int64_t count, Rng& rng) {
    const auto opts = stack.null_context.options();
    const auto traj = multistep_sample(stack.origin, stack.schedule, context_for(stack, count), stack.sequence,
                                       batch_shape(stack, count), rng, nullptr, opts);
    std::vector<torch::Tensor> out;
    for (const auto& z0 : traj.origins) out.push_back(stack.decode(z0).clamp(0.0, 1.0));
    return out;
  };
}

StepSampler ddpm_step_sampler(const EpsilonFn& teacher, const AnalysisStack& stack, int step_count) {
  const auto grid = ddpm_grid(stack.schedule.steps(), step_count);
  std::vector<size_t> index;
  for (int t : stack.sequence.taus) {
    const auto it = std::find(grid.begin(), grid.end(), t);
    if (it == grid.end()) throw ConfigError("sequence timestep " + std::to_string(t) + " is not on the DDPM grid");
    index.push_back(static_cast<size_t>(it - grid.begin()));
  }
  return [teacher, &stack, step_count, index](int64_t count, Rng& rng) {
    const auto opts = stack.null_context.options();
    const auto traj = ddpm_reference_sample(teacher, stack.schedule, context_for(stack, count), step_count,
                                            batch_shape(stack, count), rng, opts);
    std::vector<torch::Tensor> out;
    for (size_t i : index) out.push_back(stack.decode(traj.x0_hats[i]).clamp(0.0, 1.0));
    return out;
  };
}

}  // namespace midstate
