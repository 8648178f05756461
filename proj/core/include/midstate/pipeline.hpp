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

#include <nlohmann/json.hpp>
#include <torch/torch.h>

#include <filesystem>
#include <functional>
#include <memory>
#include <string>

#include "midstate/analysis.hpp"
#include "midstate/config.hpp"
#include "midstate/corpus.hpp"
#include "midstate/report.hpp"
#include "midstate/restorer.hpp"

namespace midstate {

using Log = std::function<void(const std::string&)>;

/// Frozen networks shared by every stage after teacher training. The
/// consistency backbone is present once distillation ran.
struct ModelStack {
  int resolution = 64;
  NoiseSchedule schedule = NoiseSchedule::linear();
  AutoencoderConfig ae_config;
  ClassifierConfig classifier_config;
  UNetConfig unet_config;
  Autoencoder autoencoder{nullptr};
  AttributeClassifier visual_features{nullptr};
  AttributeClassifier perceptual_features{nullptr};
  AttributeEmbedder embedder{nullptr};
  UNet teacher{nullptr};
  UNet consistency{nullptr};
  TimestepSequence sequence;
  BoundaryParams boundary;
  int grid_stride = 20;
  nlohmann::json lineage = nlohmann::json::object();

  bool distilled() const { return !consistency.is_empty(); }
  torch::Tensor attribute_context(const std::vector<FaceParams>& params);
};

ModelStack make_stack(const RunConfig& config);
TimestepSequence sequence_from(const RunConfig& config, const NoiseSchedule& schedule);

void save_stack(const std::filesystem::path& path, const ModelStack& stack);
ModelStack load_stack(const std::filesystem::path& path);

/// Batch of images as a [B, 3, H, W] float tensor.
torch::Tensor batch_tensor(const std::vector<Image>& images, const std::vector<int64_t>& index);

/// Pixel L1 on a mix of HQ and LQ images, then latent scale = 1 / std.
void train_autoencoder(ModelStack& stack, const PairSet& data, const RunConfig& config, Rng& rng, const Log& log);
/// Attribute regression on HQ and LQ images.
void train_classifier(AttributeClassifier& classifier, const PairSet& data, const StageBudget& budget, Rng& rng,
                      const Log& log, const std::string& name);

struct TeacherStats {
  double validation_before = 0;
  double validation_after = 0;
};
/// Noise-prediction training with attribute tokens; a `cond_dropout`
/// fraction of rows sees the null context.
TeacherStats train_teacher(ModelStack& stack, const PairSet& data, const RunConfig& config, Rng& rng,
                           const Log& log);

/// All base stages: autoencoder, both classifiers, teacher.
ModelStack train_base(const PairSet& data, const RunConfig& config, const Log& log);

struct DistillStats {
  double consistency_before = 0;
  double consistency_after = 0;
  double final_loss = 0;
};
DistillStats distill_stack(ModelStack& stack, const PairSet& data, const RunConfig& config, const Log& log);

/// Fresh visual encoder, spatial encoder (copied from the consistency
/// backbone) and discriminator around a distilled stack.
RestorerModules make_restorer_modules(ModelStack& stack, uint64_t seed);

struct RestorerBundle {
  ModelStack stack;
  std::unique_ptr<Restorer> restorer;
};

nlohmann::json train_restorer(Restorer& restorer, const PairSet& data, const RunConfig& config, const Log& log);

void save_restorer(const std::filesystem::path& path, const ModelStack& stack, Restorer& restorer);
RestorerBundle load_restorer(const std::filesystem::path& path);

struct EvalRow {
  int index = 0;
  double psnr_lq = 0, psnr_rec = 0;
  double ssim_lq = 0, ssim_rec = 0;
  double feature_lq = 0, feature_rec = 0;
  double identity_lq = 0, identity_rec = 0;
};

struct EvalSummary {
  std::vector<EvalRow> rows;
  double psnr_lq = 0, psnr_rec = 0;
  double ssim_lq = 0, ssim_rec = 0;
  double feature_lq = 0, feature_rec = 0;
  double identity_lq = 0, identity_rec = 0;
  double fid_lq = 0, fid_rec = 0;
  std::vector<Image> restored;
};

/// Restores every LQ image and scores it against its HQ counterpart.
EvalSummary evaluate(Restorer& restorer, ModelStack& stack, const PairSet& test, const Rng& rng, int batch = 50);
nlohmann::json summary_json(const EvalSummary& s);
CsvTable eval_table(const EvalSummary& s);

/// Analysis view of a distilled stack with unconditional sampling.
AnalysisStack analysis_stack(ModelStack& stack, int batch = 50);

}  // namespace midstate
