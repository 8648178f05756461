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

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "midstate/restorer.hpp"

namespace midstate {

struct StageBudget {
  int iters = 0;
  int batch = 0;
  double lr = 0;
};

/// Every tunable of a run. Serialized as a flat "dotted.key = value" file;
/// see keys() for the full list.
struct RunConfig {
  uint64_t seed = 7;
  std::string output = "midstate-out";

  int resolution = 64;
  int train_size = 2000;
  int test_size = 500;

  int schedule_steps = 1000;
  double beta_start = 1e-4;
  double beta_end = 2e-2;

  int sampler_steps = 4;
  int grid_stride = 20;
  /// Explicit sequence "T,t1,t2,..."; empty means uniform in alpha_bar.
  std::string sampler_taus;

  int ae_channels = 16;
  StageBudget autoencoder{1500, 16, 1e-3};
  int classifier_channels = 16;
  StageBudget classifier{800, 32, 1e-3};
  int unet_channels = 32;
  StageBudget teacher{3000, 32, 5e-4};
  double cond_dropout = 0.1;
  StageBudget distill{2000, 128, 3e-4};
  double ema_decay = 0.95;

  StageBudget restorer{1200, 8, 1e-3};
  double disc_lr = 1e-4;
  RestorerConfig restorer_config;

  int eval_size = 500;
  int analysis_seeds = 200;
  int analysis_images = 200;
  int ddpm_steps = 50;

  /// Sets one key from its textual value; throws ConfigError on an unknown
  /// key or a malformed value.
  void set(const std::string& key, const std::string& value);
  std::string get(const std::string& key) const;
  static std::vector<std::string> keys();

  /// Resolved settings as "key = value" lines in keys() order.
  std::string to_text() const;
  static RunConfig from_text(const std::string& text);
  static RunConfig load(const std::filesystem::path& path);
  void save(const std::filesystem::path& path) const;

  /// Restorer settings with the learning rates taken from the stage budget.
  RestorerConfig resolved_restorer() const;
  void validate() const;
};

/// "key=value" override as accepted by --set.
void apply_override(RunConfig& config, const std::string& assignment);

}  // namespace midstate
