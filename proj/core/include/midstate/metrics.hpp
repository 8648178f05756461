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

#include <span>
#include <vector>

#include "midstate/image.hpp"
#include "midstate/nets.hpp"

namespace midstate {

inline constexpr double kPsnrCap = 99.0;

/// 10 log10(1 / MSE) over all channels, capped at kPsnrCap.
double psnr(const Image& a, const Image& b);
double psnr_from_mse(double mse);

struct SsimParams {
  int window = 11;
  double sigma = 1.5;
  double k1 = 0.01;
  double k2 = 0.03;
};

/// Gaussian-windowed SSIM on BT.601 luma, averaged over the valid region.
double ssim(const Image& a, const Image& b, const SsimParams& params = {});

/// Per-channel 32-bin histograms normalized to unit mass; L1 distance
/// averaged over channels. Range [0, 2].
double hist_distance(const Image& a, const Image& b, int bins = 32);

/// Angle in degrees between two vectors, computed in a form that is exactly
/// 0 for equal directions and 180 for opposite ones.
double angle_degrees(const torch::Tensor& a, const torch::Tensor& b);

/// Identity proxy: angle between the classifier's attribute predictions.
double identity_distance(AttributeClassifier& classifier, const Image& a, const Image& b);

/// Feature-distance proxy: the perceptual loss form over the classifier's
/// two feature depths.
double feature_distance(AttributeClassifier& classifier, const Image& a, const Image& b);

/// Pooled deep classifier features for each image, [n, m] in double.
torch::Tensor extract_features(AttributeClassifier& classifier, std::span<const Image> images, int batch = 64);

/// ||mu_A - mu_B||^2 + Tr(S_A + S_B - 2 (S_A S_B)^{1/2}) with eps I added to
/// both covariances. Rows are samples.
double frechet_distance(const torch::Tensor& a, const torch::Tensor& b, double eps = 1e-6);

}  // namespace midstate
