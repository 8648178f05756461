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
#include <optional>
#include <span>
#include <vector>

#include "midstate/image.hpp"
#include "midstate/rng.hpp"

namespace midstate {

/// Parameters of the blur -> downsample -> noise -> JPEG -> upsample chain.
///
/// delta is in 8-bit units and is divided by 255 before use. An empty
/// quality skips the codec; together with sigma = 0 and scale = 1 that is the
/// identity configuration used by tests.
struct DegradationParams {
  double sigma = 1.0;
  int scale = 1;
  double delta = 0.0;
  std::optional<int> quality = 90;

  static constexpr double kMinSigma = 1, kMaxSigma = 15;
  static constexpr int kMinScale = 1, kMaxScale = 30;
  static constexpr double kMinDelta = 0, kMaxDelta = 20;
  static constexpr int kMinQuality = 30, kMaxQuality = 90;

  static DegradationParams identity() { return {0.0, 1, 0.0, std::nullopt}; }
  bool in_sampling_range() const;
  /// Throws ConfigError unless the record is in the sampling range or is the
  /// identity configuration's relaxed form (sigma may be 0, quality empty).
  void validate() const;
};

DegradationParams sample_degradation(Rng& rng);

/// Separable Gaussian blur, radius ceil(3 sigma), edge-replicated borders.
/// sigma == 0 returns the input unchanged.
Image gaussian_blur(const Image& image, double sigma);
/// Box-filter area resampling with fractional pixel overlaps.
Image resize_area(const Image& image, int out_h, int out_w);
/// Keys bicubic (a = -0.5), half-pixel centers, clamped borders.
Image resize_bicubic(const Image& image, int out_h, int out_w);

/// Baseline JPEG with 4:2:0 chroma subsampling.
std::vector<uint8_t> jpeg_encode(const Image& image, int quality);
Image jpeg_decode(std::span<const uint8_t> bytes);
Image jpeg_round_trip(const Image& image, int quality);

Image degrade(const Image& hq, const DegradationParams& params, Rng& rng);

}  // namespace midstate
