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

#include <array>
#include <cstdint>
#include <vector>

#include "midstate/image.hpp"
#include "midstate/rng.hpp"

namespace midstate {

/// Attributes of one procedurally rendered toy face.
///
/// Hues live on the unit circle; the geometric fields are fractions of the
/// canvas. identity_id is a hash of the quantized fields and is recomputed by
/// make(); validate() rejects records whose id does not match.
struct FaceParams {
  double skin_hue = 0.08;
  double hair_hue = 0.1;
  double head_aspect = 1.0;
  double eye_distance = 0.32;
  double eye_size = 0.05;
  double mouth_curve = 0.0;
  bool has_glasses = false;
  double background_hue = 0.6;
  uint64_t identity_id = 0;

  static constexpr double kMinAspect = 0.7, kMaxAspect = 1.3;
  static constexpr double kMinEyeDistance = 0.2, kMaxEyeDistance = 0.45;
  static constexpr double kMinEyeSize = 0.02, kMaxEyeSize = 0.08;

  /// Recomputes identity_id from the other fields.
  FaceParams& finalize();
  uint64_t derive_identity() const;
  void validate() const;

  /// Normalized label vector used by the attribute classifier and the
  /// teacher's conditioning tokens.
  static constexpr int kAttributeCount = 11;
  std::array<float, kAttributeCount> attributes() const;
};

FaceParams sample_face_params(Rng& rng);

/// Geometry of a rendered face in pixel units.
struct FaceLayout {
  double center_x = 0, center_y = 0;
  double head_rx = 0, head_ry = 0;
  double hair_cy = 0, hair_rx = 0, hair_ry = 0;
  double eye_y = 0, left_eye_x = 0, right_eye_x = 0;
  double sclera_rx = 0, sclera_ry = 0, pupil_r = 0;
  double mouth_y = 0, mouth_half_width = 0, mouth_depth = 0, mouth_thickness = 0;
};

inline constexpr int kMinResolution = 32;

FaceLayout face_layout(const FaceParams& params, int resolution);

/// Deterministic anti-aliased rendering (4x4 supersampling per pixel).
Image generate_face(const FaceParams& params, int resolution);

}  // namespace midstate
