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

#include "midstate/face.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include "midstate/errors.hpp"

namespace midstate {
namespace {

constexpr double kHeadArea = 0.16;  // rx * ry in canvas units
constexpr double kHeadCenterY = 0.53;
constexpr int kSupersample = 4;

struct Rgb {
  float r, g, b;
};

Rgb hsv(double h, double s, double v) {
  h = h - std::floor(h);
  const double hh = h * 6.0;
  const int sector = static_cast<int>(hh) % 6;
  const double f = hh - std::floor(hh);
  const double p = v * (1 - s), q = v * (1 - s * f), t = v * (1 - s * (1 - f));
  double r = v, g = t, b = p;
  switch (sector) {
    case 0: r = v, g = t, b = p; break;
    case 1: r = q, g = v, b = p; break;
    case 2: r = p, g = v, b = t; break;
    case 3: r = p, g = q, b = v; break;
    case 4: r = t, g = p, b = v; break;
    default: r = v, g = p, b = q; break;
  }
  return {static_cast<float>(r), static_cast<float>(g), static_cast<float>(b)};
}

bool in_ellipse(double x, double y, double cx, double cy, double rx, double ry) {
  const double dx = (x - cx) / rx, dy = (y - cy) / ry;
  return dx * dx + dy * dy <= 1.0;
}

bool in_frame(double x, double y, double cx, double cy, double hw, double hh, double line) {
  const double ax = std::abs(x - cx), ay = std::abs(y - cy);
  if (ax > hw || ay > hh) return false;
  return ax > hw - line || ay > hh - line;
}

int64_t quantize(double v) { return std::llround(v * 1e6); }

void check_range(const char* name, double v, double lo, double hi, bool open_hi) {
  if (!(v >= lo && (open_hi ? v < hi : v <= hi)))
    throw ConfigError(std::string("FaceParams.") + name + " out of range: " + std::to_string(v));
}

}  // namespace

uint64_t FaceParams::derive_identity() const {
  const std::array<int64_t, 8> q{quantize(skin_hue),    quantize(hair_hue),  quantize(head_aspect),
                                 quantize(eye_distance), quantize(eye_size), quantize(mouth_curve),
                                 has_glasses ? 1 : 0,     quantize(background_hue)};
  return mix64(fnv1a64(q.data(), sizeof(q)));
}

FaceParams& FaceParams::finalize() {
  identity_id = derive_identity();
  return *this;
}

void FaceParams::validate() const {
  check_range("skin_hue", skin_hue, 0, 1, true);
  check_range("hair_hue", hair_hue, 0, 1, true);
  check_range("background_hue", background_hue, 0, 1, true);
  check_range("head_aspect", head_aspect, kMinAspect, kMaxAspect, false);
  check_range("eye_distance", eye_distance, kMinEyeDistance, kMaxEyeDistance, false);
  check_range("eye_size", eye_size, kMinEyeSize, kMaxEyeSize, false);
  check_range("mouth_curve", mouth_curve, -1, 1, false);
  if (identity_id != derive_identity()) throw ConfigError("FaceParams.identity_id does not match fields");
}

std::array<float, FaceParams::kAttributeCount> FaceParams::attributes() const {
  constexpr double tau = 2.0 * std::numbers::pi;
  auto f = [](double v) { return static_cast<float>(v); };
  return {f(std::cos(tau * skin_hue)),
          f(std::sin(tau * skin_hue)),
          f(std::cos(tau * hair_hue)),
          f(std::sin(tau * hair_hue)),
          f(std::cos(tau * background_hue)),
          f(std::sin(tau * background_hue)),
          f((head_aspect - 1.0) / 0.3),
          f((eye_distance - 0.325) / 0.125),
          f((eye_size - 0.05) / 0.03),
          f(mouth_curve),
          has_glasses ? 1.0f : -1.0f};
}

FaceParams sample_face_params(Rng& rng) {
  FaceParams p;
  p.skin_hue = rng.uniform();
  p.hair_hue = rng.uniform();
  p.head_aspect = rng.uniform(FaceParams::kMinAspect, FaceParams::kMaxAspect);
  p.eye_distance = rng.uniform(FaceParams::kMinEyeDistance, FaceParams::kMaxEyeDistance);
  p.eye_size = rng.uniform(FaceParams::kMinEyeSize, FaceParams::kMaxEyeSize);
  p.mouth_curve = rng.uniform(-1.0, 1.0);
  p.has_glasses = rng.bernoulli(0.3);
  p.background_hue = rng.uniform();
  return p.finalize();
}

FaceLayout face_layout(const FaceParams& params, int resolution) {
  if (resolution < kMinResolution)
    throw ConfigError("resolution " + std::to_string(resolution) + " below minimum " +
                      std::to_string(kMinResolution));
  const double w = resolution;
  FaceLayout l;
  l.center_x = 0.5 * w;
  l.center_y = kHeadCenterY * w;
  l.head_rx = std::sqrt(kHeadArea / params.head_aspect) * w;
  l.head_ry = std::sqrt(kHeadArea * params.head_aspect) * w;
  l.hair_cy = l.center_y - 0.10 * l.head_ry;
  l.hair_rx = 1.12 * l.head_rx;
  l.hair_ry = 1.08 * l.head_ry;
  l.eye_y = l.center_y - 0.18 * l.head_ry;
  l.left_eye_x = l.center_x - params.eye_distance * w / 2.0;
  l.right_eye_x = l.center_x + params.eye_distance * w / 2.0;
  l.sclera_rx = params.eye_size * w;
  l.sclera_ry = 0.7 * params.eye_size * w;
  l.pupil_r = 0.5 * params.eye_size * w;
  l.mouth_y = l.center_y + 0.45 * l.head_ry;
  l.mouth_half_width = 0.35 * l.head_rx;
  l.mouth_depth = 0.05 * w * params.mouth_curve;
  l.mouth_thickness = 0.02 * w;
  return l;
}

Image generate_face(const FaceParams& params, int resolution) {
  params.validate();
  const FaceLayout l = face_layout(params, resolution);
  const Rgb background = hsv(params.background_hue, 0.5, 0.4);
  const Rgb hair = hsv(params.hair_hue, 0.7, 0.55);
  const Rgb skin = hsv(params.skin_hue, 0.45, 0.85);
  const Rgb sclera{0.95f, 0.95f, 0.95f};
  const Rgb pupil{0.05f, 0.05f, 0.05f};
  const Rgb mouth{0.65f, 0.15f, 0.2f};
  const Rgb frame{0.25f, 0.22f, 0.2f};
  const double w = resolution;
  const double frame_hw = l.sclera_rx + 0.03 * w;
  const double frame_hh = l.sclera_ry + 0.025 * w;
  const double frame_line = 0.012 * w + 0.5;

  auto shade = [&](double x, double y) -> Rgb {
    Rgb c = background;
    if (in_ellipse(x, y, l.center_x, l.hair_cy, l.hair_rx, l.hair_ry)) c = hair;
    if (in_ellipse(x, y, l.center_x, l.center_y, l.head_rx, l.head_ry)) c = skin;
    for (double ex : {l.left_eye_x, l.right_eye_x}) {
      if (in_ellipse(x, y, ex, l.eye_y, l.sclera_rx, l.sclera_ry)) c = sclera;
      if (in_ellipse(x, y, ex, l.eye_y, l.pupil_r, l.pupil_r)) c = pupil;
    }
    const double du = x - l.center_x;
    if (std::abs(du) <= l.mouth_half_width) {
      const double t = du / l.mouth_half_width;
      const double yc = l.mouth_y + l.mouth_depth * (1.0 - t * t);
      if (std::abs(y - yc) <= l.mouth_thickness / 2.0) c = mouth;
    }
    if (params.has_glasses) {
      for (double ex : {l.left_eye_x, l.right_eye_x})
        if (in_frame(x, y, ex, l.eye_y, frame_hw, frame_hh, frame_line)) c = frame;
      const double bridge_lo = l.left_eye_x + frame_hw, bridge_hi = l.right_eye_x - frame_hw;
      if (x > bridge_lo && x < bridge_hi && std::abs(y - l.eye_y) <= frame_line / 2.0) c = frame;
    }
    return c;
  };

  Image out(resolution, resolution);
  constexpr double inv = 1.0 / (kSupersample * kSupersample);
  for (int py = 0; py < resolution; ++py) {
    for (int px = 0; px < resolution; ++px) {
      double r = 0, g = 0, b = 0;
      for (int sy = 0; sy < kSupersample; ++sy) {
        for (int sx = 0; sx < kSupersample; ++sx) {
          const Rgb c = shade(px + (sx + 0.5) / kSupersample, py + (sy + 0.5) / kSupersample);
          r += c.r, g += c.g, b += c.b;
        }
      }
      out.at(py, px, 0) = static_cast<float>(r * inv);
      out.at(py, px, 1) = static_cast<float>(g * inv);
      out.at(py, px, 2) = static_cast<float>(b * inv);
    }
  }
  out.clamp();
  return out;
}

}  // namespace midstate
