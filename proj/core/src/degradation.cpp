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

#include "midstate/degradation.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "midstate/errors.hpp"

namespace midstate {
namespace {

// Row-major weight table: out[i] = sum_k weights[i][k] * in[first[i] + k].
struct Resampler {
  std::vector<int> first;
  std::vector<std::vector<double>> weights;
};

Resampler area_weights(int in, int out) {
  Resampler r;
  const double ratio = static_cast<double>(in) / out;
  for (int i = 0; i < out; ++i) {
    const double lo = i * ratio, hi = (i + 1) * ratio;
    const int a = static_cast<int>(std::floor(lo));
    const int b = std::min(in, static_cast<int>(std::ceil(hi)));
    std::vector<double> w;
    for (int k = a; k < b; ++k) w.push_back(std::min<double>(hi, k + 1) - std::max<double>(lo, k));
    double sum = 0;
    for (double v : w) sum += v;
    for (double& v : w) v /= sum;
    r.first.push_back(a);
    r.weights.push_back(std::move(w));
  }
  return r;
}

double cubic(double x) {
  constexpr double a = -0.5;
  x = std::abs(x);
  if (x <= 1) return ((a + 2) * x - (a + 3)) * x * x + 1;
  if (x < 2) return ((a * x - 5 * a) * x + 8 * a) * x - 4 * a;
  return 0;
}

// Bicubic taps clamp at the border, so weights may repeat an index; they are
// expanded into a dense window starting at `first`.
Resampler bicubic_weights(int in, int out) {
  Resampler r;
  const double ratio = static_cast<double>(in) / out;
  for (int i = 0; i < out; ++i) {
    const double src = (i + 0.5) * ratio - 0.5;
    const int base = static_cast<int>(std::floor(src));
    const int lo = std::clamp(base - 1, 0, in - 1);
    const int hi = std::clamp(base + 2, 0, in - 1);
    std::vector<double> w(hi - lo + 1, 0.0);
    double sum = 0;
    for (int k = base - 1; k <= base + 2; ++k) {
      const double wk = cubic(src - k);
      w[std::clamp(k, 0, in - 1) - lo] += wk;
      sum += wk;
    }
    for (double& v : w) v /= sum;
    r.first.push_back(lo);
    r.weights.push_back(std::move(w));
  }
  return r;
}

Image resample(const Image& image, const Resampler& rows, const Resampler& cols) {
  const int out_h = static_cast<int>(rows.first.size());
  const int out_w = static_cast<int>(cols.first.size());
  // Horizontal pass into a double buffer, then vertical.
  std::vector<double> tmp(static_cast<size_t>(image.height) * out_w * Image::kChannels, 0.0);
  for (int y = 0; y < image.height; ++y)
    for (int x = 0; x < out_w; ++x)
      for (int c = 0; c < Image::kChannels; ++c) {
        double acc = 0;
        const auto& w = cols.weights[x];
        for (size_t k = 0; k < w.size(); ++k) acc += w[k] * image.at(y, cols.first[x] + static_cast<int>(k), c);
        tmp[(static_cast<size_t>(y) * out_w + x) * Image::kChannels + c] = acc;
      }
  Image out(out_h, out_w);
  for (int y = 0; y < out_h; ++y)
    for (int x = 0; x < out_w; ++x)
      for (int c = 0; c < Image::kChannels; ++c) {
        double acc = 0;
        const auto& w = rows.weights[y];
        for (size_t k = 0; k < w.size(); ++k)
          acc += w[k] * tmp[(static_cast<size_t>(rows.first[y] + k) * out_w + x) * Image::kChannels + c];
        out.at(y, x, c) = static_cast<float>(acc);
      }
  return out;
}

}  // namespace

bool DegradationParams::in_sampling_range() const {
  return sigma >= kMinSigma && sigma <= kMaxSigma && scale >= kMinScale && scale <= kMaxScale &&
         delta >= kMinDelta && delta <= kMaxDelta && quality.has_value() && *quality >= kMinQuality &&
         *quality <= kMaxQuality;
}

void DegradationParams::validate() const {
  if (!(sigma >= 0 && sigma <= kMaxSigma)) throw ConfigError("degradation sigma out of range");
  if (scale < kMinScale || scale > kMaxScale) throw ConfigError("degradation scale out of range");
  if (!(delta >= kMinDelta && delta <= kMaxDelta)) throw ConfigError("degradation delta out of range");
  if (quality && (*quality < kMinQuality || *quality > kMaxQuality)) throw ConfigError("JPEG quality out of range");
}

DegradationParams sample_degradation(Rng& rng) {
  DegradationParams d;
  d.sigma = rng.uniform(DegradationParams::kMinSigma, DegradationParams::kMaxSigma);
  d.scale = static_cast<int>(rng.uniform_int(DegradationParams::kMinScale, DegradationParams::kMaxScale));
  d.delta = rng.uniform(DegradationParams::kMinDelta, DegradationParams::kMaxDelta);
  d.quality = static_cast<int>(rng.uniform_int(DegradationParams::kMinQuality, DegradationParams::kMaxQuality));
  return d;
}

Image gaussian_blur(const Image& image, double sigma) {
  if (sigma < 0) throw ConfigError("negative blur sigma");
  if (sigma == 0) return image;
  const int radius = static_cast<int>(std::ceil(3.0 * sigma));
  std::vector<double> kernel(2 * radius + 1);
  double sum = 0;
  for (int i = -radius; i <= radius; ++i) sum += kernel[i + radius] = std::exp(-0.5 * i * i / (sigma * sigma));
  for (double& k : kernel) k /= sum;

  const int h = image.height, w = image.width;
  std::vector<double> tmp(image.size());
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x)
      for (int c = 0; c < Image::kChannels; ++c) {
        // Taps are summed in mirrored pairs so the result is exactly mirror-equivariant.
        double acc = kernel[radius] * image.at(y, x, c);
        for (int k = 1; k <= radius; ++k)
          acc += kernel[radius + k] * (static_cast<double>(image.at(y, std::clamp(x - k, 0, w - 1), c)) +
                                       image.at(y, std::clamp(x + k, 0, w - 1), c));
        tmp[(static_cast<size_t>(y) * w + x) * Image::kChannels + c] = acc;
      }
  Image out(h, w);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x)
      for (int c = 0; c < Image::kChannels; ++c) {
        const auto at = [&](int yy) { return tmp[(static_cast<size_t>(std::clamp(yy, 0, h - 1)) * w + x) * Image::kChannels + c]; };
        double acc = kernel[radius] * at(y);
        for (int k = 1; k <= radius; ++k) acc += kernel[radius + k] * (at(y - k) + at(y + k));
        out.at(y, x, c) = static_cast<float>(acc);
      }
  return out;
}

Image resize_area(const Image& image, int out_h, int out_w) {
  if (out_h == image.height && out_w == image.width) return image;
  return resample(image, area_weights(image.height, out_h), area_weights(image.width, out_w));
}

Image resize_bicubic(const Image& image, int out_h, int out_w) {
  if (out_h == image.height && out_w == image.width) return image;
  return resample(image, bicubic_weights(image.height, out_h), bicubic_weights(image.width, out_w));
}

Image degrade(const Image& hq, const DegradationParams& params, Rng& rng) {
  params.validate();
  if (params.scale > std::min(hq.height, hq.width))
    throw DegenerateInputError("degradation scale " + std::to_string(params.scale) + " exceeds image size " +
                               std::to_string(std::min(hq.height, hq.width)));
  Image x = gaussian_blur(hq, params.sigma);
  const int small_h = (hq.height + params.scale - 1) / params.scale;
  const int small_w = (hq.width + params.scale - 1) / params.scale;
  x = resize_area(x, small_h, small_w);
  if (params.delta > 0) {
    const double std_dev = params.delta / 255.0;
    for (auto& v : x.data) v = static_cast<float>(v + std_dev * rng.normal());
  }
  x.clamp();
  if (params.quality) x = jpeg_round_trip(x, *params.quality);
  x = resize_bicubic(x, hq.height, hq.width);
  x.clamp();
  return x;
}

}  // namespace midstate
