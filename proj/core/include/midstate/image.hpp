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

#include <filesystem>
#include <span>
#include <vector>

namespace midstate {

/// H x W x 3 raster with interleaved channels and values in [0, 1].
struct Image {
  int height = 0;
  int width = 0;
  std::vector<float> data;

  static constexpr int kChannels = 3;

  Image() = default;
  Image(int h, int w, float fill = 0.0f);

  float& at(int y, int x, int c) { return data[(static_cast<size_t>(y) * width + x) * kChannels + c]; }
  float at(int y, int x, int c) const {
    return data[(static_cast<size_t>(y) * width + x) * kChannels + c];
  }

  bool empty() const { return data.empty(); }
  size_t size() const { return data.size(); }
  void clamp();

  friend bool operator==(const Image&, const Image&) = default;
};

Image mirror_horizontal(const Image& image);

/// [3, H, W] float tensor.
torch::Tensor to_tensor(const Image& image);
/// Accepts [3, H, W] or [1, 3, H, W]; values are clamped into [0, 1].
Image from_tensor(const torch::Tensor& tensor);
/// [B, 3, H, W] float tensor.
torch::Tensor stack_images(std::span<const Image> images);
std::vector<Image> unstack_images(const torch::Tensor& batch);

/// 8-bit RGB PNG; values are rounded to the nearest code.
void write_png(const std::filesystem::path& path, const Image& image);
Image read_png(const std::filesystem::path& path);

}  // namespace midstate
