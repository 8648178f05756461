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

#include "midstate/image.hpp"

#include <png.h>
#include <torch/torch.h>

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>

#include "midstate/errors.hpp"

#include "fs_util.hpp"

namespace midstate {

Image::Image(int h, int w, float fill)
    : height(h), width(w), data(static_cast<size_t>(h) * w * kChannels, fill) {}

void Image::clamp() {
  for (auto& v : data) v = std::clamp(v, 0.0f, 1.0f);
}

Image mirror_horizontal(const Image& image) {
  Image out(image.height, image.width);
  for (int y = 0; y < image.height; ++y)
    for (int x = 0; x < image.width; ++x)
      for (int c = 0; c < Image::kChannels; ++c) out.at(y, image.width - 1 - x, c) = image.at(y, x, c);
  return out;
}

torch::Tensor to_tensor(const Image& image) {
  auto hwc = torch::from_blob(const_cast<float*>(image.data.data()),
                              {image.height, image.width, Image::kChannels}, torch::kFloat);
  return hwc.permute({2, 0, 1}).contiguous();
}

Image from_tensor(const torch::Tensor& tensor) {
  auto t = tensor.detach();
  if (t.dim() == 4) {
    if (t.size(0) != 1) throw InputError("from_tensor: expected a single image, got a batch");
    t = t[0];
  }
  if (t.dim() != 3 || t.size(0) != Image::kChannels)
    throw InputError("from_tensor: expected [3, H, W] tensor");
  auto hwc = t.to(torch::kFloat).clamp(0.0, 1.0).permute({1, 2, 0}).contiguous();
  Image out(static_cast<int>(hwc.size(0)), static_cast<int>(hwc.size(1)));
  std::memcpy(out.data.data(), hwc.data_ptr<float>(), out.data.size() * sizeof(float));
  return out;
}

torch::Tensor stack_images(std::span<const Image> images) {
  std::vector<torch::Tensor> parts;
  parts.reserve(images.size());
  for (const auto& im : images) parts.push_back(to_tensor(im));
  return torch::stack(parts);
}

std::vector<Image> unstack_images(const torch::Tensor& batch) {
  std::vector<Image> out;
  out.reserve(batch.size(0));
  for (int64_t i = 0; i < batch.size(0); ++i) out.push_back(from_tensor(batch[i]));
  return out;
}

void write_png(const std::filesystem::path& path, const Image& image) {
  std::vector<png_byte> bytes(image.data.size());
  for (size_t i = 0; i < bytes.size(); ++i)
    bytes[i] = static_cast<png_byte>(std::lround(std::clamp(image.data[i], 0.0f, 1.0f) * 255.0f));

  png_image png{};
  png.version = PNG_IMAGE_VERSION;
  png.width = static_cast<png_uint_32>(image.width);
  png.height = static_cast<png_uint_32>(image.height);
  png.format = PNG_FORMAT_RGB;
  detail::ensure_parent(path);
  if (!png_image_write_to_file(&png, path.c_str(), 0, bytes.data(), 0, nullptr))
    throw IoError("cannot write PNG " + path.string() + ": " + png.message);
}

Image read_png(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) throw IoError("no such file: " + path.string());
  png_image png{};
  png.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_file(&png, path.c_str()))
    throw IoError("cannot read PNG " + path.string() + ": " + png.message);
  png.format = PNG_FORMAT_RGB;
  std::vector<png_byte> bytes(PNG_IMAGE_SIZE(png));
  if (!png_image_finish_read(&png, nullptr, bytes.data(), 0, nullptr)) {
    png_image_free(&png);
    throw IoError("cannot decode PNG " + path.string() + ": " + png.message);
  }
  Image out(static_cast<int>(png.height), static_cast<int>(png.width));
  for (size_t i = 0; i < bytes.size(); ++i) out.data[i] = static_cast<float>(bytes[i]) / 255.0f;
  return out;
}

}  // namespace midstate
