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

#include "midstate/rng.hpp"

#include <ATen/CPUGeneratorImpl.h>
#include <torch/torch.h>

#include <cmath>
#include <numbers>

namespace midstate {

uint64_t mix64(uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

uint64_t fnv1a64(const void* data, size_t size, uint64_t seed) {
  const auto* bytes = static_cast<const unsigned char*>(data);
  uint64_t h = seed;
  for (size_t i = 0; i < size; ++i) {
    h ^= bytes[i];
    h *= 0x100000001b3ULL;
  }
  return h;
}

Rng::Rng(uint64_t seed)
    : seed_(seed),
      engine_(mix64(seed)),
      generator_(at::make_generator<at::CPUGeneratorImpl>(mix64(seed ^ 0x5eedULL))) {}

Rng Rng::child(std::string_view name) const {
  return Rng(mix64(seed_ ^ fnv1a64(name.data(), name.size())));
}

Rng Rng::child(uint64_t index) const { return Rng(mix64(seed_ + mix64(index + 1))); }

Rng Rng::clone() const {
  Rng copy(seed_);
  copy.engine_ = engine_;
  copy.generator_ = generator_.clone();
  return copy;
}

double Rng::uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

int64_t Rng::uniform_int(int64_t lo, int64_t hi) {
  const auto span = static_cast<uint64_t>(hi - lo) + 1;
  // Rejection keeps the draw exactly uniform.
  const uint64_t limit = UINT64_MAX - UINT64_MAX % span;
  uint64_t r = engine_();
  while (r >= limit) r = engine_();
  return lo + static_cast<int64_t>(r % span);
}

double Rng::normal() {
  // Box-Muller; the second variate is discarded so the stream stays stateless.
  double u1 = uniform();
  while (u1 <= 0.0) u1 = uniform();
  const double u2 = uniform();
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

torch::Tensor Rng::randn(at::IntArrayRef shape, const torch::TensorOptions& options) {
  return torch::randn(shape, generator_, options);
}

torch::Tensor Rng::rand(at::IntArrayRef shape, const torch::TensorOptions& options) {
  return torch::rand(shape, generator_, options);
}

torch::Tensor Rng::randint(int64_t low, int64_t high, at::IntArrayRef shape) {
  return torch::randint(low, high, shape, generator_, torch::kLong);
}

}  // namespace midstate
