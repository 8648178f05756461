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

#include <ATen/core/Generator.h>
#include <torch/types.h>

#include <cstdint>
#include <random>
#include <string_view>

namespace midstate {

/// 64-bit SplitMix finalizer; used to derive child seeds.
uint64_t mix64(uint64_t x);

/// FNV-1a over raw bytes.
uint64_t fnv1a64(const void* data, size_t size, uint64_t seed = 0xcbf29ce484222325ULL);

/// A seeded random stream owning both a scalar engine and a torch generator.
///
/// Streams are move-only so two owners never silently share state; use
/// clone() for an explicit snapshot and child() for independent substreams
/// keyed by name or index.
class Rng {
 public:
  explicit Rng(uint64_t seed);

  Rng(Rng&&) noexcept = default;
  Rng& operator=(Rng&&) noexcept = default;
  Rng(const Rng&) = delete;
  Rng& operator=(const Rng&) = delete;

  uint64_t seed() const { return seed_; }

  Rng child(std::string_view name) const;
  Rng child(uint64_t index) const;
  Rng clone() const;

  uint64_t next_u64() { return engine_(); }
  /// Uniform in [0, 1) with 53 random bits.
  double uniform();
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  /// Uniform integer in the closed range [lo, hi].
  int64_t uniform_int(int64_t lo, int64_t hi);
  double normal();
  bool bernoulli(double p) { return uniform() < p; }

  torch::Tensor randn(at::IntArrayRef shape, const torch::TensorOptions& options = {});
  torch::Tensor rand(at::IntArrayRef shape, const torch::TensorOptions& options = {});
  torch::Tensor randint(int64_t low, int64_t high, at::IntArrayRef shape);

  at::Generator& generator() { return generator_; }

 private:
  uint64_t seed_;
  std::mt19937_64 engine_;
  at::Generator generator_;
};

}  // namespace midstate
