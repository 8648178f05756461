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


#include <benchmark/benchmark.h>
#include <torch/torch.h>

#include "midstate/degradation.hpp"
#include "midstate/face.hpp"
#include "midstate/metrics.hpp"
#include "midstate/pipeline.hpp"

namespace {

using namespace midstate;

Image face(int resolution) {
  Rng rng(1);
  return generate_face(sample_face_params(rng), resolution);
}

void BM_GenerateFace(benchmark::State& state) {
  Rng rng(1);
  const auto params = sample_face_params(rng);
  for (auto _ : state) benchmark::DoNotOptimize(generate_face(params, static_cast<int>(state.range(0))));
}
BENCHMARK(BM_GenerateFace)->Arg(64)->Arg(128);

void BM_Degrade(benchmark::State& state) {
  const Image hq = face(static_cast<int>(state.range(0)));
  const DegradationParams d{8.0, 4, 10.0, 60};
  Rng rng(2);
  for (auto _ : state) benchmark::DoNotOptimize(degrade(hq, d, rng));
}
BENCHMARK(BM_Degrade)->Arg(64)->Arg(128);

void BM_JpegRoundTrip(benchmark::State& state) {
  const Image hq = face(64);
  for (auto _ : state) benchmark::DoNotOptimize(jpeg_round_trip(hq, static_cast<int>(state.range(0))));
}
BENCHMARK(BM_JpegRoundTrip)->Arg(30)->Arg(90);

void BM_Ssim(benchmark::State& state) {
  const Image a = face(64);
  Rng rng(3);
  const Image b = degrade(a, DegradationParams{2.0, 2, 5.0, 70}, rng);
  for (auto _ : state) benchmark::DoNotOptimize(ssim(a, b));
}
BENCHMARK(BM_Ssim);

// Untrained toy-size networks; timings only.
struct ToyModels {
  ModelStack stack;
  std::unique_ptr<Restorer> restorer;

  ToyModels() : stack(make_stack(RunConfig{})) {
    torch::set_num_threads(1);
    stack.consistency = stack.teacher;
    restorer = std::make_unique<Restorer>(make_restorer_modules(stack, 1), RestorerConfig{});
  }
  static ToyModels& get() {
    static ToyModels models;
    return models;
  }
};

void BM_UNetForward(benchmark::State& state) {
  auto& m = ToyModels::get();
  torch::NoGradGuard guard;
  const int64_t b = state.range(0);
  const int side = m.stack.resolution / 4;
  const auto z = torch::randn({b, m.stack.unet_config.latent_channels, side, side});
  const auto t = torch::full({b}, 500, torch::kLong);
  const auto ctx = torch::zeros({b, 1, m.stack.unet_config.context_dim});
  for (auto _ : state) benchmark::DoNotOptimize(m.stack.teacher->forward(z, t, ctx, nullptr));
  state.SetItemsProcessed(state.iterations() * b);
}
BENCHMARK(BM_UNetForward)->Arg(1)->Arg(16)->Unit(benchmark::kMillisecond);

void BM_Restore(benchmark::State& state) {
  auto& m = ToyModels::get();
  torch::NoGradGuard guard;
  const int64_t b = state.range(0);
  const auto x = torch::rand({b, 3, m.stack.resolution, m.stack.resolution});
  Rng rng(4);
  for (auto _ : state) benchmark::DoNotOptimize(m.restorer->restore(x, rng).image);
  state.SetItemsProcessed(state.iterations() * b);
}
BENCHMARK(BM_Restore)->Arg(1)->Arg(16)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
