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


#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <set>
#include <vector>

#include "midstate/degradation.hpp"
#include "midstate/errors.hpp"
#include "midstate/face.hpp"
#include "midstate/metrics.hpp"
#include "midstate/rng.hpp"

namespace midstate {
namespace {

// Upper 0.99 quantiles of the chi-square distribution.
constexpr double kChi2Df19 = 36.19087;
constexpr double kChi2Df29 = 49.58788;
constexpr double kChi2Df60 = 88.37942;

double chi_square(const std::vector<int64_t>& counts, double expected) {
  double s = 0;
  for (auto c : counts) s += (c - expected) * (c - expected) / expected;
  return s;
}

FaceParams plain_face() {
  FaceParams p;
  p.has_glasses = false;
  return p.finalize();
}

Image textured(int size, uint64_t seed) {
  Rng rng(seed);
  Image img(size, size);
  for (int y = 0; y < size; ++y)
    for (int x = 0; x < size; ++x)
      for (int c = 0; c < 3; ++c)
        img.at(y, x, c) = static_cast<float>(0.5 + 0.3 * std::sin(0.4 * x + c) * std::cos(0.3 * y) + 0.1 * rng.uniform());
  return img;
}

TEST(Rng, FixedSeedRepeats) {
  Rng a(11), b(11);
  for (int i = 0; i < 100; ++i) ASSERT_EQ(a.next_u64(), b.next_u64());
  EXPECT_TRUE(torch::equal(Rng(5).randn({16}), Rng(5).randn({16})));
}

TEST(Rng, ChildStreamsAreIndependentOfParentState) {
  Rng a(3), b(3);
  b.next_u64();
  EXPECT_EQ(a.child("x").next_u64(), b.child("x").next_u64());
  EXPECT_NE(a.child("x").next_u64(), a.child("y").next_u64());
  EXPECT_NE(a.child(0).next_u64(), a.child(1).next_u64());
}

TEST(Rng, CloneContinuesTheSameSequence) {
  Rng a(9);
  a.next_u64();
  a.randn({3});
  Rng b = a.clone();
  EXPECT_EQ(a.next_u64(), b.next_u64());
  EXPECT_TRUE(torch::equal(a.randn({8}), b.randn({8})));
}

TEST(Face, RenderIsDeterministic) {
  Rng rng(1);
  const auto p = sample_face_params(rng);
  EXPECT_EQ(generate_face(p, 64), generate_face(p, 64));
}

TEST(Face, EyesAreSymmetricAboutTheMidline) {
  for (double d : {0.2, 0.3, 0.45}) {
    FaceParams p = plain_face();
    p.eye_distance = d;
    p.finalize();
    const auto layout = face_layout(p, 64);
    EXPECT_DOUBLE_EQ(layout.left_eye_x, 32.0 - d * 64 / 2);
    EXPECT_DOUBLE_EQ(layout.right_eye_x, 32.0 + d * 64 / 2);
  }
}

// Pixels that change when only the eye size changes lie in rings around the
// eyes; their column centroid on each side locates the rendered eye centre.
TEST(Face, RenderedEyeCentresMatchEyeDistance) {
  constexpr int kRes = 128;
  for (double d : {0.24, 0.32, 0.42}) {
    FaceParams a = plain_face();
    a.eye_distance = d;
    a.eye_size = 0.04;
    a.finalize();
    FaceParams b = a;
    b.eye_size = 0.06;
    b.finalize();
    const Image ia = generate_face(a, kRes), ib = generate_face(b, kRes);
    double sum[2] = {0, 0}, weight[2] = {0, 0};
    for (int y = 0; y < kRes; ++y)
      for (int x = 0; x < kRes; ++x) {
        double diff = 0;
        for (int c = 0; c < 3; ++c) diff += std::abs(ia.at(y, x, c) - ib.at(y, x, c));
        const int side = x < kRes / 2 ? 0 : 1;
        sum[side] += diff * (x + 0.5);
        weight[side] += diff;
      }
    ASSERT_GT(weight[0], 0);
    ASSERT_GT(weight[1], 0);
    EXPECT_NEAR(sum[0] / weight[0], kRes / 2.0 - d * kRes / 2, 0.5) << "d=" << d;
    EXPECT_NEAR(sum[1] / weight[1], kRes / 2.0 + d * kRes / 2, 0.5) << "d=" << d;
  }
}

// Swapping only the background hue changes background pixels and nothing
// else, so the unchanged fraction bounds the face occupancy from below.
TEST(Face, ThousandRandomRendersSatisfyOccupancyAndRange) {
  Rng rng(2024);
  for (int i = 0; i < 1000; ++i) {
    FaceParams p = sample_face_params(rng);
    ASSERT_NO_THROW(p.validate());
    FaceParams q = p;
    q.background_hue = std::fmod(p.background_hue + 0.5, 1.0);
    q.finalize();
    const Image a = generate_face(p, 64), b = generate_face(q, 64);
    ASSERT_EQ(a.height, 64);
    ASSERT_EQ(a.width, 64);
    for (float v : a.data) ASSERT_TRUE(v >= 0.0f && v <= 1.0f);
    int same = 0;
    for (int y = 0; y < 64; ++y)
      for (int x = 0; x < 64; ++x) {
        bool equal = true;
        for (int c = 0; c < 3; ++c) equal = equal && a.at(y, x, c) == b.at(y, x, c);
        same += equal;
      }
    ASSERT_GE(same, 64 * 64 / 2) << "render " << i;
  }
}

TEST(Face, NoIdentityCollisionsOverRandomParams) {
  Rng rng(77);
  std::set<uint64_t> ids;
  for (int i = 0; i < 100000; ++i) ids.insert(sample_face_params(rng).identity_id);
  EXPECT_EQ(ids.size(), 100000u);
}

TEST(Face, ResolutionBelowMinimumIsAConfigError) {
  EXPECT_THROW(generate_face(plain_face(), kMinResolution - 1), ConfigError);
  EXPECT_NO_THROW(generate_face(plain_face(), kMinResolution));
}

TEST(Face, InvalidParamsAreRejected) {
  FaceParams p = plain_face();
  p.eye_size = 0.2;
  p.finalize();
  EXPECT_THROW(generate_face(p, 64), ConfigError);
}

TEST(DegradationSampling, FixedSeedRepeats) {
  Rng a(4), b(4);
  for (int i = 0; i < 100; ++i) {
    const auto x = sample_degradation(a), y = sample_degradation(b);
    ASSERT_EQ(x.sigma, y.sigma);
    ASSERT_EQ(x.scale, y.scale);
    ASSERT_EQ(x.delta, y.delta);
    ASSERT_EQ(x.quality, y.quality);
  }
}

TEST(DegradationSampling, HundredThousandDrawsStayInRanges) {
  Rng rng(5);
  for (int i = 0; i < 100000; ++i) {
    const auto d = sample_degradation(rng);
    ASSERT_TRUE(d.sigma >= 1 && d.sigma <= 15);
    ASSERT_TRUE(d.scale >= 1 && d.scale <= 30);
    ASSERT_TRUE(d.delta >= 0 && d.delta <= 20);
    ASSERT_TRUE(d.quality && *d.quality >= 30 && *d.quality <= 90);
    ASSERT_TRUE(d.in_sampling_range());
  }
}

TEST(DegradationSampling, FieldsPassChiSquareUniformity) {
  constexpr int kDraws = 100000;
  constexpr int kBins = 20;
  Rng rng(6);
  std::vector<int64_t> sigma(kBins), delta(kBins), scale(30), quality(61);
  for (int i = 0; i < kDraws; ++i) {
    const auto d = sample_degradation(rng);
    sigma[std::min(kBins - 1, static_cast<int>((d.sigma - 1) / 14 * kBins))]++;
    delta[std::min(kBins - 1, static_cast<int>(d.delta / 20 * kBins))]++;
    scale[d.scale - 1]++;
    quality[*d.quality - 30]++;
  }
  EXPECT_LT(chi_square(sigma, kDraws / double(kBins)), kChi2Df19);
  EXPECT_LT(chi_square(delta, kDraws / double(kBins)), kChi2Df19);
  EXPECT_LT(chi_square(scale, kDraws / 30.0), kChi2Df29);
  EXPECT_LT(chi_square(quality, kDraws / 61.0), kChi2Df60);
}

TEST(Degrade, IdentityConfigurationIsExact) {
  Rng rng(1);
  const Image hq = generate_face(plain_face(), 64);
  EXPECT_EQ(degrade(hq, DegradationParams::identity(), rng), hq);
}

TEST(Degrade, Scale30KeepsResolutionAndMatchesStagedOracle) {
  const Image hq = textured(64, 3);
  const DegradationParams d{2.0, 30, 0.0, std::nullopt};
  Rng rng(1);
  const Image out = degrade(hq, d, rng);
  EXPECT_EQ(out.height, 64);
  EXPECT_EQ(out.width, 64);
  // ceil(64 / 30) = 3 intermediate pixels per side.
  Image staged = resize_area(gaussian_blur(hq, 2.0), 3, 3);
  staged.clamp();
  staged = resize_bicubic(staged, 64, 64);
  staged.clamp();
  EXPECT_EQ(out, staged);
}

TEST(Degrade, ScaleAboveImageSizeIsDegenerate) {
  Rng rng(1);
  const Image small = textured(16, 1);
  EXPECT_THROW(degrade(small, DegradationParams{1.0, 17, 0.0, 90}, rng), DegenerateInputError);
  EXPECT_NO_THROW(degrade(small, DegradationParams{1.0, 16, 0.0, 90}, rng));
}

TEST(Degrade, OutOfRangeParamsAreConfigErrors) {
  Rng rng(1);
  const Image hq = textured(64, 1);
  EXPECT_THROW(degrade(hq, DegradationParams{16.0, 1, 0.0, 90}, rng), ConfigError);
  EXPECT_THROW(degrade(hq, DegradationParams{1.0, 1, 0.0, 20}, rng), ConfigError);
}

TEST(Degrade, MirrorEquivariantForSymmetricLosslessSettings) {
  for (double sigma : {0.0, 1.0, 3.5, 15.0}) {
    const Image hq = textured(64, 8);
    const DegradationParams d{sigma, 1, 0.0, std::nullopt};
    Rng r1(1), r2(1);
    EXPECT_EQ(degrade(mirror_horizontal(hq), d, r1), mirror_horizontal(degrade(hq, d, r2))) << "sigma=" << sigma;
  }
}

TEST(Degrade, PureFunctionOfImageParamsAndSeed) {
  const Image hq = textured(64, 2);
  const DegradationParams d{4.0, 3, 12.0, 55};
  Rng a(17), b(17), c(18);
  const Image x = degrade(hq, d, a);
  EXPECT_EQ(x, degrade(hq, d, b));
  EXPECT_NE(x, degrade(hq, d, c));
  EXPECT_EQ(hq, textured(64, 2));
  for (float v : x.data) ASSERT_TRUE(v >= 0.0f && v <= 1.0f);
}

// Measured once on this renderer and frozen.
TEST(Degrade, MildestDegradationPsnrRegression) {
  constexpr double kPinned = 26.0614;
  Rng faces(100);
  double total = 0;
  for (int i = 0; i < 100; ++i) {
    const Image hq = generate_face(sample_face_params(faces), 64);
    Rng rng(i);
    total += psnr(degrade(hq, DegradationParams{1.0, 1, 0.0, 90}, rng), hq);
  }
  EXPECT_NEAR(total / 100, kPinned, 1e-3);
}

// Baseline JPEG quantizes the DC term, so a flat field stays flat at any
// quality but only high qualities reproduce its level.
TEST(Jpeg, FlatFieldStaysFlatAtAnyQuality) {
  for (float level : {0.0f, 0.25f, 0.5f, 0.8f, 1.0f})
    for (int q : {1, 30, 60, 90, 100}) {
      Image flat(64, 64, level);
      for (int i = 0; i < 64 * 64; ++i) flat.data[3 * i + 1] = 1.0f - level;
      const Image out = jpeg_round_trip(flat, q);
      for (int c = 0; c < 3; ++c)
        for (int i = 0; i < 64 * 64; ++i) ASSERT_EQ(out.data[3 * i + c], out.data[c]) << level << " q=" << q;
    }
}

TEST(Jpeg, FlatGrayFieldIsNearLosslessAtHighQuality) {
  for (int level = 0; level < 256; ++level)
    for (int q : {90, 95, 100}) {
      const Image flat(64, 64, level / 255.0f);
      ASSERT_GE(psnr(jpeg_round_trip(flat, q), flat), 50.0) << level << " q=" << q;
    }
}

TEST(Jpeg, HigherQualityCostsBytesAndImprovesPsnr) {
  const Image img = textured(64, 12);
  EXPECT_GE(jpeg_encode(img, 90).size(), jpeg_encode(img, 30).size());
  EXPECT_GE(psnr(jpeg_round_trip(img, 90), img), psnr(jpeg_round_trip(img, 30), img));
}

TEST(Jpeg, DecodedValuesStayInUnitRangeAndRepeat) {
  Image img = textured(48, 13);
  for (auto& v : img.data) v = v > 0.5f ? 1.0f : 0.0f;
  const Image out = jpeg_round_trip(img, 30);
  for (float v : out.data) ASSERT_TRUE(v >= 0.0f && v <= 1.0f);
  EXPECT_EQ(out, jpeg_round_trip(img, 30));
}

}  // namespace
}  // namespace midstate
