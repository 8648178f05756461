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

#include "midstate/metrics.hpp"

#include <algorithm>
#include <cmath>

#include "midstate/errors.hpp"

namespace midstate {

namespace {

void require_same_shape(const Image& a, const Image& b) {
  if (a.height != b.height || a.width != b.width || a.size() != b.size())
    throw InputError("image shapes differ: " + std::to_string(a.height) + "x" + std::to_string(a.width) + " vs " +
                     std::to_string(b.height) + "x" + std::to_string(b.width));
}

std::vector<double> luma(const Image& img) {
  std::vector<double> y(static_cast<size_t>(img.height) * img.width);
  for (int r = 0; r < img.height; ++r)
    for (int c = 0; c < img.width; ++c)
      y[static_cast<size_t>(r) * img.width + c] =
          0.299 * img.at(r, c, 0) + 0.587 * img.at(r, c, 1) + 0.114 * img.at(r, c, 2);
  return y;
}

// Valid-region separable filter.
std::vector<double> filter_valid(const std::vector<double>& src, int h, int w, const std::vector<double>& k) {
  const int n = static_cast<int>(k.size());
  const int oh = h - n + 1, ow = w - n + 1;
  std::vector<double> tmp(static_cast<size_t>(h) * ow), out(static_cast<size_t>(oh) * ow);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < ow; ++x) {
      double s = 0;
      for (int i = 0; i < n; ++i) s += k[i] * src[static_cast<size_t>(y) * w + x + i];
      tmp[static_cast<size_t>(y) * ow + x] = s;
    }
  for (int y = 0; y < oh; ++y)
    for (int x = 0; x < ow; ++x) {
      double s = 0;
      for (int i = 0; i < n; ++i) s += k[i] * tmp[static_cast<size_t>(y + i) * ow + x];
      out[static_cast<size_t>(y) * ow + x] = s;
    }
  return out;
}

torch::Tensor batch_of(const Image& img, AttributeClassifier& classifier) {
  const auto dtype = classifier->parameters().front().scalar_type();
  return to_tensor(img).unsqueeze(0).to(dtype);
}

}  // namespace

double psnr_from_mse(double mse) {
  if (mse <= 0) return kPsnrCap;
  return std::min(kPsnrCap, 10.0 * std::log10(1.0 / mse));
}

double psnr(const Image& a, const Image& b) {
  require_same_shape(a, b);
  double se = 0;
  for (size_t i = 0; i < a.size(); ++i) {
    const double d = static_cast<double>(a.data[i]) - b.data[i];
    se += d * d;
  }
  return psnr_from_mse(se / static_cast<double>(a.size()));
}

double ssim(const Image& a, const Image& b, const SsimParams& p) {
  require_same_shape(a, b);
  if (a.height < p.window || a.width < p.window) throw InputError("image smaller than the SSIM window");
  std::vector<double> k(p.window);
  double total = 0;
  for (int i = 0; i < p.window; ++i) {
    const double d = i - (p.window - 1) / 2.0;
    k[i] = std::exp(-d * d / (2 * p.sigma * p.sigma));
    total += k[i];
  }
  for (auto& v : k) v /= total;

  const auto ya = luma(a), yb = luma(b);
  std::vector<double> aa(ya.size()), bb(ya.size()), ab(ya.size());
  for (size_t i = 0; i < ya.size(); ++i) {
    aa[i] = ya[i] * ya[i];
    bb[i] = yb[i] * yb[i];
    ab[i] = ya[i] * yb[i];
  }
  const int h = a.height, w = a.width;
  const auto mu_a = filter_valid(ya, h, w, k), mu_b = filter_valid(yb, h, w, k);
  const auto s_aa = filter_valid(aa, h, w, k), s_bb = filter_valid(bb, h, w, k), s_ab = filter_valid(ab, h, w, k);
  const double c1 = p.k1 * p.k1, c2 = p.k2 * p.k2;
  double sum = 0;
  for (size_t i = 0; i < mu_a.size(); ++i) {
    const double va = s_aa[i] - mu_a[i] * mu_a[i];
    const double vb = s_bb[i] - mu_b[i] * mu_b[i];
    const double cov = s_ab[i] - mu_a[i] * mu_b[i];
    sum += (2 * mu_a[i] * mu_b[i] + c1) * (2 * cov + c2) /
           ((mu_a[i] * mu_a[i] + mu_b[i] * mu_b[i] + c1) * (va + vb + c2));
  }
  return sum / static_cast<double>(mu_a.size());
}

double hist_distance(const Image& a, const Image& b, int bins) {
  if (bins < 1) throw InputError("histogram needs at least one bin");
  auto hist = [bins](const Image& img, int c) {
    std::vector<double> h(bins, 0.0);
    const size_t n = static_cast<size_t>(img.height) * img.width;
    for (size_t i = 0; i < n; ++i) {
      const double v = std::clamp(static_cast<double>(img.data[i * Image::kChannels + c]), 0.0, 1.0);
      h[std::min(bins - 1, static_cast<int>(v * bins))] += 1.0;
    }
    for (auto& x : h) x /= static_cast<double>(n);
    return h;
  };
  if (a.empty() || b.empty()) throw InputError("histogram of an empty image");
  double total = 0;
  for (int c = 0; c < Image::kChannels; ++c) {
    const auto ha = hist(a, c), hb = hist(b, c);
    for (int i = 0; i < bins; ++i) total += std::abs(ha[i] - hb[i]);
  }
  return total / Image::kChannels;
}

double angle_degrees(const torch::Tensor& a, const torch::Tensor& b) {
  auto ua = a.to(torch::kDouble).flatten();
  auto ub = b.to(torch::kDouble).flatten();
  const double na = ua.norm().item<double>(), nb = ub.norm().item<double>();
  if (na == 0 || nb == 0) throw DegenerateInputError("angle of a zero vector");
  ua = ua / na;
  ub = ub / nb;
  const double diff = (ua - ub).norm().item<double>();
  const double sum = (ua + ub).norm().item<double>();
  return 2.0 * std::atan2(diff, sum) * 180.0 / M_PI;
}

double identity_distance(AttributeClassifier& classifier, const Image& a, const Image& b) {
  torch::NoGradGuard guard;
  return angle_degrees(classifier->forward(batch_of(a, classifier)), classifier->forward(batch_of(b, classifier)));
}

double feature_distance(AttributeClassifier& classifier, const Image& a, const Image& b) {
  torch::NoGradGuard guard;
  const auto fa = classifier->features(batch_of(a, classifier));
  const auto fb = classifier->features(batch_of(b, classifier));
  return ((fa.shallow - fb.shallow).pow(2).mean() + (fa.deep - fb.deep).pow(2).mean()).item<double>();
}

torch::Tensor extract_features(AttributeClassifier& classifier, std::span<const Image> images, int batch) {
  torch::NoGradGuard guard;
  const auto dtype = classifier->parameters().front().scalar_type();
  std::vector<torch::Tensor> rows;
  for (size_t i = 0; i < images.size(); i += batch) {
    const auto n = std::min<size_t>(batch, images.size() - i);
    rows.push_back(classifier->pooled(stack_images(images.subspan(i, n)).to(dtype)).to(torch::kDouble));
  }
  if (rows.empty()) return torch::zeros({0, 0}, torch::kDouble);
  return torch::cat(rows);
}

double frechet_distance(const torch::Tensor& a_in, const torch::Tensor& b_in, double eps) {
  if (a_in.dim() != 2 || b_in.dim() != 2 || a_in.size(1) != b_in.size(1))
    throw InputError("feature sets must be [n, m] with matching m");
  if (a_in.size(0) < 2 || b_in.size(0) < 2) throw InputError("feature sets need at least two rows");
  const auto a = a_in.to(torch::kDouble), b = b_in.to(torch::kDouble);
  const auto m = a.size(1);
  const auto eye = torch::eye(m, torch::kDouble) * eps;
  auto cov = [&](const torch::Tensor& x) {
    const auto centered = x - x.mean(0, true);
    return centered.t().mm(centered) / static_cast<double>(x.size(0) - 1) + eye;
  };
  const auto sa = cov(a), sb = cov(b);
  const auto [la, va] = torch::linalg_eigh(sa);
  const auto root_a = va.mm(torch::diag(la.clamp_min(0).sqrt())).mm(va.t());
  auto inner = root_a.mm(sb).mm(root_a);
  inner = (inner + inner.t()) / 2.0;
  const auto lam = std::get<0>(torch::linalg_eigh(inner)).clamp_min(0);
  const double mean_term = (a.mean(0) - b.mean(0)).pow(2).sum().item<double>();
  const double trace = (sa.trace() + sb.trace()).item<double>() - 2.0 * lam.sqrt().sum().item<double>();
  return std::max(0.0, mean_term + trace);
}

}  // namespace midstate
