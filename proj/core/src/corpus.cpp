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

#include "midstate/corpus.hpp"

#include <cstdio>
#include <fstream>
#include <unordered_set>

#include "midstate/errors.hpp"
#include "midstate/report.hpp"

#include "fs_util.hpp"

namespace midstate {

void to_json(nlohmann::json& j, const FaceParams& p) {
  j = {{"skin_hue", p.skin_hue},
       {"hair_hue", p.hair_hue},
       {"head_aspect", p.head_aspect},
       {"eye_distance", p.eye_distance},
       {"eye_size", p.eye_size},
       {"mouth_curve", p.mouth_curve},
       {"has_glasses", p.has_glasses},
       {"background_hue", p.background_hue},
       {"identity_id", p.identity_id}};
}

void from_json(const nlohmann::json& j, FaceParams& p) {
  j.at("skin_hue").get_to(p.skin_hue);
  j.at("hair_hue").get_to(p.hair_hue);
  j.at("head_aspect").get_to(p.head_aspect);
  j.at("eye_distance").get_to(p.eye_distance);
  j.at("eye_size").get_to(p.eye_size);
  j.at("mouth_curve").get_to(p.mouth_curve);
  j.at("has_glasses").get_to(p.has_glasses);
  j.at("background_hue").get_to(p.background_hue);
  j.at("identity_id").get_to(p.identity_id);
}

void to_json(nlohmann::json& j, const DegradationParams& p) {
  j = {{"sigma", p.sigma}, {"scale", p.scale}, {"delta", p.delta}};
  j["quality"] = p.quality ? nlohmann::json(*p.quality) : nlohmann::json(nullptr);
}

void from_json(const nlohmann::json& j, DegradationParams& p) {
  j.at("sigma").get_to(p.sigma);
  j.at("scale").get_to(p.scale);
  j.at("delta").get_to(p.delta);
  if (j.at("quality").is_null()) p.quality.reset();
  else p.quality = j.at("quality").get<int>();
}

std::vector<FaceParams> sample_faces(int n, Rng& rng) {
  std::vector<FaceParams> out;
  std::unordered_set<uint64_t> seen;
  while (static_cast<int>(out.size()) < n) {
    auto p = sample_face_params(rng);
    if (seen.insert(p.identity_id).second) out.push_back(p);
  }
  return out;
}

PairSet make_pairs(int n, int resolution, const Rng& rng) {
  PairSet out;
  Rng faces = rng.child("faces");
  Rng degradation = rng.child("degradation");
  const Rng noise = rng.child("noise");
  out.params = sample_faces(n, faces);
  for (int i = 0; i < n; ++i) {
    out.hq.push_back(generate_face(out.params[i], resolution));
    out.degradations.push_back(sample_degradation(degradation));
    Rng r = noise.child(static_cast<uint64_t>(i));
    out.lq.push_back(degrade(out.hq.back(), out.degradations.back(), r));
  }
  return out;
}

std::vector<Image> degrade_batch(const std::vector<const Image*>& hq, Rng& rng,
                                 std::vector<DegradationParams>* used) {
  std::vector<Image> out;
  for (const Image* img : hq) {
    const auto d = sample_degradation(rng);
    out.push_back(degrade(*img, d, rng));
    if (used) used->push_back(d);
  }
  return out;
}

void write_corpus(const std::filesystem::path& dir, const PairSet& pairs) {
  detail::ensure_directory(dir / "hq");
  const bool with_lq = !pairs.lq.empty();
  if (with_lq) detail::ensure_directory(dir / "lq");
  std::string manifest;
  for (size_t i = 0; i < pairs.size(); ++i) {
    char name[32];
    std::snprintf(name, sizeof(name), "%05zu.png", i);
    nlohmann::json rec = {{"identity_id", pairs.params[i].identity_id},
                          {"params", pairs.params[i]},
                          {"hq", std::string("hq/") + name}};
    write_png(dir / "hq" / name, pairs.hq[i]);
    if (with_lq) {
      rec["degradation"] = pairs.degradations[i];
      rec["lq"] = std::string("lq/") + name;
      write_png(dir / "lq" / name, pairs.lq[i]);
    }
    manifest += rec.dump() + "\n";
  }
  write_text(dir / "manifest.jsonl", manifest);
}

PairSet read_corpus(const std::filesystem::path& dir) {
  const auto path = dir / "manifest.jsonl";
  std::ifstream in(path);
  if (!in) throw InputError("cannot read corpus manifest " + path.string());
  PairSet out;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    try {
      const auto rec = nlohmann::json::parse(line);
      auto params = rec.at("params").get<FaceParams>();
      params.validate();
      out.params.push_back(params);
      out.hq.push_back(read_png(dir / rec.at("hq").get<std::string>()));
      if (rec.contains("lq")) {
        out.degradations.push_back(rec.at("degradation").get<DegradationParams>());
        out.lq.push_back(read_png(dir / rec.at("lq").get<std::string>()));
      }
    } catch (const nlohmann::json::exception& e) {
      throw InputError(path.string() + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
  if (!out.lq.empty() && out.lq.size() != out.hq.size())
    throw InputError(path.string() + ": some records lack an LQ image");
  return out;
}

}  // namespace midstate
