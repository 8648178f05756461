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

#include <nlohmann/json.hpp>

#include <filesystem>
#include <vector>

#include "midstate/degradation.hpp"
#include "midstate/face.hpp"

namespace midstate {

void to_json(nlohmann::json& j, const FaceParams& p);
void from_json(const nlohmann::json& j, FaceParams& p);
void to_json(nlohmann::json& j, const DegradationParams& p);
void from_json(const nlohmann::json& j, DegradationParams& p);

/// HQ faces with one sampled degradation each.
struct PairSet {
  std::vector<FaceParams> params;
  std::vector<DegradationParams> degradations;
  std::vector<Image> hq, lq;

  size_t size() const { return hq.size(); }
};

/// Draws `n` faces with distinct identity ids.
std::vector<FaceParams> sample_faces(int n, Rng& rng);

/// Faces from rng.child("faces"), degradation parameters from
/// rng.child("degradation") and per-image noise from rng.child("noise").
PairSet make_pairs(int n, int resolution, const Rng& rng);

/// Degrades `hq` with freshly sampled parameters; used for training batches.
std::vector<Image> degrade_batch(const std::vector<const Image*>& hq, Rng& rng,
                                 std::vector<DegradationParams>* used = nullptr);

/// Writes hq/NNNNN.png, lq/NNNNN.png (when present) and manifest.jsonl with
/// one record {identity_id, params, hq, degradation, lq} per line.
void write_corpus(const std::filesystem::path& dir, const PairSet& pairs);
PairSet read_corpus(const std::filesystem::path& dir);

}  // namespace midstate
