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
#include <torch/torch.h>

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>

namespace midstate {

/// Single-file container:
///
///   offset  size  field
///   0       8     magic "MIDSTCK\0"
///   8       4     format version (u32)
///   12      8     manifest length in bytes (u64)
///   20      8     payload length in bytes (u64)
///   28      8     FNV-1a 64 over manifest and payload bytes (u64)
///   36      ...   manifest (UTF-8 JSON), then payload
///
/// All integers and tensor elements are little-endian. The manifest's
/// "tensors" array lists name, dtype (f32, f64, i64), shape, offset and
/// byte length of each blob relative to the payload start.
inline constexpr uint32_t kCheckpointVersion = 1;

struct Checkpoint {
  nlohmann::json manifest = nlohmann::json::object();
  std::map<std::string, torch::Tensor> tensors;
};

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& checkpoint);
/// Throws LoadError when the file is missing, CorruptionError on a bad
/// magic, truncation or checksum mismatch, MigrationError on a version
/// mismatch.
Checkpoint load_checkpoint(const std::filesystem::path& path);

/// Stores every parameter and buffer as "<prefix>.<name>".
void put_module(Checkpoint& checkpoint, const std::string& prefix, const torch::nn::Module& module);
/// Copies stored tensors into an existing module; throws LoadError on a
/// missing name or a shape mismatch.
void get_module(const Checkpoint& checkpoint, const std::string& prefix, torch::nn::Module& module);

/// FNV-1a over parameter and buffer names and bytes, in registration order.
uint64_t module_checksum(const torch::nn::Module& module);
std::string hex64(uint64_t value);

}  // namespace midstate
