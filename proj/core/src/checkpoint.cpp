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

#include "midstate/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>
#include <vector>

#include "midstate/errors.hpp"
#include "midstate/rng.hpp"

#include "fs_util.hpp"

namespace midstate {

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes a little-endian host");

namespace {

constexpr char kMagic[8] = {'M', 'I', 'D', 'S', 'T', 'C', 'K', '\0'};
constexpr size_t kHeaderSize = 36;

std::string dtype_name(torch::ScalarType t) {
  switch (t) {
    case torch::kFloat: return "f32";
    case torch::kDouble: return "f64";
    case torch::kLong: return "i64";
    default: throw IoError(std::string("unsupported tensor dtype ") + c10::toString(t));
  }
}

torch::ScalarType parse_dtype(const std::string& s) {
  if (s == "f32") return torch::kFloat;
  if (s == "f64") return torch::kDouble;
  if (s == "i64") return torch::kLong;
  throw CorruptionError("unknown tensor dtype '" + s + "'");
}

template <class T>
void put_le(std::vector<char>& out, T v) {
  char buf[sizeof(T)];
  std::memcpy(buf, &v, sizeof(T));
  out.insert(out.end(), buf, buf + sizeof(T));
}

template <class T>
T get_le(const char* p) {
  T v;
  std::memcpy(&v, p, sizeof(T));
  return v;
}

}  // namespace

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& checkpoint) {
  nlohmann::json manifest = checkpoint.manifest;
  manifest["tensors"] = nlohmann::json::array();
  std::vector<char> payload;
  for (const auto& [name, tensor] : checkpoint.tensors) {
    const auto t = tensor.detach().cpu().contiguous();
    const auto bytes = static_cast<size_t>(t.numel()) * t.element_size();
    manifest["tensors"].push_back({{"name", name},
                                   {"dtype", dtype_name(t.scalar_type())},
                                   {"shape", t.sizes().vec()},
                                   {"offset", payload.size()},
                                   {"bytes", bytes}});
    const auto* p = static_cast<const char*>(t.data_ptr());
    payload.insert(payload.end(), p, p + bytes);
  }
  const std::string text = manifest.dump();
  uint64_t checksum = fnv1a64(text.data(), text.size());
  checksum = fnv1a64(payload.data(), payload.size(), checksum);

  std::vector<char> header(kMagic, kMagic + sizeof(kMagic));
  put_le<uint32_t>(header, kCheckpointVersion);
  put_le<uint64_t>(header, text.size());
  put_le<uint64_t>(header, payload.size());
  put_le<uint64_t>(header, checksum);

  detail::ensure_parent(path);
  const auto tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write " + tmp);
    out.write(header.data(), static_cast<std::streamsize>(header.size()));
    out.write(text.data(), static_cast<std::streamsize>(text.size()));
    out.write(payload.data(), static_cast<std::streamsize>(payload.size()));
    if (!out) throw IoError("short write to " + tmp);
  }
  std::filesystem::rename(tmp, path);
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw LoadError("cannot open checkpoint " + path.string());
  const std::vector<char> data((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (data.size() < kHeaderSize) throw CorruptionError("checkpoint " + path.string() + " is truncated");
  if (std::memcmp(data.data(), kMagic, sizeof(kMagic)) != 0)
    throw CorruptionError(path.string() + " is not a checkpoint");
  const auto version = get_le<uint32_t>(data.data() + 8);
  if (version != kCheckpointVersion)
    throw MigrationError("checkpoint format version " + std::to_string(version) + ", expected " +
                         std::to_string(kCheckpointVersion));
  const auto manifest_len = get_le<uint64_t>(data.data() + 12);
  const auto payload_len = get_le<uint64_t>(data.data() + 20);
  const auto checksum = get_le<uint64_t>(data.data() + 28);
  if (manifest_len > data.size() || payload_len > data.size() ||
      kHeaderSize + manifest_len + payload_len != data.size())
    throw CorruptionError("checkpoint " + path.string() + " is truncated or has trailing bytes");
  const char* manifest_ptr = data.data() + kHeaderSize;
  const char* payload = manifest_ptr + manifest_len;
  uint64_t actual = fnv1a64(manifest_ptr, manifest_len);
  actual = fnv1a64(payload, payload_len, actual);
  if (actual != checksum) throw CorruptionError("checkpoint " + path.string() + " fails its checksum");

  Checkpoint out;
  try {
    out.manifest = nlohmann::json::parse(manifest_ptr, manifest_ptr + manifest_len);
    for (const auto& entry : out.manifest.at("tensors")) {
      const auto dtype = parse_dtype(entry.at("dtype").get<std::string>());
      const auto shape = entry.at("shape").get<std::vector<int64_t>>();
      const auto offset = entry.at("offset").get<uint64_t>();
      const auto bytes = entry.at("bytes").get<uint64_t>();
      auto t = torch::empty(shape, torch::TensorOptions().dtype(dtype));
      if (offset + bytes > payload_len || bytes != static_cast<uint64_t>(t.numel()) * t.element_size())
        throw CorruptionError("tensor blob out of bounds");
      std::memcpy(t.data_ptr(), payload + offset, bytes);
      out.tensors.emplace(entry.at("name").get<std::string>(), std::move(t));
    }
  } catch (const nlohmann::json::exception& e) {
    throw CorruptionError("checkpoint manifest is malformed: " + std::string(e.what()));
  }
  out.manifest.erase("tensors");
  return out;
}

void put_module(Checkpoint& checkpoint, const std::string& prefix, const torch::nn::Module& module) {
  for (const auto& item : module.named_parameters(true)) checkpoint.tensors[prefix + "." + item.key()] = item.value();
  for (const auto& item : module.named_buffers(true)) checkpoint.tensors[prefix + "." + item.key()] = item.value();
}

void get_module(const Checkpoint& checkpoint, const std::string& prefix, torch::nn::Module& module) {
  torch::NoGradGuard guard;
  auto copy = [&](const std::string& key, torch::Tensor& dst) {
    const auto it = checkpoint.tensors.find(prefix + "." + key);
    if (it == checkpoint.tensors.end()) throw LoadError("checkpoint lacks tensor " + prefix + "." + key);
    if (it->second.sizes() != dst.sizes()) throw LoadError("shape mismatch for " + prefix + "." + key);
    dst.copy_(it->second);
  };
  for (auto& item : module.named_parameters(true)) copy(item.key(), item.value());
  for (auto& item : module.named_buffers(true)) copy(item.key(), item.value());
}

uint64_t module_checksum(const torch::nn::Module& module) {
  uint64_t h = fnv1a64(nullptr, 0);
  auto add = [&](const std::string& name, const torch::Tensor& value) {
    h = fnv1a64(name.data(), name.size(), h);
    const auto t = value.detach().cpu().contiguous();
    h = fnv1a64(t.data_ptr(), static_cast<size_t>(t.numel()) * t.element_size(), h);
  };
  for (const auto& item : module.named_parameters(true)) add(item.key(), item.value());
  for (const auto& item : module.named_buffers(true)) add(item.key(), item.value());
  return h;
}

std::string hex64(uint64_t value) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(value));
  return buf;
}

}  // namespace midstate
