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

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <set>

#include "midstate/checkpoint.hpp"
#include "midstate/config.hpp"
#include "midstate/corpus.hpp"
#include "midstate/errors.hpp"
#include "midstate/pipeline.hpp"
#include "midstate/report.hpp"

namespace midstate {
namespace {

namespace fs = std::filesystem;

class TempDir {
 public:
  TempDir() {
    path_ = fs::temp_directory_path() /
            ("midstate-test-" + std::to_string(::getpid()) + "-" + std::to_string(counter_++));
    fs::remove_all(path_);
    fs::create_directories(path_);
  }
  ~TempDir() { fs::remove_all(path_); }
  const fs::path& path() const { return path_; }

 private:
  static inline int counter_ = 0;
  fs::path path_;
};

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

void spit(const fs::path& p, const std::string& bytes) {
  std::ofstream out(p, std::ios::binary | std::ios::trunc);
  out << bytes;
}

Checkpoint sample_checkpoint() {
  Checkpoint c;
  c.manifest["kind"] = "test";
  c.manifest["note"] = {{"depth", 3}};
  Rng rng(1);
  c.tensors["a.f32"] = rng.randn({3, 4});
  c.tensors["b.f64"] = rng.randn({2, 2, 2}, torch::kDouble);
  c.tensors["c.i64"] = rng.randint(-50, 50, {7});
  c.tensors["d.scalar"] = torch::tensor(2.5);
  return c;
}

TEST(Checkpoint, RoundTripIsBitExact) {
  TempDir dir;
  const auto c = sample_checkpoint();
  save_checkpoint(dir.path() / "x.ckpt", c);
  const auto back = load_checkpoint(dir.path() / "x.ckpt");
  EXPECT_EQ(back.manifest.at("kind"), "test");
  EXPECT_EQ(back.manifest.at("note").at("depth"), 3);
  ASSERT_EQ(back.tensors.size(), c.tensors.size());
  for (const auto& [name, t] : c.tensors) {
    const auto& u = back.tensors.at(name);
    EXPECT_EQ(u.scalar_type(), t.scalar_type()) << name;
    EXPECT_TRUE(torch::equal(u, t)) << name;
  }
  EXPECT_FALSE(fs::exists(dir.path() / "x.ckpt.tmp"));
}

TEST(Checkpoint, ModuleRoundTripPreservesChecksum) {
  TempDir dir;
  torch::manual_seed(3);
  UNetConfig cfg;
  cfg.base_channels = 8;
  cfg.groups = 4;
  UNet a(cfg), b(cfg);
  Checkpoint c;
  put_module(c, "unet", *a);
  save_checkpoint(dir.path() / "m.ckpt", c);
  EXPECT_NE(module_checksum(*a), module_checksum(*b));
  get_module(load_checkpoint(dir.path() / "m.ckpt"), "unet", *b);
  EXPECT_EQ(module_checksum(*a), module_checksum(*b));
  EXPECT_EQ(hex64(module_checksum(*a)).size(), 16u);
}

TEST(Checkpoint, MissingOrMismatchedTensorsAreLoadErrors) {
  torch::manual_seed(4);
  Checkpoint c;
  put_module(c, "ae", *Autoencoder(AutoencoderConfig{3, 8, 4}));
  Autoencoder other(AutoencoderConfig{3, 4, 4});
  EXPECT_THROW(get_module(c, "ae", *other), LoadError);
  Autoencoder same(AutoencoderConfig{3, 8, 4});
  EXPECT_THROW(get_module(c, "vae", *same), LoadError);
  EXPECT_NO_THROW(get_module(c, "ae", *same));
}

TEST(Checkpoint, DamagedFilesRaiseTypedErrors) {
  TempDir dir;
  const auto good = dir.path() / "g.ckpt";
  save_checkpoint(good, sample_checkpoint());
  const std::string bytes = slurp(good);
  EXPECT_THROW(load_checkpoint(dir.path() / "missing.ckpt"), LoadError);

  const auto truncated = dir.path() / "t.ckpt";
  for (size_t keep : {size_t{0}, size_t{10}, size_t{40}, bytes.size() - 1}) {
    spit(truncated, bytes.substr(0, keep));
    EXPECT_THROW(load_checkpoint(truncated), CorruptionError) << keep;
  }
  std::string flipped = bytes;
  flipped[flipped.size() - 3] ^= 0x40;
  spit(dir.path() / "f.ckpt", flipped);
  EXPECT_THROW(load_checkpoint(dir.path() / "f.ckpt"), CorruptionError);

  std::string magic = bytes;
  magic[0] = 'X';
  spit(dir.path() / "m.ckpt", magic);
  EXPECT_THROW(load_checkpoint(dir.path() / "m.ckpt"), CorruptionError);

  std::string version = bytes;
  version[8] = static_cast<char>(kCheckpointVersion + 1);
  spit(dir.path() / "v.ckpt", version);
  EXPECT_THROW(load_checkpoint(dir.path() / "v.ckpt"), MigrationError);
}

TEST(Checkpoint, UnwritableTargetIsAnIoError) {
  EXPECT_THROW(save_checkpoint("/proc/definitely/not/here.ckpt", sample_checkpoint()), IoError);
}

TEST(RunConfig, TextRoundTripAndKeys) {
  RunConfig c;
  c.set("run.seed", "42");
  c.set("teacher.lr", "0.00025");
  c.set("restorer.conditioning", "attribute");
  c.set("restorer.spatial_injection", "false");
  c.set("sampler.taus", "1000,760,500,260");
  const auto back = RunConfig::from_text(c.to_text());
  EXPECT_EQ(back.to_text(), c.to_text());
  EXPECT_EQ(back.seed, 42u);
  EXPECT_EQ(back.teacher.lr, 0.00025);
  EXPECT_EQ(back.restorer_config.conditioning, Conditioning::kAttribute);
  EXPECT_FALSE(back.restorer_config.spatial_injection);
  const auto keys = RunConfig::keys();
  EXPECT_EQ(std::set<std::string>(keys.begin(), keys.end()).size(), keys.size());
  for (const auto& k : keys) EXPECT_EQ(back.get(k), c.get(k)) << k;
}

TEST(RunConfig, CommentsOverridesAndErrors) {
  const auto c = RunConfig::from_text("# toy\n\nrun.seed = 9  \n data.resolution=32\n");
  EXPECT_EQ(c.seed, 9u);
  EXPECT_EQ(c.resolution, 32);
  try {
    RunConfig::from_text("run.seed = 1\nbogus.key = 3\n");
    FAIL() << "expected ConfigError";
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("line 2"), std::string::npos) << e.what();
  }
  RunConfig d;
  EXPECT_THROW(d.set("teacher.iters", "many"), ConfigError);
  EXPECT_THROW(d.set("restorer.loss_mode", "l2"), ConfigError);
  EXPECT_THROW(apply_override(d, "no-equals-sign"), ConfigError);
  apply_override(d, "distill.iters=12");
  EXPECT_EQ(d.distill.iters, 12);
  d.resolution = 31;
  EXPECT_THROW(d.validate(), ConfigError);
}

TEST(RunConfig, ResolvedRestorerTakesStageLearningRates) {
  RunConfig c;
  c.restorer.lr = 3e-4;
  c.disc_lr = 7e-5;
  const auto r = c.resolved_restorer();
  EXPECT_EQ(r.learning_rate, 3e-4);
  EXPECT_EQ(r.disc_learning_rate, 7e-5);
}

TEST(RunConfig, FileRoundTrip) {
  TempDir dir;
  RunConfig c;
  c.eval_size = 17;
  c.save(dir.path() / "run.conf");
  EXPECT_EQ(RunConfig::load(dir.path() / "run.conf").eval_size, 17);
  EXPECT_THROW(RunConfig::load(dir.path() / "absent.conf"), IoError);
}

TEST(CsvTable, FixedColumnOrderAndValidation) {
  CsvTable t({"b", "a", "c"});
  EXPECT_EQ(t.to_string(), "b,a,c\n");
  t.add_row({{"c", "3"}, {"a", "1"}, {"b", "2"}});
  t.add_row({{"a", CsvTable::cell(0.5)}, {"b", CsvTable::cell(1.0 / 3)}, {"c", "x"}});
  EXPECT_EQ(t.to_string(), "b,a,c\n2,1,3\n0.333333,0.500000,x\n");
  EXPECT_THROW(t.add_row({{"a", "1"}, {"b", "2"}}), InputError);
  EXPECT_THROW(t.add_row({{"a", "1"}, {"b", "2"}, {"c", "3"}, {"d", "4"}}), InputError);
  EXPECT_EQ(t.rows(), 2u);
}

TEST(CsvTable, EmptyTableWritesHeaderOnly) {
  TempDir dir;
  CsvTable({"x", "y"}).write(dir.path() / "e.csv");
  EXPECT_EQ(slurp(dir.path() / "e.csv"), "x,y\n");
}

TEST(Grid, DimensionsAreRowsAndColumnsTimesSide) {
  TempDir dir;
  const Image cell(16, 16, 0.5f);
  const std::vector<std::vector<Image>> cells{{cell, cell, cell}, {cell, cell, cell}};
  const Image g = make_grid(cells);
  EXPECT_EQ(g.height, 32);
  EXPECT_EQ(g.width, 48);
  write_grid(dir.path() / "g.png", cells);
  const Image back = read_png(dir.path() / "g.png");
  EXPECT_EQ(back.height, 32);
  EXPECT_EQ(back.width, 48);
}

TEST(Report, JsonAndTextWrites) {
  TempDir dir;
  write_json(dir.path() / "r.json", {{"psnr", 30.5}, {"rows", {1, 2}}});
  EXPECT_EQ(read_json(dir.path() / "r.json").at("psnr"), 30.5);
  EXPECT_THROW(write_text("/proc/definitely/not/here.txt", "x"), IoError);
}

TEST(Png, RoundTripOfEightBitValuesIsExact) {
  TempDir dir;
  Image img(8, 8);
  for (size_t i = 0; i < img.size(); ++i) img.data[i] = static_cast<float>(i % 256) / 255.0f;
  write_png(dir.path() / "p.png", img);
  EXPECT_EQ(read_png(dir.path() / "p.png"), img);
  EXPECT_THROW(read_png(dir.path() / "absent.png"), IoError);
}

TEST(Corpus, PairsAreDeterministicAndWithinRanges) {
  const auto a = make_pairs(12, 32, Rng(5));
  const auto b = make_pairs(12, 32, Rng(5));
  ASSERT_EQ(a.size(), 12u);
  std::set<uint64_t> ids;
  for (size_t i = 0; i < a.size(); ++i) {
    EXPECT_EQ(a.hq[i], b.hq[i]);
    EXPECT_EQ(a.lq[i], b.lq[i]);
    EXPECT_TRUE(a.degradations[i].in_sampling_range());
    EXPECT_EQ(a.lq[i].height, 32);
    ids.insert(a.params[i].identity_id);
  }
  EXPECT_EQ(ids.size(), 12u);
}

TEST(Corpus, WriteReadRoundTrip) {
  TempDir dir;
  const auto pairs = make_pairs(5, 32, Rng(6));
  write_corpus(dir.path(), pairs);
  EXPECT_TRUE(fs::exists(dir.path() / "manifest.jsonl"));
  const auto back = read_corpus(dir.path());
  ASSERT_EQ(back.size(), 5u);
  for (size_t i = 0; i < 5; ++i) {
    EXPECT_EQ(back.params[i].identity_id, pairs.params[i].identity_id);
    EXPECT_EQ(back.degradations[i].quality, pairs.degradations[i].quality);
    EXPECT_EQ(back.degradations[i].sigma, pairs.degradations[i].sigma);
    // PNG storage quantizes to 8 bits.
    for (size_t k = 0; k < back.hq[i].size(); ++k)
      ASSERT_LE(std::abs(back.hq[i].data[k] - pairs.hq[i].data[k]), 0.5f / 255 + 1e-6f);
  }
}

TEST(Stack, SaveLoadPreservesModulesAndLineage) {
  TempDir dir;
  RunConfig cfg;
  cfg.resolution = 32;
  cfg.ae_channels = 4;
  cfg.classifier_channels = 2;
  cfg.unet_channels = 8;
  auto stack = make_stack(cfg);
  stack.lineage["note"] = "unit";
  save_stack(dir.path() / "s.ckpt", stack);
  const auto back = load_stack(dir.path() / "s.ckpt");
  EXPECT_EQ(back.resolution, 32);
  EXPECT_EQ(back.sequence, stack.sequence);
  EXPECT_EQ(back.unet_config, stack.unet_config);
  EXPECT_EQ(module_checksum(*back.teacher), module_checksum(*stack.teacher));
  EXPECT_EQ(module_checksum(*back.autoencoder), module_checksum(*stack.autoencoder));
  EXPECT_EQ(back.autoencoder->latent_scale(), stack.autoencoder->latent_scale());
  EXPECT_EQ(back.lineage.at("note"), "unit");
  EXPECT_FALSE(back.distilled());
}

}  // namespace
}  // namespace midstate
