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
#include <map>

#include "midstate/cli.hpp"
#include "midstate/face.hpp"
#include "midstate/image.hpp"

namespace midstate {
namespace {

namespace fs = std::filesystem;

fs::path fresh_dir(const std::string& name) {
  const auto p = fs::temp_directory_path() / ("midstate-cli-" + std::to_string(::getpid()) + "-" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

std::map<std::string, std::string> tree(const fs::path& root) {
  std::map<std::string, std::string> out;
  for (const auto& e : fs::recursive_directory_iterator(root))
    if (e.is_regular_file()) {
      std::ifstream in(e.path(), std::ios::binary);
      out[fs::relative(e.path(), root).string()] = {std::istreambuf_iterator<char>(in), {}};
    }
  return out;
}

class Cli : public ::testing::Test {
 protected:
  void TearDown() override { ::unsetenv("MIDSTATE_OUTPUT_ROOT"); }
};

TEST_F(Cli, HelpExitsZero) {
  ::testing::internal::CaptureStdout();
  EXPECT_EQ(cli::run({"--help"}), 0);
  const auto text = ::testing::internal::GetCapturedStdout();
  EXPECT_NE(text.find("toygen"), std::string::npos);
  EXPECT_NE(text.find("analyze"), std::string::npos);
}

TEST_F(Cli, MissingInputPathExitsOneAndNamesThePath) {
  const std::string missing = "/nonexistent/midstate/input.png";
  ::testing::internal::CaptureStderr();
  EXPECT_EQ(cli::run({"restore", "--input", missing}), 1);
  EXPECT_NE(::testing::internal::GetCapturedStderr().find(missing), std::string::npos);
}

TEST_F(Cli, UsageErrorsExitTwo) {
  ::testing::internal::CaptureStderr();
  EXPECT_EQ(cli::run({"no-such-command"}), 2);
  EXPECT_EQ(cli::run({"toygen", "--n", "zero"}), 2);
  EXPECT_EQ(cli::run({}), 2);
  ::testing::internal::GetCapturedStderr();
}

TEST_F(Cli, ToygenIsByteIdenticalUnderFixedSeed) {
  const auto a = fresh_dir("toygen-a"), b = fresh_dir("toygen-b");
  ::testing::internal::CaptureStderr();
  ::setenv("MIDSTATE_OUTPUT_ROOT", a.c_str(), 1);
  ASSERT_EQ(cli::run({"toygen", "--n", "10", "--seed", "7", "--out", "corpus"}), 0);
  ::setenv("MIDSTATE_OUTPUT_ROOT", b.c_str(), 1);
  ASSERT_EQ(cli::run({"toygen", "--n", "10", "--seed", "7", "--out", "corpus"}), 0);
  ::testing::internal::GetCapturedStderr();
  const auto ta = tree(a), tb = tree(b);
  EXPECT_EQ(ta.size(), 2u * 10 + 2);
  EXPECT_EQ(ta, tb);
  EXPECT_TRUE(ta.count("corpus/config.txt"));
  fs::remove_all(a);
  fs::remove_all(b);
}

TEST_F(Cli, DegradeLeavesInputsUntouched) {
  const auto dir = fresh_dir("degrade");
  FaceParams p;
  p.finalize();
  fs::create_directories(dir / "in");
  write_png(dir / "in" / "face.png", generate_face(p, 64));
  const auto before = tree(dir / "in");
  ::testing::internal::CaptureStderr();
  EXPECT_EQ(cli::run({"degrade", "--input", (dir / "in").string(), "--out", (dir / "out").string(), "--seed", "3"}),
            0);
  ::testing::internal::GetCapturedStderr();
  EXPECT_EQ(tree(dir / "in"), before);
  EXPECT_TRUE(fs::exists(dir / "out" / "face.png"));
  fs::remove_all(dir);
}

TEST_F(Cli, InvalidOverrideIsAConfigFailure) {
  ::testing::internal::CaptureStderr();
  EXPECT_EQ(cli::run({"toygen", "--n", "2", "--set", "bogus.key=1", "--out", fresh_dir("bad").string()}), 1);
  EXPECT_NE(::testing::internal::GetCapturedStderr().find("bogus.key"), std::string::npos);
}

}  // namespace
}  // namespace midstate
