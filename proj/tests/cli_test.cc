// Copyright 2026 The cmplan Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Runs the cmplan binary end to end.

#include <gtest/gtest.h>
#include <sys/wait.h>

#include <cstdlib>
#include <algorithm>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "json.hpp"

namespace {

namespace fs = std::filesystem;

class CliTest : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() /
           ("cmplan_cli_" + std::string(::testing::UnitTest::GetInstance()
                                            ->current_test_info()
                                            ->name()));
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }

  std::string P(const std::string& name) const { return (dir_ / name).string(); }

  // Returns the exit status; stdout and stderr go to log.txt.
  int Run(const std::string& args) const {
    const std::string cmd = std::string(CMPLAN_CLI_PATH) + " " + args + " > " +
                            P("log.txt") + " 2>&1";
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  }

  void GenData(const std::string& name, int n, int seed) const {
    ASSERT_EQ(Run("gen-data --n " + std::to_string(n) + " --seed " +
                  std::to_string(seed) + " --out " + P(name)),
              0)
        << Log();
  }

  void TrainTiny(const std::string& data, const std::string& out, int epochs,
                 const std::string& extra = "") const {
    ASSERT_EQ(Run("train --data " + P(data) + " --out " + P(out) +
                  " --epochs " + std::to_string(epochs) +
                  " --batch 4 --width 16 --blocks 1 --no-linear-skip --seed 3 " +
                  extra),
              0)
        << Log();
  }

  std::string Log() const { return Read(P("log.txt")); }

  static std::string Read(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    std::stringstream s;
    s << in.rdbuf();
    return s.str();
  }

  fs::path dir_;
};

TEST_F(CliTest, GenDataIsByteIdenticalForASeed) {
  GenData("a.bin", 5, 7);
  GenData("b.bin", 5, 7);
  GenData("c.bin", 5, 8);
  EXPECT_TRUE(Read(P("a.bin")) == Read(P("b.bin")));
  EXPECT_FALSE(Read(P("a.bin")) == Read(P("c.bin")));
  EXPECT_TRUE(fs::exists(P("a.bin.manifest.json")));
  const auto stats = nlohmann::json::parse(Read(P("a.bin.stats.json")));
  EXPECT_GT(stats.at("std")[0].get<double>(), 0.0);
  EXPECT_GT(stats.at("std")[1].get<double>(), 0.0);
}

TEST_F(CliTest, BadArgumentsExitWithTwo) {
  EXPECT_EQ(Run("gen-data --n 0 --out " + P("x.bin")), 2);
  EXPECT_EQ(Run("gen-data --out " + P("x.bin")), 2);
  EXPECT_EQ(Run("no-such-command"), 2);
  EXPECT_FALSE(fs::exists(P("x.bin")));
}

TEST_F(CliTest, TrainWritesLossLogAndResumes) {
  GenData("d.bin", 6, 1);
  TrainTiny("d.bin", "m.ckpt", 1);
  EXPECT_TRUE(fs::exists(P("m.ckpt")));
  const std::string log = Read(P("m.ckpt.loss.csv"));
  EXPECT_EQ(std::count(log.begin(), log.end(), '\n'), 2) << log;

  TrainTiny("d.bin", "straight.ckpt", 2);
  ASSERT_EQ(Run("train --data " + P("d.bin") + " --out " + P("resumed.ckpt") +
                " --epochs 2 --batch 4 --resume " + P("m.ckpt")),
            0)
      << Log();
  EXPECT_TRUE(Read(P("resumed.ckpt")) == Read(P("straight.ckpt")));
}

TEST_F(CliTest, EvaluateIsRepeatable) {
  GenData("d.bin", 6, 1);
  GenData("t.bin", 3, 2);
  TrainTiny("d.bin", "m.ckpt", 1);
  for (const char* out : {"e1.csv", "e2.csv"}) {
    ASSERT_EQ(Run("evaluate --ckpt " + P("m.ckpt") + " --data " + P("t.bin") +
                  " --out " + P(out) + " --k 2 --seed 5 --guidance alternating"),
              0)
        << Log();
  }
  const std::string csv = Read(P("e1.csv"));
  EXPECT_EQ(csv, Read(P("e2.csv")));
  EXPECT_EQ(csv.rfind("method,min_ade,min_fde,", 0), 0u) << csv;
  EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 2);
  EXPECT_EQ(csv.find("wall"), std::string::npos);
}

TEST_F(CliTest, DdpmCheckpointSamplesWithBothSamplers) {
  GenData("d.bin", 6, 1);
  TrainTiny("d.bin", "m.ckpt", 1, "--model ddpm --ddpm-steps 10");
  EXPECT_EQ(Run("evaluate --ckpt " + P("m.ckpt") + " --data " + P("d.bin") +
                " --out " + P("a.csv") + " --k 2 --sampler ancestral --steps 10"),
            0)
      << Log();
  EXPECT_EQ(Run("evaluate --ckpt " + P("m.ckpt") + " --data " + P("d.bin") +
                " --out " + P("b.csv") + " --k 2 --sampler ddim --steps 4"),
            0)
      << Log();
  EXPECT_EQ(Run("evaluate --ckpt " + P("m.ckpt") + " --data " + P("d.bin") +
                " --out " + P("c.csv") + " --sampler consistency"),
            2);
}

TEST_F(CliTest, MissingCheckpointIsAnIoError) {
  GenData("d.bin", 2, 1);
  EXPECT_EQ(Run("evaluate --ckpt " + P("nope.ckpt") + " --data " + P("d.bin") +
                " --out " + P("e.csv")),
            3);
  EXPECT_NE(Log().find("nope.ckpt"), std::string::npos) << Log();
}

TEST_F(CliTest, AblationWritesRowsAndCurves) {
  GenData("d.bin", 6, 1);
  TrainTiny("d.bin", "m.ckpt", 1);
  ASSERT_EQ(Run("ablate-guidance --ckpt " + P("m.ckpt") + " --data " + P("d.bin") +
                " --out " + P("ab.csv") + " --grad-steps 1,2 --k 1 --limit 2 " +
                "--curves-prefix " + P("curve")),
            0)
      << Log();
  const std::string csv = Read(P("ab.csv"));
  EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 1 + 2 * 2);
  ASSERT_EQ(Run("plot --in " + P("curve.alternating.curve.csv") + " --out " + P("c.svg")), 0)
      << Log();
  const std::string svg = Read(P("c.svg"));
  std::size_t lines = 0;
  for (auto p = svg.find("<polyline"); p != std::string::npos;
       p = svg.find("<polyline", p + 1)) {
    ++lines;
  }
  EXPECT_EQ(lines, 3u);
}

TEST_F(CliTest, PlotIsDeterministicAndRejectsEmptyInput) {
  std::ofstream(P("m.csv")) << "method,min_ade,c_goal\ncm,1.0,0.5\n";
  ASSERT_EQ(Run("plot --in " + P("m.csv") + " --out " + P("a.svg")), 0) << Log();
  ASSERT_EQ(Run("plot --in " + P("m.csv") + " --out " + P("b.svg")), 0) << Log();
  EXPECT_EQ(Read(P("a.svg")), Read(P("b.svg")));
  std::ofstream(P("empty.csv")).close();
  EXPECT_EQ(Run("plot --in " + P("empty.csv") + " --out " + P("e.svg")), 2);
}

}  // namespace
