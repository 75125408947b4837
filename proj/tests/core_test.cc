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

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <vector>

#include <gtest/gtest.h>

#include "cmplan/config.h"
#include "cmplan/error.h"
#include "cmplan/rng.h"
#include "cmplan/types.h"

namespace cmplan {
namespace {

std::string TempPath(const std::string& name) {
  return (std::filesystem::temp_directory_path() / name).string();
}

TEST(ConfigTest, EmptyTextGivesDefaults) {
  const RunConfig c = ParseConfig("");
  EXPECT_EQ(c.T, 5);
  EXPECT_EQ(c.rho, 6.0);
  EXPECT_EQ(c.sigma_min, 0.002);
  EXPECT_EQ(c.sigma_max, 80.0);
  EXPECT_EQ(c.alpha[0], 2e-5);
  EXPECT_EQ(c.alpha[1], 3e-6);
  EXPECT_EQ(c.alpha[2], 5e-7);
  EXPECT_EQ(c.n_grad_steps, 100);
  EXPECT_EQ(c.K, 6);
  EXPECT_EQ(c.H1, 10);
  EXPECT_EQ(c.H2, 80);
  EXPECT_EQ(c.dt, 0.1);
}

TEST(ConfigTest, EmptyFileGivesDefaults) {
  const std::string path = TempPath("cmplan_empty.cfg");
  { std::ofstream f(path); }
  EXPECT_EQ(LoadConfig(path), RunConfig{});
}

TEST(ConfigTest, SingleOverride) {
  RunConfig expected;
  expected.T = 2;
  EXPECT_EQ(ParseConfig("T=2\n"), expected);
}

TEST(ConfigTest, TOfOneIsRejectedNamingTheField) {
  try {
    ParseConfig("T=1");
    FAIL() << "expected ValidationError";
  } catch (const ValidationError& e) {
    EXPECT_EQ(e.field(), "T");
  }
}

TEST(ConfigTest, MalformedLineReportsLineNumber) {
  try {
    ParseConfig("# comment\nT=5\nthis is not a pair\n");
    FAIL() << "expected ParseError";
  } catch (const ParseError& e) {
    EXPECT_EQ(e.line(), 3);
  }
}

TEST(ConfigTest, UnknownKeyIsAParseError) {
  EXPECT_THROW(ParseConfig("tau=3"), ParseError);
}

TEST(ConfigTest, OutOfRangeValuesNameTheirField) {
  const char* cases[][2] = {{"sigma_min=-1", "sigma_min"},
                            {"sigma_max=0.001", "sigma_max"},
                            {"K=0", "K"},
                            {"alpha=1e-5,0,1e-6", "alpha"},
                            {"n_grad_steps=0", "n_grad_steps"},
                            {"a_limit=-1", "a_limit"}};
  for (const auto& c : cases) {
    try {
      ParseConfig(c[0]);
      ADD_FAILURE() << c[0];
    } catch (const ValidationError& e) {
      EXPECT_EQ(e.field(), c[1]) << c[0];
    }
  }
}

TEST(ConfigTest, CommentsAndWhitespace) {
  const RunConfig c = ParseConfig("  # header\n  rho = 7 # trailing\n\nK=3\n");
  EXPECT_EQ(c.rho, 7.0);
  EXPECT_EQ(c.K, 3);
}

TEST(ConfigTest, SaveLoadRoundTripsEveryValue) {
  RunConfig c;
  c.seed = 12345678901234ULL;
  c.dt = 0.1 + 1e-17;
  c.rho = 1.0 / 3.0;
  c.alpha = {1.0 / 7.0, 2e-6, 3.3e-7};
  c.a_limit = 3.75;
  const std::string path = TempPath("cmplan_roundtrip.cfg");
  SaveConfig(c, path);
  EXPECT_EQ(LoadConfig(path), c);
  EXPECT_EQ(ParseConfig(FormatConfig(c)), c);
  EXPECT_EQ(ConfigHash(c), ConfigHash(LoadConfig(path)));
  c.K = 7;
  EXPECT_NE(ConfigHash(c), ConfigHash(LoadConfig(path)));
}

TEST(ConfigTest, MissingFileIsAnIoError) {
  EXPECT_THROW(LoadConfig(TempPath("cmplan_does_not_exist.cfg")), IoError);
}

TEST(RngTest, SameSeedSameStream) {
  Rng a(0);
  Rng b(0);
  for (int i = 0; i < 1000; ++i) ASSERT_EQ(a.NextU64(), b.NextU64());
}

TEST(RngTest, DifferentSeedsDiffer) {
  EXPECT_NE(Rng(0).NextU64(), Rng(1).NextU64());
  EXPECT_NE(Rng(0, 0).NextU64(), Rng(0, 1).NextU64());
}

TEST(RngTest, NormalMeanAndVariance) {
  Rng rng(42);
  const int n = 1000000;
  double sum = 0.0;
  double sq = 0.0;
  for (int i = 0; i < n; ++i) {
    const double x = rng.Normal();
    sum += x;
    sq += x * x;
  }
  EXPECT_NEAR(sum / n, 0.0, 0.01);
  EXPECT_NEAR(sq / n, 1.0, 0.01);
}

TEST(RngTest, UniformRanges) {
  Rng rng(3);
  for (int i = 0; i < 10000; ++i) {
    const double u = rng.Uniform();
    ASSERT_GE(u, 0.0);
    ASSERT_LT(u, 1.0);
    const int k = rng.UniformInt(-2, 2);
    ASSERT_GE(k, -2);
    ASSERT_LE(k, 2);
  }
}

TEST(RngTest, FillNormalMatchesSequentialDraws) {
  Rng a(9);
  Rng b(9);
  std::vector<double> v(7);
  a.FillNormal(v, 2.0);
  for (double x : v) EXPECT_EQ(x, 2.0 * b.Normal());
}

TEST(TypesTest, WrapAngleRange) {
  EXPECT_DOUBLE_EQ(WrapAngle(std::numbers::pi), std::numbers::pi);
  EXPECT_DOUBLE_EQ(WrapAngle(-std::numbers::pi), std::numbers::pi);
  EXPECT_NEAR(WrapAngle(3 * std::numbers::pi / 2), -std::numbers::pi / 2, 1e-15);
  EXPECT_NEAR(WrapAngle(0.25 - 4 * std::numbers::pi), 0.25, 1e-14);
}

TEST(TypesTest, PoseRoundTrip) {
  const Pose2 pose{3.0, -2.0, 0.7};
  const Vec2 p{10.5, 4.25};
  const Vec2 back = pose.ToWorld(pose.ToLocal(p));
  EXPECT_NEAR(back.x, p.x, 1e-12);
  EXPECT_NEAR(back.y, p.y, 1e-12);
  const Vec2 v = pose.RotateToWorld(pose.RotateToLocal({1.0, 2.0}));
  EXPECT_NEAR(v.x, 1.0, 1e-15);
  EXPECT_NEAR(v.y, 2.0, 1e-15);
}

TEST(TypesTest, TrajectorySetLayout) {
  TrajectorySet s(2, 3);
  s.set(1, 2, {5.0, 6.0});
  EXPECT_EQ(s.data()[(1 * 3 + 2) * 2], 5.0);
  EXPECT_EQ(s.data()[(1 * 3 + 2) * 2 + 1], 6.0);
  EXPECT_TRUE(s.AllFinite());
  s.set(0, 0, {std::nan(""), 0.0});
  EXPECT_FALSE(s.AllFinite());
}

}  // namespace
}  // namespace cmplan
