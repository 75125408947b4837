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


#include <algorithm>
#include <cmath>
#include <vector>

#include <gtest/gtest.h>

#include "cmplan/datagen.h"
#include "cmplan/encoder.h"
#include "cmplan/error.h"
#include "cmplan/rng.h"

namespace cmplan {
namespace {

EncoderConfig SmallConfig() {
  EncoderConfig c;
  c.hidden = 8;
  c.ego_dim = 4;
  c.agent_dim = 4;
  c.map_dim = 4;
  c.goal_dim = 3;
  c.ref_dim = 3;
  return c;
}

Scenario MakeScene(std::uint64_t seed, ScenarioKind kind) {
  Rng rng(seed);
  return GenerateScenario(rng, kind);
}

const DatasetStats kStats{{15.0, 0.2}, {20.0, 4.0}};

Scenario Rigid(const Scenario& in, const Pose2& m) {
  Scenario sc = in;
  auto move = [&](AgentState& s) {
    if (!s.valid) return;
    const Vec2 p = m.ToWorld(s.position());
    s.px = p.x;
    s.py = p.y;
    s.heading = WrapAngle(s.heading + m.heading);
  };
  for (auto& s : sc.history.ego) move(s);
  for (auto& t : sc.history.others) {
    for (auto& s : t) move(s);
  }
  for (auto& line : sc.map.polylines) {
    for (auto& pt : line.points) {
      const Vec2 p = m.ToWorld({pt.px, pt.py});
      pt.px = p.x;
      pt.py = p.y;
    }
  }
  for (int a = 0; a < sc.gt_future.agents(); ++a) {
    for (int t = 0; t < sc.horizon(); ++t) {
      sc.gt_future.set(a, t, m.ToWorld(sc.gt_future.at(a, t)));
    }
  }
  const Vec2 g = m.ToWorld(sc.goal.position());
  sc.goal = {g.x, g.y};
  return sc;
}

net::Vector EncodeScene(const Encoder& enc, const Scenario& sc) {
  const SceneFrame frame = MakeSceneFrame(sc);
  return enc.Encode(MakeSceneFeatures(sc, frame, kStats, enc.config()),
                    nullptr);
}

TEST(EncoderTest, OutputDimension) {
  EXPECT_EQ(EncoderConfig{}.cond_dim(), 128);
  Encoder enc{EncoderConfig{}};
  Rng rng(1);
  enc.Init(rng);
  EXPECT_EQ(EncodeScene(enc, MakeScene(1, ScenarioKind::kTurn)).size(), 128);
}

TEST(EncoderTest, RigidMotionInvariant) {
  Encoder enc{EncoderConfig{}};
  Rng rng(2);
  enc.Init(rng);
  for (int k = 0; k < kNumScenarioKinds; ++k) {
    const Scenario sc = MakeScene(10 + k, static_cast<ScenarioKind>(k));
    const net::Vector a = EncodeScene(enc, sc);
    const net::Vector b = EncodeScene(enc, Rigid(sc, {250.0, -80.0, 2.5}));
    EXPECT_LE((a - b).cwiseAbs().maxCoeff(), 1e-10);
  }
}

TEST(EncoderTest, SameSceneBitIdentical) {
  Encoder enc{EncoderConfig{}};
  Rng rng(3);
  enc.Init(rng);
  const Scenario sc = MakeScene(4, ScenarioKind::kYield);
  const net::Vector a = EncodeScene(enc, sc);
  const net::Vector b = EncodeScene(enc, sc);
  EXPECT_EQ(a, b);
}

TEST(EncoderTest, MaskedAgentsUseNullEmbedding) {
  const EncoderConfig config;
  Encoder enc{config};
  Rng rng(5);
  enc.Init(rng);
  std::vector<net::ParamView> params;
  enc.Collect(params);
  // Learned null vectors sit after the five sub-networks (16 views).
  std::span<double> agent_null = params[16].value;
  ASSERT_EQ(static_cast<int>(agent_null.size()), config.agent_dim);
  for (double& v : agent_null) v = rng.Normal();

  Scenario sc = MakeScene(6, ScenarioKind::kStraight);
  for (auto& track : sc.history.others) {
    for (auto& s : track) s.valid = false;
  }
  // Hide their futures too, so none is picked as a surrounding agent.
  for (int j = 1; j < sc.gt_future.agents(); ++j) sc.gt_future.set_valid(j, false);
  const net::Vector y = EncodeScene(enc, sc);
  for (int i = 0; i < config.agent_dim; ++i) {
    EXPECT_NEAR(y(config.ego_dim + i), agent_null[i], 1e-15);
  }
  // The hidden agents' contents do not matter.
  Scenario moved = sc;
  for (auto& track : moved.history.others) {
    for (auto& s : track) s.px += 3.0;
  }
  EXPECT_EQ(EncodeScene(enc, moved), y);
}

TEST(EncoderTest, AgentSlotOrderDoesNotMatter) {
  Encoder enc{EncoderConfig{}};
  Rng rng(7);
  enc.Init(rng);
  Scenario sc;
  for (std::uint64_t seed = 0;; ++seed) {
    sc = MakeScene(100 + seed, ScenarioKind::kLaneChange);
    if (sc.history.others.size() >= 3) break;
  }
  const SceneFrame frame = MakeSceneFrame(sc);
  SceneFeatures f = MakeSceneFeatures(sc, frame, kStats, enc.config());
  const net::Vector a = enc.Encode(f, nullptr);
  f.agent_history.col(0).swap(f.agent_history.col(2));
  std::swap(f.agent_valid[0], f.agent_valid[2]);
  const net::Vector b = enc.Encode(f, nullptr);
  EXPECT_LE((a - b).cwiseAbs().maxCoeff(), 1e-10);
}

TEST(EncoderTest, FeaturesAreMaskedAndScaled) {
  const EncoderConfig config;
  const Scenario sc = MakeScene(8, ScenarioKind::kTurn);
  const SceneFrame frame = MakeSceneFrame(sc);
  const SceneFeatures f = MakeSceneFeatures(sc, frame, kStats, config);
  // The ego sits at its own origin at t0 with zero relative heading.
  EXPECT_NEAR(f.ego_history(0), 0.0, 1e-12);
  EXPECT_NEAR(f.ego_history(1), 0.0, 1e-12);
  EXPECT_NEAR(f.ego_history(2), 1.0, 1e-12);
  EXPECT_EQ(f.ego_history(5), 1.0);
  const Vec2 goal = kStats.Standardize(frame.ref[0].ToLocal(sc.goal.position()));
  EXPECT_NEAR(f.goal(0), goal.x, 1e-12);
  EXPECT_NEAR(f.goal(1), goal.y, 1e-12);
  for (int s = static_cast<int>(sc.map.polylines.size()); s < config.map_slots;
       ++s) {
    EXPECT_FALSE(f.map_valid[s]);
    EXPECT_TRUE(f.polylines.col(s).isZero(0.0));
  }
  for (int s = static_cast<int>(frame.selected.size()); s < kMaxSurrounding;
       ++s) {
    EXPECT_TRUE(f.refs.segment(s * kRefFeatures, kRefFeatures).isZero(0.0));
  }
}

TEST(AuxLossTest, ExactHeadGivesZero) {
  Encoder enc{SmallConfig()};
  Rng rng(9);
  enc.Init(rng);
  const net::Vector y = EncodeScene(enc, MakeScene(9, ScenarioKind::kTurn));
  net::Vector target(2 * enc.config().horizon);
  for (int i = 0; i < target.size(); ++i) target(i) = rng.Normal();
  enc.aux_head().weight.setZero();
  enc.aux_head().bias = target;
  EXPECT_EQ(enc.AuxDenseLoss(y, target, 1.0, nullptr), 0.0);
}

TEST(AuxLossTest, ZeroHeadOnStandardizedFuturesGivesUnitLoss) {
  // Standardize ego futures with their own statistics; a zero prediction
  // then costs the mean squared z-score, (n - 1) / n.
  std::vector<std::vector<Vec2>> local;
  std::vector<Vec2> points;
  for (int i = 0; i < 200; ++i) {
    const Scenario sc = MakeScene(500 + i, static_cast<ScenarioKind>(i % 4));
    const Pose2 ref = ReferencePose(sc.history.ego);
    std::vector<Vec2> row;
    for (int t = 0; t < sc.horizon(); ++t) {
      row.push_back(ref.ToLocal(sc.gt_future.at(0, t)));
    }
    points.insert(points.end(), row.begin(), row.end());
    local.push_back(std::move(row));
  }
  const DatasetStats stats = FitStatsFromPoints(points);
  Encoder enc{SmallConfig()};
  enc.aux_head().weight.setZero();
  enc.aux_head().bias.setZero();
  const net::Vector y = net::Vector::Ones(enc.cond_dim());
  double mean = 0.0;
  for (const auto& row : local) {
    net::Vector target(2 * row.size());
    for (std::size_t t = 0; t < row.size(); ++t) {
      const Vec2 z = stats.Standardize(row[t]);
      target(2 * t) = z.x;
      target(2 * t + 1) = z.y;
    }
    mean += enc.AuxDenseLoss(y, target, 1.0, nullptr) / local.size();
  }
  const double n = static_cast<double>(points.size());
  EXPECT_NEAR(mean, (n - 1) / n, 1e-9);
}

TEST(AuxLossTest, EndToEndGradientMatchesFiniteDifferences) {
  Encoder enc{SmallConfig()};
  Rng rng(11);
  enc.Init(rng);
  std::vector<net::ParamView> params;
  enc.Collect(params);
  for (auto& p : params) {
    for (double& v : p.value) v += 0.05 * rng.Normal();
  }
  const Scenario sc = MakeScene(12, ScenarioKind::kYield);
  const SceneFrame frame = MakeSceneFrame(sc);
  const SceneFeatures f = MakeSceneFeatures(sc, frame, kStats, enc.config());
  net::Vector target(2 * enc.config().horizon);
  for (int i = 0; i < target.size(); ++i) target(i) = rng.Normal();

  enc.ZeroGrad();
  Encoder::Tape tape;
  const net::Vector y = enc.Encode(f, &tape);
  net::Vector dy;
  enc.AuxDenseLoss(y, target, 1.0, &dy);
  enc.Backward(tape, dy);
  std::vector<std::vector<double>> analytic;
  for (const auto& p : params) analytic.emplace_back(p.grad.begin(), p.grad.end());

  Encoder probe = enc;  // evaluates the loss without touching enc's grads
  std::vector<net::ParamView> probe_params;
  probe.Collect(probe_params);
  auto loss = [&] {
    return probe.AuxDenseLoss(probe.Encode(f, nullptr), target, 1.0, nullptr);
  };
  const double h = 1e-6;
  int checked = 0;
  for (std::size_t k = 0; k < probe_params.size(); ++k) {
    auto values = probe_params[k].value;
    // Every entry of the small views, a strided subset of the big ones.
    const std::size_t stride = values.size() > 200 ? 7 : 1;
    for (std::size_t i = 0; i < values.size(); i += stride) {
      const double keep = values[i];
      values[i] = keep + h;
      const double up = loss();
      values[i] = keep - h;
      const double down = loss();
      values[i] = keep;
      const double numeric = (up - down) / (2 * h);
      EXPECT_LE(std::abs(analytic[k][i] - numeric),
                1e-5 * std::max(std::abs(numeric), 1e-4))
          << "view " << k << " entry " << i;
      ++checked;
    }
  }
  EXPECT_GT(checked, 500);
}

TEST(AuxLossTest, WeightScalesGradientNotLoss) {
  Encoder enc{SmallConfig()};
  Rng rng(13);
  enc.Init(rng);
  const net::Vector y = EncodeScene(enc, MakeScene(13, ScenarioKind::kTurn));
  const net::Vector target = net::Vector::Ones(2 * enc.config().horizon);
  net::Vector d1, d3;
  const double l1 = enc.AuxDenseLoss(y, target, 1.0, &d1);
  const double l3 = enc.AuxDenseLoss(y, target, 3.0, &d3);
  EXPECT_EQ(l1, l3);
  EXPECT_LE((3.0 * d1 - d3).cwiseAbs().maxCoeff(), 1e-12);
  EXPECT_THROW(enc.AuxDenseLoss(y, net::Vector::Ones(3), 1.0, nullptr),
               ShapeError);
}

TEST(EncoderTest, BackwardBeforeEncodeThrows) {
  Encoder enc{SmallConfig()};
  Encoder::Tape tape;
  EXPECT_THROW(enc.Backward(tape, net::Vector::Zero(enc.cond_dim())), Error);
}

}  // namespace
}  // namespace cmplan
