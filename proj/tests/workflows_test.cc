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

#include "cmplan/workflows.h"

#include <gtest/gtest.h>

#include <atomic>
#include <cstdio>
#include <filesystem>
#include <sstream>
#include <string>
#include <vector>

#include "cmplan/error.h"

namespace cmplan {
namespace {

namespace fs = std::filesystem;

struct Fixture {
  std::vector<Scenario> raw;
  DatasetStats stats;
  ModelSpec spec;
  std::vector<PreparedScene> scenes;
};

const Fixture& Data() {
  static const Fixture* f = [] {
    auto* d = new Fixture;
    d->raw = GenerateDataset(10, 3, RunConfig{});
    d->stats = FitStats(d->raw);
    d->spec.width = 32;
    d->spec.blocks = 1;
    d->spec.linear_skip = false;
    d->spec.stats = d->stats;
    for (const auto& s : d->raw) {
      d->scenes.push_back(PrepareScene(s, d->stats, d->spec.run, d->spec.encoder));
    }
    return d;
  }();
  return *f;
}

PlannerModel FreshModel(ModelKind kind = ModelKind::kConsistency) {
  ModelSpec spec = Data().spec;
  spec.kind = kind;
  PlannerModel m(spec);
  m.Init(5);
  return m;
}

std::vector<double> Flatten(PlannerModel& m) {
  std::vector<double> out;
  for (const auto& p : m.Params()) out.insert(out.end(), p.value.begin(), p.value.end());
  return out;
}

std::string TempPath(const std::string& name) {
  return (fs::temp_directory_path() / ("cmplan_wf_" + name)).string();
}

TrainConfig SmallTrain(int epochs) {
  TrainConfig tc;
  tc.epochs = epochs;
  tc.batch = 4;
  tc.lr = 1e-3;
  tc.seed = 9;
  return tc;
}

TEST(PrepareSceneTest, EgoRowDecodesToGroundTruth) {
  const auto& d = Data();
  for (const auto& s : d.scenes) {
    const int h = d.spec.run.H2;
    const std::vector<double> z(s.x1.data(), s.x1.data() + 2 * h);
    const std::vector<Vec2> ego = DecodeEgo(z, s.ego);
    for (int t = 0; t < h; ++t) {
      EXPECT_NEAR(ego[t].x, s.gt_world.at(0, t).x, 1e-9);
      EXPECT_NEAR(ego[t].y, s.gt_world.at(0, t).y, 1e-9);
    }
    // Mask covers whole slots.
    int valid = 0;
    for (int slot = 0; slot < kJointSlots; ++slot) {
      const double m = s.mask(slot * 2 * h);
      EXPECT_EQ(s.mask.segment(slot * 2 * h, 2 * h).sum(), m * 2 * h);
      valid += m > 0.0 ? 1 : 0;
    }
    EXPECT_EQ(valid, 1 + static_cast<int>(s.frame.selected.size()));
  }
}

TEST(ModelTest, SaveLoadRoundTrip) {
  PlannerModel m = FreshModel();
  m.epochs_done = 3;
  m.train_seed = 17;
  const std::string path = TempPath("roundtrip.ckpt");
  SaveModel(path, m, nullptr);
  PlannerModel back = LoadModel(path);
  EXPECT_EQ(Flatten(back), Flatten(m));
  EXPECT_EQ(back.epochs_done, 3);
  EXPECT_EQ(back.train_seed, 17u);
  EXPECT_EQ(back.spec().basis_terms, m.spec().basis_terms);
  EXPECT_EQ(back.spec().linear_skip, m.spec().linear_skip);
  EXPECT_TRUE(back.spec().stats == m.spec().stats);
  EXPECT_EQ(back.Encode(Data().scenes[0]), m.Encode(Data().scenes[0]));
  fs::remove(path);
}

TEST(ModelTest, LoadMissingFileThrows) {
  EXPECT_THROW(LoadModel(TempPath("does_not_exist.ckpt")), IoError);
}

TEST(TrainTest, IdenticalRunsAreBitIdentical) {
  PlannerModel a = FreshModel(), b = FreshModel();
  net::Adam oa({.lr = 1e-3}), ob({.lr = 1e-3});
  const auto la = Train(a, oa, Data().scenes, SmallTrain(2));
  const auto lb = Train(b, ob, Data().scenes, SmallTrain(2));
  ASSERT_EQ(la.size(), 2u);
  EXPECT_EQ(la.back().loss, lb.back().loss);
  EXPECT_EQ(Flatten(a), Flatten(b));
}

TEST(TrainTest, ResumeMatchesStraightRun) {
  for (ModelKind kind : {ModelKind::kConsistency, ModelKind::kDdpm}) {
    PlannerModel straight = FreshModel(kind);
    net::Adam os({.lr = 1e-3});
    Train(straight, os, Data().scenes, SmallTrain(3));

    PlannerModel first = FreshModel(kind);
    net::Adam of({.lr = 1e-3});
    Train(first, of, Data().scenes, SmallTrain(1));
    EXPECT_EQ(first.epochs_done, 1);
    const std::string path = TempPath("resume.ckpt");
    SaveModel(path, first, &of);
    net::Adam resumed_opt;
    PlannerModel resumed = LoadModel(path, &resumed_opt);
    const auto logs = Train(resumed, resumed_opt, Data().scenes, SmallTrain(3));
    ASSERT_EQ(logs.size(), 2u);
    EXPECT_EQ(logs.front().epoch, 2);
    EXPECT_EQ(Flatten(resumed), Flatten(straight)) << ModelKindName(kind);
    fs::remove(path);
  }
}

TEST(TrainTest, StepWithoutUpdateKeepsParameters) {
  PlannerModel m = FreshModel();
  net::Adam adam;
  const std::vector<double> before = Flatten(m);
  std::vector<const PreparedScene*> batch;
  for (const auto& s : Data().scenes) batch.push_back(&s);
  Rng rng(1);
  const EpochLog log = TrainStep(m, adam, batch, SmallTrain(1), rng, false);
  EXPECT_TRUE(std::isfinite(log.loss));
  EXPECT_GT(log.generative, 0.0);
  EXPECT_EQ(Flatten(m), before);
}

TEST(TrainTest, LossDecreasesOnTinySet) {
  PlannerModel m = FreshModel();
  net::Adam adam({.lr = 1e-3});
  const auto logs = Train(m, adam, Data().scenes, SmallTrain(15));
  EXPECT_LT(logs.back().generative, logs.front().generative);
}

TEST(SampleSceneTest, ShapesAndPadding) {
  const PlannerModel m = FreshModel();
  const PreparedScene& s = Data().scenes[0];
  SamplerConfig sc;
  sc.K = 3;
  Rng rng(4);
  const SceneSamples out = SampleScene(m, s, sc, rng);
  EXPECT_EQ(out.normalized.rows(), m.traj_dim());
  EXPECT_EQ(out.normalized.cols(), 3);
  ASSERT_EQ(out.world.size(), 3u);
  for (Eigen::Index i = 0; i < out.normalized.rows(); ++i) {
    if (s.mask(i) == 0.0) {
      EXPECT_EQ(out.normalized(i, 0), 0.0);
    }
  }
  for (const auto& w : out.world) {
    EXPECT_EQ(w.agents(), kJointSlots);
    EXPECT_EQ(w.horizon(), m.spec().run.H2);
    for (int slot = 0; slot < kJointSlots; ++slot) {
      EXPECT_EQ(w.valid(slot), s.frame.slot_valid[slot]);
    }
  }
}

TEST(SampleSceneTest, UnguidedEqualsDirectSampler) {
  const PlannerModel m = FreshModel();
  for (int steps = 1; steps <= 4; ++steps) {
    SamplerConfig sc;
    sc.K = 4;
    sc.steps = steps;
    Rng a(8), b(8);
    const SceneSamples got = SampleScene(m, Data().scenes[1], sc, a);
    const net::Matrix want = DirectConsistencySample(m, Data().scenes[1], 4, steps, b);
    EXPECT_EQ(got.normalized, want) << steps;
  }
}

TEST(SampleSceneTest, SamplerMustFitCheckpoint) {
  const PlannerModel cm = FreshModel();
  const PlannerModel dm = FreshModel(ModelKind::kDdpm);
  Rng rng(1);
  SamplerConfig sc;
  sc.sampler = SamplerKind::kDdpm;
  sc.steps = 10;
  EXPECT_THROW(SampleScene(cm, Data().scenes[0], sc, rng), ValidationError);
  EXPECT_NO_THROW(SampleScene(dm, Data().scenes[0], sc, rng));
  sc.steps = 4;
  EXPECT_THROW(SampleScene(dm, Data().scenes[0], sc, rng), ValidationError);
  sc.sampler = SamplerKind::kDdim;
  EXPECT_NO_THROW(SampleScene(dm, Data().scenes[0], sc, rng));
  sc.guidance.strategy = GuidanceStrategy::kAlternating;
  EXPECT_THROW(SampleScene(dm, Data().scenes[0], sc, rng), ValidationError);
  sc.sampler = SamplerKind::kConsistency;
  EXPECT_THROW(SampleScene(dm, Data().scenes[0], sc, rng), ValidationError);
}

TEST(SampleSceneTest, GuidanceReducesGoalDistance) {
  const PlannerModel m = FreshModel();
  SamplerConfig none;
  none.K = 2;
  SamplerConfig guided = none;
  guided.guidance.strategy = GuidanceStrategy::kAlternating;
  guided.guidance.alpha = {1e-2, 0.0, 0.0};
  double before = 0.0, after = 0.0;
  for (const auto& s : Data().scenes) {
    Rng a(2), b(2);
    const SceneSamples u = SampleScene(m, s, none, a);
    const SceneSamples g = SampleScene(m, s, guided, b);
    for (int k = 0; k < 2; ++k) {
      before += EvalConstraints(u.world[k].Row(0), s.ego.spec, s.ego.dt).goal;
      after += EvalConstraints(g.world[k].Row(0), s.ego.spec, s.ego.dt).goal;
    }
  }
  EXPECT_LT(after, 0.5 * before);
}

TEST(EvaluateTest, JobCountDoesNotChangeResults) {
  const PlannerModel m = FreshModel();
  EvalConfig ec;
  ec.sampler.K = 2;
  ec.seed = 3;
  ec.method = "cm";
  const EvalResult one = Evaluate(m, Data().scenes, ec);
  ec.jobs = 3;
  const EvalResult three = Evaluate(m, Data().scenes, ec);
  EXPECT_EQ(one.report.method, "cm");
  EXPECT_EQ(one.report.sampling_steps, 4);
  EXPECT_EQ(one.report.min_ade, three.report.min_ade);
  EXPECT_EQ(one.report.violations.accel, three.report.violations.accel);
  ASSERT_EQ(one.scenes.size(), Data().scenes.size());
  for (std::size_t i = 0; i < one.scenes.size(); ++i) {
    EXPECT_EQ(one.scenes[i].normalized, three.scenes[i].normalized);
  }
}

TEST(EvaluateTest, SceneUsesItsOwnStream) {
  const PlannerModel m = FreshModel();
  EvalConfig ec;
  ec.sampler.K = 2;
  ec.seed = 11;
  const EvalResult all = Evaluate(m, Data().scenes, ec);
  Rng rng(11, 4);
  const SceneSamples s4 = SampleScene(m, Data().scenes[4], ec.sampler, rng);
  EXPECT_EQ(all.scenes[4].normalized, s4.normalized);
}

TEST(AblationTest, AlphaGridIsFullProduct) {
  const std::vector<double> v = {1e-4, 1e-5, 1e-6};
  const auto grid = AlphaGrid(v);
  ASSERT_EQ(grid.size(), 27u);
  for (std::size_t i = 0; i < grid.size(); ++i) {
    for (std::size_t j = i + 1; j < grid.size(); ++j) EXPECT_NE(grid[i], grid[j]);
  }
}

TEST(AblationTest, SweepRowCountAndCsv) {
  const PlannerModel m = FreshModel();
  AblationConfig ac;
  ac.grad_steps = {1, 2, 3};
  ac.K = 1;
  ac.steps = 1;
  const std::vector<PreparedScene> two(Data().scenes.begin(), Data().scenes.begin() + 2);
  const AblationResult r = RunAblation(m, two, ac);
  ASSERT_EQ(r.rows.size(), 2u * 3u * 27u);
  std::ostringstream csv;
  WriteAblationCsv(csv, r.rows);
  int lines = 0;
  for (char c : csv.str()) lines += c == '\n';
  EXPECT_EQ(lines, 1 + 162);
  // Middle grad-step setting, plus the initial point.
  for (const auto& c : r.curves) EXPECT_EQ(c.size(), 3u);
}

TEST(AblationTest, FixedAlphaGivesOneRowPerSetting) {
  const PlannerModel m = FreshModel();
  AblationConfig ac;
  ac.sweep = false;
  ac.grad_steps = {2};
  ac.K = 1;
  ac.steps = 1;
  const std::vector<PreparedScene> one(Data().scenes.begin(), Data().scenes.begin() + 1);
  const AblationResult r = RunAblation(m, one, ac);
  ASSERT_EQ(r.rows.size(), 2u);
  EXPECT_EQ(r.rows[0].alpha, ac.alpha);
  // One scene, one sample: the per-sample variance is that of the curve.
  for (int s = 0; s < 2; ++s) {
    EXPECT_EQ(r.accel_step_variance[s], AccelStepVariance(r.curves[s]));
  }
}

TEST(AblationTest, AlphaScaleMultipliesSweptValues) {
  const PlannerModel m = FreshModel();
  AblationConfig ac;
  ac.grad_steps = {1};
  ac.alpha_values = {1.0, 0.1};
  ac.alpha_scale = {2e-3, 3e-4, 5e-5};
  ac.K = 1;
  ac.steps = 1;
  const std::vector<PreparedScene> one(Data().scenes.begin(), Data().scenes.begin() + 1);
  const AblationResult r = RunAblation(m, one, ac);
  ASSERT_EQ(r.rows.size(), 2u * 8u);
  EXPECT_EQ(r.rows[0].alpha, (std::array<double, 3>{2e-3, 3e-4, 5e-5}));
  EXPECT_EQ(r.rows[7].alpha, (std::array<double, 3>{0.1 * 2e-3, 0.1 * 3e-4, 0.1 * 5e-5}));
}

TEST(CurveTest, MeanCurveAndStepVariance) {
  const ViolationCurve a = {{1, 2, 3}, {3, 4, 5}};
  const ViolationCurve b = {{3, 0, 1}, {5, 0, 1}};
  const std::vector<ViolationCurve> both = {a, b};
  const ViolationCurve m = MeanCurve(both);
  ASSERT_EQ(m.size(), 2u);
  EXPECT_EQ(m[0].goal, 2.0);
  EXPECT_EQ(m[1].accel, 2.0);
  EXPECT_EQ(m[1].omega, 3.0);
  const std::vector<ViolationCurve> ragged = {a, ViolationCurve{{1, 1, 1}}};
  EXPECT_THROW(MeanCurve(ragged), ShapeError);

  // Steps +1, -1, +1, -1: mean 0, variance 1.
  const ViolationCurve zig = {{0, 0, 0}, {0, 1, 0}, {0, 0, 0}, {0, 1, 0}, {0, 0, 0}};
  EXPECT_DOUBLE_EQ(AccelStepVariance(zig), 1.0);
  const ViolationCurve line = {{0, 0, 0}, {0, 2, 0}, {0, 4, 0}, {0, 6, 0}};
  EXPECT_DOUBLE_EQ(AccelStepVariance(line), 0.0);
}

int Count(const std::string& s, const std::string& what) {
  int n = 0;
  for (auto p = s.find(what); p != std::string::npos; p = s.find(what, p + 1)) ++n;
  return n;
}

TEST(PlotTest, CurveCsvGivesOneLinePerColumn) {
  const std::string svg =
      CsvToSvg("step,c_goal,c_acc,c_omega\n0,3,2,1\n1,2,1,0.5\n2,1,0.5,0.2\n");
  EXPECT_EQ(svg.rfind("<svg", 0), 0u);
  EXPECT_EQ(Count(svg, "<polyline"), 3);
  EXPECT_EQ(svg, CsvToSvg("step,c_goal,c_acc,c_omega\n0,3,2,1\n1,2,1,0.5\n2,1,0.5,0.2\n"));
}

TEST(PlotTest, MetricsCsvGivesBars) {
  const std::string svg = CsvToSvg("method,min_ade,c_goal\ncm,1.5,0.2\nddpm,2.0,0.4\n");
  EXPECT_EQ(Count(svg, "<polyline"), 0);
  EXPECT_GE(Count(svg, "<rect"), 4);
}

TEST(PlotTest, BadInputThrows) {
  EXPECT_THROW(CsvToSvg(""), ParseError);
  EXPECT_THROW(CsvToSvg("step,c_goal\n"), ParseError);
  EXPECT_THROW(CsvToSvg("step,c_goal\n0,1\n1\n"), ParseError);
}

TEST(ParallelForTest, VisitsEveryIndexOnce) {
  for (int jobs : {1, 2, 5}) {
    std::vector<std::atomic<int>> hits(37);
    ParallelFor(37, jobs, [&](int i) { hits[i]++; });
    for (const auto& h : hits) EXPECT_EQ(h.load(), 1);
  }
}

}  // namespace
}  // namespace cmplan
