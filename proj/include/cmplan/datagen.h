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

#ifndef CMPLAN_DATAGEN_H_
#define CMPLAN_DATAGEN_H_

#include <span>
#include <vector>

#include "cmplan/rng.h"
#include "cmplan/types.h"

namespace cmplan {

// Maximum number of surrounding agents planned jointly with the ego.
inline constexpr int kMaxSurrounding = 4;
// Slots in a joint sample: ego plus kMaxSurrounding.
inline constexpr int kJointSlots = kMaxSurrounding + 1;
// Surrounding agents farther than this from the ego (closed) are dropped.
inline constexpr double kSelectionRadius = 10.0;
// Speeds below this are treated as standing still.
inline constexpr double kMinSpeed = 1e-3;

struct GeneratorParams {
  int H1 = 10;
  int H2 = 80;
  double dt = 0.1;
  double max_accel = 3.0;  // |a| bound used while integrating, m/s^2
  double max_omega = 0.6;  // |omega| bound, rad/s
  int polyline_points = 20;
};

// Piecewise-constant controls applied over one step.
struct Controls {
  double accel = 0.0;
  double omega = 0.0;
};

// A generated scene together with the controls that produced each future.
// Row 0 of `controls` is the ego; row k + 1 belongs to history.others[k].
struct GeneratedScenario {
  Scenario scenario;
  std::vector<std::vector<Controls>> controls;
};

// Integrates the unicycle model over one step with constant controls.
AgentState IntegrateStep(const AgentState& state, Controls u, double dt);

// Builds a synthetic scene by integrating the unicycle model with bounded
// controls. The ego goal is its ground-truth position at the last step.
Scenario GenerateScenario(Rng& rng, ScenarioKind kind,
                          const GeneratorParams& params = {});
GeneratedScenario GenerateScenarioDetailed(Rng& rng, ScenarioKind kind,
                                           const GeneratorParams& params = {});

// Indices into scenario.history.others of up to kMaxSurrounding agents,
// nearest first. Distance is the minimum over future steps of the distance
// between ground-truth positions; agents beyond `radius` are excluded and
// ties go to the lower index.
std::vector<int> SelectSurrounding(const Scenario& scenario,
                                   double radius = kSelectionRadius);

// Local-frame anchor for a track: its pose at t0. When the agent is not
// moving at t0, the heading of the most recent moving state is used, or
// zero if it never moved.
Pose2 ReferencePose(const Track& track);

struct DatasetStats {
  Vec2 mean;
  Vec2 std{1.0, 1.0};

  Vec2 Standardize(const Vec2& p) const {
    return {(p.x - mean.x) / std.x, (p.y - mean.y) / std.y};
  }
  Vec2 Destandardize(const Vec2& z) const {
    return {z.x * std.x + mean.x, z.y * std.y + mean.y};
  }
  friend bool operator==(const DatasetStats&, const DatasetStats&) = default;
};

// Per-coordinate mean and sample (n - 1) standard deviation. Throws
// ValidationError on fewer than two points or a zero-variance coordinate.
DatasetStats FitStatsFromPoints(std::span<const Vec2> points);
// Statistics over the local-frame futures of each scene's ego and selected
// surrounding agents. Needs at least two scenarios.
DatasetStats FitStats(std::span<const Scenario> dataset);

// Joint-sample bookkeeping for one scene: which agents fill the slots and
// where each slot's local frame sits in the world.
struct SceneFrame {
  std::vector<int> selected;
  std::vector<Pose2> ref;        // kJointSlots entries
  std::vector<bool> slot_valid;  // kJointSlots entries
};

SceneFrame MakeSceneFrame(const Scenario& scenario);
// kJointSlots x H2 world-frame ground truth; padded rows are invalid zeros.
TrajectorySet JointFuture(const Scenario& scenario, const SceneFrame& frame);

struct LocalizedTrajectories {
  TrajectorySet normalized;
  DatasetStats stats;
  std::vector<Pose2> ref;
};

// Maps each valid row into its own reference frame and standardizes it.
// Invalid rows stay zero.
LocalizedTrajectories ToLocal(const TrajectorySet& future,
                              std::span<const Pose2> poses,
                              const DatasetStats& stats);
TrajectorySet FromLocal(const LocalizedTrajectories& local);

}  // namespace cmplan

#endif  // CMPLAN_DATAGEN_H_
