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

#include "cmplan/datagen.h"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <memory>
#include <numbers>
#include <numeric>

#include "cmplan/error.h"

namespace cmplan {
namespace {

constexpr double kPi = std::numbers::pi;
constexpr double kLaneWidth = 3.5;
constexpr int kIntegrationSubsteps = 8;
// Generated agents keep at least this much clearance from each other.
constexpr double kMinClearance = 3.0;

using Policy = std::function<Controls(int step, const AgentState& state)>;

struct Agent {
  AgentState start;  // state at t0
  std::vector<AgentState> future;
  std::vector<Controls> controls;
};

// Derivative of (x, y, heading, speed) under the unicycle model.
struct Deriv {
  double x, y, heading, speed;
};

Deriv Dynamics(double heading, double speed, Controls u) {
  return {speed * std::cos(heading), speed * std::sin(heading), u.omega,
          u.accel};
}

Agent RollOut(const AgentState& start, const Policy& policy,
              const GeneratorParams& params) {
  Agent agent;
  agent.start = start;
  AgentState s = start;
  for (int k = 0; k < params.H2; ++k) {
    Controls u = policy(k, s);
    u.omega = std::clamp(u.omega, -params.max_omega, params.max_omega);
    u.accel = std::clamp(u.accel, -params.max_accel, params.max_accel);
    // Never drive backwards.
    u.accel = std::max(u.accel, -s.speed / params.dt);
    s = IntegrateStep(s, u, params.dt);
    agent.future.push_back(s);
    agent.controls.push_back(u);
  }
  return agent;
}

// Constant-speed straight-line history ending at `s0` (zero controls).
Track StraightHistory(const AgentState& s0, const GeneratorParams& params) {
  Track track(params.H1 + 1);
  const double c = std::cos(s0.heading);
  const double s = std::sin(s0.heading);
  for (int k = 0; k <= params.H1; ++k) {
    AgentState st = s0;
    st.px -= k * params.dt * s0.speed * c;
    st.py -= k * params.dt * s0.speed * s;
    st.valid = true;
    track[k] = st;
  }
  return track;
}

AgentState MakeState(double x, double y, double heading, double speed) {
  return {x, y, WrapAngle(heading), std::max(speed, 0.0), true};
}

Agent EgoRollout(Rng& rng, ScenarioKind kind, const GeneratorParams& params) {
  const double dt = params.dt;
  switch (kind) {
    case ScenarioKind::kStraight: {
      const double v = rng.Uniform(4.0, 14.0);
      return RollOut(MakeState(0, 0, 0, v),
                     [](int, const AgentState&) { return Controls{}; },
                     params);
    }
    case ScenarioKind::kLaneChange: {
      const double v = rng.Uniform(6.0, 14.0);
      const double dir = rng.Uniform() < 0.5 ? -1.0 : 1.0;
      const double duration = rng.Uniform(3.0, 5.0);
      const double start = rng.Uniform(0.5, 2.5);
      const double amplitude =
          std::min(2.0 * kPi * kLaneWidth / (v * duration * duration),
                   0.95 * params.max_omega);
      const double accel = rng.Uniform(-0.3, 0.5);
      return RollOut(
          MakeState(0, 0, 0, v),
          [=](int k, const AgentState& s) {
            const double t = (k + 0.5) * dt;
            Controls u;
            if (t >= start && t <= start + duration) {
              u.omega =
                  dir * amplitude * std::sin(2.0 * kPi * (t - start) / duration);
            }
            u.accel = (s.speed > 2.0 || accel > 0.0) ? accel : 0.0;
            return u;
          },
          params);
    }
    case ScenarioKind::kTurn: {
      const double v = rng.Uniform(4.0, 9.0);
      double kappa = rng.Uniform(1.0 / 25.0, 1.0 / 10.0);
      kappa = std::min(kappa, 0.95 * params.max_omega / v);
      const double dir = rng.Uniform() < 0.5 ? -1.0 : 1.0;
      const int start = rng.UniformInt(5, 25);
      const int arc_steps =
          static_cast<int>(std::lround((kPi / 2.0) / (v * kappa * dt)));
      return RollOut(MakeState(0, 0, 0, v),
                     [=](int k, const AgentState&) {
                       Controls u;
                       if (k >= start && k < start + arc_steps) {
                         u.omega = dir * v * kappa;
                       }
                       return u;
                     },
                     params);
    }
    case ScenarioKind::kYield: {
      const double v0 = rng.Uniform(6.0, 12.0);
      const int cruise_steps = rng.UniformInt(0, 10);
      const double decel = rng.Uniform(1.5, 3.0);
      const double v_stop = rng.Uniform(0.3, 1.5);
      const int hold_steps = rng.UniformInt(15, 30);
      const double accel = rng.Uniform(1.0, 2.0);
      enum class Phase { kCruise, kBrake, kHold, kGo };
      auto phase = std::make_shared<Phase>(Phase::kCruise);
      auto held = std::make_shared<int>(0);
      return RollOut(
          MakeState(0, 0, 0, v0),
          [=](int k, const AgentState& s) {
            Controls u;
            if (*phase == Phase::kCruise && k >= cruise_steps) {
              *phase = Phase::kBrake;
            }
            if (*phase == Phase::kBrake && s.speed <= v_stop + 1e-9) {
              *phase = Phase::kHold;
            }
            if (*phase == Phase::kHold && *held >= hold_steps) {
              *phase = Phase::kGo;
            }
            switch (*phase) {
              case Phase::kCruise:
                break;
              case Phase::kBrake:
                u.accel = std::max(-decel, (v_stop - s.speed) / dt);
                break;
              case Phase::kHold:
                ++*held;
                break;
              case Phase::kGo:
                u.accel = std::min(accel, (v0 - s.speed) / dt);
                break;
            }
            return u;
          },
          params);
    }
  }
  return {};
}

Policy ConstantControls(Controls u) {
  return [u](int, const AgentState&) { return u; };
}

enum class Role { kLead, kAdjacent, kOncoming, kFar };

Role DrawRole(Rng& rng) {
  const double r = rng.Uniform();
  if (r < 0.3) return Role::kLead;
  if (r < 0.65) return Role::kAdjacent;
  if (r < 0.8) return Role::kOncoming;
  return Role::kFar;
}

Agent OtherRollout(Rng& rng, Role role, double ego_speed,
                   const GeneratorParams& params) {
  const double side = rng.Uniform() < 0.5 ? -1.0 : 1.0;
  switch (role) {
    case Role::kLead:
      return RollOut(
          MakeState(rng.Uniform(12.0, 35.0), 0.0, 0.0,
                    ego_speed + rng.Uniform(-2.0, 2.0)),
          ConstantControls({rng.Uniform(-0.5, 0.5), 0.0}), params);
    case Role::kAdjacent:
      return RollOut(
          MakeState(rng.Uniform(-15.0, 15.0), side * kLaneWidth, 0.0,
                    ego_speed + rng.Uniform(-2.0, 2.0)),
          ConstantControls({rng.Uniform(-0.5, 0.5), 0.0}), params);
    case Role::kOncoming:
      return RollOut(MakeState(rng.Uniform(25.0, 70.0), kLaneWidth, kPi,
                               rng.Uniform(5.0, 12.0)),
                     ConstantControls({rng.Uniform(-0.3, 0.3), 0.0}),
                     params);
    case Role::kFar:
      return RollOut(
          MakeState(rng.Uniform(-10.0, 60.0), side * rng.Uniform(12.0, 25.0),
                    rng.Uniform() < 0.5 ? 0.0 : kPi, rng.Uniform(0.0, 3.0)),
          ConstantControls({}), params);
  }
  return {};
}

double MinDistance(const Agent& a, const Agent& b) {
  double best = (a.start.position() - b.start.position()).Norm();
  for (std::size_t t = 0; t < a.future.size(); ++t) {
    best = std::min(best,
                    (a.future[t].position() - b.future[t].position()).Norm());
  }
  return best;
}

bool Clear(const Agent& candidate, const std::vector<Agent>& placed) {
  return std::all_of(placed.begin(), placed.end(), [&](const Agent& other) {
    return MinDistance(candidate, other) >= kMinClearance;
  });
}

Polyline StraightPolyline(Vec2 from, Vec2 to, PolylineType type, int points) {
  Polyline line;
  for (int i = 0; i < points; ++i) {
    const double f = static_cast<double>(i) / (points - 1);
    line.points.push_back(
        {from.x + f * (to.x - from.x), from.y + f * (to.y - from.y), type, true});
  }
  return line;
}

// Resamples a path to `points` vertices evenly spaced in arc length and
// offsets it sideways by `offset` meters (left positive).
Polyline ResamplePath(const std::vector<Vec2>& path, double offset,
                      PolylineType type, int points) {
  std::vector<double> arc(path.size(), 0.0);
  for (std::size_t i = 1; i < path.size(); ++i) {
    arc[i] = arc[i - 1] + (path[i] - path[i - 1]).Norm();
  }
  Polyline line;
  std::size_t seg = 1;
  for (int i = 0; i < points; ++i) {
    const double s = arc.back() * i / (points - 1);
    while (seg + 1 < path.size() && arc[seg] < s) ++seg;
    const double len = arc[seg] - arc[seg - 1];
    const double f = len > 0 ? std::clamp((s - arc[seg - 1]) / len, 0.0, 1.0)
                             : 0.0;
    const Vec2 d = path[seg] - path[seg - 1];
    const double n = std::max(d.Norm(), 1e-9);
    const Vec2 normal{-d.y / n, d.x / n};
    const Vec2 p = path[seg - 1] + f * d + offset * normal;
    line.points.push_back({p.x, p.y, type, true});
  }
  return line;
}

MapPolylines BuildMap(ScenarioKind kind, const Agent& ego,
                      const Track& ego_history, double crosswalk_x,
                      const GeneratorParams& params) {
  MapPolylines map;
  const int n = params.polyline_points;
  if (kind == ScenarioKind::kTurn) {
    std::vector<Vec2> path;
    for (int k = static_cast<int>(ego_history.size()) - 1; k >= 0; --k) {
      path.push_back(ego_history[k].position());
    }
    for (const auto& s : ego.future) path.push_back(s.position());
    map.polylines.push_back(
        ResamplePath(path, 0.0, PolylineType::kLaneCenter, n));
    map.polylines.push_back(
        ResamplePath(path, kLaneWidth / 2, PolylineType::kLaneBoundary, n));
    map.polylines.push_back(
        ResamplePath(path, -kLaneWidth / 2, PolylineType::kLaneBoundary, n));
    map.polylines.push_back(StraightPolyline(
        {-30.0, kLaneWidth}, {40.0, kLaneWidth}, PolylineType::kLaneCenter, n));
    map.polylines.push_back(StraightPolyline({-30.0, 0.0}, {40.0, 0.0},
                                             PolylineType::kLaneCenter, n));
    return map;
  }
  for (int lane = -1; lane <= 1; ++lane) {
    map.polylines.push_back(StraightPolyline({-30.0, lane * kLaneWidth},
                                             {130.0, lane * kLaneWidth},
                                             PolylineType::kLaneCenter, n));
  }
  for (double y : {-1.5, -0.5, 0.5, 1.5}) {
    map.polylines.push_back(StraightPolyline({-30.0, y * kLaneWidth},
                                             {130.0, y * kLaneWidth},
                                             PolylineType::kLaneBoundary, n));
  }
  if (kind == ScenarioKind::kYield) {
    map.polylines.push_back(StraightPolyline({crosswalk_x, -10.0},
                                             {crosswalk_x, 10.0},
                                             PolylineType::kCrosswalk, n));
  }
  return map;
}

AgentState TransformState(const Pose2& world, AgentState s) {
  const Vec2 p = world.ToWorld(s.position());
  s.px = p.x;
  s.py = p.y;
  s.heading = WrapAngle(s.heading + world.heading);
  return s;
}

}  // namespace

AgentState IntegrateStep(const AgentState& state, Controls u, double dt) {
  const double h = dt / kIntegrationSubsteps;
  double x = state.px, y = state.py, th = state.heading, v = state.speed;
  for (int i = 0; i < kIntegrationSubsteps; ++i) {
    const Deriv k1 = Dynamics(th, v, u);
    const Deriv k2 = Dynamics(th + 0.5 * h * k1.heading,
                              v + 0.5 * h * k1.speed, u);
    const Deriv k3 = Dynamics(th + 0.5 * h * k2.heading,
                              v + 0.5 * h * k2.speed, u);
    const Deriv k4 = Dynamics(th + h * k3.heading, v + h * k3.speed, u);
    x += h / 6.0 * (k1.x + 2 * k2.x + 2 * k3.x + k4.x);
    y += h / 6.0 * (k1.y + 2 * k2.y + 2 * k3.y + k4.y);
    th += h / 6.0 * (k1.heading + 2 * k2.heading + 2 * k3.heading + k4.heading);
    v += h / 6.0 * (k1.speed + 2 * k2.speed + 2 * k3.speed + k4.speed);
  }
  return {x, y, WrapAngle(th), std::max(v, 0.0), true};
}

GeneratedScenario GenerateScenarioDetailed(Rng& rng, ScenarioKind kind,
                                           const GeneratorParams& params) {
  const Agent ego = EgoRollout(rng, kind, params);
  const Track ego_history = StraightHistory(ego.start, params);

  std::vector<Agent> placed{ego};
  std::vector<bool> partial_history;

  double crosswalk_x = 0.0;
  if (kind == ScenarioKind::kYield) {
    // The crossing agent passes in front while the ego is held.
    double min_speed = std::numeric_limits<double>::infinity();
    for (const auto& s : ego.future) min_speed = std::min(min_speed, s.speed);
    int first = -1, last = -1;
    for (int k = 0; k < params.H2; ++k) {
      if (ego.future[k].speed <= min_speed + 1e-6) {
        if (first < 0) first = k;
        last = k;
      }
    }
    const double x_stop = ego.future[first].px;
    const double t_mid = 0.5 * (first + last + 2) * params.dt;
    for (int attempt = 0; attempt < 20; ++attempt) {
      const double side = rng.Uniform() < 0.5 ? -1.0 : 1.0;
      const double speed = rng.Uniform(1.2, 6.0);
      crosswalk_x = x_stop + rng.Uniform(4.0, 9.0);
      Agent crosser =
          RollOut(MakeState(crosswalk_x, -side * speed * t_mid,
                            side * kPi / 2.0, speed),
                  ConstantControls({}), params);
      if (Clear(crosser, placed)) {
        placed.push_back(std::move(crosser));
        partial_history.push_back(false);
        break;
      }
    }
  }

  const int n_others = rng.UniformInt(1, kMaxSurrounding);
  while (static_cast<int>(placed.size()) - 1 < n_others) {
    bool ok = false;
    for (int attempt = 0; attempt < 20 && !ok; ++attempt) {
      Agent other = OtherRollout(rng, DrawRole(rng), ego.start.speed, params);
      if (Clear(other, placed)) {
        placed.push_back(std::move(other));
        partial_history.push_back(rng.Uniform() < 0.2);
        ok = true;
      }
    }
    if (!ok) break;
  }
  if (placed.size() == 1) {
    // Parked well behind the ego, which never reverses.
    placed.push_back(RollOut(MakeState(-40.0, 12.0, 0.0, 0.0),
                             ConstantControls({}), params));
    partial_history.push_back(false);
  }

  GeneratedScenario out;
  Scenario& sc = out.scenario;
  sc.kind = kind;
  sc.dt = params.dt;
  sc.history.ego = ego_history;
  for (std::size_t i = 1; i < placed.size(); ++i) {
    Track track = StraightHistory(placed[i].start, params);
    if (partial_history[i - 1]) {
      const int missing = rng.UniformInt(1, 5);
      for (int k = params.H1; k > params.H1 - missing && k > 0; --k) {
        track[k] = AgentState{};
      }
    }
    sc.history.others.push_back(std::move(track));
  }
  sc.map = BuildMap(kind, ego, ego_history, crosswalk_x, params);

  // Place the scene somewhere in the world.
  const Pose2 world{rng.Uniform(-500.0, 500.0), rng.Uniform(-500.0, 500.0),
                    rng.Uniform(-kPi, kPi)};
  for (auto& s : sc.history.ego) s = TransformState(world, s);
  for (auto& track : sc.history.others) {
    for (auto& s : track) {
      if (s.valid) s = TransformState(world, s);
    }
  }
  for (auto& line : sc.map.polylines) {
    for (auto& pt : line.points) {
      const Vec2 p = world.ToWorld({pt.px, pt.py});
      pt.px = p.x;
      pt.py = p.y;
    }
  }
  sc.gt_future = TrajectorySet(static_cast<int>(placed.size()), params.H2);
  for (std::size_t i = 0; i < placed.size(); ++i) {
    for (int t = 0; t < params.H2; ++t) {
      sc.gt_future.set(static_cast<int>(i), t,
                       world.ToWorld(placed[i].future[t].position()));
    }
    out.controls.push_back(placed[i].controls);
  }
  const Vec2 goal = sc.gt_future.at(0, params.H2 - 1);
  sc.goal = {goal.x, goal.y};
  return out;
}

Scenario GenerateScenario(Rng& rng, ScenarioKind kind,
                          const GeneratorParams& params) {
  return GenerateScenarioDetailed(rng, kind, params).scenario;
}

std::vector<int> SelectSurrounding(const Scenario& scenario, double radius) {
  const auto& gt = scenario.gt_future;
  std::vector<std::pair<double, int>> ranked;
  for (int j = 0; j + 1 < gt.agents(); ++j) {
    if (!gt.valid(j + 1)) continue;
    double best = std::numeric_limits<double>::infinity();
    for (int t = 0; t < gt.horizon(); ++t) {
      best = std::min(best, (gt.at(0, t) - gt.at(j + 1, t)).Norm());
    }
    if (best <= radius) ranked.emplace_back(best, j);
  }
  std::sort(ranked.begin(), ranked.end());
  std::vector<int> out;
  for (const auto& [dist, j] : ranked) {
    if (static_cast<int>(out.size()) == kMaxSurrounding) break;
    out.push_back(j);
  }
  return out;
}

Pose2 ReferencePose(const Track& track) {
  const AgentState& now = track.front();
  Pose2 pose{now.px, now.py, 0.0};
  for (const auto& s : track) {
    if (s.valid && s.speed >= kMinSpeed) {
      pose.heading = s.heading;
      break;
    }
  }
  return pose;
}

DatasetStats FitStatsFromPoints(std::span<const Vec2> points) {
  if (points.size() < 2) {
    throw ValidationError("dataset", "need at least two points for stats");
  }
  const double n = static_cast<double>(points.size());
  Vec2 mean;
  for (const auto& p : points) mean += p;
  mean = (1.0 / n) * mean;
  double sxx = 0.0, syy = 0.0;
  for (const auto& p : points) {
    sxx += (p.x - mean.x) * (p.x - mean.x);
    syy += (p.y - mean.y) * (p.y - mean.y);
  }
  DatasetStats stats;
  stats.mean = mean;
  stats.std = {std::sqrt(sxx / (n - 1.0)), std::sqrt(syy / (n - 1.0))};
  if (!(stats.std.x > 0.0) || !(stats.std.y > 0.0)) {
    throw ValidationError("dataset", "zero variance coordinate");
  }
  return stats;
}

SceneFrame MakeSceneFrame(const Scenario& scenario) {
  SceneFrame frame;
  frame.selected = SelectSurrounding(scenario);
  frame.ref.assign(kJointSlots, Pose2{});
  frame.slot_valid.assign(kJointSlots, false);
  frame.ref[0] = ReferencePose(scenario.history.ego);
  frame.slot_valid[0] = true;
  for (std::size_t k = 0; k < frame.selected.size(); ++k) {
    frame.ref[k + 1] =
        ReferencePose(scenario.history.others[frame.selected[k]]);
    frame.slot_valid[k + 1] = true;
  }
  return frame;
}

TrajectorySet JointFuture(const Scenario& scenario, const SceneFrame& frame) {
  const int horizon = scenario.gt_future.horizon();
  TrajectorySet joint(kJointSlots, horizon);
  for (int slot = 0; slot < kJointSlots; ++slot) {
    joint.set_valid(slot, frame.slot_valid[slot]);
    if (!frame.slot_valid[slot]) continue;
    const int row = slot == 0 ? 0 : frame.selected[slot - 1] + 1;
    for (int t = 0; t < horizon; ++t) {
      joint.set(slot, t, scenario.gt_future.at(row, t));
    }
  }
  return joint;
}

DatasetStats FitStats(std::span<const Scenario> dataset) {
  if (dataset.size() < 2) {
    throw ValidationError("dataset", "need at least two scenarios");
  }
  std::vector<Vec2> points;
  for (const auto& sc : dataset) {
    const SceneFrame frame = MakeSceneFrame(sc);
    const TrajectorySet joint = JointFuture(sc, frame);
    for (int slot = 0; slot < kJointSlots; ++slot) {
      if (!joint.valid(slot)) continue;
      for (int t = 0; t < joint.horizon(); ++t) {
        points.push_back(frame.ref[slot].ToLocal(joint.at(slot, t)));
      }
    }
  }
  return FitStatsFromPoints(points);
}

LocalizedTrajectories ToLocal(const TrajectorySet& future,
                              std::span<const Pose2> poses,
                              const DatasetStats& stats) {
  if (static_cast<int>(poses.size()) != future.agents()) {
    throw ShapeError("ToLocal: one pose per trajectory row required");
  }
  LocalizedTrajectories out;
  out.stats = stats;
  out.ref.assign(poses.begin(), poses.end());
  out.normalized = TrajectorySet(future.agents(), future.horizon());
  for (int a = 0; a < future.agents(); ++a) {
    out.normalized.set_valid(a, future.valid(a));
    if (!future.valid(a)) continue;
    for (int t = 0; t < future.horizon(); ++t) {
      out.normalized.set(a, t,
                         stats.Standardize(poses[a].ToLocal(future.at(a, t))));
    }
  }
  return out;
}

TrajectorySet FromLocal(const LocalizedTrajectories& local) {
  const TrajectorySet& z = local.normalized;
  TrajectorySet out(z.agents(), z.horizon());
  for (int a = 0; a < z.agents(); ++a) {
    out.set_valid(a, z.valid(a));
    if (!z.valid(a)) continue;
    for (int t = 0; t < z.horizon(); ++t) {
      out.set(a, t, local.ref[a].ToWorld(local.stats.Destandardize(z.at(a, t))));
    }
  }
  return out;
}

}  // namespace cmplan
