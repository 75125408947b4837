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

#ifndef CMPLAN_TYPES_H_
#define CMPLAN_TYPES_H_

#include <cmath>
#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

namespace cmplan {

// Planar vector in meters (or m/s, m/s^2 depending on context).
struct Vec2 {
  double x = 0.0;
  double y = 0.0;

  Vec2& operator+=(const Vec2& o) { x += o.x; y += o.y; return *this; }
  Vec2& operator-=(const Vec2& o) { x -= o.x; y -= o.y; return *this; }
  friend Vec2 operator+(Vec2 a, const Vec2& b) { return a += b; }
  friend Vec2 operator-(Vec2 a, const Vec2& b) { return a -= b; }
  friend Vec2 operator*(double s, const Vec2& v) { return {s * v.x, s * v.y}; }
  friend bool operator==(const Vec2&, const Vec2&) = default;

  double Norm() const { return std::hypot(x, y); }
  double Dot(const Vec2& o) const { return x * o.x + y * o.y; }
};

// Position plus heading (radians).
struct Pose2 {
  double x = 0.0;
  double y = 0.0;
  double heading = 0.0;

  Vec2 position() const { return {x, y}; }
  // World point expressed in this pose's frame.
  Vec2 ToLocal(const Vec2& world) const;
  Vec2 ToWorld(const Vec2& local) const;
  // Rotates a free vector (no translation).
  Vec2 RotateToLocal(const Vec2& v) const;
  Vec2 RotateToWorld(const Vec2& v) const;
};

// Wraps an angle into (-pi, pi].
double WrapAngle(double angle);

struct AgentState {
  double px = 0.0;       // m
  double py = 0.0;       // m
  double heading = 0.0;  // rad, (-pi, pi]
  double speed = 0.0;    // m/s
  bool valid = false;

  Vec2 position() const { return {px, py}; }
  Pose2 pose() const { return {px, py, heading}; }
};

// Index 0 is the current time t0, index k is t0 - k.
using Track = std::vector<AgentState>;

struct History {
  Track ego;
  std::vector<Track> others;
};

enum class PolylineType : std::uint8_t {
  kLaneCenter = 0,
  kLaneBoundary = 1,
  kCrosswalk = 2,
};
inline constexpr int kNumPolylineTypes = 3;

struct MapPoint {
  double px = 0.0;
  double py = 0.0;
  PolylineType type = PolylineType::kLaneCenter;
  bool valid = false;
};

struct Polyline {
  std::vector<MapPoint> points;
};

struct MapPolylines {
  std::vector<Polyline> polylines;
};

struct Goal {
  double px = 0.0;
  double py = 0.0;

  Vec2 position() const { return {px, py}; }
};

// Future positions of several agents over a common horizon, stored as
// agents x horizon x 2 row-major. Row 0 is the ego agent. Rows whose
// `valid` flag is false are padding.
class TrajectorySet {
 public:
  TrajectorySet() = default;
  TrajectorySet(int agents, int horizon);

  int agents() const { return agents_; }
  int horizon() const { return horizon_; }

  Vec2 at(int agent, int t) const {
    const auto i = Offset(agent, t);
    return {data_[i], data_[i + 1]};
  }
  void set(int agent, int t, const Vec2& p) {
    const auto i = Offset(agent, t);
    data_[i] = p.x;
    data_[i + 1] = p.y;
  }
  bool valid(int agent) const { return valid_[agent] != 0; }
  void set_valid(int agent, bool v) { valid_[agent] = v ? 1 : 0; }

  // Positions of one agent as (x, y) pairs.
  std::vector<Vec2> Row(int agent) const;
  void SetRow(int agent, std::span<const Vec2> points);

  std::span<double> data() { return data_; }
  std::span<const double> data() const { return data_; }

  bool AllFinite() const;

  friend bool operator==(const TrajectorySet&, const TrajectorySet&) = default;

 private:
  std::size_t Offset(int agent, int t) const {
    return (static_cast<std::size_t>(agent) * horizon_ + t) * 2;
  }

  int agents_ = 0;
  int horizon_ = 0;
  std::vector<double> data_;
  std::vector<std::uint8_t> valid_;
};

enum class ScenarioKind : std::uint8_t {
  kStraight = 0,
  kLaneChange = 1,
  kTurn = 2,
  kYield = 3,
};
inline constexpr int kNumScenarioKinds = 4;

std::string_view ScenarioKindName(ScenarioKind kind);

// One traffic scene. `gt_future` holds the ground-truth futures of the ego
// (row 0) and of every other agent (row k + 1 for history.others[k]);
// surrounding-agent selection happens during preprocessing.
struct Scenario {
  ScenarioKind kind = ScenarioKind::kStraight;
  double dt = 0.1;
  History history;
  MapPolylines map;
  Goal goal;
  TrajectorySet gt_future;

  int history_steps() const { return static_cast<int>(history.ego.size()); }
  int horizon() const { return gt_future.horizon(); }
};

}  // namespace cmplan

#endif  // CMPLAN_TYPES_H_
