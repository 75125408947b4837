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

#include "cmplan/types.h"

#include <numbers>

namespace cmplan {

Vec2 Pose2::RotateToLocal(const Vec2& v) const {
  const double c = std::cos(heading);
  const double s = std::sin(heading);
  return {c * v.x + s * v.y, -s * v.x + c * v.y};
}

Vec2 Pose2::RotateToWorld(const Vec2& v) const {
  const double c = std::cos(heading);
  const double s = std::sin(heading);
  return {c * v.x - s * v.y, s * v.x + c * v.y};
}

Vec2 Pose2::ToLocal(const Vec2& world) const {
  return RotateToLocal(world - position());
}

Vec2 Pose2::ToWorld(const Vec2& local) const {
  return RotateToWorld(local) + position();
}

double WrapAngle(double angle) {
  constexpr double kTwoPi = 2.0 * std::numbers::pi;
  double a = std::fmod(angle, kTwoPi);
  if (a <= -std::numbers::pi) a += kTwoPi;
  if (a > std::numbers::pi) a -= kTwoPi;
  return a;
}

TrajectorySet::TrajectorySet(int agents, int horizon)
    : agents_(agents),
      horizon_(horizon),
      data_(static_cast<std::size_t>(agents) * horizon * 2, 0.0),
      valid_(agents, 1) {}

std::vector<Vec2> TrajectorySet::Row(int agent) const {
  std::vector<Vec2> row(horizon_);
  for (int t = 0; t < horizon_; ++t) row[t] = at(agent, t);
  return row;
}

void TrajectorySet::SetRow(int agent, std::span<const Vec2> points) {
  for (int t = 0; t < horizon_; ++t) set(agent, t, points[t]);
}

bool TrajectorySet::AllFinite() const {
  for (double v : data_) {
    if (!std::isfinite(v)) return false;
  }
  return true;
}

std::string_view ScenarioKindName(ScenarioKind kind) {
  switch (kind) {
    case ScenarioKind::kStraight:
      return "straight";
    case ScenarioKind::kLaneChange:
      return "lane-change";
    case ScenarioKind::kTurn:
      return "turn";
    case ScenarioKind::kYield:
      return "yield";
  }
  return "unknown";
}

}  // namespace cmplan
