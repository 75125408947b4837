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

#ifndef CMPLAN_CONSTRAINTS_H_
#define CMPLAN_CONSTRAINTS_H_

#include <array>
#include <span>
#include <vector>

#include "cmplan/types.h"

namespace cmplan {

inline constexpr double kDefaultAccelLimit = 4.0;  // m/s^2
inline constexpr double kDefaultOmegaLimit = 0.5;  // rad/s
// Below this speed (m/s) the controls are undefined and masked.
inline constexpr double kControlSpeedFloor = 1e-3;

// Controls recovered at interior steps t = 1..H2-2 of a position track.
struct ControlSeries {
  std::vector<double> a;      // m/s^2
  std::vector<double> omega;  // rad/s
  std::vector<bool> valid;    // false where speed < kControlSpeedFloor
};

// Central first and second differences, then a = v.q / |v| and
// omega = (v x q) / |v|^2. Throws ValidationError if fewer than 3 points or
// dt <= 0.
ControlSeries InferControls(std::span<const Vec2> positions, double dt);

struct ConstraintSpec {
  Goal goal;
  double a_limit = kDefaultAccelLimit;
  double omega_limit = kDefaultOmegaLimit;
};

enum class ConstraintKind { kGoal = 0, kAccel = 1, kOmega = 2 };
inline constexpr int kNumConstraints = 3;

// Goal distance (m), mean acceleration excess (m/s^2) and mean yaw-rate
// excess (rad/s). The excess sums run over the interior steps and are
// divided by the full horizon length.
struct ConstraintValues {
  double goal = 0.0;
  double accel = 0.0;
  double omega = 0.0;

  double operator[](ConstraintKind k) const {
    return k == ConstraintKind::kGoal    ? goal
           : k == ConstraintKind::kAccel ? accel
                                         : omega;
  }
  double Sum() const { return goal + accel + omega; }
};

ConstraintValues EvalConstraints(std::span<const Vec2> positions,
                                 const ConstraintSpec& spec, double dt);

// Gradient of one constraint with respect to every position. The hinge and
// the goal distance use zero as the subgradient at their kinks.
std::vector<Vec2> ConstraintGradient(ConstraintKind kind,
                                     std::span<const Vec2> positions,
                                     const ConstraintSpec& spec, double dt);

std::array<std::vector<Vec2>, kNumConstraints> ConstraintGradients(
    std::span<const Vec2> positions, const ConstraintSpec& spec, double dt);

}  // namespace cmplan

#endif  // CMPLAN_CONSTRAINTS_H_
