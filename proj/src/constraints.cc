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

#include "cmplan/constraints.h"

#include <cmath>

#include "cmplan/error.h"

namespace cmplan {
namespace {

void CheckInputs(std::span<const Vec2> positions, double dt) {
  if (positions.size() < 3) {
    throw ValidationError("positions", "need at least 3 points");
  }
  if (!(dt > 0.0)) throw ValidationError("dt", "must be positive");
}

struct Derivatives {
  Vec2 v;
  Vec2 q;
};

Derivatives At(std::span<const Vec2> p, int t, double dt) {
  const Vec2 prev = p[t - 1];
  const Vec2 cur = p[t];
  const Vec2 next = p[t + 1];
  const double inv2dt = 1.0 / (2.0 * dt);
  const double invdt2 = 1.0 / (dt * dt);
  return {{(next.x - prev.x) * inv2dt, (next.y - prev.y) * inv2dt},
          {(next.x - 2.0 * cur.x + prev.x) * invdt2,
           (next.y - 2.0 * cur.y + prev.y) * invdt2}};
}

// Scatters dL/dv and dL/dq at interior step t back onto the positions.
void Scatter(std::vector<Vec2>& grad, int t, Vec2 dv, Vec2 dq, double dt) {
  const double inv2dt = 1.0 / (2.0 * dt);
  const double invdt2 = 1.0 / (dt * dt);
  grad[t + 1] += inv2dt * dv + invdt2 * dq;
  grad[t - 1] += invdt2 * dq - inv2dt * dv;
  grad[t] -= (2.0 * invdt2) * dq;
}

double Sign(double x) { return x > 0.0 ? 1.0 : (x < 0.0 ? -1.0 : 0.0); }

}  // namespace

ControlSeries InferControls(std::span<const Vec2> positions, double dt) {
  CheckInputs(positions, dt);
  const int n = static_cast<int>(positions.size());
  ControlSeries c;
  c.a.assign(n - 2, 0.0);
  c.omega.assign(n - 2, 0.0);
  c.valid.assign(n - 2, false);
  for (int t = 1; t + 1 < n; ++t) {
    const Derivatives d = At(positions, t, dt);
    const double s2 = d.v.x * d.v.x + d.v.y * d.v.y;
    const double s = std::sqrt(s2);
    if (s < kControlSpeedFloor) continue;
    c.a[t - 1] = (d.v.x * d.q.x + d.v.y * d.q.y) / s;
    c.omega[t - 1] = (d.v.x * d.q.y - d.v.y * d.q.x) / s2;
    c.valid[t - 1] = true;
  }
  return c;
}

ConstraintValues EvalConstraints(std::span<const Vec2> positions,
                                 const ConstraintSpec& spec, double dt) {
  const ControlSeries c = InferControls(positions, dt);
  const double h = static_cast<double>(positions.size());
  ConstraintValues out;
  out.goal = (positions.back() - spec.goal.position()).Norm();
  for (std::size_t k = 0; k < c.a.size(); ++k) {
    if (!c.valid[k]) continue;
    out.accel += std::max(std::abs(c.a[k]) - spec.a_limit, 0.0);
    out.omega += std::max(std::abs(c.omega[k]) - spec.omega_limit, 0.0);
  }
  out.accel /= h;
  out.omega /= h;
  return out;
}

std::vector<Vec2> ConstraintGradient(ConstraintKind kind,
                                     std::span<const Vec2> positions,
                                     const ConstraintSpec& spec, double dt) {
  CheckInputs(positions, dt);
  const int n = static_cast<int>(positions.size());
  std::vector<Vec2> grad(n);
  if (kind == ConstraintKind::kGoal) {
    const Vec2 d = positions.back() - spec.goal.position();
    const double dist = d.Norm();
    if (dist > 0.0) grad.back() = (1.0 / dist) * d;
    return grad;
  }
  const double w = 1.0 / static_cast<double>(n);
  for (int t = 1; t + 1 < n; ++t) {
    const Derivatives d = At(positions, t, dt);
    const Vec2 v = d.v;
    const Vec2 q = d.q;
    const double s2 = v.x * v.x + v.y * v.y;
    const double s = std::sqrt(s2);
    if (s < kControlSpeedFloor) continue;
    if (kind == ConstraintKind::kAccel) {
      const double a = (v.x * q.x + v.y * q.y) / s;
      if (!(std::abs(a) - spec.a_limit > 0.0)) continue;
      const double g = w * Sign(a);
      const Vec2 dv{g * (q.x - a * v.x / s) / s, g * (q.y - a * v.y / s) / s};
      const Vec2 dq{g * v.x / s, g * v.y / s};
      Scatter(grad, t, dv, dq, dt);
    } else {
      const double om = (v.x * q.y - v.y * q.x) / s2;
      if (!(std::abs(om) - spec.omega_limit > 0.0)) continue;
      const double g = w * Sign(om);
      const Vec2 dv{g * (q.y - 2.0 * om * v.x) / s2,
                    g * (-q.x - 2.0 * om * v.y) / s2};
      const Vec2 dq{-g * v.y / s2, g * v.x / s2};
      Scatter(grad, t, dv, dq, dt);
    }
  }
  return grad;
}

std::array<std::vector<Vec2>, kNumConstraints> ConstraintGradients(
    std::span<const Vec2> positions, const ConstraintSpec& spec, double dt) {
  return {ConstraintGradient(ConstraintKind::kGoal, positions, spec, dt),
          ConstraintGradient(ConstraintKind::kAccel, positions, spec, dt),
          ConstraintGradient(ConstraintKind::kOmega, positions, spec, dt)};
}

}  // namespace cmplan
