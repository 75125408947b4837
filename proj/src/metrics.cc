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

#include "cmplan/metrics.h"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <limits>
#include <ostream>
#include <sstream>

#include "cmplan/config.h"
#include "cmplan/error.h"

namespace cmplan {

AdeFde Displacement(std::span<const Vec2> sample, std::span<const Vec2> gt) {
  if (sample.size() != gt.size() || gt.empty()) {
    throw ValidationError("horizon", "sample and ground truth lengths differ");
  }
  AdeFde r;
  for (std::size_t t = 0; t < gt.size(); ++t) r.ade += (sample[t] - gt[t]).Norm();
  r.ade /= static_cast<double>(gt.size());
  r.fde = (sample.back() - gt.back()).Norm();
  return r;
}

AdeFde MinAdeFde(std::span<const std::vector<Vec2>> samples,
                 std::span<const Vec2> gt) {
  if (samples.empty()) throw ValidationError("K", "need at least one sample");
  AdeFde best{std::numeric_limits<double>::infinity(),
              std::numeric_limits<double>::infinity()};
  for (const auto& s : samples) {
    const AdeFde d = Displacement(s, gt);
    best.ade = std::min(best.ade, d.ade);
    best.fde = std::min(best.fde, d.fde);
  }
  return best;
}

TrajectoryQuality Quality(std::span<const Vec2> track, double dt) {
  TrajectoryQuality q;
  const int n = static_cast<int>(track.size());
  for (int t = 0; t + 1 < n; ++t) q.path_length += (track[t + 1] - track[t]).Norm();
  if (n < 3) return q;

  double turn = 0.0;
  int turns = 0;
  for (int t = 1; t + 1 < n; ++t) {
    const Vec2 d0 = track[t] - track[t - 1];
    const Vec2 d1 = track[t + 1] - track[t];
    if (d0.Norm() / dt < kControlSpeedFloor || d1.Norm() / dt < kControlSpeedFloor) {
      continue;
    }
    const double h0 = std::atan2(d0.y, d0.x);
    const double h1 = std::atan2(d1.y, d1.x);
    turn += std::abs(WrapAngle(h1 - h0)) / dt;
    ++turns;
  }
  if (turns > 0) q.angle_change = turn / turns;

  const ControlSeries c = InferControls(track, dt);
  double curv = 0.0;
  int count = 0;
  for (int t = 1; t + 1 < n; ++t) {
    if (!c.valid[t - 1]) continue;
    const double speed = (track[t + 1] - track[t - 1]).Norm() / (2.0 * dt);
    curv += std::abs(c.omega[t - 1]) / speed;
    ++count;
  }
  if (count > 0) q.curvature = curv / count;
  return q;
}

bool Collides(const TrajectorySet& joint, double threshold) {
  for (int k = 1; k < joint.agents(); ++k) {
    if (!joint.valid(k)) continue;
    for (int t = 0; t < joint.horizon(); ++t) {
      if ((joint.at(0, t) - joint.at(k, t)).Norm() < threshold) return true;
    }
  }
  return false;
}

double CollisionRate(std::span<const TrajectorySet> samples, double threshold) {
  if (!(threshold > 0.0)) throw ValidationError("threshold", "must be positive");
  if (samples.empty()) return 0.0;
  int hits = 0;
  for (const auto& s : samples) hits += Collides(s, threshold) ? 1 : 0;
  return 100.0 * hits / static_cast<double>(samples.size());
}

ConstraintValues ViolationReport(std::span<const std::vector<Vec2>> tracks,
                                 std::span<const ConstraintSpec> specs,
                                 double dt) {
  if (tracks.size() != specs.size()) {
    throw ValidationError("specs", "need one spec per track");
  }
  ConstraintValues mean;
  if (tracks.empty()) return mean;
  for (std::size_t i = 0; i < tracks.size(); ++i) {
    const ConstraintValues v = EvalConstraints(tracks[i], specs[i], dt);
    mean.goal += v.goal;
    mean.accel += v.accel;
    mean.omega += v.omega;
  }
  const double n = static_cast<double>(tracks.size());
  mean.goal /= n;
  mean.accel /= n;
  mean.omega /= n;
  return mean;
}

void MetricsAccumulator::AddScene(std::span<const TrajectorySet> samples,
                                  std::span<const Vec2> gt_ego,
                                  const ConstraintSpec& spec) {
  std::vector<std::vector<Vec2>> ego;
  ego.reserve(samples.size());
  for (const auto& s : samples) ego.push_back(s.Row(0));
  const AdeFde m = MinAdeFde(ego, gt_ego);
  ade_ += m.ade;
  fde_ += m.fde;
  for (std::size_t k = 0; k < samples.size(); ++k) {
    const TrajectoryQuality q = Quality(ego[k], dt_);
    quality_.angle_change += q.angle_change;
    quality_.path_length += q.path_length;
    quality_.curvature += q.curvature;
    const ConstraintValues v = EvalConstraints(ego[k], spec, dt_);
    violations_.goal += v.goal;
    violations_.accel += v.accel;
    violations_.omega += v.omega;
    collisions_ += Collides(samples[k], threshold_) ? 1 : 0;
  }
  samples_ += static_cast<int>(samples.size());
  ++scenes_;
}

MetricsReport MetricsAccumulator::Report(const std::string& method,
                                         int sampling_steps,
                                         double wall_time) const {
  MetricsReport r;
  r.method = method;
  r.sampling_steps = sampling_steps;
  r.wall_time = wall_time;
  if (scenes_ == 0) return r;
  const double s = static_cast<double>(samples_);
  r.min_ade = ade_ / scenes_;
  r.min_fde = fde_ / scenes_;
  r.angle_change = quality_.angle_change / s;
  r.path_length = quality_.path_length / s;
  r.curvature = quality_.curvature / s;
  r.collision_rate = 100.0 * collisions_ / s;
  r.violations = {violations_.goal / s, violations_.accel / s,
                  violations_.omega / s};
  return r;
}

namespace {

std::vector<std::string> Cells(const MetricsReport& r) {
  return {r.method,
          FormatDouble(r.min_ade),
          FormatDouble(r.min_fde),
          FormatDouble(r.angle_change),
          FormatDouble(r.path_length),
          FormatDouble(r.curvature),
          FormatDouble(r.collision_rate),
          FormatDouble(r.violations.goal),
          FormatDouble(r.violations.accel),
          FormatDouble(r.violations.omega),
          std::to_string(r.sampling_steps)};
}

const std::vector<std::string>& Header() {
  static const std::vector<std::string> h = {
      "method",       "min_ade",   "min_fde",        "angle_change",
      "path_length",  "curvature", "collision_rate", "c_goal",
      "c_acc",        "c_omega",   "steps"};
  return h;
}

std::string Fixed(double v, int precision) {
  std::ostringstream s;
  s << std::fixed << std::setprecision(precision) << v;
  return s.str();
}

}  // namespace

void WriteMetricsCsv(std::ostream& out, std::span<const MetricsReport> rows) {
  const auto& h = Header();
  for (std::size_t i = 0; i < h.size(); ++i) out << (i ? "," : "") << h[i];
  out << '\n';
  for (const auto& r : rows) {
    const auto cells = Cells(r);
    for (std::size_t i = 0; i < cells.size(); ++i) {
      out << (i ? "," : "") << cells[i];
    }
    out << '\n';
  }
}

void WriteMetricsTable(std::ostream& out, std::span<const MetricsReport> rows) {
  std::vector<std::vector<std::string>> table;
  std::vector<std::string> header = Header();
  header.push_back("wall_time_s");
  table.push_back(header);
  for (const auto& r : rows) {
    table.push_back({r.method, Fixed(r.min_ade, 3), Fixed(r.min_fde, 3),
                     Fixed(r.angle_change, 4), Fixed(r.path_length, 2),
                     Fixed(r.curvature, 4), Fixed(r.collision_rate, 2),
                     Fixed(r.violations.goal, 4), Fixed(r.violations.accel, 4),
                     Fixed(r.violations.omega, 4),
                     std::to_string(r.sampling_steps), Fixed(r.wall_time, 4)});
  }
  std::vector<std::size_t> width(header.size(), 0);
  for (const auto& row : table) {
    for (std::size_t i = 0; i < row.size(); ++i) {
      width[i] = std::max(width[i], row[i].size());
    }
  }
  for (const auto& row : table) {
    for (std::size_t i = 0; i < row.size(); ++i) {
      if (i) out << "  ";
      if (i == 0) {
        out << std::left << std::setw(static_cast<int>(width[i])) << row[i];
      } else {
        out << std::right << std::setw(static_cast<int>(width[i])) << row[i];
      }
    }
    out << '\n';
  }
}

}  // namespace cmplan
