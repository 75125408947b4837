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

#ifndef CMPLAN_METRICS_H_
#define CMPLAN_METRICS_H_

#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "cmplan/constraints.h"
#include "cmplan/types.h"

namespace cmplan {

inline constexpr double kCollisionThreshold = 2.0;  // m

struct AdeFde {
  double ade = 0.0;
  double fde = 0.0;
};

// Mean and final displacement between two equal-length tracks.
AdeFde Displacement(std::span<const Vec2> sample, std::span<const Vec2> gt);
// Minimum ADE and minimum FDE over the samples, taken independently. Throws
// ValidationError on an empty set or a length mismatch.
AdeFde MinAdeFde(std::span<const std::vector<Vec2>> samples,
                 std::span<const Vec2> gt);

struct TrajectoryQuality {
  double angle_change = 0.0;  // rad/s
  double path_length = 0.0;   // m
  double curvature = 0.0;     // 1/m
};

// angle_change: mean |heading change| / dt between consecutive displacement
// vectors; curvature: mean |omega| / speed at interior steps. Both skip
// steps slower than kControlSpeedFloor and are 0 when nothing is left.
TrajectoryQuality Quality(std::span<const Vec2> track, double dt);

// True if the ego (row 0) comes closer than `threshold` to any other valid
// row at any step.
bool Collides(const TrajectorySet& joint, double threshold);
// Percentage of colliding joint samples.
double CollisionRate(std::span<const TrajectorySet> samples,
                     double threshold = kCollisionThreshold);

// Mean constraint values over the given tracks and their specs.
ConstraintValues ViolationReport(std::span<const std::vector<Vec2>> tracks,
                                 std::span<const ConstraintSpec> specs,
                                 double dt);

struct MetricsReport {
  std::string method;
  double min_ade = 0.0;
  double min_fde = 0.0;
  double angle_change = 0.0;
  double path_length = 0.0;
  double curvature = 0.0;
  double collision_rate = 0.0;  // percent
  ConstraintValues violations;
  int sampling_steps = 0;
  double wall_time = 0.0;  // seconds per scene
};

// Accumulates per-scene results in call order.
class MetricsAccumulator {
 public:
  MetricsAccumulator(double dt, double collision_threshold = kCollisionThreshold)
      : dt_(dt), threshold_(collision_threshold) {}

  // `samples` are world-frame joint samples (row 0 is the ego).
  void AddScene(std::span<const TrajectorySet> samples,
                std::span<const Vec2> gt_ego, const ConstraintSpec& spec);
  int scenes() const { return scenes_; }
  MetricsReport Report(const std::string& method, int sampling_steps,
                       double wall_time) const;

 private:
  double dt_;
  double threshold_;
  int scenes_ = 0;
  int samples_ = 0;
  int collisions_ = 0;
  double ade_ = 0.0;
  double fde_ = 0.0;
  TrajectoryQuality quality_;
  ConstraintValues violations_;
};

// CSV columns: method, minADE, minFDE, angle change, path length, curvature,
// collision rate, the three violations, sampling steps. Wall time is left
// out so repeated runs give identical files.
void WriteMetricsCsv(std::ostream& out, std::span<const MetricsReport> rows);
// Aligned text table with the CSV columns plus wall time.
void WriteMetricsTable(std::ostream& out, std::span<const MetricsReport> rows);

}  // namespace cmplan

#endif  // CMPLAN_METRICS_H_
