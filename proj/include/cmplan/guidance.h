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

#ifndef CMPLAN_GUIDANCE_H_
#define CMPLAN_GUIDANCE_H_

#include <array>
#include <functional>
#include <iosfwd>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "cmplan/consistency.h"
#include "cmplan/constraints.h"
#include "cmplan/datagen.h"
#include "cmplan/net.h"

namespace cmplan {

enum class GuidanceStrategy { kNone, kVanilla, kAlternating };

std::string_view GuidanceStrategyName(GuidanceStrategy s);
// Throws ValidationError on an unknown name.
GuidanceStrategy ParseGuidanceStrategy(std::string_view name);

struct GuidanceConfig {
  GuidanceStrategy strategy = GuidanceStrategy::kNone;
  std::array<double, kNumConstraints> alpha = {2e-5, 3e-6, 5e-7};
  int n_grad_steps = 100;
  bool record_curve = false;
  // Guide every sampling step, or only the final prediction.
  bool every_step = true;
  // Copied into EgoFrame::goal_terms by the samplers.
  int goal_basis_terms = 4;

  // Throws ValidationError on negative step sizes or n_grad_steps < 1.
  void Validate() const;
};

// A differentiable scalar objective over a flat parameter vector.
struct Objective {
  std::function<double(std::span<const double> x)> value;
  // Writes the gradient into `grad` (same size as x).
  std::function<void(std::span<const double> x, std::span<double> grad)>
      gradient;
};

struct DescentResult {
  // values[k][j]: objective j before step k + 1 (k = 0 is the start), empty
  // unless recorded.
  std::vector<std::vector<double>> values;
  bool aborted = false;  // a non-finite gradient stopped the descent
};

// Runs n_steps iterations in place. Simultaneous descent moves along the
// weighted sum of all gradients at the current point; alternating descent
// takes one step per objective in order, re-evaluating the gradient after
// each. On a non-finite gradient x keeps its last finite value.
DescentResult Descend(GuidanceStrategy strategy, std::span<double> x,
                      std::span<const Objective> objectives,
                      std::span<const double> alpha, int n_steps,
                      bool record_values);

using ViolationCurve = std::vector<ConstraintValues>;

// Where an ego trajectory lives: the normalized sample's first 2 * horizon
// entries map to world positions through `stats` and `ref`.
struct EgoFrame {
  Pose2 ref;
  DatasetStats stats;
  ConstraintSpec spec;
  double dt = 0.1;
  int horizon = 0;
  // Optional time basis (horizon x terms, low orders first). When set,
  // gradients are projected onto its span, so descent moves the plan within
  // the model's subspace.
  net::Matrix basis;
  // Leading basis terms used for the goal gradient (0 = all). The goal term
  // only touches the last point; a low-order projection spreads the pull
  // over the whole plan instead of bending its tail.
  int goal_terms = 0;
};

std::vector<Vec2> DecodeEgo(std::span<const double> z, const EgoFrame& frame);

// Constraint objectives over normalized ego coordinates, ordered goal,
// acceleration, yaw rate. Gradients are pulled back through the affine
// world-from-normalized map.
std::array<Objective, kNumConstraints> EgoObjectives(const EgoFrame& frame);

struct GuideResult {
  ViolationCurve curve;  // n_grad_steps + 1 entries when recorded
  bool aborted = false;
};

// Guides the ego block of one normalized sample in place; all other
// coordinates are untouched.
GuideResult GuideVanilla(std::span<double> sample, const EgoFrame& frame,
                         std::span<const double> alpha, int n_grad_steps,
                         bool record_curve);
GuideResult GuideAlternating(std::span<double> sample, const EgoFrame& frame,
                             std::span<const double> alpha, int n_grad_steps,
                             bool record_curve);
GuideResult Guide(GuidanceStrategy strategy, std::span<double> sample,
                  const EgoFrame& frame, const GuidanceConfig& config);

struct GuidedSampleResult {
  net::Matrix samples;                // one column per sample
  std::vector<ViolationCurve> curves;  // final-step curve per column
  std::vector<bool> aborted;
};

// Consistency sampling with guidance applied to each clean prediction.
// `frames[c]` describes column c. With a strategy other than none, an
// unguided chain on the same noise supplies the non-ego rows of every
// prediction, so those rows match unguided sampling bit for bit. With
// strategy none this is exactly ConsistencySampleWithNoise.
// `reference`, when given, must be ReferencePredictions for the same f and
// noise; it saves re-running the unguided chain.
GuidedSampleResult GuidedSample(const DenoiseFn& f,
                                const NoiseSchedule& schedule,
                                std::span<const net::Matrix> noise,
                                std::span<const EgoFrame> frames,
                                const GuidanceConfig& config,
                                const std::vector<net::Matrix>* reference =
                                    nullptr);

// Clean predictions of the unguided chain, one per sampling step.
std::vector<net::Matrix> ReferencePredictions(
    const DenoiseFn& f, const NoiseSchedule& schedule,
    std::span<const net::Matrix> noise);

// CSV with header step,c_goal,c_acc,c_omega.
void WriteCurveCsv(std::ostream& out, const ViolationCurve& curve);

}  // namespace cmplan

#endif  // CMPLAN_GUIDANCE_H_
