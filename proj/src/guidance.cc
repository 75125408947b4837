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

#include "cmplan/guidance.h"

#include <algorithm>
#include <cmath>
#include <ostream>

#include "cmplan/config.h"
#include "cmplan/error.h"

namespace cmplan {
namespace {

bool AllFinite(std::span<const double> v) {
  for (double x : v) {
    if (!std::isfinite(x)) return false;
  }
  return true;
}

std::vector<double> Values(std::span<const Objective> objectives,
                           std::span<const double> x) {
  std::vector<double> v;
  v.reserve(objectives.size());
  for (const Objective& o : objectives) v.push_back(o.value(x));
  return v;
}

GuideResult GuideEgo(GuidanceStrategy strategy, std::span<double> sample,
                     const EgoFrame& frame, std::span<const double> alpha,
                     int n_grad_steps, bool record_curve) {
  const std::size_t n = 2 * static_cast<std::size_t>(frame.horizon);
  if (sample.size() < n) throw ShapeError("guidance: sample shorter than ego");
  if (alpha.size() != kNumConstraints) {
    throw ValidationError("alpha", "need one step size per constraint");
  }
  const auto objectives = EgoObjectives(frame);
  const DescentResult r = Descend(strategy, sample.first(n), objectives, alpha,
                                  n_grad_steps, record_curve);
  GuideResult out;
  out.aborted = r.aborted;
  for (const auto& v : r.values) out.curve.push_back({v[0], v[1], v[2]});
  return out;
}

}  // namespace

std::string_view GuidanceStrategyName(GuidanceStrategy s) {
  switch (s) {
    case GuidanceStrategy::kNone:
      return "none";
    case GuidanceStrategy::kVanilla:
      return "vanilla";
    case GuidanceStrategy::kAlternating:
      return "alternating";
  }
  return "none";
}

GuidanceStrategy ParseGuidanceStrategy(std::string_view name) {
  if (name == "none") return GuidanceStrategy::kNone;
  if (name == "vanilla") return GuidanceStrategy::kVanilla;
  if (name == "alternating") return GuidanceStrategy::kAlternating;
  throw ValidationError("guidance", "unknown strategy '" + std::string(name) +
                                        "' (none|vanilla|alternating)");
}

void GuidanceConfig::Validate() const {
  for (double a : alpha) {
    if (!(a >= 0.0) || !std::isfinite(a)) {
      throw ValidationError("alpha", "step sizes must be finite and >= 0");
    }
  }
  if (n_grad_steps < 1) {
    throw ValidationError("n_grad_steps", "must be at least 1");
  }
  if (goal_basis_terms < 0) {
    throw ValidationError("goal_basis_terms", "must be >= 0");
  }
}

DescentResult Descend(GuidanceStrategy strategy, std::span<double> x,
                      std::span<const Objective> objectives,
                      std::span<const double> alpha, int n_steps,
                      bool record_values) {
  if (alpha.size() != objectives.size()) {
    throw ValidationError("alpha", "need one step size per objective");
  }
  DescentResult r;
  if (record_values) r.values.push_back(Values(objectives, x));
  if (strategy == GuidanceStrategy::kNone) return r;
  const std::size_t n = x.size();
  std::vector<double> grad(n);
  std::vector<double> step(n);
  for (int k = 0; k < n_steps; ++k) {
    if (strategy == GuidanceStrategy::kVanilla) {
      for (std::size_t j = 0; j < objectives.size(); ++j) {
        objectives[j].gradient(x, grad);
        if (!AllFinite(grad)) {
          r.aborted = true;
          return r;
        }
        for (std::size_t i = 0; i < n; ++i) {
          const double s = alpha[j] * grad[i];
          step[i] = j == 0 ? s : step[i] + s;
        }
      }
      for (std::size_t i = 0; i < n; ++i) x[i] -= step[i];
    } else {
      for (std::size_t j = 0; j < objectives.size(); ++j) {
        objectives[j].gradient(x, grad);
        if (!AllFinite(grad)) {
          r.aborted = true;
          return r;
        }
        for (std::size_t i = 0; i < n; ++i) {
          step[i] = alpha[j] * grad[i];
          x[i] -= step[i];
        }
      }
    }
    if (record_values) r.values.push_back(Values(objectives, x));
  }
  return r;
}

std::vector<Vec2> DecodeEgo(std::span<const double> z, const EgoFrame& frame) {
  std::vector<Vec2> p(frame.horizon);
  for (int t = 0; t < frame.horizon; ++t) {
    p[t] = frame.ref.ToWorld(frame.stats.Destandardize({z[2 * t], z[2 * t + 1]}));
  }
  return p;
}

std::array<Objective, kNumConstraints> EgoObjectives(const EgoFrame& frame) {
  std::array<Objective, kNumConstraints> out;
  for (int j = 0; j < kNumConstraints; ++j) {
    const auto kind = static_cast<ConstraintKind>(j);
    out[j].value = [frame, kind](std::span<const double> z) {
      return EvalConstraints(DecodeEgo(z, frame), frame.spec, frame.dt)[kind];
    };
    out[j].gradient = [frame, kind](std::span<const double> z,
                                    std::span<double> grad) {
      const std::vector<Vec2> g =
          ConstraintGradient(kind, DecodeEgo(z, frame), frame.spec, frame.dt);
      for (int t = 0; t < frame.horizon; ++t) {
        const Vec2 local = frame.ref.RotateToLocal(g[t]);
        grad[2 * t] = frame.stats.std.x * local.x;
        grad[2 * t + 1] = frame.stats.std.y * local.y;
      }
      if (frame.basis.size() > 0) {
        Eigen::Map<net::Matrix> xy(grad.data(), 2, frame.horizon);
        const Eigen::Index all = frame.basis.cols();
        const Eigen::Index m =
            kind == ConstraintKind::kGoal && frame.goal_terms > 0
                ? std::min<Eigen::Index>(frame.goal_terms, all)
                : all;
        xy = (xy * frame.basis.leftCols(m)) * frame.basis.leftCols(m).transpose();
      }
    };
  }
  return out;
}

GuideResult GuideVanilla(std::span<double> sample, const EgoFrame& frame,
                         std::span<const double> alpha, int n_grad_steps,
                         bool record_curve) {
  return GuideEgo(GuidanceStrategy::kVanilla, sample, frame, alpha,
                  n_grad_steps, record_curve);
}

GuideResult GuideAlternating(std::span<double> sample, const EgoFrame& frame,
                             std::span<const double> alpha, int n_grad_steps,
                             bool record_curve) {
  return GuideEgo(GuidanceStrategy::kAlternating, sample, frame, alpha,
                  n_grad_steps, record_curve);
}

GuideResult Guide(GuidanceStrategy strategy, std::span<double> sample,
                  const EgoFrame& frame, const GuidanceConfig& config) {
  return GuideEgo(strategy, sample, frame, config.alpha, config.n_grad_steps,
                  config.record_curve);
}

GuidedSampleResult GuidedSample(const DenoiseFn& f,
                                const NoiseSchedule& schedule,
                                std::span<const net::Matrix> noise,
                                std::span<const EgoFrame> frames,
                                const GuidanceConfig& config,
                                const std::vector<net::Matrix>* reference) {
  config.Validate();
  GuidedSampleResult out;
  if (noise.empty()) throw ValidationError("steps", "need at least one step");
  const Eigen::Index n = noise[0].cols();
  if (static_cast<Eigen::Index>(frames.size()) != n) {
    throw ShapeError("GuidedSample: one frame per column required");
  }
  out.curves.resize(n);
  out.aborted.assign(n, false);
  if (config.strategy == GuidanceStrategy::kNone) {
    out.samples = ConsistencySampleWithNoise(f, schedule, noise);
    return out;
  }

  std::vector<net::Matrix> own;
  if (!reference) {
    own = ReferencePredictions(f, schedule, noise);
    reference = &own;
  }
  if (reference->size() != noise.size()) {
    throw ShapeError("GuidedSample: reference has the wrong step count");
  }

  int step = 0;
  auto hook = [&](net::Matrix& x_hat, int, bool last) {
    const net::Matrix& ref = (*reference)[step++];
    for (Eigen::Index c = 0; c < n; ++c) {
      const Eigen::Index ego = 2 * frames[c].horizon;
      x_hat.col(c).tail(x_hat.rows() - ego) = ref.col(c).tail(ref.rows() - ego);
      if (!config.every_step && !last) continue;
      const GuideResult g =
          Guide(config.strategy,
                {x_hat.col(c).data(), static_cast<std::size_t>(x_hat.rows())},
                frames[c], config);
      if (g.aborted) out.aborted[c] = true;
      if (last) out.curves[c] = g.curve;
    }
  };
  out.samples = ConsistencySampleWithNoise(f, schedule, noise, hook);
  return out;
}

std::vector<net::Matrix> ReferencePredictions(
    const DenoiseFn& f, const NoiseSchedule& schedule,
    std::span<const net::Matrix> noise) {
  std::vector<net::Matrix> out;
  ConsistencySampleWithNoise(
      f, schedule, noise,
      [&out](net::Matrix& x_hat, int, bool) { out.push_back(x_hat); });
  return out;
}

void WriteCurveCsv(std::ostream& out, const ViolationCurve& curve) {
  out << "step,c_goal,c_acc,c_omega\n";
  for (std::size_t k = 0; k < curve.size(); ++k) {
    out << k << ',' << FormatDouble(curve[k].goal) << ','
        << FormatDouble(curve[k].accel) << ',' << FormatDouble(curve[k].omega)
        << '\n';
  }
}

}  // namespace cmplan
