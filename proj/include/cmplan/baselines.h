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

#ifndef CMPLAN_BASELINES_H_
#define CMPLAN_BASELINES_H_

#include <functional>
#include <span>
#include <vector>

#include "cmplan/consistency.h"
#include "cmplan/net.h"
#include "cmplan/rng.h"

namespace cmplan {

// Discrete diffusion schedule with steps t = 1..n. alpha_bar[t - 1] is the
// cumulative signal coefficient at step t; alpha_bar at t = 0 is 1.
struct DiffusionSchedule {
  int n_steps = 0;
  std::vector<double> alpha_bar;
  std::vector<double> beta;

  double AlphaBar(int t) const { return t == 0 ? 1.0 : alpha_bar[t - 1]; }
  // Noise level the denoiser is conditioned on: sqrt((1 - a) / a).
  double Sigma(int t) const;
};

inline constexpr double kCosineOffset = 0.008;
// Largest noise level Sigma(t) of the schedule. Matches the consistency
// model's sigma_max, so both families start from the same noise scale.
inline constexpr double kMaxDiffusionSigma = 80.0;

// Cosine schedule, alpha_bar(t) = f(t) / f(0), floored at
// 1 / (1 + kMaxDiffusionSigma^2); the floor only binds at the last step.
// Throws ValidationError if n_steps < 1 or if n_steps is so large that the
// floor would bind earlier.
DiffusionSchedule CosineSchedule(int n_steps);

// Network epsilon prediction at per-column steps t. With a trajectory basis
// on the network, the in-subspace part comes from the network and the rest
// is read off x as (I - P) x / sqrt(1 - alpha_bar).
net::Matrix PredictEps(const net::Denoiser& net,
                       const DiffusionSchedule& schedule, const net::Matrix& x,
                       const net::Matrix& y, std::span<const int> t,
                       net::Denoiser::Tape* tape = nullptr);

// Epsilon-prediction MSE, |eps_hat - eps|^2 / dim averaged over the batch,
// with t drawn uniformly per column. Masked coordinates are zeroed at the
// input and excluded. Gradients (scaled by `weight`) go into `net`.
LossResult DdpmLoss(net::Denoiser& net, const DiffusionSchedule& schedule,
                    const net::Matrix& x0, const net::Matrix& y,
                    const net::Matrix& mask, Rng& rng, double weight = 1.0);

// Predicts eps for noisy samples (columns) at step t of the schedule.
using EpsFn = std::function<net::Matrix(const net::Matrix& x, int t)>;

// Ancestral sampling with the posterior variance. With clip > 0 the implied
// x_0 estimate is clamped to [-clip, clip] before each posterior step.
net::Matrix DdpmSample(const EpsFn& eps, const DiffusionSchedule& schedule,
                       int dim, int n, Rng& rng, double clip = 0.0);

// Steps visited by an m-step DDIM sampler on an n-step parent schedule:
// tau_k = floor(k n / m), k = 0..m. Throws ValidationError if m is not in
// [1, n].
std::vector<int> DdimTimesteps(int parent_steps, int m);

// Deterministic (eta = 0) DDIM from a given x_T. `clip` as for DdpmSample;
// the noise estimate is then recomputed from the clamped x_0.
net::Matrix DdimSampleFrom(const EpsFn& eps, const DiffusionSchedule& schedule,
                           net::Matrix x, int n_steps, double clip = 0.0);
// Draws x_T ~ N(0, I) and runs DdimSampleFrom.
net::Matrix DdimSample(const EpsFn& eps, const DiffusionSchedule& schedule,
                       int dim, int n, int n_steps, Rng& rng,
                       double clip = 0.0);

}  // namespace cmplan

#endif  // CMPLAN_BASELINES_H_
