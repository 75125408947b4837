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

#ifndef CMPLAN_CONSISTENCY_H_
#define CMPLAN_CONSISTENCY_H_

#include <functional>
#include <span>
#include <vector>

#include "cmplan/net.h"
#include "cmplan/rng.h"

namespace cmplan {

// sigma[0] = sigma_min < ... < sigma[T - 1] = sigma_max. Level i of the
// usual one-based notation is sigma[i - 1].
struct NoiseSchedule {
  int T = 0;
  double rho = 0.0;
  std::vector<double> sigma;

  double sigma_min() const { return sigma.front(); }
  double sigma_max() const { return sigma.back(); }
};

// rho-power interpolation between sigma_min and sigma_max. Throws
// ValidationError if T < 2 or the bounds are not 0 < min < max.
NoiseSchedule MakeSchedule(int T, double rho, double sigma_min,
                           double sigma_max);

inline constexpr double kSigmaData = 0.5;
inline constexpr double kStepLogMean = -1.1;
inline constexpr double kStepLogStd = 2.0;

// Probability of training on the pair (sigma[k], sigma[k + 1]) for
// k = 0..T-2: the lognormal mass of (sigma[k], sigma[k + 1]], normalized.
std::vector<double> StepDistribution(const NoiseSchedule& schedule);
// Draws k from `probs` by inverse CDF.
int SampleIndex(std::span<const double> probs, Rng& rng);

double CSkip(double sigma, double sigma_min, double sigma_data = kSigmaData);
double COut(double sigma, double sigma_min, double sigma_data = kSigmaData);
// Input scale 1 / sqrt(sigma^2 + sigma_data^2), so the network sees
// unit-scale inputs at every noise level.
double CIn(double sigma, double sigma_data = kSigmaData);

// sqrt(|u|^2 + delta^2) - delta.
double PseudoHuber(std::span<const double> u, double delta);
// delta = 0.00054 * sqrt(dim).
double PseudoHuberDelta(int dim);

// Skip-parameterized consistency function around a denoiser network.
class ConsistencyFunction {
 public:
  ConsistencyFunction(const net::Denoiser& net, const NoiseSchedule& schedule)
      : net_(net), schedule_(schedule) {}

  // c_skip(sigma) x + c_out(sigma) F(c_in(sigma) x, y, sigma), one sigma
  // per column. With a trajectory basis on the network, columns above
  // sigma_min are projected onto it.
  // Throws ValidationError if a sigma lies outside the schedule range.
  net::Matrix operator()(const net::Matrix& x, const net::Matrix& y,
                         std::span<const double> sigma,
                         net::Denoiser::Tape* tape = nullptr) const;

  const net::Denoiser& net() const { return net_; }
  const NoiseSchedule& schedule() const { return schedule_; }

 private:
  const net::Denoiser& net_;
  const NoiseSchedule& schedule_;
};

struct LossResult {
  double loss = 0.0;    // mean over the batch
  net::Matrix dy;       // dLoss/dy, cond_dim x batch
};

// Consistency training loss on clean samples x1 (one per column). `mask`
// has the shape of x1 with 1 for observed coordinates and 0 for padding;
// padded coordinates are zeroed at the network input and excluded from the
// distance. Gradients flow through the higher-noise branch only and are
// accumulated into the network, scaled by `weight`.
LossResult ConsistencyLoss(net::Denoiser& net, const NoiseSchedule& schedule,
                           const net::Matrix& x1, const net::Matrix& y,
                           const net::Matrix& mask, Rng& rng,
                           double weight = 1.0);

// Noise levels (one-based) visited by an n-step sampler: evenly spaced,
// starting at T and ending at 2 when n_steps > 1.
std::vector<int> SamplingLevels(int T, int n_steps);

// Maps noisy samples (columns) at the given levels to clean predictions.
using DenoiseFn =
    std::function<net::Matrix(const net::Matrix& x, std::span<const double>)>;
// Called on each clean prediction before it is re-noised; `last` is true on
// the final one.
using PredictionHook = std::function<void(net::Matrix& x_hat, int level,
                                          bool last)>;

// Multistep consistency sampling of `n` samples of dimension `dim`. The
// prediction at the lowest visited level is returned as is, since f is the
// identity at sigma_min.
net::Matrix ConsistencySample(const DenoiseFn& f, const NoiseSchedule& schedule,
                              int dim, int n, int n_steps, Rng& rng,
                              const PredictionHook& hook = nullptr);

// Standard-normal draws used by ConsistencySample, in order: the initial
// sample followed by one matrix per re-noising.
std::vector<net::Matrix> DrawSamplingNoise(int dim, int n, int n_steps,
                                           Rng& rng);
// The sampling loop on pre-drawn noise.
net::Matrix ConsistencySampleWithNoise(const DenoiseFn& f,
                                       const NoiseSchedule& schedule,
                                       std::span<const net::Matrix> noise,
                                       const PredictionHook& hook = nullptr);

}  // namespace cmplan

#endif  // CMPLAN_CONSISTENCY_H_
