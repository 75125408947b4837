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

#include "cmplan/consistency.h"

#include <cmath>
#include <string>

#include "cmplan/error.h"

namespace cmplan {

NoiseSchedule MakeSchedule(int T, double rho, double sigma_min,
                           double sigma_max) {
  if (T < 2) throw ValidationError("T", "must be at least 2");
  if (!(rho > 0.0)) throw ValidationError("rho", "must be positive");
  if (!(sigma_min > 0.0) || !(sigma_max > sigma_min)) {
    throw ValidationError("sigma", "need 0 < sigma_min < sigma_max");
  }
  NoiseSchedule s;
  s.T = T;
  s.rho = rho;
  s.sigma.resize(T);
  const double lo = std::pow(sigma_min, 1.0 / rho);
  const double hi = std::pow(sigma_max, 1.0 / rho);
  for (int i = 0; i < T; ++i) {
    const double u = static_cast<double>(i) / (T - 1);
    s.sigma[i] = std::pow(lo + u * (hi - lo), rho);
  }
  // Pin the endpoints so they do not pick up pow round-off.
  s.sigma.front() = sigma_min;
  s.sigma.back() = sigma_max;
  return s;
}

std::vector<double> StepDistribution(const NoiseSchedule& schedule) {
  auto cdf = [](double sigma) {
    return std::erf((std::log(sigma) - kStepLogMean) /
                    (std::sqrt(2.0) * kStepLogStd));
  };
  std::vector<double> p(schedule.T - 1);
  double total = 0.0;
  for (int k = 0; k + 1 < schedule.T; ++k) {
    p[k] = cdf(schedule.sigma[k + 1]) - cdf(schedule.sigma[k]);
    total += p[k];
  }
  for (double& v : p) v /= total;
  return p;
}

int SampleIndex(std::span<const double> probs, Rng& rng) {
  const double u = rng.Uniform();
  double acc = 0.0;
  for (std::size_t k = 0; k < probs.size(); ++k) {
    acc += probs[k];
    if (u < acc) return static_cast<int>(k);
  }
  return static_cast<int>(probs.size()) - 1;
}

double CSkip(double sigma, double sigma_min, double sigma_data) {
  const double d = sigma - sigma_min;
  const double sd2 = sigma_data * sigma_data;
  return sd2 / (d * d + sd2);
}

double COut(double sigma, double sigma_min, double sigma_data) {
  return sigma_data * (sigma - sigma_min) /
         std::sqrt(sigma_data * sigma_data + sigma * sigma);
}

double CIn(double sigma, double sigma_data) {
  return 1.0 / std::sqrt(sigma * sigma + sigma_data * sigma_data);
}

double PseudoHuber(std::span<const double> u, double delta) {
  double sq = 0.0;
  for (double v : u) sq += v * v;
  return std::sqrt(sq + delta * delta) - delta;
}

double PseudoHuberDelta(int dim) {
  return 0.00054 * std::sqrt(static_cast<double>(dim));
}

net::Matrix ConsistencyFunction::operator()(const net::Matrix& x,
                                            const net::Matrix& y,
                                            std::span<const double> sigma,
                                            net::Denoiser::Tape* tape) const {
  const double lo = schedule_.sigma_min();
  const double hi = schedule_.sigma_max();
  for (double s : sigma) {
    if (!(s >= lo && s <= hi)) {
      throw ValidationError("sigma", "outside [" + std::to_string(lo) + ", " +
                                         std::to_string(hi) + "]");
    }
  }
  net::Matrix scaled(x.rows(), x.cols());
  for (Eigen::Index j = 0; j < x.cols(); ++j) {
    scaled.col(j) = CIn(sigma[j]) * x.col(j);
  }
  net::Matrix out = net_.Forward(scaled, y, sigma, tape);
  for (Eigen::Index j = 0; j < out.cols(); ++j) {
    const double skip = CSkip(sigma[j], lo);
    const double cout = COut(sigma[j], lo);
    out.col(j) = skip * x.col(j) + cout * out.col(j);
  }
  const net::TrajectoryBasis& basis = net_.basis();
  if (basis.empty()) return out;
  // Above sigma_min the prediction is restricted to the smooth subspace;
  // at sigma_min the identity is kept exactly.
  net::Matrix projected = out;
  basis.Project(projected);
  for (Eigen::Index j = 0; j < out.cols(); ++j) {
    if (sigma[j] > lo) out.col(j) = projected.col(j);
  }
  return out;
}

LossResult ConsistencyLoss(net::Denoiser& net, const NoiseSchedule& schedule,
                           const net::Matrix& x1, const net::Matrix& y,
                           const net::Matrix& mask, Rng& rng, double weight) {
  const Eigen::Index dim = x1.rows();
  const Eigen::Index batch = x1.cols();
  if (mask.rows() != dim || mask.cols() != batch || y.cols() != batch) {
    throw ShapeError("ConsistencyLoss: inconsistent batch shapes");
  }
  const std::vector<double> probs = StepDistribution(schedule);
  std::vector<double> sigma_lo(batch);
  std::vector<double> sigma_hi(batch);
  net::Matrix eps(dim, batch);
  for (Eigen::Index b = 0; b < batch; ++b) {
    const int k = SampleIndex(probs, rng);
    sigma_lo[b] = schedule.sigma[k];
    sigma_hi[b] = schedule.sigma[k + 1];
    rng.FillNormal({eps.col(b).data(), static_cast<std::size_t>(dim)});
  }
  net::Matrix x_lo(dim, batch);
  net::Matrix x_hi(dim, batch);
  for (Eigen::Index b = 0; b < batch; ++b) {
    x_lo.col(b) = (x1.col(b) + sigma_lo[b] * eps.col(b)).cwiseProduct(mask.col(b));
    x_hi.col(b) = (x1.col(b) + sigma_hi[b] * eps.col(b)).cwiseProduct(mask.col(b));
  }

  const ConsistencyFunction f(net, schedule);
  const net::Matrix target = f(x_lo, y, sigma_lo);
  net::Denoiser::Tape tape;
  const net::Matrix online = f(x_hi, y, sigma_hi, &tape);

  const double delta = PseudoHuberDelta(static_cast<int>(dim));
  net::Matrix dout(dim, batch);
  double total = 0.0;
  for (Eigen::Index b = 0; b < batch; ++b) {
    const net::Vector u = (online.col(b) - target.col(b)).cwiseProduct(mask.col(b));
    const double r = std::sqrt(u.squaredNorm() + delta * delta);
    total += r - delta;
    // d/dF of the online branch is c_out times d/du.
    dout.col(b) = (weight * COut(sigma_hi[b], schedule.sigma_min()) /
                   (r * static_cast<double>(batch))) *
                  u;
  }
  if (!net.basis().empty()) net.basis().Project(dout);
  const net::Denoiser::InputGrads grads = net.Backward(tape, dout);
  return {total / static_cast<double>(batch), grads.y};
}

std::vector<int> SamplingLevels(int T, int n_steps) {
  if (n_steps < 1 || n_steps > T - 1) {
    throw ValidationError("steps", "must be in [1, T - 1] = [1, " +
                                       std::to_string(T - 1) + "]");
  }
  std::vector<int> levels(n_steps);
  for (int j = 0; j < n_steps; ++j) {
    levels[j] = n_steps == 1
                    ? T
                    : T - static_cast<int>(std::lround(
                              static_cast<double>(j) * (T - 2) / (n_steps - 1)));
  }
  return levels;
}

std::vector<net::Matrix> DrawSamplingNoise(int dim, int n, int n_steps,
                                           Rng& rng) {
  std::vector<net::Matrix> noise;
  noise.reserve(n_steps);
  for (int j = 0; j < n_steps; ++j) {
    net::Matrix m(dim, n);
    rng.FillNormal({m.data(), static_cast<std::size_t>(m.size())});
    noise.push_back(std::move(m));
  }
  return noise;
}

net::Matrix ConsistencySampleWithNoise(const DenoiseFn& f,
                                       const NoiseSchedule& schedule,
                                       std::span<const net::Matrix> noise,
                                       const PredictionHook& hook) {
  const int n_steps = static_cast<int>(noise.size());
  const std::vector<int> levels = SamplingLevels(schedule.T, n_steps);
  net::Matrix x = schedule.sigma_max() * noise[0];
  net::Matrix x_hat;
  for (int j = 0; j < n_steps; ++j) {
    const double sigma = schedule.sigma[levels[j] - 1];
    const std::vector<double> sig(x.cols(), sigma);
    x_hat = f(x, sig);
    const bool last = j + 1 == n_steps;
    if (hook) hook(x_hat, levels[j], last);
    if (!last) {
      const double next = schedule.sigma[levels[j + 1] - 1];
      x = x_hat + next * noise[j + 1];
    }
  }
  return x_hat;
}

net::Matrix ConsistencySample(const DenoiseFn& f, const NoiseSchedule& schedule,
                              int dim, int n, int n_steps, Rng& rng,
                              const PredictionHook& hook) {
  SamplingLevels(schedule.T, n_steps);  // validates n_steps
  const std::vector<net::Matrix> noise = DrawSamplingNoise(dim, n, n_steps, rng);
  return ConsistencySampleWithNoise(f, schedule, noise, hook);
}

}  // namespace cmplan
