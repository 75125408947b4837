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

#include "cmplan/baselines.h"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include "cmplan/error.h"

namespace cmplan {

double DiffusionSchedule::Sigma(int t) const {
  const double a = AlphaBar(t);
  return std::sqrt((1.0 - a) / a);
}

DiffusionSchedule CosineSchedule(int n_steps) {
  if (n_steps < 1) throw ValidationError("steps", "must be at least 1");
  auto f = [n_steps](int t) {
    const double u = (static_cast<double>(t) / n_steps + kCosineOffset) /
                     (1.0 + kCosineOffset);
    const double c = std::cos(0.5 * std::numbers::pi * u);
    return c * c;
  };
  const double floor =
      1.0 / (1.0 + kMaxDiffusionSigma * kMaxDiffusionSigma);
  DiffusionSchedule s;
  s.n_steps = n_steps;
  double prev = 1.0;
  for (int t = 1; t <= n_steps; ++t) {
    const double a = f(t) / f(0);
    if (a < floor && t < n_steps) {
      throw ValidationError("steps", "too many steps for the noise floor");
    }
    const double a_bar = std::max(a, floor);
    s.beta.push_back(1.0 - a_bar / prev);
    s.alpha_bar.push_back(a_bar);
    prev = a_bar;
  }
  return s;
}

net::Matrix PredictEps(const net::Denoiser& net,
                       const DiffusionSchedule& schedule, const net::Matrix& x,
                       const net::Matrix& y, std::span<const int> t,
                       net::Denoiser::Tape* tape) {
  std::vector<double> sigma(t.size());
  for (std::size_t b = 0; b < t.size(); ++b) sigma[b] = schedule.Sigma(t[b]);
  net::Matrix eps = net.Forward(x, y, sigma, tape);
  const net::TrajectoryBasis& basis = net.basis();
  if (basis.empty()) return eps;
  // Whatever of x lies outside the subspace can only be noise.
  net::Matrix rest = x;
  basis.Project(rest);
  rest = x - rest;
  basis.Project(eps);
  for (Eigen::Index b = 0; b < eps.cols(); ++b) {
    eps.col(b) += rest.col(b) / std::sqrt(1.0 - schedule.AlphaBar(t[b]));
  }
  return eps;
}

LossResult DdpmLoss(net::Denoiser& net, const DiffusionSchedule& schedule,
                    const net::Matrix& x0, const net::Matrix& y,
                    const net::Matrix& mask, Rng& rng, double weight) {
  const Eigen::Index dim = x0.rows();
  const Eigen::Index batch = x0.cols();
  if (mask.rows() != dim || mask.cols() != batch || y.cols() != batch) {
    throw ShapeError("DdpmLoss: inconsistent batch shapes");
  }
  net::Matrix eps(dim, batch);
  net::Matrix xt(dim, batch);
  std::vector<int> steps(batch);
  for (Eigen::Index b = 0; b < batch; ++b) {
    const int t = static_cast<int>(rng.UniformInt(1, schedule.n_steps));
    rng.FillNormal({eps.col(b).data(), static_cast<std::size_t>(dim)});
    const double a = schedule.AlphaBar(t);
    xt.col(b) = (std::sqrt(a) * x0.col(b) + std::sqrt(1.0 - a) * eps.col(b))
                    .cwiseProduct(mask.col(b));
    steps[b] = t;
  }
  net::Denoiser::Tape tape;
  const net::Matrix eps_hat = PredictEps(net, schedule, xt, y, steps, &tape);
  const net::Matrix diff = (eps_hat - eps).cwiseProduct(mask);
  const double scale = 1.0 / (static_cast<double>(dim) * batch);
  const double loss = diff.squaredNorm() * scale;
  net::Matrix dout = (2.0 * weight * scale) * diff;
  if (!net.basis().empty()) net.basis().Project(dout);
  const net::Denoiser::InputGrads grads = net.Backward(tape, dout);
  return {loss, grads.y};
}

net::Matrix DdpmSample(const EpsFn& eps, const DiffusionSchedule& schedule,
                       int dim, int n, Rng& rng, double clip) {
  net::Matrix x(dim, n);
  rng.FillNormal({x.data(), static_cast<std::size_t>(x.size())});
  net::Matrix z(dim, n);
  for (int t = schedule.n_steps; t >= 1; --t) {
    const double a_bar = schedule.AlphaBar(t);
    const double a_prev = schedule.AlphaBar(t - 1);
    // 1 - beta_t, from the ratio to avoid cancellation when beta_t ~ 1.
    const double alpha = a_bar / a_prev;
    const double beta = 1.0 - alpha;
    const net::Matrix e = eps(x, t);
    net::Matrix mean;
    if (clip > 0.0) {
      const net::Matrix x0 =
          ((x - std::sqrt(1.0 - a_bar) * e) / std::sqrt(a_bar))
              .cwiseMax(-clip)
              .cwiseMin(clip);
      mean = (std::sqrt(a_prev) * beta / (1.0 - a_bar)) * x0 +
             (std::sqrt(alpha) * (1.0 - a_prev) / (1.0 - a_bar)) * x;
    } else {
      mean = (x - (beta / std::sqrt(1.0 - a_bar)) * e) / std::sqrt(alpha);
    }
    if (t > 1) {
      const double var = beta * (1.0 - a_prev) / (1.0 - a_bar);
      rng.FillNormal({z.data(), static_cast<std::size_t>(z.size())});
      x = mean + std::sqrt(var) * z;
    } else {
      x = std::move(mean);
    }
  }
  return x;
}

std::vector<int> DdimTimesteps(int parent_steps, int m) {
  if (m < 1 || m > parent_steps) {
    throw ValidationError("steps", "DDIM steps must be in [1, " +
                                       std::to_string(parent_steps) + "]");
  }
  std::vector<int> tau(m + 1);
  for (int k = 0; k <= m; ++k) tau[k] = k * parent_steps / m;
  return tau;
}

net::Matrix DdimSampleFrom(const EpsFn& eps, const DiffusionSchedule& schedule,
                           net::Matrix x, int n_steps, double clip) {
  const std::vector<int> tau = DdimTimesteps(schedule.n_steps, n_steps);
  for (int k = n_steps; k >= 1; --k) {
    const double a = schedule.AlphaBar(tau[k]);
    const double a_prev = schedule.AlphaBar(tau[k - 1]);
    net::Matrix e = eps(x, tau[k]);
    net::Matrix x0 = (x - std::sqrt(1.0 - a) * e) / std::sqrt(a);
    if (clip > 0.0) {
      x0 = x0.cwiseMax(-clip).cwiseMin(clip);
      e = (x - std::sqrt(a) * x0) / std::sqrt(1.0 - a);
    }
    x = std::sqrt(a_prev) * x0 + std::sqrt(1.0 - a_prev) * e;
  }
  return x;
}

net::Matrix DdimSample(const EpsFn& eps, const DiffusionSchedule& schedule,
                       int dim, int n, int n_steps, Rng& rng, double clip) {
  DdimTimesteps(schedule.n_steps, n_steps);
  net::Matrix x(dim, n);
  rng.FillNormal({x.data(), static_cast<std::size_t>(x.size())});
  return DdimSampleFrom(eps, schedule, std::move(x), n_steps, clip);
}

}  // namespace cmplan
