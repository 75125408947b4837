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


#include <algorithm>
#include <cstdio>
#include <cmath>
#include <vector>

#include <gtest/gtest.h>

#include "cmplan/baselines.h"
#include "cmplan/consistency.h"
#include "cmplan/error.h"
#include "cmplan/net.h"
#include "cmplan/rng.h"

namespace cmplan {
namespace {

using net::Matrix;

Matrix RandomMatrix(Eigen::Index rows, Eigen::Index cols, Rng& rng) {
  Matrix m(rows, cols);
  for (Eigen::Index j = 0; j < cols; ++j) {
    for (Eigen::Index i = 0; i < rows; ++i) m(i, j) = rng.Normal();
  }
  return m;
}

TEST(CosineScheduleTest, MatchesFormulaAndDecreases) {
  for (int n : {1, 4, 10, 50}) {
    const DiffusionSchedule s = CosineSchedule(n);
    ASSERT_EQ(s.n_steps, n);
    ASSERT_EQ(static_cast<int>(s.alpha_bar.size()), n);
    auto f = [n](int t) {
      const long double u = (static_cast<long double>(t) / n + 0.008L) / 1.008L;
      const long double c = std::cos(0.5L * 3.14159265358979323846264L * u);
      return c * c;
    };
    const long double floor = 1.0L / (1.0L + 6400.0L);
    long double prev_want = 1.0L;
    double prev = 1.0;
    for (int t = 1; t <= n; ++t) {
      const long double want = std::max(f(t) / f(0), floor);
      EXPECT_NEAR(s.AlphaBar(t), static_cast<double>(want),
                  1e-12 * static_cast<double>(want) + 1e-15);
      EXPECT_NEAR(s.beta[t - 1], static_cast<double>(1.0L - want / prev_want),
                  1e-12);
      prev_want = want;
      EXPECT_LT(s.AlphaBar(t), prev);
      EXPECT_GT(s.AlphaBar(t), 0.0);
      prev = s.AlphaBar(t);
    }
    EXPECT_EQ(s.AlphaBar(0), 1.0);
    EXPECT_NEAR(s.Sigma(n), kMaxDiffusionSigma, 1e-9);
  }
  EXPECT_THROW(CosineSchedule(0), ValidationError);
  EXPECT_THROW(CosineSchedule(1000), ValidationError);
}

TEST(CosineScheduleTest, SigmaIsNoiseToSignalRatio) {
  const DiffusionSchedule s = CosineSchedule(10);
  for (int t = 1; t <= 10; ++t) {
    const double a = s.AlphaBar(t);
    EXPECT_DOUBLE_EQ(s.Sigma(t), std::sqrt((1 - a) / a));
  }
  EXPECT_EQ(s.Sigma(0), 0.0);
}

// A one-step schedule where F(x) = b x predicts eps exactly for x0 = 0.
TEST(DdpmLossTest, ExactPredictorGivesZero) {
  const DiffusionSchedule s = CosineSchedule(1);
  net::Denoiser net({.traj_dim = 3, .cond_dim = 1, .width = 4, .blocks = 1});
  std::vector<net::ParamView> params;
  net.Collect(params);
  for (const auto& p : params) std::fill(p.value.begin(), p.value.end(), 0.0);
  net.skip().weight = Matrix::Identity(3, 3);
  net.gate().bias(0) = 1.0 / std::sqrt(1.0 - s.AlphaBar(1));
  Rng rng(1);
  const LossResult r = DdpmLoss(net, s, Matrix::Zero(3, 8), Matrix::Zero(1, 8),
                                Matrix::Ones(3, 8), rng);
  EXPECT_NEAR(r.loss, 0.0, 1e-24);
}

TEST(DdpmLossTest, ZeroNetworkCostsOnePerCoordinate) {
  const DiffusionSchedule s = CosineSchedule(10);
  net::Denoiser net({.traj_dim = 20, .cond_dim = 1, .width = 4, .blocks = 1});
  std::vector<net::ParamView> params;
  net.Collect(params);
  for (const auto& p : params) std::fill(p.value.begin(), p.value.end(), 0.0);
  Rng rng(2);
  const int batch = 2000;
  const LossResult r = DdpmLoss(net, s, RandomMatrix(20, batch, rng),
                                Matrix::Zero(1, batch), Matrix::Ones(20, batch),
                                rng);
  // Mean of 40000 chi-square(1) draws: standard error 0.007.
  EXPECT_NEAR(r.loss, 1.0, 0.035);
}

TEST(DdpmLossTest, GradientsMatchFiniteDifferences) {
  const DiffusionSchedule s = CosineSchedule(4);
  net::Denoiser net({.traj_dim = 4, .cond_dim = 2, .width = 6, .blocks = 2});
  Rng init(3);
  net.Init(init);
  net.skip().weight = RandomMatrix(4, 4, init) * 0.3;
  const Matrix x0 = RandomMatrix(4, 5, init);
  const Matrix y = RandomMatrix(2, 5, init);
  Matrix mask = Matrix::Ones(4, 5);
  mask(3, 1) = 0.0;
  const Rng rng0(4);
  Rng rng = rng0;
  net.ZeroGrad();
  const LossResult r = DdpmLoss(net, s, x0, y, mask, rng, 1.5);

  net::Denoiser probe = net;
  std::vector<net::ParamView> analytic, probe_params;
  net.Collect(analytic);
  probe.Collect(probe_params);
  auto loss = [&](const Matrix& yy) {
    Rng replay = rng0;
    return 1.5 * DdpmLoss(probe, s, x0, yy, mask, replay).loss;
  };
  const double h = 1e-6;
  for (std::size_t k = 0; k < probe_params.size(); ++k) {
    auto values = probe_params[k].value;
    for (std::size_t i = 0; i < values.size(); ++i) {
      const double keep = values[i];
      values[i] = keep + h;
      const double up = loss(y);
      values[i] = keep - h;
      const double down = loss(y);
      values[i] = keep;
      const double numeric = (up - down) / (2 * h);
      EXPECT_LE(std::abs(analytic[k].grad[i] - numeric),
                1e-5 * std::max(std::abs(numeric), 1e-4));
    }
  }
  for (Eigen::Index i = 0; i < y.size(); ++i) {
    Matrix up = y, down = y;
    up.data()[i] += h;
    down.data()[i] -= h;
    const double numeric = (loss(up) - loss(down)) / (2 * h);
    EXPECT_LE(std::abs(r.dy.data()[i] - numeric),
              1e-5 * std::max(std::abs(numeric), 1e-4));
  }
}

const EpsFn kZeroEps = [](const Matrix& x, int) {
  return Matrix(Matrix::Zero(x.rows(), x.cols()));
};

TEST(DdpmSampleTest, OneStepZeroEpsClosedForm) {
  const DiffusionSchedule s = CosineSchedule(1);
  Rng rng(5), copy(5);
  const Matrix out = DdpmSample(kZeroEps, s, 3, 4, rng);
  Matrix x_t(3, 4);
  copy.FillNormal({x_t.data(), 12});
  EXPECT_TRUE(out.isApprox(x_t / std::sqrt(s.AlphaBar(1)), 1e-14));
}

TEST(DdpmSampleTest, TwoStepZeroEpsClosedForm) {
  const DiffusionSchedule s = CosineSchedule(2);
  Rng rng(6), copy(6);
  const Matrix out = DdpmSample(kZeroEps, s, 2, 3, rng);
  Matrix x2(2, 3), z(2, 3);
  copy.FillNormal({x2.data(), 6});
  copy.FillNormal({z.data(), 6});
  // 1 - beta_t written as alpha_bar ratios.
  const double a1 = s.AlphaBar(1), a2 = s.AlphaBar(2) / s.AlphaBar(1);
  const double var = (1 - a2) * (1 - s.AlphaBar(1)) / (1 - s.AlphaBar(2));
  const Matrix x1 = x2 / std::sqrt(a2) + std::sqrt(var) * z;
  EXPECT_TRUE(out.isApprox(x1 / std::sqrt(a1), 1e-14));
}

TEST(DdpmSampleTest, SameSeedBitIdentical) {
  const DiffusionSchedule s = CosineSchedule(10);
  const EpsFn eps = [](const Matrix& x, int t) { return Matrix(0.1 * t * x); };
  Rng a(7), b(7);
  EXPECT_EQ(DdpmSample(eps, s, 5, 3, a), DdpmSample(eps, s, 5, 3, b));
}

TEST(DdimTest, SubScheduleSteps) {
  EXPECT_EQ(DdimTimesteps(10, 4), (std::vector<int>{0, 2, 5, 7, 10}));
  EXPECT_EQ(DdimTimesteps(10, 10),
            (std::vector<int>{0, 1, 2, 3, 4, 5, 6, 7, 8, 9, 10}));
  EXPECT_EQ(DdimTimesteps(10, 1), (std::vector<int>{0, 10}));
  EXPECT_THROW(DdimTimesteps(10, 11), ValidationError);
  EXPECT_THROW(DdimTimesteps(10, 0), ValidationError);
  const DiffusionSchedule s = CosineSchedule(10);
  Rng rng(1);
  EXPECT_THROW(DdimSample(kZeroEps, s, 2, 1, 12, rng), ValidationError);
}

TEST(DdimTest, ZeroEpsTelescopes) {
  const DiffusionSchedule s = CosineSchedule(10);
  Rng rng(8);
  const Matrix x_t = RandomMatrix(3, 2, rng);
  const Matrix out = DdimSampleFrom(kZeroEps, s, x_t, 4);
  EXPECT_TRUE(out.isApprox(x_t / std::sqrt(s.AlphaBar(10)), 1e-13));
}

TEST(DdimTest, LinearEpsHandChecked) {
  // eps = c x; each update multiplies x by
  // sqrt(a') (1 - sqrt(1 - a) c) / sqrt(a) + sqrt(1 - a') c.
  const DiffusionSchedule s = CosineSchedule(4);
  const double c = 0.3;
  const EpsFn eps = [c](const Matrix& x, int) { return Matrix(c * x); };
  Matrix x(1, 1);
  x << 2.0;
  double want = 2.0;
  const std::vector<int> tau = DdimTimesteps(4, 2);
  for (int k = 2; k >= 1; --k) {
    const double a = s.AlphaBar(tau[k]), ap = s.AlphaBar(tau[k - 1]);
    want *= std::sqrt(ap) * (1 - std::sqrt(1 - a) * c) / std::sqrt(a) +
            std::sqrt(1 - ap) * c;
  }
  EXPECT_NEAR(DdimSampleFrom(eps, s, x, 2)(0, 0), want, 1e-12);
}

TEST(DdimTest, DeterministicGivenStart) {
  const DiffusionSchedule s = CosineSchedule(10);
  const EpsFn eps = [](const Matrix& x, int t) {
    return Matrix((0.05 * t) * x.array().sin().matrix());
  };
  Rng rng(9);
  const Matrix x_t = RandomMatrix(4, 3, rng);
  EXPECT_EQ(DdimSampleFrom(eps, s, x_t, 10), DdimSampleFrom(eps, s, x_t, 10));
  Rng a(10), b(10);
  EXPECT_EQ(DdimSample(eps, s, 4, 3, 4, a), DdimSample(eps, s, 4, 3, 4, b));
}

// The two-point toy {-1, +1}: a sampler's quality is the mean over 400
// targets of the distance from the nearest of 6 samples.
double ToyMinError(const Matrix& samples, Rng& rng) {
  const int k = 6;
  double total = 0.0;
  const int n = static_cast<int>(samples.cols()) / k;
  for (int i = 0; i < n; ++i) {
    const double gt = rng.Uniform() < 0.5 ? -1.0 : 1.0;
    double best = 1e300;
    for (int j = 0; j < k; ++j) {
      best = std::min(best, std::abs(samples(0, i * k + j) - gt));
    }
    total += best;
  }
  return total / n;
}

Matrix ToyBatch(Rng& rng, int batch) {
  Matrix x(1, batch);
  for (int b = 0; b < batch; ++b) x(0, b) = rng.Uniform() < 0.5 ? -1.0 : 1.0;
  return x;
}

net::Denoiser TrainToyDdpm(const DiffusionSchedule& s, std::uint64_t seed) {
  net::Denoiser net({.traj_dim = 1, .cond_dim = 0, .width = 32, .blocks = 2,
                     .linear_skip = false});
  Rng rng(seed);
  net.Init(rng);
  std::vector<net::ParamView> params;
  net.Collect(params);
  net::Adam adam({.lr = 2e-3});
  for (int step = 0; step < 2000; ++step) {
    net.ZeroGrad();
    DdpmLoss(net, s, ToyBatch(rng, 64), Matrix::Zero(0, 64),
             Matrix::Ones(1, 64), rng);
    adam.Step(params);
  }
  return net;
}

EpsFn ToyEps(const net::Denoiser& net, const DiffusionSchedule& s) {
  return [&net, &s](const Matrix& x, int t) {
    const std::vector<double> sigma(x.cols(), s.Sigma(t));
    return net.Forward(x, Matrix::Zero(0, x.cols()), sigma, nullptr);
  };
}

TEST(ToyTest, MoreDdpmStepsDoNotHurt) {
  // Compared on the mean over seeds; single seeds are within training noise.
  const DiffusionSchedule s4 = CosineSchedule(4);
  const DiffusionSchedule s10 = CosineSchedule(10);
  double sum4 = 0.0, sum10 = 0.0;
  for (std::uint64_t seed = 1; seed <= 3; ++seed) {
    const net::Denoiser n4 = TrainToyDdpm(s4, seed);
    const net::Denoiser n10 = TrainToyDdpm(s10, seed);
    Rng r4(100 + seed), r10(100 + seed), g4(200 + seed), g10(200 + seed);
    const double e4 = ToyMinError(DdpmSample(ToyEps(n4, s4), s4, 1, 2400, r4), g4);
    const double e10 =
        ToyMinError(DdpmSample(ToyEps(n10, s10), s10, 1, 2400, r10), g10);
    sum4 += e4;
    sum10 += e10;
    std::printf("seed %d: ddpm-4 %.4f ddpm-10 %.4f\n", static_cast<int>(seed), e4, e10);
  }
  EXPECT_LE(sum10, sum4);
}

TEST(ToyTest, ConsistencyBeatsDdimFromTenSteps) {
  const DiffusionSchedule s10 = CosineSchedule(10);
  const NoiseSchedule cs = MakeSchedule(5, 6.0, 0.002, 80.0);
  double sum_c = 0.0, sum_d = 0.0;
  for (std::uint64_t seed = 1; seed <= 3; ++seed) {
    const net::Denoiser ddpm = TrainToyDdpm(s10, seed);
    net::Denoiser cm({.traj_dim = 1, .cond_dim = 0, .width = 32, .blocks = 2,
                      .linear_skip = false});
    Rng rng(seed);
    cm.Init(rng);
    std::vector<net::ParamView> params;
    cm.Collect(params);
    net::Adam adam({.lr = 2e-3});
    for (int step = 0; step < 2000; ++step) {
      cm.ZeroGrad();
      ConsistencyLoss(cm, cs, ToyBatch(rng, 64), Matrix::Zero(0, 64),
                      Matrix::Ones(1, 64), rng);
      adam.Step(params);
    }
    const ConsistencyFunction f(cm, cs);
    const DenoiseFn fn = [&f](const Matrix& x, std::span<const double> sigma) {
      return f(x, Matrix::Zero(0, x.cols()), sigma);
    };
    Rng rc(100 + seed), rd(100 + seed), gc(200 + seed), gd(200 + seed);
    const double ec = ToyMinError(ConsistencySample(fn, cs, 1, 2400, 4, rc), gc);
    const double ed =
        ToyMinError(DdimSample(ToyEps(ddpm, s10), s10, 1, 2400, 4, rd), gd);
    sum_c += ec;
    sum_d += ed;
    std::printf("seed %d: consistency-4 %.4f ddim-4 %.4f\n", static_cast<int>(seed), ec, ed);
  }
  EXPECT_LE(sum_c, sum_d);
}

}  // namespace
}  // namespace cmplan
