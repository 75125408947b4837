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

#include "cmplan/net.h"

#include <cmath>
#include <numbers>
#include <numeric>

#include <Eigen/QR>

#include "cmplan/error.h"

namespace cmplan::net {
namespace {

double Sigmoid(double z) { return 1.0 / (1.0 + std::exp(-z)); }

std::span<double> Span(Matrix& m) {
  return {m.data(), static_cast<std::size_t>(m.size())};
}
std::span<double> Span(Vector& v) {
  return {v.data(), static_cast<std::size_t>(v.size())};
}

// Frequencies applied to c = log(sigma) / 4.
constexpr double kNoiseScale = 0.25;
double NoiseFrequency(int k) {
  return std::numbers::pi * std::pow(2.0, 0.5 * k);
}

}  // namespace

Tensor::Tensor(std::vector<std::size_t> shape)
    : shape_(std::move(shape)),
      data_(std::accumulate(shape_.begin(), shape_.end(), std::size_t{1},
                            std::multiplies<>()),
            0.0) {}

Tensor::Tensor(std::vector<std::size_t> shape, std::vector<double> data)
    : shape_(std::move(shape)), data_(std::move(data)) {
  const std::size_t n = std::accumulate(shape_.begin(), shape_.end(),
                                        std::size_t{1}, std::multiplies<>());
  if (n != data_.size()) throw ShapeError("Tensor: data size != shape product");
}

void Tensor::CheckFinite(const std::string& what) const {
  for (double v : data_) {
    if (!std::isfinite(v)) throw NumericError("non-finite value in " + what);
  }
}

void CheckFinite(const Matrix& m, const std::string& what) {
  if (!m.allFinite()) throw NumericError("non-finite value in " + what);
}

Linear::Linear(Eigen::Index in_dim, Eigen::Index out_dim)
    : weight(Matrix::Zero(out_dim, in_dim)),
      bias(Vector::Zero(out_dim)),
      weight_grad(Matrix::Zero(out_dim, in_dim)),
      bias_grad(Vector::Zero(out_dim)) {}

void Linear::Init(Rng& rng, double gain) {
  const double bound =
      gain / std::sqrt(static_cast<double>(std::max<Eigen::Index>(in_dim(), 1)));
  for (Eigen::Index j = 0; j < weight.cols(); ++j) {
    for (Eigen::Index i = 0; i < weight.rows(); ++i) {
      weight(i, j) = rng.Uniform(-bound, bound);
    }
  }
  bias.setZero();
}

Matrix Linear::Forward(const Matrix& x) const {
  if (x.rows() != in_dim()) {
    throw ShapeError("Linear: expected " + std::to_string(in_dim()) +
                     " input rows, got " + std::to_string(x.rows()));
  }
  Matrix y(out_dim(), x.cols());
  // Fresh buffers per column keep the kernel, and hence the rounding,
  // identical regardless of where the column sits in the batch.
  Vector in(in_dim());
  Vector out(out_dim());
  for (Eigen::Index b = 0; b < x.cols(); ++b) {
    in = x.col(b);
    out.noalias() = weight * in;
    out += bias;
    y.col(b) = out;
  }
  return y;
}

Matrix Linear::Backward(const Matrix& x, const Matrix& dy) {
  weight_grad.noalias() += dy * x.transpose();
  bias_grad += dy.rowwise().sum();
  return weight.transpose() * dy;
}

void Linear::ZeroGrad() {
  weight_grad.setZero();
  bias_grad.setZero();
}

void Linear::Collect(std::vector<ParamView>& out) {
  out.push_back({Span(weight), Span(weight_grad)});
  out.push_back({Span(bias), Span(bias_grad)});
}

Matrix Silu(const Matrix& z) {
  return z.unaryExpr([](double v) { return v * Sigmoid(v); });
}

Matrix SiluBackward(const Matrix& z, const Matrix& dy) {
  return z.binaryExpr(dy, [](double v, double g) {
    const double s = Sigmoid(v);
    return g * s * (1.0 + v * (1.0 - s));
  });
}

Mlp::Mlp(const std::vector<int>& dims, bool final_activation)
    : final_activation_(final_activation) {
  for (std::size_t i = 0; i + 1 < dims.size(); ++i) {
    layers_.emplace_back(dims[i], dims[i + 1]);
  }
}

void Mlp::Init(Rng& rng) {
  for (auto& layer : layers_) layer.Init(rng);
}

Matrix Mlp::Forward(const Matrix& x, Tape* tape) const {
  if (tape) {
    tape->inputs.clear();
    tape->pre.clear();
  }
  Matrix h = x;
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    Matrix z = layers_[i].Forward(h);
    if (tape) {
      tape->inputs.push_back(std::move(h));
      tape->pre.push_back(z);
    }
    const bool activate = i + 1 < layers_.size() || final_activation_;
    h = activate ? Silu(z) : std::move(z);
  }
  if (tape) tape->recorded = true;
  return h;
}

Matrix Mlp::Backward(const Tape& tape, const Matrix& dy) {
  if (!tape.recorded) throw Error("Mlp::Backward called before Forward");
  Matrix g = dy;
  for (std::size_t i = layers_.size(); i-- > 0;) {
    const bool activate = i + 1 < layers_.size() || final_activation_;
    if (activate) g = SiluBackward(tape.pre[i], g);
    g = layers_[i].Backward(tape.inputs[i], g);
  }
  return g;
}

void Mlp::ZeroGrad() {
  for (auto& layer : layers_) layer.ZeroGrad();
}

void Mlp::Collect(std::vector<ParamView>& out) {
  for (auto& layer : layers_) layer.Collect(out);
}

ResidualMlp::ResidualMlp(int in_dim, int width, int blocks, int out_dim)
    : in_proj_(in_dim, width), out_proj_(width, out_dim) {
  for (int i = 0; i < blocks; ++i) {
    block_fc1_.emplace_back(width, width);
    block_fc2_.emplace_back(width, width);
  }
}

void ResidualMlp::Init(Rng& rng) {
  in_proj_.Init(rng);
  for (std::size_t i = 0; i < block_fc1_.size(); ++i) {
    block_fc1_[i].Init(rng);
    // Small residual branches keep the stream well scaled at init.
    block_fc2_[i].Init(rng, 0.25);
  }
  out_proj_.Init(rng);
}

Matrix ResidualMlp::Forward(const Matrix& x, Tape* tape) const {
  Matrix h = in_proj_.Forward(x);
  if (tape) {
    tape->input = x;
    tape->hidden.assign(1, h);
    tape->act1.clear();
    tape->pre2.clear();
    tape->act2.clear();
  }
  for (std::size_t i = 0; i < block_fc1_.size(); ++i) {
    Matrix a1 = Silu(h);
    Matrix z1 = block_fc1_[i].Forward(a1);
    Matrix a2 = Silu(z1);
    h += block_fc2_[i].Forward(a2);
    if (tape) {
      tape->act1.push_back(std::move(a1));
      tape->pre2.push_back(std::move(z1));
      tape->act2.push_back(std::move(a2));
      tape->hidden.push_back(h);
    }
  }
  Matrix a = Silu(h);
  Matrix out = out_proj_.Forward(a);
  if (tape) {
    tape->out_act = std::move(a);
    tape->recorded = true;
  }
  return out;
}

Matrix ResidualMlp::Backward(const Tape& tape, const Matrix& dy) {
  if (!tape.recorded) throw Error("ResidualMlp::Backward called before Forward");
  const std::size_t n = block_fc1_.size();
  Matrix dh = SiluBackward(tape.hidden[n], out_proj_.Backward(tape.out_act, dy));
  for (std::size_t i = n; i-- > 0;) {
    const Matrix da2 = block_fc2_[i].Backward(tape.act2[i], dh);
    const Matrix dz1 = SiluBackward(tape.pre2[i], da2);
    const Matrix da1 = block_fc1_[i].Backward(tape.act1[i], dz1);
    dh += SiluBackward(tape.hidden[i], da1);
  }
  return in_proj_.Backward(tape.input, dh);
}

void ResidualMlp::ZeroGrad() {
  in_proj_.ZeroGrad();
  for (auto& l : block_fc1_) l.ZeroGrad();
  for (auto& l : block_fc2_) l.ZeroGrad();
  out_proj_.ZeroGrad();
}

void ResidualMlp::Collect(std::vector<ParamView>& out) {
  in_proj_.Collect(out);
  for (std::size_t i = 0; i < block_fc1_.size(); ++i) {
    block_fc1_[i].Collect(out);
    block_fc2_[i].Collect(out);
  }
  out_proj_.Collect(out);
}

Matrix NoiseEmbedding(std::span<const double> sigma) {
  Matrix e(kNoiseFeatures, static_cast<Eigen::Index>(sigma.size()));
  for (std::size_t b = 0; b < sigma.size(); ++b) {
    const double c = kNoiseScale * std::log(sigma[b]);
    for (int k = 0; k < kNoiseFeatures / 2; ++k) {
      const double w = NoiseFrequency(k);
      e(2 * k, b) = std::sin(w * c);
      e(2 * k + 1, b) = std::cos(w * c);
    }
  }
  return e;
}

Matrix NoiseEmbeddingDerivative(std::span<const double> sigma) {
  Matrix d(kNoiseFeatures, static_cast<Eigen::Index>(sigma.size()));
  for (std::size_t b = 0; b < sigma.size(); ++b) {
    const double c = kNoiseScale * std::log(sigma[b]);
    for (int k = 0; k < kNoiseFeatures / 2; ++k) {
      const double w = NoiseFrequency(k);
      d(2 * k, b) = kNoiseScale * w * std::cos(w * c);
      d(2 * k + 1, b) = -kNoiseScale * w * std::sin(w * c);
    }
  }
  return d;
}

TrajectoryBasis::TrajectoryBasis(int horizon, int terms) {
  if (terms < 1 || terms > horizon) {
    throw ValidationError("basis_terms", "must be in [1, horizon]");
  }
  // Monomials on [-1, 1], orthonormalized.
  Matrix v(horizon, terms);
  for (int t = 0; t < horizon; ++t) {
    const double u = horizon == 1 ? 0.0 : -1.0 + 2.0 * t / (horizon - 1);
    double p = 1.0;
    for (int j = 0; j < terms; ++j, p *= u) v(t, j) = p;
  }
  const Eigen::HouseholderQR<Matrix> qr(v);
  q_ = qr.householderQ() * Matrix::Identity(horizon, terms);
}

void TrajectoryBasis::Project(Matrix& m) const {
  const Eigen::Index block = 2 * q_.rows();
  if (block == 0 || m.rows() % block != 0) {
    throw ShapeError("TrajectoryBasis: rows not a multiple of 2 * horizon");
  }
  const Matrix qqt = q_ * q_.transpose();
  for (Eigen::Index c = 0; c < m.cols(); ++c) {
    for (Eigen::Index r = 0; r < m.rows(); r += block) {
      Eigen::Map<Matrix> xy(m.col(c).data() + r, 2, q_.rows());
      xy = xy * qqt;
    }
  }
}

Matrix TrajectoryBasis::Coefficients(const Matrix& m) const {
  const Eigen::Index h = q_.rows();
  const Eigen::Index k = q_.cols();
  if (h == 0 || m.rows() % (2 * h) != 0) {
    throw ShapeError("TrajectoryBasis: rows not a multiple of 2 * horizon");
  }
  const Eigen::Index blocks = m.rows() / (2 * h);
  Matrix c(blocks * 2 * k, m.cols());
  for (Eigen::Index j = 0; j < m.cols(); ++j) {
    for (Eigen::Index b = 0; b < blocks; ++b) {
      Eigen::Map<const Matrix> xy(m.col(j).data() + b * 2 * h, 2, h);
      Eigen::Map<Matrix>(c.col(j).data() + b * 2 * k, 2, k) = xy * q_;
    }
  }
  return c;
}

Matrix TrajectoryBasis::Expand(const Matrix& c) const {
  const Eigen::Index h = q_.rows();
  const Eigen::Index k = q_.cols();
  if (k == 0 || c.rows() % (2 * k) != 0) {
    throw ShapeError("TrajectoryBasis: rows not a multiple of 2 * terms");
  }
  const Eigen::Index blocks = c.rows() / (2 * k);
  Matrix m(blocks * 2 * h, c.cols());
  for (Eigen::Index j = 0; j < c.cols(); ++j) {
    for (Eigen::Index b = 0; b < blocks; ++b) {
      Eigen::Map<const Matrix> cc(c.col(j).data() + b * 2 * k, 2, k);
      Eigen::Map<Matrix>(m.col(j).data() + b * 2 * h, 2, h) = cc * q_.transpose();
    }
  }
  return m;
}

Denoiser::Denoiser(const DenoiserConfig& config)
    : config_(config),
      backbone_(config.traj_dim + config.cond_dim + kNoiseFeatures,
                config.width, config.blocks, config.traj_dim) {
  if (config.basis_terms > 0) {
    basis_ = TrajectoryBasis(config.horizon, config.basis_terms);
    if (config.traj_dim % (2 * config.horizon) != 0) {
      throw ValidationError("horizon", "traj_dim is not a multiple of 2 * horizon");
    }
  }
  if (config.linear_skip) {
    const int n = basis_.empty()
                      ? config.traj_dim
                      : config.traj_dim / config.horizon * config.basis_terms;
    skip_ = Linear(n, n);
    gate_ = Linear(kNoiseFeatures, 1);
  }
}

void Denoiser::Init(Rng& rng) {
  backbone_.Init(rng);
  if (config_.linear_skip) {
    gate_.Init(rng);
    skip_.weight.setZero();
  }
}

void Denoiser::ZeroGrad() {
  backbone_.ZeroGrad();
  if (config_.linear_skip) {
    skip_.ZeroGrad();
    gate_.ZeroGrad();
  }
}

void Denoiser::Collect(std::vector<ParamView>& out) {
  backbone_.Collect(out);
  if (config_.linear_skip) {
    skip_.Collect(out);
    gate_.Collect(out);
  }
}

Matrix Denoiser::Forward(const Matrix& x, const Matrix& y,
                         std::span<const double> sigma, Tape* tape) const {
  const Eigen::Index n = x.cols();
  if (x.rows() != config_.traj_dim || y.rows() != config_.cond_dim ||
      y.cols() != n || static_cast<Eigen::Index>(sigma.size()) != n) {
    throw ShapeError("Denoiser: inconsistent input shapes");
  }
  Matrix input(x.rows() + y.rows() + kNoiseFeatures, n);
  input.topRows(x.rows()) = x;
  input.middleRows(x.rows(), y.rows()) = y;
  input.bottomRows(kNoiseFeatures) = NoiseEmbedding(sigma);
  Matrix out = backbone_.Forward(input, tape ? &tape->backbone : nullptr);
  if (config_.linear_skip) {
    const Matrix emb = input.bottomRows(kNoiseFeatures);
    Matrix in = basis_.empty() ? x : basis_.Coefficients(x);
    Matrix skip = skip_.Forward(in);
    if (!basis_.empty()) skip = basis_.Expand(skip);
    const Matrix gate = gate_.Forward(emb);
    for (Eigen::Index b = 0; b < n; ++b) out.col(b) += gate(0, b) * skip.col(b);
    if (tape) {
      tape->x = std::move(in);
      tape->embedding = emb;
      tape->skip = std::move(skip);
      tape->gate = gate;
    }
  }
  CheckFinite(out, "denoiser output");
  if (tape) tape->recorded = true;
  return out;
}

Denoiser::InputGrads Denoiser::Backward(const Tape& tape, const Matrix& dout) {
  if (!tape.recorded) throw Error("Denoiser::Backward called before Forward");
  const Matrix din = backbone_.Backward(tape.backbone, dout);
  InputGrads grads{din.topRows(config_.traj_dim),
                   din.middleRows(config_.traj_dim, config_.cond_dim)};
  if (config_.linear_skip) {
    const Eigen::Index n = dout.cols();
    Matrix dskip(dout.rows(), n);
    Matrix dgate(1, n);
    for (Eigen::Index b = 0; b < n; ++b) {
      dskip.col(b) = tape.gate(0, b) * dout.col(b);
      dgate(0, b) = dout.col(b).dot(tape.skip.col(b));
    }
    if (basis_.empty()) {
      grads.x += skip_.Backward(tape.x, dskip);
    } else {
      grads.x += basis_.Expand(skip_.Backward(tape.x, basis_.Coefficients(dskip)));
    }
    gate_.Backward(tape.embedding, dgate);
  }
  return grads;
}

void Adam::Step(std::span<const ParamView> params) {
  const std::size_t n = ParamCount(params);
  if (m_.empty()) {
    m_.assign(n, 0.0);
    v_.assign(n, 0.0);
  }
  if (m_.size() != n) throw ShapeError("Adam: parameter count changed");
  ++steps_;
  const double b1 = config_.beta1;
  const double b2 = config_.beta2;
  const double c1 = 1.0 - std::pow(b1, static_cast<double>(steps_));
  const double c2 = 1.0 - std::pow(b2, static_cast<double>(steps_));
  std::size_t k = 0;
  for (const auto& p : params) {
    for (std::size_t i = 0; i < p.value.size(); ++i, ++k) {
      const double g = p.grad[i];
      m_[k] = b1 * m_[k] + (1.0 - b1) * g;
      v_[k] = b2 * v_[k] + (1.0 - b2) * g * g;
      const double m_hat = m_[k] / c1;
      const double v_hat = v_[k] / c2;
      p.value[i] -= config_.lr * m_hat / (std::sqrt(v_hat) + config_.eps);
    }
  }
}

std::size_t ParamCount(std::span<const ParamView> params) {
  std::size_t n = 0;
  for (const auto& p : params) n += p.value.size();
  return n;
}

void ZeroGrads(std::span<const ParamView> params) {
  for (const auto& p : params) std::fill(p.grad.begin(), p.grad.end(), 0.0);
}

}  // namespace cmplan::net
