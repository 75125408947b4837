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

#ifndef CMPLAN_NET_H_
#define CMPLAN_NET_H_

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "cmplan/rng.h"

namespace cmplan::net {

// Column-per-sample batches: rows are features, columns are batch entries.
using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

// Row-major dense array with an explicit shape.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(std::vector<std::size_t> shape);
  Tensor(std::vector<std::size_t> shape, std::vector<double> data);

  const std::vector<std::size_t>& shape() const { return shape_; }
  std::span<double> data() { return data_; }
  std::span<const double> data() const { return data_; }
  std::size_t size() const { return data_.size(); }

  // Throws NumericError mentioning `what` if any entry is NaN or infinite.
  void CheckFinite(const std::string& what) const;

 private:
  std::vector<std::size_t> shape_;
  std::vector<double> data_;
};

// Throws NumericError if `m` has a non-finite entry.
void CheckFinite(const Matrix& m, const std::string& what);

// A trainable array and its gradient buffer, both contiguous.
struct ParamView {
  std::span<double> value;
  std::span<double> grad;
};

class Linear {
 public:
  Linear() = default;
  Linear(Eigen::Index in_dim, Eigen::Index out_dim);

  Eigen::Index in_dim() const { return weight.cols(); }
  Eigen::Index out_dim() const { return weight.rows(); }

  // Uniform(-1/sqrt(in), 1/sqrt(in)) weights scaled by `gain`, zero bias.
  void Init(Rng& rng, double gain = 1.0);

  // Each column is transformed independently, so a batch gives the same
  // bits as the columns one at a time.
  Matrix Forward(const Matrix& x) const;
  // Accumulates parameter gradients for input `x` and output gradient `dy`;
  // returns the input gradient.
  Matrix Backward(const Matrix& x, const Matrix& dy);

  void ZeroGrad();
  void Collect(std::vector<ParamView>& out);

  Matrix weight;  // out x in
  Vector bias;
  Matrix weight_grad;
  Vector bias_grad;
};

Matrix Silu(const Matrix& z);
// dL/dz given z and dL/dSilu(z).
Matrix SiluBackward(const Matrix& z, const Matrix& dy);

// Stack of Linear layers with SiLU between them.
class Mlp {
 public:
  struct Tape {
    std::vector<Matrix> inputs;  // input of each layer
    std::vector<Matrix> pre;     // pre-activation output of each layer
    bool recorded = false;
  };

  Mlp() = default;
  // dims = {in, hidden..., out}.
  Mlp(const std::vector<int>& dims, bool final_activation);

  void Init(Rng& rng);
  int in_dim() const { return static_cast<int>(layers_.front().in_dim()); }
  int out_dim() const { return static_cast<int>(layers_.back().out_dim()); }

  Matrix Forward(const Matrix& x, Tape* tape) const;
  Matrix Backward(const Tape& tape, const Matrix& dy);

  void ZeroGrad();
  void Collect(std::vector<ParamView>& out);
  std::vector<Linear>& layers() { return layers_; }

 private:
  std::vector<Linear> layers_;
  bool final_activation_ = false;
};

// input -> Linear(W) -> blocks x [h + Linear(SiLU(Linear(SiLU(h))))]
//       -> Linear(SiLU(h)) -> output
class ResidualMlp {
 public:
  struct Tape {
    Matrix input;
    std::vector<Matrix> hidden;  // blocks + 1 residual-stream states
    std::vector<Matrix> act1;    // SiLU(h) entering the first block layer
    std::vector<Matrix> pre2;    // first block layer output
    std::vector<Matrix> act2;    // SiLU of pre2
    Matrix out_act;
    bool recorded = false;
  };

  ResidualMlp() = default;
  ResidualMlp(int in_dim, int width, int blocks, int out_dim);

  void Init(Rng& rng);
  int in_dim() const { return static_cast<int>(in_proj_.in_dim()); }
  int out_dim() const { return static_cast<int>(out_proj_.out_dim()); }
  int width() const { return static_cast<int>(in_proj_.out_dim()); }
  int blocks() const { return static_cast<int>(block_fc1_.size()); }

  Matrix Forward(const Matrix& x, Tape* tape) const;
  Matrix Backward(const Tape& tape, const Matrix& dy);

  void ZeroGrad();
  void Collect(std::vector<ParamView>& out);

  Linear& in_proj() { return in_proj_; }
  Linear& out_proj() { return out_proj_; }
  Linear& block_fc1(int i) { return block_fc1_[i]; }
  Linear& block_fc2(int i) { return block_fc2_[i]; }

 private:
  Linear in_proj_;
  std::vector<Linear> block_fc1_;
  std::vector<Linear> block_fc2_;
  Linear out_proj_;
};

inline constexpr int kNoiseFeatures = 16;

// Fourier features of log(sigma): sin/cos pairs at fixed frequencies,
// kNoiseFeatures x n.
Matrix NoiseEmbedding(std::span<const double> sigma);
// Derivative of every feature with respect to log(sigma), same shape.
Matrix NoiseEmbeddingDerivative(std::span<const double> sigma);

struct DenoiserConfig {
  int traj_dim = 0;
  int cond_dim = 0;
  int width = 256;
  int blocks = 4;
  // Adds g(sigma) * S x to the output, with g a linear read-out of the noise
  // embedding. S is a full traj_dim x traj_dim matrix, or acts on basis
  // coefficients when a basis is set. Without it the width-W bottleneck
  // struggles to pass traj_dim-dimensional inputs through.
  bool linear_skip = true;
  // When > 0, predictions are confined to polynomials of this many terms in
  // time, per agent slot and coordinate. traj_dim must then be a multiple of
  // 2 * horizon, laid out as [slot][t][x, y].
  int basis_terms = 0;
  int horizon = 0;
};

// Orthonormal polynomial basis over `horizon` time steps (Q, horizon x terms)
// and the blockwise projection P = Q Q^T it induces on trajectory tensors.
class TrajectoryBasis {
 public:
  TrajectoryBasis() = default;
  // Throws ValidationError unless 1 <= terms <= horizon.
  TrajectoryBasis(int horizon, int terms);

  bool empty() const { return q_.size() == 0; }
  int horizon() const { return static_cast<int>(q_.rows()); }
  int terms() const { return static_cast<int>(q_.cols()); }
  const Matrix& q() const { return q_; }

  // Projects every column in place. Throws ShapeError if the row count is
  // not a multiple of 2 * horizon.
  void Project(Matrix& m) const;
  // Basis coefficients of every column (2 * terms per 2 * horizon block), and
  // the inverse map back to trajectories. Project(m) == Expand(Coefficients(m)).
  Matrix Coefficients(const Matrix& m) const;
  Matrix Expand(const Matrix& c) const;

 private:
  Matrix q_;
};

// F_theta(x, y, sigma): residual MLP over [x; y; NoiseEmbedding(sigma)],
// plus the optional gated linear skip.
class Denoiser {
 public:
  struct Tape {
    ResidualMlp::Tape backbone;
    Matrix x;      // skip input: x, or its basis coefficients
    Matrix embedding;
    Matrix skip;   // S x, in trajectory space
    Matrix gate;   // 1 x n
    bool recorded = false;
  };
  struct InputGrads {
    Matrix x;
    Matrix y;
  };

  Denoiser() = default;
  explicit Denoiser(const DenoiserConfig& config);

  void Init(Rng& rng);
  const DenoiserConfig& config() const { return config_; }

  // x: traj_dim x n, y: cond_dim x n, one sigma per column. Throws
  // ShapeError on mismatched shapes and NumericError on non-finite output.
  Matrix Forward(const Matrix& x, const Matrix& y,
                 std::span<const double> sigma, Tape* tape) const;
  // Accumulates parameter gradients; throws Error if `tape` was not
  // recorded by Forward.
  InputGrads Backward(const Tape& tape, const Matrix& dout);

  void ZeroGrad();
  void Collect(std::vector<ParamView>& out);
  ResidualMlp& backbone() { return backbone_; }
  const ResidualMlp& backbone() const { return backbone_; }
  Linear& skip() { return skip_; }
  Linear& gate() { return gate_; }
  const TrajectoryBasis& basis() const { return basis_; }

 private:
  DenoiserConfig config_;
  TrajectoryBasis basis_;
  ResidualMlp backbone_;
  Linear skip_;  // traj_dim -> traj_dim, zero-initialized
  Linear gate_;  // kNoiseFeatures -> 1
};

struct AdamConfig {
  double lr = 8e-5;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

class Adam {
 public:
  explicit Adam(AdamConfig config = {}) : config_(config) {}

  // One bias-corrected update of every parameter from its gradient buffer.
  void Step(std::span<const ParamView> params);

  const AdamConfig& config() const { return config_; }
  void set_lr(double lr) { config_.lr = lr; }
  std::int64_t steps() const { return steps_; }

  // Moment buffers in parameter declaration order; exposed for checkpoints.
  std::vector<double>& first_moment() { return m_; }
  std::vector<double>& second_moment() { return v_; }
  const std::vector<double>& first_moment() const { return m_; }
  const std::vector<double>& second_moment() const { return v_; }
  void set_steps(std::int64_t steps) { steps_ = steps; }

 private:
  AdamConfig config_;
  std::vector<double> m_;
  std::vector<double> v_;
  std::int64_t steps_ = 0;
};

std::size_t ParamCount(std::span<const ParamView> params);
void ZeroGrads(std::span<const ParamView> params);

}  // namespace cmplan::net

#endif  // CMPLAN_NET_H_
