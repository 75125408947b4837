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

#ifndef CMPLAN_WORKFLOWS_H_
#define CMPLAN_WORKFLOWS_H_

#include <array>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "cmplan/baselines.h"
#include "cmplan/checkpoint.h"
#include "cmplan/config.h"
#include "cmplan/consistency.h"
#include "cmplan/datagen.h"
#include "cmplan/encoder.h"
#include "cmplan/guidance.h"
#include "cmplan/metrics.h"
#include "cmplan/net.h"

namespace cmplan {

inline constexpr char kVersion[] = "0.1.0";

// Generates n scenes with kinds cycling through all scenario kinds.
std::vector<Scenario> GenerateDataset(int n, std::uint64_t seed,
                                      const RunConfig& config);

// Everything the models need from one scene, computed once.
struct PreparedScene {
  SceneFrame frame;
  SceneFeatures features;
  net::Vector x1;    // normalized joint future, kJointSlots * H2 * 2
  net::Vector mask;  // 1 on valid slots, 0 on padding
  TrajectorySet gt_world;
  EgoFrame ego;
};

PreparedScene PrepareScene(const Scenario& scenario, const DatasetStats& stats,
                           const RunConfig& config,
                           const EncoderConfig& encoder);

// Largest |coordinate| over the valid entries of the normalized futures.
double DataBound(std::span<const PreparedScene> scenes);

enum class ModelKind { kConsistency, kDdpm };
std::string_view ModelKindName(ModelKind kind);
ModelKind ParseModelKind(std::string_view name);

struct ModelSpec {
  ModelKind kind = ModelKind::kConsistency;
  RunConfig run;
  EncoderConfig encoder;
  int width = 256;
  int blocks = 4;
  bool linear_skip = true;
  // Polynomial terms per agent coordinate that predictions are confined to;
  // 0 disables the restriction.
  int basis_terms = 12;
  int ddpm_steps = 10;  // training schedule length for kDdpm
  // Bound on |x_0| estimates during diffusion sampling; 0 disables it.
  double x0_clip = 0.0;
  DatasetStats stats;
};

// Encoder plus denoiser, saved together in one checkpoint.
class PlannerModel {
 public:
  explicit PlannerModel(const ModelSpec& spec);

  void Init(std::uint64_t seed);
  const ModelSpec& spec() const { return spec_; }
  void set_x0_clip(double clip) { spec_.x0_clip = clip; }
  int traj_dim() const { return kJointSlots * spec_.run.H2 * 2; }

  Encoder& encoder() { return encoder_; }
  const Encoder& encoder() const { return encoder_; }
  net::Denoiser& denoiser() { return denoiser_; }
  const net::Denoiser& denoiser() const { return denoiser_; }
  const NoiseSchedule& schedule() const { return schedule_; }
  const DiffusionSchedule& diffusion() const { return diffusion_; }

  // Encoder parameters first, then the denoiser.
  std::vector<net::ParamView> Params();
  void ZeroGrad();

  net::Vector Encode(const PreparedScene& scene) const;

  // Training progress stored alongside the weights.
  int epochs_done = 0;
  std::uint64_t train_seed = 0;

 private:
  ModelSpec spec_;
  Encoder encoder_;
  net::Denoiser denoiser_;
  NoiseSchedule schedule_;
  DiffusionSchedule diffusion_;
};

void SaveModel(const std::string& path, PlannerModel& model,
               const net::Adam* adam);
// Throws IoError / ValidationError on unreadable or inconsistent files. The
// optimizer state, if present and `adam` is non-null, is restored too.
PlannerModel LoadModel(const std::string& path, net::Adam* adam = nullptr);

struct TrainConfig {
  int epochs = 10;
  int batch = 32;
  double lr = 8e-5;
  double loss_weight = 1.0;  // on the generative loss
  double aux_weight = 0.1;   // on the auxiliary dense loss
  std::uint64_t seed = 0;
};

struct EpochLog {
  int epoch = 0;  // 1-based, counted across resumes
  double loss = 0.0;
  double generative = 0.0;
  double aux = 0.0;
};

// One optimizer step on `batch` with noise drawn from `rng`. With
// update = false the gradients are computed but no parameter moves.
EpochLog TrainStep(PlannerModel& model, net::Adam& adam,
                   std::span<const PreparedScene* const> batch,
                   const TrainConfig& config, Rng& rng, bool update);

// Runs epochs epochs_done + 1 .. config.epochs. Each epoch shuffles with
// Rng(seed, 2 * epoch) and draws noise from Rng(seed, 2 * epoch + 1), so a
// resumed run continues exactly where a straight run would be.
std::vector<EpochLog> Train(
    PlannerModel& model, net::Adam& adam, std::span<const PreparedScene> data,
    const TrainConfig& config,
    const std::function<void(const EpochLog&)>& on_epoch = nullptr);

enum class SamplerKind { kConsistency, kDdpm, kDdim };
std::string_view SamplerKindName(SamplerKind kind);
SamplerKind ParseSamplerKind(std::string_view name);

struct SamplerConfig {
  SamplerKind sampler = SamplerKind::kConsistency;
  int steps = 4;
  int K = 6;
  GuidanceConfig guidance;
};

struct SceneSamples {
  net::Matrix normalized;             // traj_dim x K
  std::vector<TrajectorySet> world;   // K joint samples
  std::vector<ViolationCurve> curves;  // final-step curves when recorded
  bool aborted = false;
};

// The scene's ego frame, carrying the model's trajectory basis when it has
// one.
EgoFrame GuidanceFrame(const PlannerModel& model, const PreparedScene& scene,
                       int goal_terms);

// Noise draws for one scene come from `rng` only, so scenes can be sampled
// in any order.
SceneSamples SampleScene(const PlannerModel& model, const PreparedScene& scene,
                         const SamplerConfig& config, Rng& rng);

// Unguided consistency sampling through ConsistencySample directly.
net::Matrix DirectConsistencySample(const PlannerModel& model,
                                    const PreparedScene& scene, int K,
                                    int steps, Rng& rng);

struct EvalConfig {
  SamplerConfig sampler;
  std::uint64_t seed = 0;
  int jobs = 1;
  std::string method;
};

struct EvalResult {
  MetricsReport report;
  std::vector<SceneSamples> scenes;
};

// Scene i uses Rng(seed, i); results are aggregated in scene order.
EvalResult Evaluate(const PlannerModel& model,
                    std::span<const PreparedScene> scenes,
                    const EvalConfig& config);

struct AblationRow {
  GuidanceStrategy strategy = GuidanceStrategy::kVanilla;
  int grad_steps = 0;
  std::array<double, kNumConstraints> alpha{};
  ConstraintValues violations;  // mean over scenes and samples
};

struct AblationConfig {
  std::vector<int> grad_steps = {50, 100, 150};
  std::vector<double> alpha_values = {1e-4, 1e-5, 1e-6};
  bool sweep = true;  // all combinations; otherwise `alpha` only
  // Per-constraint factors applied to every swept combination.
  std::array<double, kNumConstraints> alpha_scale = {1.0, 1.0, 1.0};
  std::array<double, kNumConstraints> alpha = {2e-5, 3e-6, 5e-7};
  int K = 6;
  int steps = 4;
  std::uint64_t seed = 0;
  int jobs = 1;
  int goal_basis_terms = 4;  // see GuidanceConfig
};

struct AblationResult {
  std::vector<AblationRow> rows;
  // Mean final-step curves at `alpha` with the middle grad-step setting,
  // indexed by strategy (vanilla, alternating).
  std::array<ViolationCurve, 2> curves;
  // AccelStepVariance of each sample's curve, averaged over samples. Taken
  // before averaging, since out-of-phase oscillations cancel in the mean.
  std::array<double, 2> accel_step_variance{};
};

std::vector<std::array<double, kNumConstraints>> AlphaGrid(
    std::span<const double> values);

AblationResult RunAblation(const PlannerModel& model,
                           std::span<const PreparedScene> scenes,
                           const AblationConfig& config);

void WriteAblationCsv(std::ostream& out, std::span<const AblationRow> rows);

// Elementwise mean of equal-length curves.
ViolationCurve MeanCurve(std::span<const ViolationCurve> curves);
// Variance of the step-to-step changes of c_acc along a curve.
double AccelStepVariance(const ViolationCurve& curve);

// Self-contained SVG from a CSV: a curve file (first column "step") becomes
// one line panel per remaining column; any other file becomes one bar panel
// per numeric column with the first column as labels. Throws ParseError on
// empty or malformed input.
std::string CsvToSvg(std::string_view csv);

// Runs fn(i) for i in [0, n) on `jobs` threads.
void ParallelFor(int n, int jobs, const std::function<void(int)>& fn);

}  // namespace cmplan

#endif  // CMPLAN_WORKFLOWS_H_
