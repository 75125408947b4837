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

#include "cmplan/workflows.h"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <exception>
#include <mutex>
#include <numeric>
#include <ostream>
#include <sstream>
#include <thread>

#include <json.hpp>

#include "cmplan/error.h"

namespace cmplan {
namespace {

using json = nlohmann::json;

net::Matrix Replicate(const net::Vector& v, int k) {
  net::Matrix m(v.size(), k);
  for (int j = 0; j < k; ++j) m.col(j) = v;
  return m;
}

TrajectorySet ToWorld(const net::Vector& z, const PreparedScene& scene,
                      int horizon) {
  TrajectorySet local(kJointSlots, horizon);
  std::copy(z.data(), z.data() + z.size(), local.data().begin());
  for (int s = 0; s < kJointSlots; ++s) {
    local.set_valid(s, scene.frame.slot_valid[s]);
  }
  LocalizedTrajectories lt{std::move(local), scene.ego.stats, scene.frame.ref};
  return FromLocal(lt);
}

json EncoderJson(const EncoderConfig& c) {
  return {{"history_steps", c.history_steps}, {"horizon", c.horizon},
          {"agent_slots", c.agent_slots},     {"map_slots", c.map_slots},
          {"polyline_points", c.polyline_points},
          {"hidden", c.hidden},               {"ego_dim", c.ego_dim},
          {"agent_dim", c.agent_dim},         {"map_dim", c.map_dim},
          {"goal_dim", c.goal_dim},           {"ref_dim", c.ref_dim}};
}

EncoderConfig EncoderFromJson(const json& j) {
  EncoderConfig c;
  c.history_steps = j.at("history_steps").get<int>();
  c.horizon = j.at("horizon").get<int>();
  c.agent_slots = j.at("agent_slots").get<int>();
  c.map_slots = j.at("map_slots").get<int>();
  c.polyline_points = j.at("polyline_points").get<int>();
  c.hidden = j.at("hidden").get<int>();
  c.ego_dim = j.at("ego_dim").get<int>();
  c.agent_dim = j.at("agent_dim").get<int>();
  c.map_dim = j.at("map_dim").get<int>();
  c.goal_dim = j.at("goal_dim").get<int>();
  c.ref_dim = j.at("ref_dim").get<int>();
  return c;
}

}  // namespace

std::vector<Scenario> GenerateDataset(int n, std::uint64_t seed,
                                      const RunConfig& config) {
  if (n < 1) throw ValidationError("n", "dataset must not be empty");
  GeneratorParams params;
  params.H1 = config.H1;
  params.H2 = config.H2;
  params.dt = config.dt;
  std::vector<Scenario> out;
  out.reserve(n);
  for (int i = 0; i < n; ++i) {
    Rng rng(seed, static_cast<std::uint64_t>(i));
    const auto kind = static_cast<ScenarioKind>(i % kNumScenarioKinds);
    out.push_back(GenerateScenario(rng, kind, params));
  }
  return out;
}

PreparedScene PrepareScene(const Scenario& scenario, const DatasetStats& stats,
                           const RunConfig& config,
                           const EncoderConfig& encoder) {
  if (scenario.horizon() != config.H2) {
    throw ValidationError("H2", "scene horizon " +
                                    std::to_string(scenario.horizon()) +
                                    " does not match the model");
  }
  if (scenario.history_steps() != config.H1 + 1) {
    throw ValidationError("H1", "scene history length does not match");
  }
  PreparedScene p;
  p.frame = MakeSceneFrame(scenario);
  p.gt_world = JointFuture(scenario, p.frame);
  const LocalizedTrajectories local =
      ToLocal(p.gt_world, p.frame.ref, stats);
  const auto z = local.normalized.data();
  p.x1 = Eigen::Map<const net::Vector>(z.data(), z.size());
  p.mask = net::Vector::Zero(p.x1.size());
  const int row = 2 * config.H2;
  for (int s = 0; s < kJointSlots; ++s) {
    if (p.frame.slot_valid[s]) p.mask.segment(s * row, row).setOnes();
  }
  p.features = MakeSceneFeatures(scenario, p.frame, stats, encoder);
  p.ego.ref = p.frame.ref[0];
  p.ego.stats = stats;
  p.ego.spec.goal = scenario.goal;
  p.ego.spec.a_limit = config.a_limit;
  p.ego.spec.omega_limit = config.omega_limit;
  p.ego.dt = config.dt;
  p.ego.horizon = config.H2;
  return p;
}

std::string_view ModelKindName(ModelKind kind) {
  return kind == ModelKind::kConsistency ? "consistency" : "ddpm";
}

ModelKind ParseModelKind(std::string_view name) {
  if (name == "consistency") return ModelKind::kConsistency;
  if (name == "ddpm") return ModelKind::kDdpm;
  throw ValidationError("model", "unknown model '" + std::string(name) +
                                     "' (consistency|ddpm)");
}

double DataBound(std::span<const PreparedScene> scenes) {
  double bound = 0.0;
  for (const auto& s : scenes) {
    bound = std::max(bound, s.x1.cwiseProduct(s.mask).cwiseAbs().maxCoeff());
  }
  return bound;
}

PlannerModel::PlannerModel(const ModelSpec& spec) : spec_(spec) {
  Validate(spec_.run);
  spec_.encoder.history_steps = spec_.run.H1 + 1;
  spec_.encoder.horizon = spec_.run.H2;
  encoder_ = Encoder(spec_.encoder);
  net::DenoiserConfig dc;
  dc.traj_dim = traj_dim();
  dc.cond_dim = spec_.encoder.cond_dim();
  dc.width = spec_.width;
  dc.blocks = spec_.blocks;
  dc.linear_skip = spec_.linear_skip;
  dc.basis_terms = spec_.basis_terms;
  dc.horizon = spec_.run.H2;
  denoiser_ = net::Denoiser(dc);
  schedule_ = MakeSchedule(spec_.run.T, spec_.run.rho, spec_.run.sigma_min,
                           spec_.run.sigma_max);
  diffusion_ = CosineSchedule(spec_.ddpm_steps);
}

void PlannerModel::Init(std::uint64_t seed) {
  Rng rng(seed, 0x6d6f64656cULL);
  encoder_.Init(rng);
  denoiser_.Init(rng);
}

std::vector<net::ParamView> PlannerModel::Params() {
  std::vector<net::ParamView> out;
  encoder_.Collect(out);
  denoiser_.Collect(out);
  return out;
}

void PlannerModel::ZeroGrad() {
  encoder_.ZeroGrad();
  denoiser_.ZeroGrad();
}

net::Vector PlannerModel::Encode(const PreparedScene& scene) const {
  return encoder_.Encode(scene.features, nullptr);
}

void SaveModel(const std::string& path, PlannerModel& model,
               const net::Adam* adam) {
  const ModelSpec& s = model.spec();
  json meta = {{"format", "cmplan-model"},
               {"version", kVersion},
               {"model", std::string(ModelKindName(s.kind))},
               {"config", FormatConfig(s.run)},
               {"encoder", EncoderJson(s.encoder)},
               {"ddpm_steps", s.ddpm_steps},
               {"linear_skip", s.linear_skip},
               {"basis_terms", s.basis_terms},
               {"x0_clip", s.x0_clip},
               {"stats",
                {{"mean", {s.stats.mean.x, s.stats.mean.y}},
                 {"std", {s.stats.std.x, s.stats.std.y}}}},
               {"epochs_done", model.epochs_done},
               {"train_seed", model.train_seed}};
  net::CheckpointHeader h;
  h.blocks = static_cast<std::uint32_t>(s.blocks);
  h.width = static_cast<std::uint32_t>(s.width);
  h.input_dim = static_cast<std::uint32_t>(model.denoiser().backbone().in_dim());
  h.output_dim = static_cast<std::uint32_t>(model.traj_dim());
  h.metadata = meta.dump();
  const auto params = model.Params();
  net::WriteCheckpoint(path, h, params, adam);
}

PlannerModel LoadModel(const std::string& path, net::Adam* adam) {
  const net::Checkpoint ckpt = net::ReadCheckpoint(path);
  json meta;
  try {
    meta = json::parse(ckpt.header.metadata);
  } catch (const json::exception& e) {
    throw IoError(path + ": bad checkpoint metadata: " + e.what());
  }
  ModelSpec s;
  try {
    if (meta.at("format") != "cmplan-model") {
      throw IoError(path + ": not a planner checkpoint");
    }
    s.kind = ParseModelKind(meta.at("model").get<std::string>());
    s.run = ParseConfig(meta.at("config").get<std::string>());
    s.encoder = EncoderFromJson(meta.at("encoder"));
    s.ddpm_steps = meta.at("ddpm_steps").get<int>();
    s.linear_skip = meta.at("linear_skip").get<bool>();
    s.basis_terms = meta.at("basis_terms").get<int>();
    s.x0_clip = meta.at("x0_clip").get<double>();
    const auto& st = meta.at("stats");
    s.stats.mean = {st.at("mean")[0].get<double>(), st.at("mean")[1].get<double>()};
    s.stats.std = {st.at("std")[0].get<double>(), st.at("std")[1].get<double>()};
  } catch (const json::exception& e) {
    throw IoError(path + ": bad checkpoint metadata: " + e.what());
  }
  s.width = static_cast<int>(ckpt.header.width);
  s.blocks = static_cast<int>(ckpt.header.blocks);
  PlannerModel model(s);
  if (static_cast<int>(ckpt.header.output_dim) != model.traj_dim() ||
      static_cast<int>(ckpt.header.input_dim) !=
          model.denoiser().backbone().in_dim()) {
    throw ValidationError("checkpoint", "architecture header disagrees with "
                                        "its metadata");
  }
  const auto params = model.Params();
  net::LoadParams(ckpt, params);
  if (adam && ckpt.optimizer) net::LoadOptimizer(ckpt, *adam);
  model.epochs_done = meta.value("epochs_done", 0);
  model.train_seed = meta.value("train_seed", std::uint64_t{0});
  return model;
}

EpochLog TrainStep(PlannerModel& model, net::Adam& adam,
                   std::span<const PreparedScene* const> batch,
                   const TrainConfig& config, Rng& rng, bool update) {
  const int b_size = static_cast<int>(batch.size());
  const int dim = model.traj_dim();
  const int cond = model.encoder().cond_dim();
  model.ZeroGrad();

  std::vector<Encoder::Tape> tapes(b_size);
  net::Matrix y(cond, b_size);
  net::Matrix x1(dim, b_size);
  net::Matrix mask(dim, b_size);
  for (int b = 0; b < b_size; ++b) {
    y.col(b) = model.encoder().Encode(batch[b]->features, &tapes[b]);
    x1.col(b) = batch[b]->x1;
    mask.col(b) = batch[b]->mask;
  }
  const LossResult gen =
      model.spec().kind == ModelKind::kConsistency
          ? ConsistencyLoss(model.denoiser(), model.schedule(), x1, y, mask,
                            rng, config.loss_weight)
          : DdpmLoss(model.denoiser(), model.diffusion(), x1, y, mask, rng,
                     config.loss_weight);

  const int ego = 2 * model.spec().run.H2;
  double aux = 0.0;
  net::Vector dy_aux;
  for (int b = 0; b < b_size; ++b) {
    aux += model.encoder().AuxDenseLoss(y.col(b), batch[b]->x1.head(ego),
                                        config.aux_weight / b_size, &dy_aux);
    model.encoder().Backward(tapes[b], gen.dy.col(b) + dy_aux);
  }
  aux /= b_size;
  if (update) {
    adam.set_lr(config.lr);
    const auto params = model.Params();
    adam.Step(params);
  }
  EpochLog log;
  log.generative = gen.loss;
  log.aux = aux;
  log.loss = config.loss_weight * gen.loss + config.aux_weight * aux;
  return log;
}

std::vector<EpochLog> Train(PlannerModel& model, net::Adam& adam,
                            std::span<const PreparedScene> data,
                            const TrainConfig& config,
                            const std::function<void(const EpochLog&)>& on_epoch) {
  if (data.empty()) throw ValidationError("data", "no training scenes");
  if (config.batch < 1) throw ValidationError("batch", "must be at least 1");
  model.train_seed = config.seed;
  std::vector<EpochLog> logs;
  const int n = static_cast<int>(data.size());
  std::vector<int> order(n);
  for (int epoch = model.epochs_done + 1; epoch <= config.epochs; ++epoch) {
    std::iota(order.begin(), order.end(), 0);
    Rng shuffle(config.seed, 2 * static_cast<std::uint64_t>(epoch));
    for (int i = n - 1; i > 0; --i) {
      std::swap(order[i], order[shuffle.UniformInt(0, i)]);
    }
    Rng noise(config.seed, 2 * static_cast<std::uint64_t>(epoch) + 1);
    EpochLog total;
    total.epoch = epoch;
    std::vector<const PreparedScene*> batch;
    for (int start = 0; start < n; start += config.batch) {
      batch.clear();
      for (int i = start; i < std::min(n, start + config.batch); ++i) {
        batch.push_back(&data[order[i]]);
      }
      const EpochLog step = TrainStep(model, adam, batch, config, noise, true);
      const double w = static_cast<double>(batch.size()) / n;
      total.loss += w * step.loss;
      total.generative += w * step.generative;
      total.aux += w * step.aux;
    }
    model.epochs_done = epoch;
    logs.push_back(total);
    if (on_epoch) on_epoch(total);
  }
  return logs;
}

std::string_view SamplerKindName(SamplerKind kind) {
  switch (kind) {
    case SamplerKind::kConsistency:
      return "consistency";
    case SamplerKind::kDdpm:
      return "ancestral";
    case SamplerKind::kDdim:
      return "ddim";
  }
  return "consistency";
}

SamplerKind ParseSamplerKind(std::string_view name) {
  if (name == "consistency") return SamplerKind::kConsistency;
  if (name == "ancestral") return SamplerKind::kDdpm;
  if (name == "ddim") return SamplerKind::kDdim;
  throw ValidationError("sampler", "unknown sampler '" + std::string(name) +
                                       "' (consistency|ancestral|ddim)");
}

namespace {

DenoiseFn MakeDenoiseFn(const PlannerModel& model, const net::Matrix& y,
                        const net::Matrix& mask) {
  return [&model, &y, &mask](const net::Matrix& x,
                             std::span<const double> sigma) {
    const ConsistencyFunction f(model.denoiser(), model.schedule());
    return f(x.cwiseProduct(mask), y, sigma);
  };
}

EpsFn MakeEpsFn(const PlannerModel& model, const net::Matrix& y,
                const net::Matrix& mask) {
  return [&model, &y, &mask](const net::Matrix& x, int t) {
    const std::vector<int> steps(x.cols(), t);
    return PredictEps(model.denoiser(), model.diffusion(), x.cwiseProduct(mask),
                      y, steps);
  };
}

}  // namespace

EgoFrame GuidanceFrame(const PlannerModel& model, const PreparedScene& scene,
                       int goal_terms) {
  EgoFrame ego = scene.ego;
  if (!model.denoiser().basis().empty()) {
    ego.basis = model.denoiser().basis().q();
    ego.goal_terms = goal_terms;
  }
  return ego;
}

SceneSamples SampleScene(const PlannerModel& model, const PreparedScene& scene,
                         const SamplerConfig& config, Rng& rng) {
  const int dim = model.traj_dim();
  const int k = config.K;
  if (k < 1) throw ValidationError("K", "must be at least 1");
  const net::Matrix y = Replicate(model.Encode(scene), k);
  const net::Matrix mask = Replicate(scene.mask, k);
  SceneSamples out;

  const bool consistency_model = model.spec().kind == ModelKind::kConsistency;
  if ((config.sampler == SamplerKind::kConsistency) != consistency_model) {
    throw ValidationError("sampler", "sampler does not fit a " +
                                         std::string(ModelKindName(
                                             model.spec().kind)) +
                                         " checkpoint");
  }
  if (config.sampler == SamplerKind::kConsistency) {
    const DenoiseFn f = MakeDenoiseFn(model, y, mask);
    SamplingLevels(model.schedule().T, config.steps);
    const auto noise = DrawSamplingNoise(dim, k, config.steps, rng);
    const std::vector<EgoFrame> frames(
        k, GuidanceFrame(model, scene, config.guidance.goal_basis_terms));
    GuidedSampleResult g =
        GuidedSample(f, model.schedule(), noise, frames, config.guidance);
    out.normalized = std::move(g.samples);
    out.curves = std::move(g.curves);
    out.aborted = std::any_of(g.aborted.begin(), g.aborted.end(),
                              [](bool b) { return b; });
  } else {
    if (config.guidance.strategy != GuidanceStrategy::kNone) {
      throw ValidationError("guidance", "only available with the consistency "
                                        "sampler");
    }
    const EpsFn eps = MakeEpsFn(model, y, mask);
    if (config.sampler == SamplerKind::kDdpm) {
      if (config.steps != model.diffusion().n_steps) {
        throw ValidationError(
            "steps", "ancestral sampling runs the trained schedule of " +
                         std::to_string(model.diffusion().n_steps) + " steps");
      }
      out.normalized = DdpmSample(eps, model.diffusion(), dim, k, rng,
                                  model.spec().x0_clip);
    } else {
      out.normalized = DdimSample(eps, model.diffusion(), dim, k, config.steps,
                                  rng, model.spec().x0_clip);
    }
  }
  out.normalized = out.normalized.cwiseProduct(mask);
  for (int j = 0; j < k; ++j) {
    out.world.push_back(ToWorld(out.normalized.col(j), scene, model.spec().run.H2));
  }
  return out;
}

net::Matrix DirectConsistencySample(const PlannerModel& model,
                                    const PreparedScene& scene, int K,
                                    int steps, Rng& rng) {
  const net::Matrix y = Replicate(model.Encode(scene), K);
  const net::Matrix mask = Replicate(scene.mask, K);
  const DenoiseFn f = MakeDenoiseFn(model, y, mask);
  return ConsistencySample(f, model.schedule(), model.traj_dim(), K, steps, rng)
      .cwiseProduct(mask);
}

void ParallelFor(int n, int jobs, const std::function<void(int)>& fn) {
  if (jobs <= 1 || n <= 1) {
    for (int i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<int> next{0};
  std::exception_ptr error;
  std::mutex error_mu;
  std::vector<std::thread> threads;
  const int count = std::min(jobs, n);
  for (int t = 0; t < count; ++t) {
    threads.emplace_back([&] {
      for (int i = next++; i < n; i = next++) {
        try {
          fn(i);
        } catch (...) {
          std::lock_guard<std::mutex> lock(error_mu);
          if (!error) error = std::current_exception();
        }
      }
    });
  }
  for (auto& th : threads) th.join();
  if (error) std::rethrow_exception(error);
}

EvalResult Evaluate(const PlannerModel& model,
                    std::span<const PreparedScene> scenes,
                    const EvalConfig& config) {
  const int n = static_cast<int>(scenes.size());
  EvalResult result;
  result.scenes.resize(n);
  const auto start = std::chrono::steady_clock::now();
  ParallelFor(n, config.jobs, [&](int i) {
    Rng rng(config.seed, static_cast<std::uint64_t>(i));
    result.scenes[i] = SampleScene(model, scenes[i], config.sampler, rng);
  });
  const double seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start)
          .count();
  MetricsAccumulator acc(model.spec().run.dt);
  for (int i = 0; i < n; ++i) {
    const std::vector<Vec2> gt = scenes[i].gt_world.Row(0);
    acc.AddScene(result.scenes[i].world, gt, scenes[i].ego.spec);
  }
  result.report = acc.Report(config.method, config.sampler.steps,
                             n > 0 ? seconds / n : 0.0);
  return result;
}

std::vector<std::array<double, kNumConstraints>> AlphaGrid(
    std::span<const double> values) {
  std::vector<std::array<double, kNumConstraints>> grid;
  for (double g : values) {
    for (double a : values) {
      for (double w : values) grid.push_back({g, a, w});
    }
  }
  return grid;
}

AblationResult RunAblation(const PlannerModel& model,
                           std::span<const PreparedScene> scenes,
                           const AblationConfig& config) {
  if (config.grad_steps.empty()) {
    throw ValidationError("grad-steps", "need at least one setting");
  }
  std::vector<std::array<double, kNumConstraints>> alphas =
      config.sweep ? AlphaGrid(config.alpha_values)
                   : std::vector<std::array<double, kNumConstraints>>{
                         config.alpha};
  if (config.sweep) {
    for (auto& a : alphas) {
      for (int j = 0; j < kNumConstraints; ++j) a[j] *= config.alpha_scale[j];
    }
  }
  const GuidanceStrategy strategies[2] = {GuidanceStrategy::kVanilla,
                                          GuidanceStrategy::kAlternating};
  struct Setting {
    GuidanceStrategy strategy;
    int grad_steps;
    std::array<double, kNumConstraints> alpha;
  };
  std::vector<Setting> settings;
  for (GuidanceStrategy s : strategies) {
    for (int g : config.grad_steps) {
      for (const auto& a : alphas) settings.push_back({s, g, a});
    }
  }
  const int curve_steps = config.grad_steps[config.grad_steps.size() / 2];

  const int n = static_cast<int>(scenes.size());
  const int dim = model.traj_dim();
  const int k = config.K;
  // per_scene[i][s]: summed violations over the K samples of scene i.
  std::vector<std::vector<ConstraintValues>> per_scene(n);
  std::vector<std::array<std::vector<ViolationCurve>, 2>> scene_curves(n);

  ParallelFor(n, config.jobs, [&](int i) {
    const PreparedScene& scene = scenes[i];
    const net::Matrix y = Replicate(model.Encode(scene), k);
    const net::Matrix mask = Replicate(scene.mask, k);
    const DenoiseFn f = MakeDenoiseFn(model, y, mask);
    Rng rng(config.seed, static_cast<std::uint64_t>(i));
    const auto noise = DrawSamplingNoise(dim, k, config.steps, rng);
    const auto reference = ReferencePredictions(f, model.schedule(), noise);
    const std::vector<EgoFrame> frames(
        k, GuidanceFrame(model, scene, config.goal_basis_terms));
    auto& out = per_scene[i];
    for (const Setting& s : settings) {
      GuidanceConfig gc;
      gc.strategy = s.strategy;
      gc.alpha = s.alpha;
      gc.n_grad_steps = s.grad_steps;
      gc.goal_basis_terms = config.goal_basis_terms;
      const GuidedSampleResult g =
          GuidedSample(f, model.schedule(), noise, frames, gc, &reference);
      ConstraintValues sum;
      for (int j = 0; j < k; ++j) {
        const std::vector<Vec2> ego = DecodeEgo(
            {g.samples.col(j).data(), static_cast<std::size_t>(dim)}, scene.ego);
        const ConstraintValues v = EvalConstraints(ego, scene.ego.spec, scene.ego.dt);
        sum.goal += v.goal;
        sum.accel += v.accel;
        sum.omega += v.omega;
      }
      out.push_back(sum);
    }
    for (int si = 0; si < 2; ++si) {
      GuidanceConfig gc;
      gc.strategy = strategies[si];
      gc.alpha = config.alpha;
      gc.n_grad_steps = curve_steps;
      gc.goal_basis_terms = config.goal_basis_terms;
      gc.record_curve = true;
      GuidedSampleResult g =
          GuidedSample(f, model.schedule(), noise, frames, gc, &reference);
      scene_curves[i][si] = std::move(g.curves);
    }
  });

  AblationResult result;
  const double count = static_cast<double>(n) * k;
  for (std::size_t s = 0; s < settings.size(); ++s) {
    AblationRow row;
    row.strategy = settings[s].strategy;
    row.grad_steps = settings[s].grad_steps;
    row.alpha = settings[s].alpha;
    for (int i = 0; i < n; ++i) {
      row.violations.goal += per_scene[i][s].goal;
      row.violations.accel += per_scene[i][s].accel;
      row.violations.omega += per_scene[i][s].omega;
    }
    if (count > 0) {
      row.violations.goal /= count;
      row.violations.accel /= count;
      row.violations.omega /= count;
    }
    result.rows.push_back(row);
  }
  for (int si = 0; si < 2; ++si) {
    std::vector<ViolationCurve> all;
    for (int i = 0; i < n; ++i) {
      for (auto& c : scene_curves[i][si]) all.push_back(c);
    }
    if (!all.empty()) {
      result.curves[si] = MeanCurve(all);
      double total = 0.0;
      for (const auto& c : all) total += AccelStepVariance(c);
      result.accel_step_variance[si] = total / all.size();
    }
  }
  return result;
}

void WriteAblationCsv(std::ostream& out, std::span<const AblationRow> rows) {
  out << "strategy,grad_steps,alpha_goal,alpha_acc,alpha_omega,c_goal,c_acc,"
         "c_omega,sum\n";
  for (const auto& r : rows) {
    out << GuidanceStrategyName(r.strategy) << ',' << r.grad_steps << ','
        << FormatDouble(r.alpha[0]) << ',' << FormatDouble(r.alpha[1]) << ','
        << FormatDouble(r.alpha[2]) << ',' << FormatDouble(r.violations.goal)
        << ',' << FormatDouble(r.violations.accel) << ','
        << FormatDouble(r.violations.omega) << ','
        << FormatDouble(r.violations.Sum()) << '\n';
  }
}

ViolationCurve MeanCurve(std::span<const ViolationCurve> curves) {
  if (curves.empty()) return {};
  const std::size_t len = curves.front().size();
  ViolationCurve mean(len);
  for (const auto& c : curves) {
    if (c.size() != len) throw ShapeError("MeanCurve: curve lengths differ");
    for (std::size_t k = 0; k < len; ++k) {
      mean[k].goal += c[k].goal;
      mean[k].accel += c[k].accel;
      mean[k].omega += c[k].omega;
    }
  }
  const double n = static_cast<double>(curves.size());
  for (auto& v : mean) {
    v.goal /= n;
    v.accel /= n;
    v.omega /= n;
  }
  return mean;
}

double AccelStepVariance(const ViolationCurve& curve) {
  if (curve.size() < 3) return 0.0;
  std::vector<double> d;
  for (std::size_t k = 1; k < curve.size(); ++k) {
    d.push_back(curve[k].accel - curve[k - 1].accel);
  }
  const double mean = std::accumulate(d.begin(), d.end(), 0.0) / d.size();
  double var = 0.0;
  for (double v : d) var += (v - mean) * (v - mean);
  return var / d.size();
}

}  // namespace cmplan
