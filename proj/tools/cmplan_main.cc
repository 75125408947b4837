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

// Command-line front end: dataset generation, training, sampling,
// evaluation, guidance ablation and plotting.

#include <chrono>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "cmplan/config.h"
#include "cmplan/dataset_io.h"
#include "cmplan/error.h"
#include "cmplan/workflows.h"

namespace cmplan {
namespace {

using json = nlohmann::json;

constexpr int kExitValidation = 2;
constexpr int kExitIo = 3;

std::string Hex(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

void WriteText(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open " + path + " for writing");
  out << text;
  if (!out) throw IoError("write failed: " + path);
}

std::string ReadText(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

void WriteManifest(const std::string& path, const std::string& command,
                   const std::vector<std::string>& argv,
                   const RunConfig& config, std::uint64_t seed,
                   const json& extra) {
  json m = {{"command", command},
            {"version", kVersion},
            {"seed", seed},
            {"config_hash", Hex(ConfigHash(config))},
            {"config", FormatConfig(config)},
            {"argv", argv}};
  for (auto it = extra.begin(); it != extra.end(); ++it) m[it.key()] = it.value();
  WriteText(path, m.dump(2) + "\n");
}

std::vector<double> ParseDoubles(const std::string& text, const char* field) {
  std::vector<double> out;
  std::stringstream s(text);
  std::string item;
  while (std::getline(s, item, ',')) {
    try {
      std::size_t used = 0;
      out.push_back(std::stod(item, &used));
      if (used != item.size()) throw std::invalid_argument(item);
    } catch (const std::exception&) {
      throw ValidationError(field, "not a number: '" + item + "'");
    }
  }
  return out;
}

std::vector<int> ParseInts(const std::string& text, const char* field) {
  std::vector<int> out;
  for (double v : ParseDoubles(text, field)) {
    if (v != static_cast<int>(v) || v < 1) {
      throw ValidationError(field, "expected positive integers");
    }
    out.push_back(static_cast<int>(v));
  }
  return out;
}

std::array<double, kNumConstraints> ParseAlpha(const std::string& text) {
  const auto v = ParseDoubles(text, "alpha");
  if (v.size() != kNumConstraints) {
    throw ValidationError("alpha", "expected three comma-separated values");
  }
  return {v[0], v[1], v[2]};
}

// Scenes [offset, offset + limit) of a dataset, prepared for `model`.
std::vector<PreparedScene> PrepareSlice(const PlannerModel& model,
                                        const std::string& data, int offset,
                                        int limit) {
  const std::vector<Scenario> all = ReadDataset(data);
  if (offset < 0 || offset >= static_cast<int>(all.size())) {
    throw ValidationError("offset", "outside the dataset");
  }
  const int end = limit > 0 ? std::min<int>(all.size(), offset + limit)
                            : static_cast<int>(all.size());
  std::vector<PreparedScene> out;
  for (int i = offset; i < end; ++i) {
    out.push_back(PrepareScene(all[i], model.spec().stats, model.spec().run,
                               model.spec().encoder));
  }
  return out;
}

struct Common {
  std::vector<std::string> argv;
};

// ---- gen-data ----

struct GenArgs {
  int n = 0;
  std::uint64_t seed = 0;
  std::string out;
  std::string config;
};

int RunGenData(const GenArgs& a, const Common& c) {
  RunConfig config = a.config.empty() ? RunConfig{} : LoadConfig(a.config);
  config.seed = a.seed;
  const std::vector<Scenario> scenes = GenerateDataset(a.n, a.seed, config);
  const DatasetStats stats = FitStats(scenes);
  WriteDataset(a.out, scenes);
  WriteStats(StatsPathFor(a.out), stats, scenes.size());
  WriteManifest(a.out + ".manifest.json", "gen-data", c.argv, config, a.seed,
                {{"outputs", {a.out, StatsPathFor(a.out)}}, {"n", a.n}});
  std::cout << "wrote " << scenes.size() << " scenes to " << a.out
            << " (std " << FormatDouble(stats.std.x) << ", "
            << FormatDouble(stats.std.y) << ")\n";
  return 0;
}

// ---- train ----

struct TrainArgs {
  std::string model = "consistency";
  std::string data;
  std::string out;
  std::string config;
  std::string resume;
  std::string log;
  int epochs = 10;
  int batch = 32;
  double lr = 8e-5;
  double loss_weight = 1.0;
  double aux_weight = 0.1;
  int ddpm_steps = 10;
  int width = 256;
  int blocks = 4;
  int basis_terms = 12;
  bool no_linear_skip = false;
  std::uint64_t seed = 0;
};

int RunTrain(const TrainArgs& a, const Common& c) {
  const std::vector<Scenario> scenes = ReadDataset(a.data);
  std::size_t stats_count = 0;
  const DatasetStats stats = ReadStats(StatsPathFor(a.data), &stats_count);
  if (stats_count != scenes.size()) {
    throw ValidationError("data", "stats sidecar describes " +
                                      std::to_string(stats_count) +
                                      " scenes, dataset has " +
                                      std::to_string(scenes.size()));
  }
  net::Adam adam;
  PlannerModel model = [&] {
    if (!a.resume.empty()) return LoadModel(a.resume, &adam);
    ModelSpec spec;
    spec.kind = ParseModelKind(a.model);
    spec.run = a.config.empty() ? RunConfig{} : LoadConfig(a.config);
    spec.run.seed = a.seed;
    spec.width = a.width;
    spec.blocks = a.blocks;
    spec.basis_terms = a.basis_terms;
    spec.linear_skip = !a.no_linear_skip;
    spec.ddpm_steps = a.ddpm_steps;
    spec.stats = stats;
    PlannerModel m(spec);
    m.Init(a.seed);
    return m;
  }();
  if (!a.resume.empty() && !(model.spec().stats == stats)) {
    throw ValidationError("data", "dataset stats differ from the checkpoint's");
  }
  std::vector<PreparedScene> prepared;
  prepared.reserve(scenes.size());
  for (const auto& s : scenes) {
    prepared.push_back(PrepareScene(s, stats, model.spec().run,
                                    model.spec().encoder));
  }
  if (a.resume.empty()) model.set_x0_clip(DataBound(prepared));
  TrainConfig tc;
  tc.epochs = a.epochs;
  tc.batch = a.batch;
  tc.lr = a.lr;
  tc.loss_weight = a.loss_weight;
  tc.aux_weight = a.aux_weight;
  tc.seed = a.resume.empty() ? a.seed : model.train_seed;

  const std::string log_path = a.log.empty() ? a.out + ".loss.csv" : a.log;
  std::ofstream log(log_path, a.resume.empty() ? std::ios::trunc : std::ios::app);
  if (!log) throw IoError("cannot open " + log_path);
  if (a.resume.empty()) log << "epoch,loss,generative,aux\n";
  const auto start = std::chrono::steady_clock::now();
  Train(model, adam, prepared, tc, [&](const EpochLog& e) {
    log << e.epoch << ',' << FormatDouble(e.loss) << ','
        << FormatDouble(e.generative) << ',' << FormatDouble(e.aux) << '\n';
    log.flush();
    std::cout << "epoch " << e.epoch << " loss " << e.loss << " (gen "
              << e.generative << ", aux " << e.aux << ")\n";
  });
  SaveModel(a.out, model, &adam);
  const double seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start)
          .count();
  WriteManifest(a.out + ".manifest.json", "train", c.argv, model.spec().run,
                tc.seed,
                {{"outputs", {a.out, log_path}},
                 {"model", std::string(ModelKindName(model.spec().kind))},
                 {"epochs_done", model.epochs_done},
                 {"wall_time_s", seconds}});
  std::cout << "saved " << a.out << " after epoch " << model.epochs_done
            << " (" << seconds << " s)\n";
  return 0;
}

// ---- sampling flags shared by sample and evaluate ----

struct SampleArgs {
  std::string ckpt;
  std::string data;
  std::string out;
  std::string curves;
  std::string sampler;
  std::string guidance = "none";
  std::string alpha;
  int grad_steps = 0;
  int goal_terms = 4;
  bool final_only = false;
  int steps = 0;
  int k = 0;
  std::uint64_t seed = 0;
  int index = 0;
  int offset = 0;
  int limit = 0;
  int jobs = 1;
  std::string method;
};

SamplerConfig MakeSamplerConfig(const PlannerModel& model, const SampleArgs& a) {
  SamplerConfig sc;
  const bool consistency = model.spec().kind == ModelKind::kConsistency;
  sc.sampler = !a.sampler.empty() ? ParseSamplerKind(a.sampler)
               : consistency      ? SamplerKind::kConsistency
                                  : SamplerKind::kDdpm;
  sc.steps = a.steps > 0 ? a.steps
             : consistency ? model.spec().run.T - 1
                           : model.diffusion().n_steps;
  sc.K = a.k > 0 ? a.k : model.spec().run.K;
  sc.guidance.strategy = ParseGuidanceStrategy(a.guidance);
  sc.guidance.alpha = a.alpha.empty() ? model.spec().run.alpha : ParseAlpha(a.alpha);
  sc.guidance.n_grad_steps =
      a.grad_steps > 0 ? a.grad_steps : model.spec().run.n_grad_steps;
  sc.guidance.every_step = !a.final_only;
  sc.guidance.goal_basis_terms = a.goal_terms;
  sc.guidance.record_curve = !a.curves.empty();
  return sc;
}

void WriteMeanCurve(const std::string& path,
                    const std::vector<ViolationCurve>& curves) {
  std::ostringstream s;
  WriteCurveCsv(s, MeanCurve(curves));
  WriteText(path, s.str());
}

int RunSample(const SampleArgs& a, const Common& c) {
  const PlannerModel model = LoadModel(a.ckpt);
  const auto scenes = PrepareSlice(model, a.data, a.index, 1);
  const SamplerConfig sc = MakeSamplerConfig(model, a);
  Rng rng(a.seed, static_cast<std::uint64_t>(a.index));
  const SceneSamples s = SampleScene(model, scenes[0], sc, rng);
  std::ostringstream csv;
  csv << "sample,agent,t,x,y\n";
  for (std::size_t k = 0; k < s.world.size(); ++k) {
    const TrajectorySet& w = s.world[k];
    for (int agent = 0; agent < w.agents(); ++agent) {
      if (!w.valid(agent)) continue;
      for (int t = 0; t < w.horizon(); ++t) {
        const Vec2 p = w.at(agent, t);
        csv << k << ',' << agent << ',' << t << ',' << FormatDouble(p.x) << ','
            << FormatDouble(p.y) << '\n';
      }
    }
  }
  WriteText(a.out, csv.str());
  json outputs = {a.out};
  if (!a.curves.empty()) {
    WriteMeanCurve(a.curves, s.curves);
    outputs.push_back(a.curves);
  }
  WriteManifest(a.out + ".manifest.json", "sample", c.argv, model.spec().run,
                a.seed, {{"outputs", outputs}});
  if (s.aborted) std::cerr << "warning: guidance hit a non-finite gradient\n";
  std::cout << "wrote " << s.world.size() << " samples to " << a.out << "\n";
  return 0;
}

int RunEvaluate(const SampleArgs& a, const Common& c) {
  const PlannerModel model = LoadModel(a.ckpt);
  const auto scenes = PrepareSlice(model, a.data, a.offset, a.limit);
  EvalConfig ec;
  ec.sampler = MakeSamplerConfig(model, a);
  ec.seed = a.seed;
  ec.jobs = a.jobs;
  ec.method = !a.method.empty()
                  ? a.method
                  : std::string(SamplerKindName(ec.sampler.sampler)) + "-" +
                        std::to_string(ec.sampler.steps) + "-" + a.guidance;
  const EvalResult r = Evaluate(model, scenes, ec);
  const std::vector<MetricsReport> rows = {r.report};
  std::ostringstream csv;
  WriteMetricsCsv(csv, rows);
  WriteText(a.out, csv.str());
  json outputs = {a.out};
  if (!a.curves.empty()) {
    std::vector<ViolationCurve> all;
    for (const auto& s : r.scenes) all.insert(all.end(), s.curves.begin(), s.curves.end());
    WriteMeanCurve(a.curves, all);
    outputs.push_back(a.curves);
  }
  WriteManifest(a.out + ".manifest.json", "evaluate", c.argv,
                model.spec().run, a.seed,
                {{"outputs", outputs},
                 {"scenes", scenes.size()},
                 {"wall_time_per_scene_s", r.report.wall_time}});
  WriteMetricsTable(std::cout, rows);
  return 0;
}

// ---- ablate-guidance ----

struct AblateArgs {
  std::string ckpt;
  std::string data;
  std::string out;
  std::string curves_prefix;
  std::string grad_steps = "50,100,150";
  std::string alpha_values = "1e-4,1e-5,1e-6";
  std::string alpha_scale;
  std::string alpha;
  bool sweep = false;
  int k = 0;
  int steps = 0;
  std::uint64_t seed = 0;
  int offset = 0;
  int limit = 0;
  int jobs = 1;
};

int RunAblate(const AblateArgs& a, const Common& c) {
  const PlannerModel model = LoadModel(a.ckpt);
  if (model.spec().kind != ModelKind::kConsistency) {
    throw ValidationError("ckpt", "guidance needs a consistency checkpoint");
  }
  const auto scenes = PrepareSlice(model, a.data, a.offset, a.limit);
  AblationConfig ac;
  ac.grad_steps = ParseInts(a.grad_steps, "grad-steps");
  ac.alpha_values = ParseDoubles(a.alpha_values, "alpha-values");
  ac.sweep = a.sweep;
  if (!a.alpha_scale.empty()) ac.alpha_scale = ParseAlpha(a.alpha_scale);
  ac.alpha = a.alpha.empty() ? model.spec().run.alpha : ParseAlpha(a.alpha);
  ac.K = a.k > 0 ? a.k : model.spec().run.K;
  ac.steps = a.steps > 0 ? a.steps : model.spec().run.T - 1;
  ac.seed = a.seed;
  ac.jobs = a.jobs;
  const AblationResult r = RunAblation(model, scenes, ac);
  std::ostringstream csv;
  WriteAblationCsv(csv, r.rows);
  WriteText(a.out, csv.str());
  json outputs = {a.out};
  const std::string prefix = a.curves_prefix.empty() ? a.out : a.curves_prefix;
  for (int s = 0; s < 2; ++s) {
    const std::string path =
        prefix + (s == 0 ? ".vanilla" : ".alternating") + ".curve.csv";
    std::ostringstream cs;
    WriteCurveCsv(cs, r.curves[s]);
    WriteText(path, cs.str());
    outputs.push_back(path);
  }
  WriteManifest(a.out + ".manifest.json", "ablate-guidance", c.argv,
                model.spec().run, a.seed,
                {{"outputs", outputs},
                 {"scenes", scenes.size()},
                 {"accel_step_variance",
                  {{"vanilla", r.accel_step_variance[0]},
                   {"alternating", r.accel_step_variance[1]}}}});

  std::printf("%-12s %6s %12s %12s %12s %12s\n", "strategy", "steps", "c_goal",
              "c_acc", "c_omega", "sum");
  for (GuidanceStrategy st :
       {GuidanceStrategy::kVanilla, GuidanceStrategy::kAlternating}) {
    for (int g : ac.grad_steps) {
      ConstraintValues mean;
      int n = 0;
      for (const auto& row : r.rows) {
        if (row.strategy != st || row.grad_steps != g) continue;
        mean.goal += row.violations.goal;
        mean.accel += row.violations.accel;
        mean.omega += row.violations.omega;
        ++n;
      }
      std::printf("%-12s %6d %12.5f %12.5f %12.5f %12.5f\n",
                  std::string(GuidanceStrategyName(st)).c_str(), g,
                  mean.goal / n, mean.accel / n, mean.omega / n,
                  mean.Sum() / n);
    }
  }
  std::printf("c_acc step variance per sample: vanilla %.4g, alternating %.4g\n",
              r.accel_step_variance[0], r.accel_step_variance[1]);
  return 0;
}

// ---- plot ----

struct PlotArgs {
  std::string in;
  std::string out;
};

int RunPlot(const PlotArgs& a, const Common& c) {
  WriteText(a.out, CsvToSvg(ReadText(a.in)));
  WriteManifest(a.out + ".manifest.json", "plot", c.argv, RunConfig{}, 0,
                {{"outputs", {a.out}}, {"input", a.in}});
  std::cout << "wrote " << a.out << "\n";
  return 0;
}

void AddSampleFlags(CLI::App* cmd, SampleArgs& a) {
  cmd->add_option("--ckpt", a.ckpt, "Checkpoint file")->required();
  cmd->add_option("--data", a.data, "Dataset file")->required();
  cmd->add_option("--out", a.out, "Output CSV")->required();
  cmd->add_option("--guidance", a.guidance, "none|vanilla|alternating");
  cmd->add_option("--sampler", a.sampler,
                  "consistency|ancestral|ddim (default from the checkpoint)");
  cmd->add_option("--steps", a.steps, "Sampling steps");
  cmd->add_option("--k", a.k, "Samples per scene");
  cmd->add_option("--seed", a.seed, "Sampling seed");
  cmd->add_option("--alpha", a.alpha, "Guidance step sizes goal,acc,omega");
  cmd->add_option("--grad-steps", a.grad_steps, "Guidance steps per sampling step");
  cmd->add_option("--goal-terms", a.goal_terms,
                  "Basis terms for the goal gradient (0 = all)");
  cmd->add_flag("--final-step-only", a.final_only,
                "Guide only the last clean prediction");
  cmd->add_option("--curves", a.curves, "Write the mean final-step curve CSV");
}

int Main(int argc, char** argv) {
  CLI::App app{"Constrained trajectory planning with consistency models"};
  app.require_subcommand(1);
  app.set_version_flag("--version", kVersion);
  Common common;
  for (int i = 0; i < argc; ++i) common.argv.emplace_back(argv[i]);

  GenArgs gen;
  auto* gen_cmd = app.add_subcommand("gen-data", "Generate a synthetic dataset");
  gen_cmd->add_option("--n", gen.n, "Number of scenes")->required();
  gen_cmd->add_option("--seed", gen.seed, "Generator seed");
  gen_cmd->add_option("--out", gen.out, "Dataset file")->required();
  gen_cmd->add_option("--config", gen.config, "Run config file");

  TrainArgs train;
  auto* train_cmd = app.add_subcommand("train", "Train a model");
  train_cmd->add_option("--model", train.model, "consistency|ddpm");
  train_cmd->add_option("--data", train.data, "Dataset file")->required();
  train_cmd->add_option("--out", train.out, "Checkpoint file")->required();
  train_cmd->add_option("--epochs", train.epochs, "Total epochs");
  train_cmd->add_option("--batch", train.batch, "Batch size");
  train_cmd->add_option("--lr", train.lr, "Adam learning rate");
  train_cmd->add_option("--loss-weight", train.loss_weight,
                        "Weight of the generative loss");
  train_cmd->add_option("--aux-weight", train.aux_weight,
                        "Weight of the auxiliary dense loss");
  train_cmd->add_option("--ddpm-steps", train.ddpm_steps,
                        "Diffusion steps for --model ddpm");
  train_cmd->add_option("--width", train.width, "Denoiser width");
  train_cmd->add_option("--blocks", train.blocks, "Residual blocks");
  train_cmd->add_option("--basis-terms", train.basis_terms,
                        "Polynomial terms per coordinate (0 = unrestricted)");
  train_cmd->add_flag("--no-linear-skip", train.no_linear_skip,
                      "Drop the gated linear skip from the denoiser");
  train_cmd->add_option("--seed", train.seed, "Initialization and noise seed");
  train_cmd->add_option("--resume", train.resume, "Continue from a checkpoint");
  train_cmd->add_option("--log", train.log, "Loss CSV (default <out>.loss.csv)");
  train_cmd->add_option("--config", train.config, "Run config file");

  SampleArgs sample;
  auto* sample_cmd = app.add_subcommand("sample", "Sample plans for one scene");
  AddSampleFlags(sample_cmd, sample);
  sample_cmd->add_option("--index", sample.index, "Scene index");

  SampleArgs eval;
  auto* eval_cmd = app.add_subcommand("evaluate", "Evaluate a checkpoint");
  AddSampleFlags(eval_cmd, eval);
  eval_cmd->add_option("--offset", eval.offset, "First scene");
  eval_cmd->add_option("--limit", eval.limit, "Number of scenes (0 = all)");
  eval_cmd->add_option("--jobs", eval.jobs, "Worker threads");
  eval_cmd->add_option("--method", eval.method, "Row label");

  AblateArgs ablate;
  auto* ablate_cmd =
      app.add_subcommand("ablate-guidance", "Compare guidance strategies");
  ablate_cmd->add_option("--ckpt", ablate.ckpt, "Checkpoint file")->required();
  ablate_cmd->add_option("--data", ablate.data, "Dataset file")->required();
  ablate_cmd->add_option("--out", ablate.out, "Output CSV")->required();
  ablate_cmd->add_option("--grad-steps", ablate.grad_steps,
                         "Comma-separated gradient-step settings");
  ablate_cmd->add_flag("--sweep-alpha", ablate.sweep,
                       "Sweep all step-size combinations");
  ablate_cmd->add_option("--alpha-values", ablate.alpha_values,
                         "Values swept per constraint");
  ablate_cmd->add_option("--alpha-scale", ablate.alpha_scale,
                         "Per-constraint factors on the swept values");
  ablate_cmd->add_option("--alpha", ablate.alpha,
                         "Step sizes without a sweep, and for the curves");
  ablate_cmd->add_option("--curves-prefix", ablate.curves_prefix,
                         "Prefix for the per-strategy curve CSVs");
  ablate_cmd->add_option("--k", ablate.k, "Samples per scene");
  ablate_cmd->add_option("--steps", ablate.steps, "Sampling steps");
  ablate_cmd->add_option("--seed", ablate.seed, "Sampling seed");
  ablate_cmd->add_option("--offset", ablate.offset, "First scene");
  ablate_cmd->add_option("--limit", ablate.limit, "Number of scenes (0 = all)");
  ablate_cmd->add_option("--jobs", ablate.jobs, "Worker threads");

  PlotArgs plot;
  auto* plot_cmd = app.add_subcommand("plot", "Render a CSV as SVG");
  plot_cmd->add_option("--in", plot.in, "Curve or metrics CSV")->required();
  plot_cmd->add_option("--out", plot.out, "SVG file")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitValidation;
  }

  try {
    if (*gen_cmd) return RunGenData(gen, common);
    if (*train_cmd) return RunTrain(train, common);
    if (*sample_cmd) return RunSample(sample, common);
    if (*eval_cmd) return RunEvaluate(eval, common);
    if (*ablate_cmd) return RunAblate(ablate, common);
    if (*plot_cmd) return RunPlot(plot, common);
  } catch (const ValidationError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitValidation;
  } catch (const ParseError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitValidation;
  } catch (const IoError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitIo;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}

}  // namespace
}  // namespace cmplan

int main(int argc, char** argv) { return cmplan::Main(argc, argv); }
