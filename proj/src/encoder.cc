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

#include "cmplan/encoder.h"

#include <cmath>

#include "cmplan/error.h"

namespace cmplan {
namespace {

constexpr double kPositionScale = 0.05;  // 1 / 20 m
constexpr double kSpeedScale = 0.1;

void FillTrack(const Track& track, const Pose2& frame, int steps,
               double* out) {
  for (int k = 0; k < steps && k < static_cast<int>(track.size()); ++k) {
    const AgentState& s = track[k];
    double* f = out + k * kHistoryFeatures;
    if (!s.valid) continue;
    const Vec2 p = frame.ToLocal(s.position());
    const double rel = s.heading - frame.heading;
    f[0] = kPositionScale * p.x;
    f[1] = kPositionScale * p.y;
    f[2] = std::cos(rel);
    f[3] = std::sin(rel);
    f[4] = kSpeedScale * s.speed;
    f[5] = 1.0;
  }
}

// Mean over slots of the slot embedding, or of `null` for masked slots.
net::Vector PoolSlots(const net::Matrix& embedded,
                      const std::vector<bool>& valid,
                      const net::Vector& null) {
  net::Vector sum = net::Vector::Zero(null.size());
  for (std::size_t s = 0; s < valid.size(); ++s) {
    sum += valid[s] ? net::Vector(embedded.col(s)) : null;
  }
  return sum / static_cast<double>(valid.size());
}

std::span<double> Span(net::Vector& v) {
  return {v.data(), static_cast<std::size_t>(v.size())};
}

}  // namespace

SceneFeatures MakeSceneFeatures(const Scenario& scenario,
                                const SceneFrame& frame,
                                const DatasetStats& stats,
                                const EncoderConfig& config) {
  const Pose2& ego = frame.ref[0];
  const int hist_rows = config.history_steps * kHistoryFeatures;
  SceneFeatures f;

  f.ego_history = net::Vector::Zero(hist_rows);
  FillTrack(scenario.history.ego, ego, config.history_steps,
            f.ego_history.data());

  f.agent_history = net::Matrix::Zero(hist_rows, config.agent_slots);
  f.agent_valid.assign(config.agent_slots, false);
  const int n_others = static_cast<int>(scenario.history.others.size());
  for (int s = 0; s < config.agent_slots && s < n_others; ++s) {
    const Track& track = scenario.history.others[s];
    if (track.empty() || !track.front().valid) continue;
    f.agent_valid[s] = true;
    FillTrack(track, ego, config.history_steps, f.agent_history.col(s).data());
  }

  const int map_rows = config.polyline_points * kMapPointFeatures;
  f.polylines = net::Matrix::Zero(map_rows, config.map_slots);
  f.map_valid.assign(config.map_slots, false);
  const int n_lines = static_cast<int>(scenario.map.polylines.size());
  for (int s = 0; s < config.map_slots && s < n_lines; ++s) {
    const auto& points = scenario.map.polylines[s].points;
    int valid_points = 0;
    for (int k = 0; k < config.polyline_points &&
                    k < static_cast<int>(points.size());
         ++k) {
      const MapPoint& pt = points[k];
      if (!pt.valid) continue;
      ++valid_points;
      const Vec2 p = ego.ToLocal({pt.px, pt.py});
      double* out = f.polylines.col(s).data() + k * kMapPointFeatures;
      out[0] = kPositionScale * p.x;
      out[1] = kPositionScale * p.y;
      out[2 + static_cast<int>(pt.type)] = 1.0;
      out[kMapPointFeatures - 1] = 1.0;
    }
    f.map_valid[s] = valid_points >= 2;
    if (!f.map_valid[s]) f.polylines.col(s).setZero();
  }

  const Vec2 goal = stats.Standardize(ego.ToLocal(scenario.goal.position()));
  f.goal = net::Vector(2);
  f.goal << goal.x, goal.y;

  f.refs = net::Vector::Zero(kMaxSurrounding * kRefFeatures);
  for (int s = 0; s < kMaxSurrounding; ++s) {
    if (!frame.slot_valid[s + 1]) continue;
    const Pose2& r = frame.ref[s + 1];
    const Vec2 p = ego.ToLocal(r.position());
    const double rel = r.heading - ego.heading;
    double* out = f.refs.data() + s * kRefFeatures;
    out[0] = kPositionScale * p.x;
    out[1] = kPositionScale * p.y;
    out[2] = std::cos(rel);
    out[3] = std::sin(rel);
    out[4] = 1.0;
  }
  return f;
}

Encoder::Encoder(const EncoderConfig& config)
    : config_(config),
      ego_mlp_({config.history_steps * kHistoryFeatures, config.hidden,
                config.ego_dim},
               true),
      agent_mlp_({config.history_steps * kHistoryFeatures, config.hidden,
                  config.agent_dim},
                 true),
      map_mlp_({config.polyline_points * kMapPointFeatures, config.hidden,
                config.map_dim},
               true),
      goal_proj_(2, config.goal_dim),
      ref_proj_(kMaxSurrounding * kRefFeatures, config.ref_dim),
      agent_null_(net::Vector::Zero(config.agent_dim)),
      agent_null_grad_(net::Vector::Zero(config.agent_dim)),
      map_null_(net::Vector::Zero(config.map_dim)),
      map_null_grad_(net::Vector::Zero(config.map_dim)),
      aux_head_(config.cond_dim(), 2 * config.horizon) {}

void Encoder::Init(Rng& rng) {
  ego_mlp_.Init(rng);
  agent_mlp_.Init(rng);
  map_mlp_.Init(rng);
  goal_proj_.Init(rng);
  ref_proj_.Init(rng);
  aux_head_.Init(rng);
}

net::Vector Encoder::Encode(const SceneFeatures& f, Tape* tape) const {
  const EncoderConfig& c = config_;
  net::Vector y(c.cond_dim());
  int offset = 0;

  const net::Matrix ego =
      ego_mlp_.Forward(f.ego_history, tape ? &tape->ego : nullptr);
  y.segment(offset, c.ego_dim) = ego.col(0);
  offset += c.ego_dim;

  const net::Matrix agents =
      agent_mlp_.Forward(f.agent_history, tape ? &tape->agents : nullptr);
  y.segment(offset, c.agent_dim) = PoolSlots(agents, f.agent_valid, agent_null_);
  offset += c.agent_dim;

  const net::Matrix map =
      map_mlp_.Forward(f.polylines, tape ? &tape->map : nullptr);
  y.segment(offset, c.map_dim) = PoolSlots(map, f.map_valid, map_null_);
  offset += c.map_dim;

  y.segment(offset, c.goal_dim) = goal_proj_.Forward(f.goal).col(0);
  offset += c.goal_dim;
  y.segment(offset, c.ref_dim) = ref_proj_.Forward(f.refs).col(0);

  if (tape) {
    tape->goal_in = f.goal;
    tape->ref_in = f.refs;
    tape->agent_valid = f.agent_valid;
    tape->map_valid = f.map_valid;
    tape->recorded = true;
  }
  return y;
}

void Encoder::Backward(const Tape& tape, const net::Vector& dy) {
  if (!tape.recorded) throw Error("Encoder::Backward called before Encode");
  const EncoderConfig& c = config_;
  int offset = 0;

  ego_mlp_.Backward(tape.ego, dy.segment(offset, c.ego_dim));
  offset += c.ego_dim;

  {
    const net::Vector g = dy.segment(offset, c.agent_dim) /
                          static_cast<double>(tape.agent_valid.size());
    net::Matrix slots = net::Matrix::Zero(c.agent_dim, tape.agent_valid.size());
    for (std::size_t s = 0; s < tape.agent_valid.size(); ++s) {
      if (tape.agent_valid[s]) {
        slots.col(s) = g;
      } else {
        agent_null_grad_ += g;
      }
    }
    agent_mlp_.Backward(tape.agents, slots);
    offset += c.agent_dim;
  }
  {
    const net::Vector g = dy.segment(offset, c.map_dim) /
                          static_cast<double>(tape.map_valid.size());
    net::Matrix slots = net::Matrix::Zero(c.map_dim, tape.map_valid.size());
    for (std::size_t s = 0; s < tape.map_valid.size(); ++s) {
      if (tape.map_valid[s]) {
        slots.col(s) = g;
      } else {
        map_null_grad_ += g;
      }
    }
    map_mlp_.Backward(tape.map, slots);
    offset += c.map_dim;
  }
  goal_proj_.Backward(tape.goal_in, dy.segment(offset, c.goal_dim));
  offset += c.goal_dim;
  ref_proj_.Backward(tape.ref_in, dy.segment(offset, c.ref_dim));
}

double Encoder::AuxDenseLoss(const net::Vector& y, const net::Vector& target,
                             double weight, net::Vector* dy) {
  if (target.size() != aux_head_.out_dim()) {
    throw ShapeError("AuxDenseLoss: target size mismatch");
  }
  const net::Vector pred = aux_head_.Forward(y).col(0);
  const net::Vector diff = pred - target;
  const double n = static_cast<double>(diff.size());
  const double loss = diff.squaredNorm() / n;
  const net::Vector dpred = (2.0 * weight / n) * diff;
  const net::Matrix din = aux_head_.Backward(y, dpred);
  if (dy) *dy = din.col(0);
  return loss;
}

void Encoder::ZeroGrad() {
  ego_mlp_.ZeroGrad();
  agent_mlp_.ZeroGrad();
  map_mlp_.ZeroGrad();
  goal_proj_.ZeroGrad();
  ref_proj_.ZeroGrad();
  agent_null_grad_.setZero();
  map_null_grad_.setZero();
  aux_head_.ZeroGrad();
}

void Encoder::Collect(std::vector<net::ParamView>& out) {
  ego_mlp_.Collect(out);
  agent_mlp_.Collect(out);
  map_mlp_.Collect(out);
  goal_proj_.Collect(out);
  ref_proj_.Collect(out);
  out.push_back({Span(agent_null_), Span(agent_null_grad_)});
  out.push_back({Span(map_null_), Span(map_null_grad_)});
  aux_head_.Collect(out);
}

}  // namespace cmplan
