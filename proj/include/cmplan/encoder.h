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

#ifndef CMPLAN_ENCODER_H_
#define CMPLAN_ENCODER_H_

#include <vector>

#include "cmplan/datagen.h"
#include "cmplan/net.h"
#include "cmplan/types.h"

namespace cmplan {

struct EncoderConfig {
  int history_steps = 11;  // H1 + 1
  int horizon = 80;        // H2, for the auxiliary head
  int agent_slots = 4;
  int map_slots = 8;
  int polyline_points = 20;
  int hidden = 64;
  int ego_dim = 32;
  int agent_dim = 32;
  int map_dim = 32;
  int goal_dim = 16;
  int ref_dim = 16;

  int cond_dim() const {
    return ego_dim + agent_dim + map_dim + goal_dim + ref_dim;
  }
  friend bool operator==(const EncoderConfig&, const EncoderConfig&) = default;
};

// Per-step history features: x, y (scaled), cos/sin of relative heading,
// speed (scaled), valid.
inline constexpr int kHistoryFeatures = 6;
// Per-point map features: x, y (scaled), one-hot type, valid.
inline constexpr int kMapPointFeatures = 2 + kNumPolylineTypes + 1;
// Per-slot reference features: x, y (scaled), cos/sin heading, valid.
inline constexpr int kRefFeatures = 5;

// Encoder input, everything expressed in the ego's t0 frame. Masked entries
// are zero.
struct SceneFeatures {
  net::Vector ego_history;        // history_steps * kHistoryFeatures
  net::Matrix agent_history;      // same rows, one column per agent slot
  std::vector<bool> agent_valid;  // agent_slots
  net::Matrix polylines;          // polyline_points * kMapPointFeatures rows
  std::vector<bool> map_valid;    // map_slots
  net::Vector goal;               // standardized local goal
  net::Vector refs;               // kMaxSurrounding * kRefFeatures
};

SceneFeatures MakeSceneFeatures(const Scenario& scenario,
                                const SceneFrame& frame,
                                const DatasetStats& stats,
                                const EncoderConfig& config);

// Pooled-MLP scene encoder. The output y concatenates ego-history, pooled
// agent-history, pooled map, goal and reference-state embeddings. Agent and
// map slots that are masked contribute learned null embeddings.
class Encoder {
 public:
  struct Tape {
    net::Mlp::Tape ego;
    net::Mlp::Tape agents;
    net::Mlp::Tape map;
    net::Matrix goal_in;
    net::Matrix ref_in;
    std::vector<bool> agent_valid;
    std::vector<bool> map_valid;
    bool recorded = false;
  };

  Encoder() = default;
  explicit Encoder(const EncoderConfig& config);

  void Init(Rng& rng);
  const EncoderConfig& config() const { return config_; }
  int cond_dim() const { return config_.cond_dim(); }

  net::Vector Encode(const SceneFeatures& features, Tape* tape) const;
  // Accumulates parameter gradients for dL/dy.
  void Backward(const Tape& tape, const net::Vector& dy);

  // Auxiliary dense-prediction loss: mean squared error of a linear head
  // from y to the ego's standardized local future (2 * horizon values).
  // Accumulates head gradients scaled by `weight` and returns the unweighted
  // loss; `dy` (optional) receives weight * dLoss/dy.
  double AuxDenseLoss(const net::Vector& y, const net::Vector& target,
                      double weight, net::Vector* dy);

  void ZeroGrad();
  void Collect(std::vector<net::ParamView>& out);
  net::Linear& aux_head() { return aux_head_; }

 private:
  EncoderConfig config_;
  net::Mlp ego_mlp_;
  net::Mlp agent_mlp_;
  net::Mlp map_mlp_;
  net::Linear goal_proj_;
  net::Linear ref_proj_;
  net::Vector agent_null_;
  net::Vector agent_null_grad_;
  net::Vector map_null_;
  net::Vector map_null_grad_;
  net::Linear aux_head_;
};

}  // namespace cmplan

#endif  // CMPLAN_ENCODER_H_
