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

#ifndef CMPLAN_CHECKPOINT_H_
#define CMPLAN_CHECKPOINT_H_

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "cmplan/net.h"

namespace cmplan::net {

// Checkpoint layout (little-endian):
//   "CKPT" | u16 version
//   u32 blocks | u32 width | u32 input_dim | u32 output_dim
//   u32 metadata_bytes | metadata (UTF-8 JSON describing the rest of the
//   model: encoder sizes, model family, schedules, dataset stats)
//   u64 n | n x f64 parameters in declaration order
//   u8 has_optimizer | [i64 step | n x f64 first moment | n x f64 second]
inline constexpr std::uint16_t kCheckpointVersion = 1;

struct CheckpointHeader {
  std::uint32_t blocks = 0;
  std::uint32_t width = 0;
  std::uint32_t input_dim = 0;
  std::uint32_t output_dim = 0;
  std::string metadata;

  friend bool operator==(const CheckpointHeader&,
                         const CheckpointHeader&) = default;
};

struct OptimizerState {
  std::int64_t steps = 0;
  std::vector<double> first_moment;
  std::vector<double> second_moment;
};

struct Checkpoint {
  CheckpointHeader header;
  std::vector<double> values;
  std::optional<OptimizerState> optimizer;
};

void WriteCheckpoint(const std::string& path, const CheckpointHeader& header,
                     std::span<const ParamView> params, const Adam* adam);
Checkpoint ReadCheckpoint(const std::string& path);

// Copies checkpoint values into `params`; throws ShapeError on a count
// mismatch.
void LoadParams(const Checkpoint& ckpt, std::span<const ParamView> params);
// Restores Adam moments and step count from `ckpt.optimizer`.
void LoadOptimizer(const Checkpoint& ckpt, Adam& adam);

}  // namespace cmplan::net

#endif  // CMPLAN_CHECKPOINT_H_
