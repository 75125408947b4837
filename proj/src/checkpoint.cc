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

#include "cmplan/checkpoint.h"

#include <fstream>

#include "cmplan/binary_io.h"
#include "cmplan/error.h"

namespace cmplan::net {
namespace {
constexpr char kMagic[] = "CKPT";
}  // namespace

void WriteCheckpoint(const std::string& path, const CheckpointHeader& header,
                     std::span<const ParamView> params, const Adam* adam) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write checkpoint: " + path);
  BinaryWriter w(out);
  w.Bytes({kMagic, 4});
  w.U16(kCheckpointVersion);
  w.U32(header.blocks);
  w.U32(header.width);
  w.U32(header.input_dim);
  w.U32(header.output_dim);
  w.U32(static_cast<std::uint32_t>(header.metadata.size()));
  w.Bytes(header.metadata);
  const std::size_t n = ParamCount(params);
  w.U64(n);
  for (const auto& p : params) w.F64s(p.value);
  const bool has_optimizer = adam != nullptr && adam->steps() > 0;
  w.U8(has_optimizer ? 1 : 0);
  if (has_optimizer) {
    w.U64(static_cast<std::uint64_t>(adam->steps()));
    w.F64s(adam->first_moment());
    w.F64s(adam->second_moment());
  }
  out.flush();
  if (!w.ok()) throw IoError("failed writing checkpoint: " + path);
}

Checkpoint ReadCheckpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open checkpoint: " + path);
  BinaryReader r(in, path);
  if (r.Bytes(4) != std::string(kMagic, 4)) {
    throw IoError("not a checkpoint file: " + path);
  }
  const std::uint16_t version = r.U16();
  if (version != kCheckpointVersion) {
    throw IoError("unsupported checkpoint version " + std::to_string(version));
  }
  Checkpoint ckpt;
  ckpt.header.blocks = r.U32();
  ckpt.header.width = r.U32();
  ckpt.header.input_dim = r.U32();
  ckpt.header.output_dim = r.U32();
  ckpt.header.metadata = r.Bytes(r.U32());
  ckpt.values.resize(r.U64());
  r.F64s(ckpt.values);
  if (r.U8() != 0) {
    OptimizerState state;
    state.steps = static_cast<std::int64_t>(r.U64());
    state.first_moment.resize(ckpt.values.size());
    state.second_moment.resize(ckpt.values.size());
    r.F64s(state.first_moment);
    r.F64s(state.second_moment);
    ckpt.optimizer = std::move(state);
  }
  return ckpt;
}

void LoadParams(const Checkpoint& ckpt, std::span<const ParamView> params) {
  if (ParamCount(params) != ckpt.values.size()) {
    throw ShapeError("checkpoint holds " + std::to_string(ckpt.values.size()) +
                     " values, model expects " +
                     std::to_string(ParamCount(params)));
  }
  std::size_t k = 0;
  for (const auto& p : params) {
    for (double& v : p.value) v = ckpt.values[k++];
  }
}

void LoadOptimizer(const Checkpoint& ckpt, Adam& adam) {
  if (!ckpt.optimizer) return;
  adam.first_moment() = ckpt.optimizer->first_moment;
  adam.second_moment() = ckpt.optimizer->second_moment;
  adam.set_steps(ckpt.optimizer->steps);
}

}  // namespace cmplan::net
