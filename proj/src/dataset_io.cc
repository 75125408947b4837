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

#include "cmplan/dataset_io.h"

#include <fstream>
#include <sstream>

#include "cmplan/binary_io.h"
#include "cmplan/error.h"
#include "json.hpp"

namespace cmplan {
namespace {

constexpr char kMagic[] = "CPLN";

void WriteTrack(BinaryWriter& w, const Track& track) {
  for (const auto& s : track) {
    w.F64(s.px);
    w.F64(s.py);
    w.F64(s.heading);
    w.F64(s.speed);
    w.U8(s.valid ? 1 : 0);
  }
}

Track ReadTrack(BinaryReader& r, std::uint32_t steps) {
  Track track(steps);
  for (auto& s : track) {
    s.px = r.F64();
    s.py = r.F64();
    s.heading = r.F64();
    s.speed = r.F64();
    s.valid = r.U8() != 0;
  }
  return track;
}

}  // namespace

void WriteDataset(const std::string& path, std::span<const Scenario> scenes) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write dataset: " + path);
  BinaryWriter w(out);
  w.Bytes({kMagic, 4});
  w.U16(kDatasetVersion);
  w.U32(static_cast<std::uint32_t>(scenes.size()));
  for (const auto& sc : scenes) {
    w.U8(static_cast<std::uint8_t>(sc.kind));
    w.F64(sc.dt);
    w.U32(static_cast<std::uint32_t>(sc.history.ego.size()));
    w.U32(static_cast<std::uint32_t>(sc.gt_future.horizon()));
    w.U32(static_cast<std::uint32_t>(sc.history.others.size()));
    WriteTrack(w, sc.history.ego);
    for (const auto& track : sc.history.others) WriteTrack(w, track);
    w.U32(static_cast<std::uint32_t>(sc.map.polylines.size()));
    for (const auto& line : sc.map.polylines) {
      w.U32(static_cast<std::uint32_t>(line.points.size()));
      for (const auto& p : line.points) {
        w.F64(p.px);
        w.F64(p.py);
        w.U8(static_cast<std::uint8_t>(p.type));
        w.U8(p.valid ? 1 : 0);
      }
    }
    w.F64(sc.goal.px);
    w.F64(sc.goal.py);
    w.F64s(sc.gt_future.data());
  }
  out.flush();
  if (!w.ok()) throw IoError("failed writing dataset: " + path);
}

std::vector<Scenario> ReadDataset(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open dataset: " + path);
  BinaryReader r(in, path);
  if (r.Bytes(4) != std::string(kMagic, 4)) {
    throw IoError("not a CPLN dataset: " + path);
  }
  const std::uint16_t version = r.U16();
  if (version != kDatasetVersion) {
    throw IoError("unsupported dataset version " + std::to_string(version));
  }
  const std::uint32_t count = r.U32();
  std::vector<Scenario> scenes(count);
  for (auto& sc : scenes) {
    const std::uint8_t kind = r.U8();
    if (kind >= kNumScenarioKinds) throw IoError("bad scenario kind");
    sc.kind = static_cast<ScenarioKind>(kind);
    sc.dt = r.F64();
    const std::uint32_t steps = r.U32();
    const std::uint32_t horizon = r.U32();
    const std::uint32_t n_others = r.U32();
    sc.history.ego = ReadTrack(r, steps);
    for (std::uint32_t i = 0; i < n_others; ++i) {
      sc.history.others.push_back(ReadTrack(r, steps));
    }
    const std::uint32_t n_lines = r.U32();
    sc.map.polylines.resize(n_lines);
    for (auto& line : sc.map.polylines) {
      line.points.resize(r.U32());
      for (auto& p : line.points) {
        p.px = r.F64();
        p.py = r.F64();
        const std::uint8_t type = r.U8();
        if (type >= kNumPolylineTypes) throw IoError("bad polyline type");
        p.type = static_cast<PolylineType>(type);
        p.valid = r.U8() != 0;
      }
    }
    sc.goal.px = r.F64();
    sc.goal.py = r.F64();
    sc.gt_future = TrajectorySet(static_cast<int>(n_others) + 1,
                                 static_cast<int>(horizon));
    r.F64s(sc.gt_future.data());
  }
  return scenes;
}

void WriteStats(const std::string& path, const DatasetStats& stats,
                std::size_t count) {
  nlohmann::ordered_json j;
  j["format"] = "cmplan-stats";
  j["version"] = 1;
  j["mean"] = {stats.mean.x, stats.mean.y};
  j["std"] = {stats.std.x, stats.std.y};
  j["count"] = count;
  std::ofstream out(path);
  if (!out) throw IoError("cannot write stats: " + path);
  out << j.dump(2) << "\n";
  if (!out) throw IoError("failed writing stats: " + path);
}

DatasetStats ReadStats(const std::string& path, std::size_t* count) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open stats: " + path);
  nlohmann::json j;
  try {
    in >> j;
    DatasetStats stats;
    stats.mean = {j.at("mean").at(0).get<double>(),
                  j.at("mean").at(1).get<double>()};
    stats.std = {j.at("std").at(0).get<double>(),
                 j.at("std").at(1).get<double>()};
    if (count) *count = j.at("count").get<std::size_t>();
    if (!(stats.std.x > 0.0) || !(stats.std.y > 0.0)) {
      throw ValidationError("std", "must be positive");
    }
    return stats;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError("stats file " + path + ": " + e.what(), 0);
  }
}

std::string StatsPathFor(const std::string& dataset_path) {
  return dataset_path + ".stats.json";
}

}  // namespace cmplan
