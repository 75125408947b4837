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

#ifndef CMPLAN_DATASET_IO_H_
#define CMPLAN_DATASET_IO_H_

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "cmplan/datagen.h"
#include "cmplan/types.h"

namespace cmplan {

// Scenario file layout (all integers and floats little-endian):
//   "CPLN" | u16 version | u32 count | count x record
// record:
//   u8 kind | f64 dt | u32 history_steps | u32 horizon | u32 n_others
//   ego track, then n_others tracks: history_steps x
//       (f64 px, f64 py, f64 heading, f64 speed, u8 valid)
//   u32 n_polylines, each: u32 n_points, n_points x
//       (f64 px, f64 py, u8 type, u8 valid)
//   f64 goal_x | f64 goal_y
//   (n_others + 1) x horizon x (f64 x, f64 y) ground-truth futures
inline constexpr std::uint16_t kDatasetVersion = 1;

void WriteDataset(const std::string& path, std::span<const Scenario> scenes);
std::vector<Scenario> ReadDataset(const std::string& path);

// Stats sidecar, JSON text:
//   {"format": "cmplan-stats", "version": 1, "mean": [x, y], "std": [x, y],
//    "count": n}
void WriteStats(const std::string& path, const DatasetStats& stats,
                std::size_t count);
// Returns the stats; `count` receives the scenario count when non-null.
DatasetStats ReadStats(const std::string& path, std::size_t* count = nullptr);

// Conventional sidecar path for a dataset file.
std::string StatsPathFor(const std::string& dataset_path);

}  // namespace cmplan

#endif  // CMPLAN_DATASET_IO_H_
