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

#ifndef CMPLAN_CONFIG_H_
#define CMPLAN_CONFIG_H_

#include <array>
#include <cstdint>
#include <string>
#include <string_view>

namespace cmplan {

// Run-wide settings. Every field maps to a key of the same name in the
// flat `key=value` config file; `alpha` is written as three comma-separated
// numbers (goal, acceleration, angular speed).
struct RunConfig {
  std::uint64_t seed = 0;
  int H1 = 10;
  int H2 = 80;
  double dt = 0.1;
  int T = 5;
  double rho = 6.0;
  double sigma_min = 0.002;
  double sigma_max = 80.0;
  double a_limit = 4.0;      // m/s^2, not given by the source method
  double omega_limit = 0.5;  // rad/s, not given by the source method
  std::array<double, 3> alpha = {2e-5, 3e-6, 5e-7};
  int n_grad_steps = 100;
  int K = 6;

  friend bool operator==(const RunConfig&, const RunConfig&) = default;
};

// Throws ValidationError naming the first out-of-range field.
void Validate(const RunConfig& config);

// Parses config text; absent keys keep their defaults. Throws ParseError
// (with a 1-based line number) or ValidationError.
RunConfig ParseConfig(std::string_view text);
RunConfig LoadConfig(const std::string& path);

// Writes every key with a round-trippable number format.
std::string FormatConfig(const RunConfig& config);
void SaveConfig(const RunConfig& config, const std::string& path);

// FNV-1a of FormatConfig(config); used in run manifests.
std::uint64_t ConfigHash(const RunConfig& config);

// Shortest decimal form that parses back to the same double.
std::string FormatDouble(double value);

}  // namespace cmplan

#endif  // CMPLAN_CONFIG_H_
