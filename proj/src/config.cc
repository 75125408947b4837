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

#include "cmplan/config.h"

#include <charconv>
#include <fstream>
#include <sstream>
#include <system_error>
#include <vector>

#include "cmplan/error.h"

namespace cmplan {
namespace {

std::string_view Trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

double ParseDouble(std::string_view text, std::string_view key, int line) {
  text = Trim(text);
  double value = 0.0;
  const auto [ptr, ec] =
      std::from_chars(text.data(), text.data() + text.size(), value);
  if (ec != std::errc() || ptr != text.data() + text.size() || text.empty()) {
    throw ParseError("invalid number for '" + std::string(key) + "': '" +
                         std::string(text) + "'",
                     line);
  }
  return value;
}

template <typename Int>
Int ParseInt(std::string_view text, std::string_view key, int line) {
  text = Trim(text);
  Int value = 0;
  const auto [ptr, ec] =
      std::from_chars(text.data(), text.data() + text.size(), value);
  if (ec != std::errc() || ptr != text.data() + text.size() || text.empty()) {
    throw ParseError("invalid integer for '" + std::string(key) + "': '" +
                         std::string(text) + "'",
                     line);
  }
  return value;
}

}  // namespace

std::string FormatDouble(double value) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), value);
  return std::string(buf, ptr);
}

void Validate(const RunConfig& c) {
  if (c.H1 < 0) throw ValidationError("H1", "must be >= 0");
  if (c.H2 < 3) throw ValidationError("H2", "must be >= 3");
  if (!(c.dt > 0.0)) throw ValidationError("dt", "must be > 0");
  if (c.T < 2) throw ValidationError("T", "must be >= 2");
  if (!(c.rho > 0.0)) throw ValidationError("rho", "must be > 0");
  if (!(c.sigma_min > 0.0)) throw ValidationError("sigma_min", "must be > 0");
  if (!(c.sigma_min < c.sigma_max)) {
    throw ValidationError("sigma_max", "must exceed sigma_min");
  }
  if (!(c.a_limit > 0.0)) throw ValidationError("a_limit", "must be > 0");
  if (!(c.omega_limit > 0.0)) {
    throw ValidationError("omega_limit", "must be > 0");
  }
  for (double a : c.alpha) {
    if (!(a > 0.0)) throw ValidationError("alpha", "step sizes must be > 0");
  }
  if (c.n_grad_steps < 1) {
    throw ValidationError("n_grad_steps", "must be >= 1");
  }
  if (c.K < 1) throw ValidationError("K", "must be >= 1");
}

RunConfig ParseConfig(std::string_view text) {
  RunConfig c;
  int line_no = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    auto end = text.find('\n', pos);
    if (end == std::string_view::npos) end = text.size();
    std::string_view line = text.substr(pos, end - pos);
    pos = end + 1;
    ++line_no;

    if (const auto hash = line.find('#'); hash != std::string_view::npos) {
      line = line.substr(0, hash);
    }
    line = Trim(line);
    if (line.empty()) continue;

    const auto eq = line.find('=');
    if (eq == std::string_view::npos) {
      throw ParseError("expected key=value", line_no);
    }
    const std::string_view key = Trim(line.substr(0, eq));
    const std::string_view value = line.substr(eq + 1);

    if (key == "seed") {
      c.seed = ParseInt<std::uint64_t>(value, key, line_no);
    } else if (key == "H1") {
      c.H1 = ParseInt<int>(value, key, line_no);
    } else if (key == "H2") {
      c.H2 = ParseInt<int>(value, key, line_no);
    } else if (key == "dt") {
      c.dt = ParseDouble(value, key, line_no);
    } else if (key == "T") {
      c.T = ParseInt<int>(value, key, line_no);
    } else if (key == "rho") {
      c.rho = ParseDouble(value, key, line_no);
    } else if (key == "sigma_min") {
      c.sigma_min = ParseDouble(value, key, line_no);
    } else if (key == "sigma_max") {
      c.sigma_max = ParseDouble(value, key, line_no);
    } else if (key == "a_limit") {
      c.a_limit = ParseDouble(value, key, line_no);
    } else if (key == "omega_limit") {
      c.omega_limit = ParseDouble(value, key, line_no);
    } else if (key == "alpha") {
      std::vector<std::string_view> parts;
      std::size_t start = 0;
      while (true) {
        const auto comma = value.find(',', start);
        parts.push_back(value.substr(start, comma - start));
        if (comma == std::string_view::npos) break;
        start = comma + 1;
      }
      if (parts.size() != 3) {
        throw ParseError("alpha needs 3 comma-separated values", line_no);
      }
      for (int j = 0; j < 3; ++j) {
        c.alpha[j] = ParseDouble(parts[j], key, line_no);
      }
    } else if (key == "n_grad_steps") {
      c.n_grad_steps = ParseInt<int>(value, key, line_no);
    } else if (key == "K") {
      c.K = ParseInt<int>(value, key, line_no);
    } else {
      throw ParseError("unknown key '" + std::string(key) + "'", line_no);
    }
  }
  Validate(c);
  return c;
}

RunConfig LoadConfig(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open config file: " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ParseConfig(ss.str());
}

std::string FormatConfig(const RunConfig& c) {
  std::ostringstream out;
  out << "seed=" << c.seed << "\n";
  out << "H1=" << c.H1 << "\n";
  out << "H2=" << c.H2 << "\n";
  out << "dt=" << FormatDouble(c.dt) << "\n";
  out << "T=" << c.T << "\n";
  out << "rho=" << FormatDouble(c.rho) << "\n";
  out << "sigma_min=" << FormatDouble(c.sigma_min) << "\n";
  out << "sigma_max=" << FormatDouble(c.sigma_max) << "\n";
  out << "a_limit=" << FormatDouble(c.a_limit) << "\n";
  out << "omega_limit=" << FormatDouble(c.omega_limit) << "\n";
  out << "alpha=" << FormatDouble(c.alpha[0]) << ","
      << FormatDouble(c.alpha[1]) << "," << FormatDouble(c.alpha[2]) << "\n";
  out << "n_grad_steps=" << c.n_grad_steps << "\n";
  out << "K=" << c.K << "\n";
  return out.str();
}

void SaveConfig(const RunConfig& config, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write config file: " + path);
  out << FormatConfig(config);
  if (!out) throw IoError("failed writing config file: " + path);
}

std::uint64_t ConfigHash(const RunConfig& config) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : FormatConfig(config)) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  return h;
}

}  // namespace cmplan
