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

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <sstream>
#include <string>
#include <vector>

#include "cmplan/error.h"
#include "cmplan/workflows.h"

namespace cmplan {
namespace {

constexpr int kWidth = 640;
constexpr int kPanelHeight = 170;
constexpr int kLeft = 150;
constexpr int kRight = 20;
constexpr int kTop = 30;
constexpr int kBottom = 25;
constexpr const char* kColors[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd",
                                   "#ff7f0e", "#8c564b"};

struct Table {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
};

std::vector<std::string> SplitLine(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream s(line);
  while (std::getline(s, cell, ',')) out.push_back(cell);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

Table ParseCsv(std::string_view text) {
  Table t;
  std::istringstream in{std::string(text)};
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    auto cells = SplitLine(line);
    if (t.header.empty()) {
      t.header = std::move(cells);
      continue;
    }
    if (cells.size() != t.header.size()) {
      throw ParseError("expected " + std::to_string(t.header.size()) +
                           " columns, got " + std::to_string(cells.size()),
                       lineno);
    }
    t.rows.push_back(std::move(cells));
  }
  if (t.header.empty()) throw ParseError("empty CSV", 1);
  if (t.rows.empty()) throw ParseError("CSV has a header but no rows", lineno);
  return t;
}

bool ToNumber(const std::string& s, double* out) {
  if (s.empty()) return false;
  const char* end = s.data() + s.size();
  auto [ptr, ec] = std::from_chars(s.data(), end, *out);
  return ec == std::errc() && ptr == end && std::isfinite(*out);
}

std::string Num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.2f", v);
  return buf;
}

std::string Label(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.4g", v);
  return buf;
}

std::string Escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

std::vector<double> NumericColumn(const Table& t, std::size_t c, int* bad) {
  std::vector<double> v;
  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    double x = 0.0;
    if (!ToNumber(t.rows[r][c], &x)) {
      *bad = static_cast<int>(r) + 2;
      return {};
    }
    v.push_back(x);
  }
  *bad = 0;
  return v;
}

void Frame(std::ostringstream& svg, int y0, const std::string& title,
           double lo, double hi) {
  const int plot_h = kPanelHeight - kTop - kBottom;
  svg << "<text x=\"" << kLeft << "\" y=\"" << y0 + 18
      << "\" font-size=\"13\" font-weight=\"bold\">" << Escape(title)
      << "</text>\n";
  svg << "<rect x=\"" << kLeft << "\" y=\"" << y0 + kTop << "\" width=\""
      << kWidth - kLeft - kRight << "\" height=\"" << plot_h
      << "\" fill=\"none\" stroke=\"#888\"/>\n";
  svg << "<text x=\"" << kLeft - 6 << "\" y=\"" << y0 + kTop + 10
      << "\" font-size=\"10\" text-anchor=\"end\">" << Label(hi) << "</text>\n";
  svg << "<text x=\"" << kLeft - 6 << "\" y=\"" << y0 + kTop + plot_h
      << "\" font-size=\"10\" text-anchor=\"end\">" << Label(lo) << "</text>\n";
}

}  // namespace

std::string CsvToSvg(std::string_view csv) {
  const Table t = ParseCsv(csv);
  const bool curves = t.header.front() == "step";
  std::vector<std::size_t> series;
  std::vector<std::vector<double>> values;
  for (std::size_t c = 1; c < t.header.size(); ++c) {
    int bad = 0;
    auto v = NumericColumn(t, c, &bad);
    if (bad) {
      if (curves) throw ParseError("non-numeric value in " + t.header[c], bad);
      continue;
    }
    series.push_back(c);
    values.push_back(std::move(v));
  }
  if (series.empty()) throw ParseError("no numeric columns", 1);
  std::vector<double> xs;
  if (curves) {
    int bad = 0;
    xs = NumericColumn(t, 0, &bad);
    if (bad) throw ParseError("non-numeric step", bad);
  }

  const int height = kPanelHeight * static_cast<int>(series.size());
  const int plot_w = kWidth - kLeft - kRight;
  const int plot_h = kPanelHeight - kTop - kBottom;
  std::ostringstream svg;
  svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kWidth
      << "\" height=\"" << height << "\" viewBox=\"0 0 " << kWidth << ' '
      << height << "\" font-family=\"sans-serif\">\n";
  svg << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  for (std::size_t p = 0; p < series.size(); ++p) {
    const int y0 = static_cast<int>(p) * kPanelHeight;
    const auto& v = values[p];
    const char* color = kColors[p % std::size(kColors)];
    double lo = *std::min_element(v.begin(), v.end());
    double hi = *std::max_element(v.begin(), v.end());
    if (!curves) lo = std::min(lo, 0.0);
    if (hi - lo <= 0.0) {
      hi += 0.5;
      lo -= 0.5;
    }
    Frame(svg, y0, t.header[series[p]], lo, hi);
    auto ymap = [&](double y) {
      return y0 + kTop + plot_h * (1.0 - (y - lo) / (hi - lo));
    };
    if (curves) {
      const double x_lo = xs.front();
      const double x_hi = xs.back() > x_lo ? xs.back() : x_lo + 1.0;
      svg << "<polyline fill=\"none\" stroke=\"" << color
          << "\" stroke-width=\"1.5\" points=\"";
      for (std::size_t r = 0; r < v.size(); ++r) {
        const double x = kLeft + plot_w * (xs[r] - x_lo) / (x_hi - x_lo);
        svg << (r ? " " : "") << Num(x) << ',' << Num(ymap(v[r]));
      }
      svg << "\"/>\n";
      svg << "<text x=\"" << kLeft << "\" y=\"" << y0 + kPanelHeight - 8
          << "\" font-size=\"10\">" << Escape(t.header.front()) << ' '
          << Label(x_lo) << " .. " << Label(x_hi) << "</text>\n";
    } else {
      const double slot = static_cast<double>(plot_w) / v.size();
      for (std::size_t r = 0; r < v.size(); ++r) {
        const double top = ymap(std::max(v[r], 0.0));
        const double base = ymap(std::min(v[r], 0.0));
        svg << "<rect x=\"" << Num(kLeft + slot * r + 0.15 * slot) << "\" y=\""
            << Num(top) << "\" width=\"" << Num(0.7 * slot) << "\" height=\""
            << Num(base - top) << "\" fill=\"" << color << "\"/>\n";
        svg << "<text x=\"" << Num(kLeft + slot * (r + 0.5)) << "\" y=\""
            << y0 + kPanelHeight - 8
            << "\" font-size=\"10\" text-anchor=\"middle\">"
            << Escape(t.rows[r][0]) << "</text>\n";
      }
    }
  }
  svg << "</svg>\n";
  return svg.str();
}

}  // namespace cmplan
