// Copyright 2026 The kebench Authors
// SPDX-License-Identifier: Apache-2.0

#include "kebench/cli/plots.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <sstream>

#include <fmt/format.h>

#include "kebench/common.hpp"

namespace kebench {
namespace {

const char* const kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd",
                                "#ff7f0e", "#17becf", "#8c564b", "#7f7f7f"};

std::string escape_xml(const std::string& s) {
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

std::vector<std::string> split_fields(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : line) {
    if (c == ',') {
      out.push_back(cur);
      cur.clear();
    } else if (c != '\r') {
      cur += c;
    }
  }
  out.push_back(cur);
  return out;
}

double parse_number(const std::string& s, int line) {
  try {
    std::size_t used = 0;
    double v = std::stod(s, &used);
    if (used != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw DataError(fmt::format("CSV line {}: '{}' is not a number", line, s));
  }
}

// Formats with at most `digits` decimals, trimming trailing zeros.
std::string num(double v, int digits = 2) {
  std::string s = fmt::format("{:.{}f}", v, digits);
  if (s.find('.') != std::string::npos) {
    while (s.back() == '0') s.pop_back();
    if (s.back() == '.') s.pop_back();
  }
  if (s == "-0") s = "0";
  return s;
}

}  // namespace

std::string series_to_csv(const std::vector<Series>& series) {
  std::string out = "series,x,y\n";
  for (const auto& s : series) {
    if (s.name.find_first_of(",\n") != std::string::npos) {
      throw ValidationError("series name '" + s.name + "' contains a comma or newline");
    }
    if (s.x.size() != s.y.size()) throw ValidationError("series " + s.name + " has mismatched x/y");
    for (std::size_t i = 0; i < s.x.size(); ++i) {
      out += fmt::format("{},{},{:.6f}\n", s.name, num(s.x[i], 6), s.y[i]);
    }
  }
  return out;
}

std::vector<Series> series_from_csv(const std::string& csv) {
  std::istringstream in(csv);
  std::string line;
  if (!std::getline(in, line) || split_fields(line) != std::vector<std::string>{"series", "x", "y"}) {
    throw DataError("series CSV must start with the header series,x,y");
  }
  std::vector<Series> out;
  std::map<std::string, std::size_t> index;
  int n = 1;
  while (std::getline(in, line)) {
    ++n;
    if (line.empty()) continue;
    auto f = split_fields(line);
    if (f.size() != 3) throw DataError(fmt::format("CSV line {}: expected 3 fields", n));
    auto it = index.find(f[0]);
    if (it == index.end()) {
      it = index.emplace(f[0], out.size()).first;
      out.push_back({f[0], {}, {}});
    }
    out[it->second].x.push_back(parse_number(f[1], n));
    out[it->second].y.push_back(parse_number(f[2], n));
  }
  return out;
}

HeatGrid heat_from_csv(const std::string& csv) {
  std::istringstream in(csv);
  std::string line;
  if (!std::getline(in, line) ||
      split_fields(line) != std::vector<std::string>{"layers", "bucket", "n_items", "avg"}) {
    throw DataError("sweep CSV must start with the header layers,bucket,n_items,avg");
  }
  HeatGrid g;
  struct Cell {
    std::string row, col;
    int n;
    std::optional<double> v;
  };
  std::vector<Cell> cells;
  int n = 1;
  while (std::getline(in, line)) {
    ++n;
    if (line.empty()) continue;
    auto f = split_fields(line);
    if (f.size() != 4) throw DataError(fmt::format("CSV line {}: expected 4 fields", n));
    Cell c{f[0], f[1], static_cast<int>(parse_number(f[2], n)), std::nullopt};
    if (!f[3].empty()) c.v = parse_number(f[3], n);
    if (std::find(g.rows.begin(), g.rows.end(), c.row) == g.rows.end()) g.rows.push_back(c.row);
    if (std::find(g.cols.begin(), g.cols.end(), c.col) == g.cols.end()) g.cols.push_back(c.col);
    cells.push_back(std::move(c));
  }
  g.values.assign(g.rows.size(), std::vector<std::optional<double>>(g.cols.size()));
  g.counts.assign(g.rows.size(), std::vector<int>(g.cols.size(), 0));
  for (const auto& c : cells) {
    auto r = std::find(g.rows.begin(), g.rows.end(), c.row) - g.rows.begin();
    auto k = std::find(g.cols.begin(), g.cols.end(), c.col) - g.cols.begin();
    g.values[r][k] = c.v;
    g.counts[r][k] = c.n;
  }
  return g;
}

std::string line_chart_svg(const std::string& title, const std::string& x_label,
                           const std::string& y_label, const std::vector<Series>& series) {
  const double width = 720, height = 420, left = 70, right = 180, top = 50, bottom = 60;
  const double pw = width - left - right, ph = height - top - bottom;

  std::vector<double> xs;
  double y_lo = 0.0, y_hi = 1.0;
  for (const auto& s : series) {
    for (double x : s.x) xs.push_back(x);
    for (double y : s.y) {
      y_lo = std::min(y_lo, y);
      y_hi = std::max(y_hi, y);
    }
  }
  std::sort(xs.begin(), xs.end());
  xs.erase(std::unique(xs.begin(), xs.end()), xs.end());
  // Checkpoints are uneven (1, 5, 10, ..., 100); place them at equal spacing.
  auto x_pos = [&](double x) {
    if (xs.size() <= 1) return left + pw / 2;
    auto i = std::lower_bound(xs.begin(), xs.end(), x) - xs.begin();
    return left + pw * static_cast<double>(i) / static_cast<double>(xs.size() - 1);
  };
  auto y_pos = [&](double y) { return top + ph * (y_hi - y) / (y_hi - y_lo); };

  std::string svg = fmt::format(
      "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{}\" height=\"{}\" viewBox=\"0 0 {} {}\" "
      "font-family=\"sans-serif\" font-size=\"12\">\n",
      width, height, width, height);
  svg += fmt::format("<rect width=\"{}\" height=\"{}\" fill=\"white\"/>\n", width, height);
  svg += fmt::format("<text x=\"{}\" y=\"28\" text-anchor=\"middle\" font-size=\"15\">{}</text>\n",
                     num(left + pw / 2), escape_xml(title));
  for (int i = 0; i <= 4; ++i) {
    const double v = y_lo + (y_hi - y_lo) * i / 4.0;
    const double y = y_pos(v);
    svg += fmt::format("<line x1=\"{}\" y1=\"{}\" x2=\"{}\" y2=\"{}\" stroke=\"#dddddd\"/>\n", num(left), num(y),
                       num(left + pw), num(y));
    svg += fmt::format("<text x=\"{}\" y=\"{}\" text-anchor=\"end\">{}</text>\n", num(left - 6), num(y + 4),
                       num(v));
  }
  for (double x : xs) {
    svg += fmt::format("<text x=\"{}\" y=\"{}\" text-anchor=\"middle\">{}</text>\n", num(x_pos(x)),
                       num(top + ph + 18), num(x, 6));
  }
  svg += fmt::format("<rect x=\"{}\" y=\"{}\" width=\"{}\" height=\"{}\" fill=\"none\" stroke=\"black\"/>\n",
                     num(left), num(top), num(pw), num(ph));
  svg += fmt::format("<text x=\"{}\" y=\"{}\" text-anchor=\"middle\">{}</text>\n", num(left + pw / 2),
                     num(height - 16), escape_xml(x_label));
  svg += fmt::format("<text x=\"18\" y=\"{}\" text-anchor=\"middle\" transform=\"rotate(-90 18 {})\">{}</text>\n",
                     num(top + ph / 2), num(top + ph / 2), escape_xml(y_label));

  for (std::size_t k = 0; k < series.size(); ++k) {
    const auto& s = series[k];
    const char* color = kPalette[k % std::size(kPalette)];
    std::string pts;
    for (std::size_t i = 0; i < s.x.size(); ++i) {
      if (!pts.empty()) pts += ' ';
      pts += num(x_pos(s.x[i])) + "," + num(y_pos(s.y[i]));
    }
    svg += fmt::format("<polyline points=\"{}\" fill=\"none\" stroke=\"{}\" stroke-width=\"2\"/>\n", pts, color);
    for (std::size_t i = 0; i < s.x.size(); ++i) {
      svg += fmt::format("<circle cx=\"{}\" cy=\"{}\" r=\"3\" fill=\"{}\"/>\n", num(x_pos(s.x[i])),
                         num(y_pos(s.y[i])), color);
    }
    const double ly = top + 10 + 18.0 * static_cast<double>(k);
    svg += fmt::format("<line x1=\"{}\" y1=\"{}\" x2=\"{}\" y2=\"{}\" stroke=\"{}\" stroke-width=\"2\"/>\n",
                       num(left + pw + 12), num(ly), num(left + pw + 32), num(ly), color);
    svg += fmt::format("<text x=\"{}\" y=\"{}\">{}</text>\n", num(left + pw + 38), num(ly + 4),
                       escape_xml(s.name));
  }
  svg += "</svg>\n";
  return svg;
}

std::string heatmap_svg(const std::string& title, const HeatGrid& grid) {
  const double cell_w = 90, cell_h = 36, left = 110, top = 60;
  const double width = left + cell_w * static_cast<double>(grid.cols.size()) + 20;
  const double height = top + cell_h * static_cast<double>(grid.rows.size()) + 50;

  double lo = 1.0, hi = 0.0;
  for (const auto& row : grid.values) {
    for (const auto& v : row) {
      if (!v) continue;
      lo = std::min(lo, *v);
      hi = std::max(hi, *v);
    }
  }
  auto color = [&](double v) {
    const double t = hi > lo ? (v - lo) / (hi - lo) : 1.0;
    // White to dark blue.
    const int r = static_cast<int>(std::lround(255 - t * (255 - 8)));
    const int g = static_cast<int>(std::lround(255 - t * (255 - 69)));
    const int b = static_cast<int>(std::lround(255 - t * (255 - 148)));
    return fmt::format("#{:02x}{:02x}{:02x}", r, g, b);
  };

  std::string svg = fmt::format(
      "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{}\" height=\"{}\" viewBox=\"0 0 {} {}\" "
      "font-family=\"sans-serif\" font-size=\"12\">\n",
      num(width), num(height), num(width), num(height));
  svg += fmt::format("<rect width=\"{}\" height=\"{}\" fill=\"white\"/>\n", num(width), num(height));
  svg += fmt::format("<text x=\"{}\" y=\"24\" text-anchor=\"middle\" font-size=\"15\">{}</text>\n",
                     num(width / 2), escape_xml(title));
  for (std::size_t c = 0; c < grid.cols.size(); ++c) {
    svg += fmt::format("<text x=\"{}\" y=\"{}\" text-anchor=\"middle\">{}</text>\n",
                       num(left + cell_w * (c + 0.5)), num(top - 8), escape_xml(grid.cols[c]));
  }
  for (std::size_t r = 0; r < grid.rows.size(); ++r) {
    const double y = top + cell_h * static_cast<double>(r);
    svg += fmt::format("<text x=\"{}\" y=\"{}\" text-anchor=\"end\">layers {}</text>\n", num(left - 8),
                       num(y + cell_h / 2 + 4), escape_xml(grid.rows[r]));
    for (std::size_t c = 0; c < grid.cols.size(); ++c) {
      const double x = left + cell_w * static_cast<double>(c);
      const auto& v = grid.values[r][c];
      svg += fmt::format("<rect x=\"{}\" y=\"{}\" width=\"{}\" height=\"{}\" fill=\"{}\" stroke=\"white\"/>\n",
                         num(x), num(y), num(cell_w), num(cell_h), v ? color(*v) : std::string("#eeeeee"));
      const bool dark = v && hi > lo && (*v - lo) / (hi - lo) > 0.6;
      svg += fmt::format("<text x=\"{}\" y=\"{}\" text-anchor=\"middle\" fill=\"{}\">{}</text>\n",
                         num(x + cell_w / 2), num(y + cell_h / 2 + 4), dark ? "white" : "black",
                         v ? fmt::format("{:.3f}", *v) : std::string("n/a"));
    }
  }
  svg += fmt::format("<text x=\"{}\" y=\"{}\" text-anchor=\"middle\">target length (tokens)</text>\n",
                     num(left + cell_w * static_cast<double>(grid.cols.size()) / 2), num(height - 16));
  svg += "</svg>\n";
  return svg;
}

}  // namespace kebench
