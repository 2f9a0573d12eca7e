// Copyright 2026 The kebench Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <optional>
#include <string>
#include <vector>

namespace kebench {

struct Series {
  std::string name;
  std::vector<double> x, y;
};

// Long format "series,x,y"; y is written with six decimals. Names may not
// contain commas or newlines.
std::string series_to_csv(const std::vector<Series>& series);
std::vector<Series> series_from_csv(const std::string& csv);

struct HeatGrid {
  std::vector<std::string> rows;  // layer groups
  std::vector<std::string> cols;  // length buckets
  std::vector<std::vector<std::optional<double>>> values;
  std::vector<std::vector<int>> counts;
};

// Reads the "layers,bucket,n_items,avg" sweep CSV; rows and columns keep
// their first-seen order.
HeatGrid heat_from_csv(const std::string& csv);

// Static SVG documents. Output depends only on the arguments, so an image
// regenerated from its CSV is byte-identical.
std::string line_chart_svg(const std::string& title, const std::string& x_label,
                           const std::string& y_label, const std::vector<Series>& series);
std::string heatmap_svg(const std::string& title, const HeatGrid& grid);

}  // namespace kebench
