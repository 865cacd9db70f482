#pragma once

// Minimal hand-written SVG line charts on a fixed 800x500 canvas.

#include <optional>
#include <string>
#include <vector>

namespace synthctl::svg {

struct Polyline {
  std::vector<double> x;
  std::vector<double> y;
  std::string stroke = "#1f77b4";
  double width = 1.5;
  bool dashed = false;
  double opacity = 1.0;
  std::string label;  // empty: left out of the legend
};

struct LineChart {
  std::string title;
  std::string x_label;
  std::string y_label;
  std::vector<Polyline> lines;
  std::optional<double> vertical_rule;  // drawn dashed, e.g. the treatment year
  bool zero_rule = false;
  bool integer_x_ticks = true;
};

/// Round tick positions ("1, 2, 5 times a power of ten") covering [lo, hi].
std::vector<double> nice_ticks(double lo, double hi, int target = 6);

std::string render(const LineChart& chart);

std::string escape(const std::string& text);

}  // namespace synthctl::svg
