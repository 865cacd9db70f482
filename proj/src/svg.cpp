#include "synthctl/svg.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <fmt/format.h>

namespace synthctl::svg {

namespace {

constexpr double kWidth = 800.0;
constexpr double kHeight = 500.0;
constexpr double kLeft = 80.0;
constexpr double kRight = 30.0;
constexpr double kTop = 50.0;
constexpr double kBottom = 60.0;

// Fixed two-decimal coordinates; -0.00 is normalised so output is stable.
std::string num(double v) {
  std::string s = fmt::format("{:.2f}", v);
  if (s == "-0.00") s = "0.00";
  return s;
}

std::string tick_label(double v, double step) {
  int decimals = 0;
  if (step < 1.0) decimals = static_cast<int>(std::ceil(-std::log10(step) - 1e-9));
  std::string s = fmt::format("{:.{}f}", v, decimals);
  if (s.starts_with("-") && s.find_first_not_of("-0.") == std::string::npos) s.erase(0, 1);
  return s;
}

struct Range {
  double lo = std::numeric_limits<double>::infinity();
  double hi = -std::numeric_limits<double>::infinity();
  void add(double v) {
    if (!std::isfinite(v)) return;
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  void settle() {
    if (!std::isfinite(lo)) {
      lo = 0.0;
      hi = 1.0;
    }
    if (hi - lo < 1e-12) {
      lo -= 1.0;
      hi += 1.0;
    }
  }
};

}  // namespace

std::vector<double> nice_ticks(double lo, double hi, int target) {
  if (!(hi > lo)) return {lo};
  const double raw = (hi - lo) / std::max(1, target - 1);
  const double mag = std::pow(10.0, std::floor(std::log10(raw)));
  double step = mag;
  for (double m : {1.0, 2.0, 5.0, 10.0}) {
    step = m * mag;
    if (step >= raw) break;
  }
  std::vector<double> ticks;
  const auto first = static_cast<long long>(std::floor(lo / step + 1e-9));
  const auto last = static_cast<long long>(std::ceil(hi / step - 1e-9));
  for (long long i = first; i <= last; ++i) ticks.push_back(static_cast<double>(i) * step);
  return ticks;
}

std::string escape(const std::string& text) {
  std::string out;
  for (char c : text) {
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

std::string render(const LineChart& chart) {
  Range xr, yr;
  for (const auto& line : chart.lines) {
    for (double v : line.x) xr.add(v);
    for (double v : line.y) yr.add(v);
  }
  if (chart.vertical_rule) xr.add(*chart.vertical_rule);
  if (chart.zero_rule) yr.add(0.0);
  xr.settle();
  yr.settle();

  std::vector<double> xt;
  if (chart.integer_x_ticks) {
    const double span = xr.hi - xr.lo;
    const double step = std::max(1.0, std::ceil(span / 12.0));
    for (double v = std::ceil(xr.lo); v <= xr.hi + 1e-9; v += step) xt.push_back(v);
  } else {
    xt = nice_ticks(xr.lo, xr.hi);
  }
  const auto yt = nice_ticks(yr.lo, yr.hi);
  const double ylo = std::min(yr.lo, yt.front());
  const double yhi = std::max(yr.hi, yt.back());
  const double xlo = chart.integer_x_ticks ? xr.lo : std::min(xr.lo, xt.front());
  const double xhi = chart.integer_x_ticks ? xr.hi : std::max(xr.hi, xt.back());
  const double ystep = yt.size() > 1 ? yt[1] - yt[0] : 1.0;

  const double pw = kWidth - kLeft - kRight;
  const double ph = kHeight - kTop - kBottom;
  auto px = [&](double x) { return kLeft + (xhi > xlo ? (x - xlo) / (xhi - xlo) : 0.5) * pw; };
  auto py = [&](double y) { return kTop + (1.0 - (y - ylo) / (yhi - ylo)) * ph; };

  std::string s;
  s += "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n";
  s += "<svg xmlns=\"http://www.w3.org/2000/svg\" version=\"1.1\" viewBox=\"0 0 800 500\" width=\"800\" height=\"500\">\n";
  s += "<rect x=\"0\" y=\"0\" width=\"800\" height=\"500\" fill=\"white\"/>\n";
  s += fmt::format("<text x=\"400\" y=\"28\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"16\">{}</text>\n",
                   escape(chart.title));

  s += "<g stroke=\"#dddddd\" stroke-width=\"1\">\n";
  for (double v : yt) {
    if (v < ylo - 1e-9 || v > yhi + 1e-9) continue;
    s += fmt::format("<line x1=\"{}\" y1=\"{}\" x2=\"{}\" y2=\"{}\"/>\n", num(kLeft), num(py(v)), num(kLeft + pw), num(py(v)));
  }
  s += "</g>\n";

  s += "<g font-family=\"sans-serif\" font-size=\"11\" fill=\"#333333\">\n";
  for (double v : yt) {
    if (v < ylo - 1e-9 || v > yhi + 1e-9) continue;
    s += fmt::format("<text x=\"{}\" y=\"{}\" text-anchor=\"end\">{}</text>\n", num(kLeft - 6), num(py(v) + 4),
                     tick_label(v, ystep));
  }
  for (double v : xt) {
    s += fmt::format("<text x=\"{}\" y=\"{}\" text-anchor=\"middle\">{}</text>\n", num(px(v)), num(kTop + ph + 18),
                     chart.integer_x_ticks ? fmt::format("{}", static_cast<long long>(std::llround(v))) : tick_label(v, 1.0));
  }
  s += "</g>\n";

  s += fmt::format("<rect x=\"{}\" y=\"{}\" width=\"{}\" height=\"{}\" fill=\"none\" stroke=\"#333333\" stroke-width=\"1\"/>\n",
                   num(kLeft), num(kTop), num(pw), num(ph));
  s += fmt::format("<text x=\"400\" y=\"{}\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"13\">{}</text>\n",
                   num(kHeight - 15), escape(chart.x_label));
  s += fmt::format(
      "<text x=\"20\" y=\"{}\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"13\" transform=\"rotate(-90 20 {})\">{}</text>\n",
      num(kTop + ph / 2), num(kTop + ph / 2), escape(chart.y_label));

  if (chart.zero_rule && ylo <= 0.0 && yhi >= 0.0) {
    s += fmt::format("<line x1=\"{}\" y1=\"{}\" x2=\"{}\" y2=\"{}\" stroke=\"#000000\" stroke-width=\"1\"/>\n", num(kLeft),
                     num(py(0.0)), num(kLeft + pw), num(py(0.0)));
  }
  if (chart.vertical_rule) {
    const double x = px(*chart.vertical_rule);
    s += fmt::format(
        "<line x1=\"{}\" y1=\"{}\" x2=\"{}\" y2=\"{}\" stroke=\"#000000\" stroke-width=\"1\" stroke-dasharray=\"6 4\"/>\n",
        num(x), num(kTop), num(x), num(kTop + ph));
  }

  for (const auto& line : chart.lines) {
    std::string pts;
    const std::size_t n = std::min(line.x.size(), line.y.size());
    for (std::size_t i = 0; i < n; ++i) {
      if (!std::isfinite(line.y[i])) continue;
      if (!pts.empty()) pts += ' ';
      pts += num(px(line.x[i])) + "," + num(py(line.y[i]));
    }
    s += fmt::format("<polyline fill=\"none\" stroke=\"{}\" stroke-width=\"{}\"{}{} points=\"{}\"/>\n", line.stroke,
                     num(line.width), line.dashed ? " stroke-dasharray=\"8 5\"" : "",
                     line.opacity < 1.0 ? fmt::format(" stroke-opacity=\"{}\"", num(line.opacity)) : std::string(), pts);
  }

  double ly = kTop + 14;
  for (const auto& line : chart.lines) {
    if (line.label.empty()) continue;
    s += fmt::format("<line x1=\"{}\" y1=\"{}\" x2=\"{}\" y2=\"{}\" stroke=\"{}\" stroke-width=\"2\"{}/>\n", num(kLeft + 12),
                     num(ly), num(kLeft + 40), num(ly), line.stroke, line.dashed ? " stroke-dasharray=\"8 5\"" : "");
    s += fmt::format("<text x=\"{}\" y=\"{}\" font-family=\"sans-serif\" font-size=\"12\">{}</text>\n", num(kLeft + 46),
                     num(ly + 4), escape(line.label));
    ly += 18;
  }
  s += "</svg>\n";
  return s;
}

}  // namespace synthctl::svg
