#pragma once

// Minimal self-contained SVG line plots and heatmaps. Output depends only on
// the input values, so identical data renders to identical bytes.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

namespace gm::svg {

struct Series {
  std::string label;
  std::vector<double> x;
  std::vector<double> y;
  bool emphasize = true;  // false draws a thin grey line without a legend entry
};

struct LinePlot {
  std::string title;
  std::string x_label;
  std::string y_label;
  std::vector<Series> series;
  /// Fixed y range; NaN means fit to data.
  double y_min = std::numeric_limits<double>::quiet_NaN();
  double y_max = std::numeric_limits<double>::quiet_NaN();
  std::string note;  // small caption under the plot
};

struct Heatmap {
  std::string title;
  std::string x_label;
  std::string y_label;
  std::vector<double> x_values;  // columns
  std::vector<double> y_values;  // rows
  /// values[row][col]; NaN cells are left blank.
  std::vector<std::vector<double>> values;
  double v_min = 0.0;
  double v_max = 1.0;
};

namespace detail {

inline std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

inline std::string tick(double v) {
  char buf[32];
  if (std::abs(v - std::round(v)) < 1e-9 && std::abs(v) < 1e9)
    std::snprintf(buf, sizeof buf, "%.0f", v);
  else
    std::snprintf(buf, sizeof buf, "%.3g", v);
  return buf;
}

inline std::string escape(const std::string& s) {
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

inline const char* palette(std::size_t i) {
  static const char* colors[] = {"#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd",
                                 "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf"};
  return colors[i % 10];
}

// Viridis-like ramp through five anchors.
inline std::string ramp(double t) {
  static const double anchors[5][3] = {
      {68, 1, 84}, {59, 82, 139}, {33, 145, 140}, {94, 201, 98}, {253, 231, 37}};
  t = std::clamp(t, 0.0, 1.0) * 4.0;
  const int k = std::min(3, static_cast<int>(t));
  const double f = t - k;
  char buf[16];
  std::snprintf(buf, sizeof buf, "#%02x%02x%02x",
                static_cast<int>(std::lround(anchors[k][0] + f * (anchors[k + 1][0] - anchors[k][0]))),
                static_cast<int>(std::lround(anchors[k][1] + f * (anchors[k + 1][1] - anchors[k][1]))),
                static_cast<int>(std::lround(anchors[k][2] + f * (anchors[k + 1][2] - anchors[k][2]))));
  return buf;
}

inline std::string header(int width, int height) {
  return "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + std::to_string(width) +
         "\" height=\"" + std::to_string(height) + "\" viewBox=\"0 0 " + std::to_string(width) +
         " " + std::to_string(height) +
         "\" font-family=\"sans-serif\" font-size=\"12\">\n"
         "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
}

inline std::string text(double x, double y, const std::string& s, const char* anchor = "middle",
                        const std::string& extra = "") {
  return "<text x=\"" + num(x) + "\" y=\"" + num(y) + "\" text-anchor=\"" + anchor + "\"" + extra +
         ">" + escape(s) + "</text>\n";
}

}  // namespace detail

inline std::string render_line_plot(const LinePlot& plot) {
  using namespace detail;
  double x_lo = std::numeric_limits<double>::infinity();
  double x_hi = -x_lo;
  double y_lo = x_lo;
  double y_hi = -x_lo;
  std::size_t points = 0;
  for (const auto& s : plot.series) {
    if (s.x.size() != s.y.size()) throw std::invalid_argument("series x and y lengths differ");
    for (std::size_t i = 0; i < s.x.size(); ++i) {
      x_lo = std::min(x_lo, s.x[i]);
      x_hi = std::max(x_hi, s.x[i]);
      y_lo = std::min(y_lo, s.y[i]);
      y_hi = std::max(y_hi, s.y[i]);
      ++points;
    }
  }
  if (points == 0) throw std::invalid_argument("line plot has no data");
  if (!std::isnan(plot.y_min)) y_lo = plot.y_min;
  if (!std::isnan(plot.y_max)) y_hi = plot.y_max;
  if (x_hi == x_lo) {
    x_lo -= 0.5;
    x_hi += 0.5;
  }
  if (y_hi == y_lo) {
    y_lo -= 0.5;
    y_hi += 0.5;
  }

  const int width = 720;
  const int height = 460;
  const double left = 70;
  const double right = 170;
  const double top = 40;
  const double bottom = 60;
  const double pw = width - left - right;
  const double ph = height - top - bottom;
  auto sx = [&](double x) { return left + (x - x_lo) / (x_hi - x_lo) * pw; };
  auto sy = [&](double y) { return top + (1.0 - (y - y_lo) / (y_hi - y_lo)) * ph; };

  std::string out = header(width, height);
  out += text(left + pw / 2, 22, plot.title, "middle", " font-size=\"15\"");
  out += "<rect x=\"" + num(left) + "\" y=\"" + num(top) + "\" width=\"" + num(pw) + "\" height=\"" +
         num(ph) + "\" fill=\"none\" stroke=\"black\"/>\n";
  for (int k = 0; k <= 5; ++k) {
    const double xv = x_lo + (x_hi - x_lo) * k / 5.0;
    const double yv = y_lo + (y_hi - y_lo) * k / 5.0;
    out += "<line x1=\"" + num(sx(xv)) + "\" y1=\"" + num(top + ph) + "\" x2=\"" + num(sx(xv)) +
           "\" y2=\"" + num(top + ph + 5) + "\" stroke=\"black\"/>\n";
    out += text(sx(xv), top + ph + 18, tick(xv));
    out += "<line x1=\"" + num(left - 5) + "\" y1=\"" + num(sy(yv)) + "\" x2=\"" + num(left) +
           "\" y2=\"" + num(sy(yv)) + "\" stroke=\"black\"/>\n";
    out += text(left - 8, sy(yv) + 4, tick(yv), "end");
  }
  out += text(left + pw / 2, height - 20, plot.x_label);
  out += text(18, top + ph / 2, plot.y_label, "middle",
              " transform=\"rotate(-90 18 " + num(top + ph / 2) + ")\"");

  std::size_t legend_row = 0;
  std::size_t color = 0;
  for (const auto& s : plot.series) {
    if (s.x.empty()) continue;
    const std::string stroke = s.emphasize ? palette(color++) : "#b0b0b0";
    const char* stroke_width = s.emphasize ? "2" : "1";
    if (s.x.size() == 1) {
      out += "<circle cx=\"" + num(sx(s.x[0])) + "\" cy=\"" + num(sy(s.y[0])) + "\" r=\"3\" fill=\"" +
             stroke + "\"/>\n";
    } else {
      out += "<polyline fill=\"none\" stroke=\"" + stroke + "\" stroke-width=\"" + stroke_width +
             "\" points=\"";
      for (std::size_t i = 0; i < s.x.size(); ++i) {
        if (i) out += ' ';
        out += num(sx(s.x[i])) + "," + num(sy(s.y[i]));
      }
      out += "\"/>\n";
    }
    if (s.emphasize && !s.label.empty()) {
      const double ly = top + 10 + 18 * static_cast<double>(legend_row++);
      out += "<line x1=\"" + num(left + pw + 15) + "\" y1=\"" + num(ly) + "\" x2=\"" +
             num(left + pw + 40) + "\" y2=\"" + num(ly) + "\" stroke=\"" + stroke +
             "\" stroke-width=\"2\"/>\n";
      out += text(left + pw + 46, ly + 4, s.label, "start");
    }
  }
  if (!plot.note.empty()) out += text(left, height - 4, plot.note, "start", " font-size=\"10\"");
  out += "</svg>\n";
  return out;
}

inline std::string render_heatmap(const Heatmap& map) {
  using namespace detail;
  const std::size_t rows = map.y_values.size();
  const std::size_t cols = map.x_values.size();
  if (rows == 0 || cols == 0) throw std::invalid_argument("heatmap has no data");
  if (map.values.size() != rows) throw std::invalid_argument("heatmap row count mismatch");
  for (const auto& r : map.values)
    if (r.size() != cols) throw std::invalid_argument("heatmap column count mismatch");

  const int width = 560;
  const int height = 520;
  const double left = 70;
  const double right = 110;
  const double top = 40;
  const double bottom = 60;
  const double pw = width - left - right;
  const double ph = height - top - bottom;
  const double cw = pw / static_cast<double>(cols);
  const double ch = ph / static_cast<double>(rows);
  const double span = map.v_max > map.v_min ? map.v_max - map.v_min : 1.0;

  std::string out = header(width, height);
  out += text(left + pw / 2, 22, map.title, "middle", " font-size=\"15\"");
  for (std::size_t r = 0; r < rows; ++r) {
    // First row at the bottom.
    const double y = top + ph - static_cast<double>(r + 1) * ch;
    for (std::size_t c = 0; c < cols; ++c) {
      const double v = map.values[r][c];
      if (std::isnan(v)) continue;
      out += "<rect class=\"cell\" x=\"" + num(left + static_cast<double>(c) * cw) + "\" y=\"" + num(y) +
             "\" width=\"" + num(cw) + "\" height=\"" + num(ch) + "\" fill=\"" +
             ramp((v - map.v_min) / span) + "\"/>\n";
    }
  }
  out += "<rect x=\"" + num(left) + "\" y=\"" + num(top) + "\" width=\"" + num(pw) + "\" height=\"" +
         num(ph) + "\" fill=\"none\" stroke=\"black\"/>\n";
  const std::size_t x_step = std::max<std::size_t>(1, cols / 8);
  for (std::size_t c = 0; c < cols; c += x_step)
    out += text(left + (static_cast<double>(c) + 0.5) * cw, top + ph + 18, tick(map.x_values[c]));
  const std::size_t y_step = std::max<std::size_t>(1, rows / 10);
  for (std::size_t r = 0; r < rows; r += y_step)
    out += text(left - 8, top + ph - (static_cast<double>(r) + 0.5) * ch + 4, tick(map.y_values[r]),
                "end");
  out += text(left + pw / 2, height - 20, map.x_label);
  out += text(18, top + ph / 2, map.y_label, "middle",
              " transform=\"rotate(-90 18 " + num(top + ph / 2) + ")\"");

  // Colorbar.
  const double bx = left + pw + 30;
  const int steps = 50;
  for (int k = 0; k < steps; ++k) {
    const double t = (k + 0.5) / steps;
    out += "<rect x=\"" + num(bx) + "\" y=\"" + num(top + ph * (1.0 - static_cast<double>(k + 1) / steps)) +
           "\" width=\"20\" height=\"" + num(ph / steps + 0.5) + "\" fill=\"" + ramp(t) + "\"/>\n";
  }
  out += "<rect x=\"" + num(bx) + "\" y=\"" + num(top) + "\" width=\"20\" height=\"" + num(ph) +
         "\" fill=\"none\" stroke=\"black\"/>\n";
  for (int k = 0; k <= 4; ++k) {
    const double v = map.v_min + span * k / 4.0;
    out += text(bx + 26, top + ph * (1.0 - k / 4.0) + 4, tick(v), "start");
  }
  out += "</svg>\n";
  return out;
}

}  // namespace gm::svg
