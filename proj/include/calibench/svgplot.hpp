#pragma once

// Minimal deterministic SVG charts: grouped bars and multi-series lines.
// Output depends only on the inputs (no timestamps, no generated ids), so a
// rerun writes byte-identical files.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

namespace calibench::svgplot {

struct Series {
  std::string name;
  std::vector<double> values;
};

namespace detail {

constexpr double kWidth = 800, kHeight = 480;
constexpr double kLeft = 70, kRight = 30, kTop = 50, kBottom = 70;

inline const char* palette(std::size_t i) {
  static const char* colors[] = {"#4878d0", "#ee854a", "#6acc64", "#d65f5f",
                                 "#956cb4", "#8c613c", "#dc7ec0", "#797979"};
  return colors[i % 8];
}

inline std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

inline std::string esc(const std::string& s) {
  std::string out;
  for (char c : s) {
    if (c == '&') out += "&amp;";
    else if (c == '<') out += "&lt;";
    else if (c == '>') out += "&gt;";
    else out += c;
  }
  return out;
}

// Round the raw maximum up to 1/2/5 x 10^k so tick labels come out clean.
inline double nice_ceiling(double v) {
  if (v <= 0.0) return 1.0;
  double mag = std::pow(10.0, std::floor(std::log10(v)));
  for (double m : {1.0, 2.0, 5.0, 10.0})
    if (v <= m * mag * (1.0 + 1e-12)) return m * mag;
  return 10.0 * mag;
}

inline void header(std::string& s, const std::string& title) {
  s += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + num(kWidth) + "\" height=\"" +
       num(kHeight) + "\" viewBox=\"0 0 " + num(kWidth) + " " + num(kHeight) + "\">\n";
  s += "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  s += "<text x=\"" + num(kWidth / 2) + "\" y=\"28\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"18\">" +
       esc(title) + "</text>\n";
}

inline void y_axis(std::string& s, double y_max, const std::string& y_label) {
  double plot_h = kHeight - kTop - kBottom;
  s += "<line x1=\"" + num(kLeft) + "\" y1=\"" + num(kTop) + "\" x2=\"" + num(kLeft) + "\" y2=\"" +
       num(kTop + plot_h) + "\" stroke=\"black\"/>\n";
  for (int t = 0; t <= 5; ++t) {
    double v = y_max * t / 5.0;
    double y = kTop + plot_h * (1.0 - static_cast<double>(t) / 5.0);
    s += "<line x1=\"" + num(kLeft - 4) + "\" y1=\"" + num(y) + "\" x2=\"" + num(kWidth - kRight) +
         "\" y2=\"" + num(y) + "\" stroke=\"#dddddd\"/>\n";
    s += "<text x=\"" + num(kLeft - 8) + "\" y=\"" + num(y + 4) +
         "\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"12\">" + num(v) +
         "</text>\n";
  }
  if (!y_label.empty())
    s += "<text x=\"16\" y=\"" + num(kTop + plot_h / 2) +
         "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"13\" transform=\"rotate(-90 16 " +
         num(kTop + plot_h / 2) + ")\">" + esc(y_label) + "</text>\n";
}

inline void legend(std::string& s, const std::vector<Series>& series) {
  if (series.size() < 2) return;
  double x = kLeft + 10, y = kTop + 6;
  for (std::size_t i = 0; i < series.size(); ++i) {
    s += "<rect x=\"" + num(x) + "\" y=\"" + num(y - 9) +
         "\" width=\"12\" height=\"12\" fill=\"" + palette(i) + "\"/>\n";
    s += "<text x=\"" + num(x + 16) + "\" y=\"" + num(y + 2) +
         "\" font-family=\"sans-serif\" font-size=\"12\">" + esc(series[i].name) + "</text>\n";
    x += 24 + 7.5 * series[i].name.size();
  }
}

}  // namespace calibench::svgplot::detail

// Grouped bar chart: one group per label, one bar per series within a group.
inline std::string bar_chart(const std::string& title, const std::vector<std::string>& labels,
                             const std::vector<Series>& series, const std::string& y_label) {
  if (labels.empty() || series.empty()) throw std::invalid_argument("bar_chart: empty input");
  for (const auto& s : series)
    if (s.values.size() != labels.size())
      throw std::invalid_argument("bar_chart: series length mismatch");

  double y_max = 0.0;
  for (const auto& s : series)
    for (double v : s.values) y_max = std::max(y_max, v);
  y_max = detail::nice_ceiling(y_max);

  using namespace detail;
  double plot_w = kWidth - kLeft - kRight, plot_h = kHeight - kTop - kBottom;
  std::string out;
  header(out, title);
  y_axis(out, y_max, y_label);

  double group_w = plot_w / labels.size();
  double bar_w = group_w * 0.8 / series.size();
  for (std::size_t g = 0; g < labels.size(); ++g) {
    for (std::size_t si = 0; si < series.size(); ++si) {
      double v = std::max(0.0, series[si].values[g]);
      double h = plot_h * v / y_max;
      double x = kLeft + group_w * g + group_w * 0.1 + bar_w * si;
      out += "<rect x=\"" + num(x) + "\" y=\"" + num(kTop + plot_h - h) + "\" width=\"" +
             num(bar_w) + "\" height=\"" + num(h) + "\" fill=\"" + palette(si) + "\"/>\n";
    }
    out += "<text x=\"" + num(kLeft + group_w * (g + 0.5)) + "\" y=\"" + num(kTop + plot_h + 18) +
           "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"12\">" +
           esc(labels[g]) + "</text>\n";
  }
  out += "<line x1=\"" + num(kLeft) + "\" y1=\"" + num(kTop + plot_h) + "\" x2=\"" +
         num(kWidth - kRight) + "\" y2=\"" + num(kTop + plot_h) + "\" stroke=\"black\"/>\n";
  legend(out, series);
  out += "</svg>\n";
  return out;
}

// Line chart over a shared numeric x axis.
inline std::string line_chart(const std::string& title, const std::vector<double>& xs,
                              const std::vector<Series>& series, const std::string& x_label,
                              const std::string& y_label) {
  if (xs.empty() || series.empty()) throw std::invalid_argument("line_chart: empty input");
  for (const auto& s : series)
    if (s.values.size() != xs.size())
      throw std::invalid_argument("line_chart: series length mismatch");

  double y_max = 0.0;
  for (const auto& s : series)
    for (double v : s.values) y_max = std::max(y_max, v);
  y_max = detail::nice_ceiling(y_max);
  double x_min = *std::min_element(xs.begin(), xs.end());
  double x_max = *std::max_element(xs.begin(), xs.end());
  if (x_max == x_min) x_max = x_min + 1.0;  // single point degenerates to the left edge

  using namespace detail;
  double plot_w = kWidth - kLeft - kRight, plot_h = kHeight - kTop - kBottom;
  auto px = [&](double x) { return kLeft + plot_w * (x - x_min) / (x_max - x_min); };
  auto py = [&](double v) { return kTop + plot_h * (1.0 - v / y_max); };

  std::string out;
  header(out, title);
  y_axis(out, y_max, y_label);
  for (double x : xs) {
    out += "<text x=\"" + num(px(x)) + "\" y=\"" + num(kTop + plot_h + 18) +
           "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"12\">" + num(x) +
           "</text>\n";
  }
  for (std::size_t si = 0; si < series.size(); ++si) {
    std::string points;
    for (std::size_t i = 0; i < xs.size(); ++i)
      points += num(px(xs[i])) + "," + num(py(series[si].values[i])) + " ";
    out += "<polyline fill=\"none\" stroke=\"" + std::string(palette(si)) +
           "\" stroke-width=\"2\" points=\"" + points + "\"/>\n";
    for (std::size_t i = 0; i < xs.size(); ++i)
      out += "<circle cx=\"" + num(px(xs[i])) + "\" cy=\"" + num(py(series[si].values[i])) +
             "\" r=\"3\" fill=\"" + palette(si) + "\"/>\n";
  }
  out += "<line x1=\"" + num(kLeft) + "\" y1=\"" + num(kTop + plot_h) + "\" x2=\"" +
         num(kWidth - kRight) + "\" y2=\"" + num(kTop + plot_h) + "\" stroke=\"black\"/>\n";
  if (!x_label.empty())
    out += "<text x=\"" + num(kLeft + plot_w / 2) + "\" y=\"" + num(kHeight - 16) +
           "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"13\">" + esc(x_label) +
           "</text>\n";
  legend(out, series);
  out += "</svg>\n";
  return out;
}

inline void write_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << content;
}

}  // namespace calibench::svgplot
