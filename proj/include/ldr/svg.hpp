#pragma once

// Minimal SVG chart emitter for the report figures: a JI-vs-latency scatter
// with the frame-budget line (log x axis) and JI-vs-alpha line charts.

#include <cmath>
#include <string>
#include <vector>

#include "ldr/common.hpp"

namespace ldr {

struct SvgSeries {
  std::string name;
  std::vector<std::pair<double, double>> points;
  std::string color = "#1f77b4";
  bool connect = false;  // polyline through the points
};

namespace detail {

inline std::string fmt_num(double v) {
  char buf[48];
  std::snprintf(buf, sizeof(buf), "%.4g", v);
  return buf;
}

}  // namespace detail

inline std::string render_svg_chart(const std::string& title, const std::string& xlabel,
                                    const std::string& ylabel,
                                    const std::vector<SvgSeries>& series, bool log_x = false,
                                    double vline_x = std::nan("")) {
  const double W = 720, H = 480, ml = 70, mr = 30, mt = 50, mb = 60;
  double xmin = 1e300, xmax = -1e300, ymin = 1e300, ymax = -1e300;
  auto tx = [&](double x) { return log_x ? std::log10(std::max(x, 1e-12)) : x; };
  for (const auto& s : series)
    for (auto [x, y] : s.points) {
      xmin = std::min(xmin, tx(x));
      xmax = std::max(xmax, tx(x));
      ymin = std::min(ymin, y);
      ymax = std::max(ymax, y);
    }
  if (!std::isnan(vline_x)) {
    xmin = std::min(xmin, tx(vline_x));
    xmax = std::max(xmax, tx(vline_x));
  }
  if (xmin > xmax) { xmin = 0; xmax = 1; }
  if (ymin > ymax) { ymin = 0; ymax = 1; }
  double xpad = (xmax - xmin) * 0.08 + 1e-9, ypad = (ymax - ymin) * 0.08 + 1e-9;
  xmin -= xpad; xmax += xpad; ymin -= ypad; ymax += ypad;

  auto px = [&](double x) { return ml + (tx(x) - xmin) / (xmax - xmin) * (W - ml - mr); };
  auto py = [&](double y) { return H - mb - (y - ymin) / (ymax - ymin) * (H - mt - mb); };

  std::string out;
  out += "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n";
  out += cat("<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"", W, "\" height=\"", H,
             "\" viewBox=\"0 0 ", W, " ", H, "\">\n");
  out += cat("<rect width=\"", W, "\" height=\"", H, "\" fill=\"white\"/>\n");
  out += cat("<text x=\"", W / 2, "\" y=\"28\" text-anchor=\"middle\" font-size=\"18\">", title,
             "</text>\n");

  // Axes and ticks.
  out += cat("<line x1=\"", ml, "\" y1=\"", H - mb, "\" x2=\"", W - mr, "\" y2=\"", H - mb,
             "\" stroke=\"black\"/>\n");
  out += cat("<line x1=\"", ml, "\" y1=\"", mt, "\" x2=\"", ml, "\" y2=\"", H - mb,
             "\" stroke=\"black\"/>\n");
  for (int i = 0; i <= 5; ++i) {
    double fx = xmin + (xmax - xmin) * i / 5.0;
    double fy = ymin + (ymax - ymin) * i / 5.0;
    double gx = ml + (W - ml - mr) * i / 5.0;
    double gy = H - mb - (H - mt - mb) * i / 5.0;
    double label_x = log_x ? std::pow(10.0, fx) : fx;
    out += cat("<line x1=\"", gx, "\" y1=\"", H - mb, "\" x2=\"", gx, "\" y2=\"", H - mb + 5,
               "\" stroke=\"black\"/>\n");
    out += cat("<text x=\"", gx, "\" y=\"", H - mb + 20,
               "\" text-anchor=\"middle\" font-size=\"11\">", detail::fmt_num(label_x),
               "</text>\n");
    out += cat("<line x1=\"", ml - 5, "\" y1=\"", gy, "\" x2=\"", ml, "\" y2=\"", gy,
               "\" stroke=\"black\"/>\n");
    out += cat("<text x=\"", ml - 8, "\" y=\"", gy + 4, "\" text-anchor=\"end\" font-size=\"11\">",
               detail::fmt_num(fy), "</text>\n");
  }
  out += cat("<text x=\"", (ml + W - mr) / 2, "\" y=\"", H - 14,
             "\" text-anchor=\"middle\" font-size=\"13\">", xlabel, "</text>\n");
  out += cat("<text x=\"18\" y=\"", (mt + H - mb) / 2,
             "\" text-anchor=\"middle\" font-size=\"13\" transform=\"rotate(-90 18 ",
             (mt + H - mb) / 2, ")\">", ylabel, "</text>\n");

  if (!std::isnan(vline_x)) {
    double gx = px(vline_x);
    out += cat("<line x1=\"", gx, "\" y1=\"", mt, "\" x2=\"", gx, "\" y2=\"", H - mb,
               "\" stroke=\"#888\" stroke-dasharray=\"6,4\"/>\n");
    out += cat("<text x=\"", gx + 4, "\" y=\"", mt + 14, "\" font-size=\"11\" fill=\"#555\">",
               detail::fmt_num(vline_x), "</text>\n");
  }

  double legend_y = mt + 6;
  for (const auto& s : series) {
    if (s.connect && s.points.size() > 1) {
      std::string pts;
      for (auto [x, y] : s.points) pts += cat(px(x), ",", py(y), " ");
      out += cat("<polyline points=\"", pts, "\" fill=\"none\" stroke=\"", s.color,
                 "\" stroke-width=\"2\"/>\n");
    }
    for (auto [x, y] : s.points)
      out += cat("<circle cx=\"", px(x), "\" cy=\"", py(y), "\" r=\"4\" fill=\"", s.color,
                 "\"/>\n");
    if (!s.name.empty()) {
      out += cat("<circle cx=\"", W - mr - 150, "\" cy=\"", legend_y, "\" r=\"4\" fill=\"", s.color,
                 "\"/>\n");
      out += cat("<text x=\"", W - mr - 140, "\" y=\"", legend_y + 4, "\" font-size=\"12\">", s.name,
                 "</text>\n");
      legend_y += 18;
    }
  }
  out += "</svg>\n";
  return out;
}

}  // namespace ldr
