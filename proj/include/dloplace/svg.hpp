#pragma once

// Deterministic SVG rendering of rod polylines. World (x, y) maps to
// (ox + scale * x, oy - scale * y); the root element records scale, ox, oy.

#include <algorithm>
#include <array>
#include <cstdio>
#include <limits>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "dloplace/characterize.hpp"
#include "dloplace/io.hpp"
#include "dloplace/placement.hpp"

namespace dloplace {

struct SvgLayer {
  std::vector<Point2> points;
  bool dashed = false;  // fitted or observed
  std::string label;
};

struct Viewport {
  double scale = 1.0, ox = 0.0, oy = 0.0;
  double width = 0.0, height = 0.0;

  Point2 to_svg(const Point2& p) const { return {ox + scale * p[0], oy - scale * p[1]}; }
  Point2 to_world(const Point2& q) const { return {(q[0] - ox) / scale, (oy - q[1]) / scale}; }
};

inline std::vector<Point2> shape_points(const DLOShape& s) {
  std::vector<Point2> out;
  out.reserve(s.size());
  for (const auto& st : s.samples) out.push_back({st.x, st.y});
  return out;
}

/// Uniform scale fitting every layer (and the surface height) in the canvas.
inline Viewport fit_viewport(const std::vector<SvgLayer>& layers, std::optional<double> surface_y,
                             double width = 800.0, double margin = 20.0) {
  double xmin = std::numeric_limits<double>::infinity(), xmax = -xmin, ymin = xmin, ymax = -xmin;
  for (const auto& l : layers) {
    for (const auto& p : l.points) {
      xmin = std::min(xmin, p[0]);
      xmax = std::max(xmax, p[0]);
      ymin = std::min(ymin, p[1]);
      ymax = std::max(ymax, p[1]);
    }
  }
  if (!std::isfinite(xmin)) {
    if (!surface_y) throw std::invalid_argument("nothing to render");
    xmin = 0.0;
    xmax = 1.0;
    ymin = ymax = *surface_y;
  }
  if (surface_y) {
    ymin = std::min(ymin, *surface_y);
    ymax = std::max(ymax, *surface_y);
  }
  const double span = std::max({xmax - xmin, ymax - ymin, 1e-9});
  Viewport v;
  v.scale = (width - 2.0 * margin) / span;
  v.width = width;
  v.height = std::max(2.0 * margin + v.scale * (ymax - ymin), 2.0 * margin + 1.0);
  v.ox = margin - v.scale * xmin;
  v.oy = margin + v.scale * ymax;
  return v;
}

inline const char* layer_color(std::size_t i) {
  static constexpr std::array<const char*, 8> palette{"#1f77b4", "#d62728", "#2ca02c", "#9467bd",
                                                      "#ff7f0e", "#8c564b", "#e377c2", "#17becf"};
  return palette[i % palette.size()];
}

namespace detail {
inline std::string fixed3(double v) {
  char buf[48];
  std::snprintf(buf, sizeof buf, "%.3f", v);
  return buf;
}
}  // namespace detail

inline std::string render_svg(const std::vector<SvgLayer>& layers, std::optional<double> surface_y,
                              double width = 800.0) {
  using detail::fixed3;
  const Viewport v = fit_viewport(layers, surface_y, width);
  std::ostringstream os;
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << fixed3(v.width) << "\" height=\""
     << fixed3(v.height) << "\" data-scale=\"" << format_double(v.scale) << "\" data-ox=\""
     << format_double(v.ox) << "\" data-oy=\"" << format_double(v.oy) << "\">\n";
  os << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  if (surface_y) {
    const double y = v.oy - v.scale * *surface_y;
    os << "<line class=\"surface\" x1=\"0\" y1=\"" << fixed3(y) << "\" x2=\"" << fixed3(v.width)
       << "\" y2=\"" << fixed3(y) << "\" stroke=\"black\" stroke-width=\"1.5\"/>\n";
  }
  for (std::size_t i = 0; i < layers.size(); ++i) {
    const auto& l = layers[i];
    os << "<polyline class=\"" << (l.dashed ? "fitted" : "planned") << "\"";
    if (!l.label.empty()) os << " data-label=\"" << l.label << "\"";
    os << " fill=\"none\" stroke=\"" << layer_color(i) << "\" stroke-width=\"1.2\"";
    if (l.dashed) os << " stroke-dasharray=\"4 3\"";
    os << " points=\"";
    for (std::size_t j = 0; j < l.points.size(); ++j) {
      const auto q = v.to_svg(l.points[j]);
      os << (j ? " " : "") << fixed3(q[0]) << ',' << fixed3(q[1]);
    }
    os << "\"/>\n";
  }
  os << "</svg>\n";
  return os.str();
}

}  // namespace dloplace
