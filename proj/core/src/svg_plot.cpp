#include "refmod/svg_plot.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>
#include <stdexcept>

namespace refmod {

namespace {

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.6g", v);
  return buf;
}

struct Extent {
  double min_x{1e300}, min_y{1e300}, max_x{-1e300}, max_y{-1e300};

  void add(const Vec2& p) {
    min_x = std::min(min_x, p.x);
    max_x = std::max(max_x, p.x);
    min_y = std::min(min_y, p.y);
    max_y = std::max(max_y, p.y);
  }
  bool empty() const { return min_x > max_x; }
};

// SVG y grows downward; flip about the extent's vertical center.
struct Mapper {
  double flip_sum;
  double map_y(double y) const { return flip_sum - y; }
};

std::string polyline_points(const std::vector<Vec2>& pts, const Mapper& m) {
  std::string out;
  for (const Vec2& p : pts) {
    if (!out.empty()) out += ' ';
    out += fmt(p.x) + ',' + fmt(m.map_y(p.y));
  }
  return out;
}

std::string star(const Vec2& center, double r, const Mapper& m,
                 const char* fill) {
  std::string pts;
  for (int i = 0; i < 10; ++i) {
    const double angle = M_PI / 2.0 + static_cast<double>(i) * M_PI / 5.0;
    const double rad = i % 2 == 0 ? r : 0.45 * r;
    const Vec2 p{center.x + rad * std::cos(angle),
                 center.y + rad * std::sin(angle)};
    if (!pts.empty()) pts += ' ';
    pts += fmt(p.x) + ',' + fmt(m.map_y(p.y));
  }
  return "  <polygon points=\"" + pts + "\" fill=\"" + fill +
         "\" stroke=\"black\" stroke-width=\"0.02\"/>\n";
}

}  // namespace

std::string render_trajectory_svg(const ObstacleMap& map,
                                  const PlanPath& reference,
                                  const std::vector<Vec2>& trajectory) {
  Extent ext;
  for (const auto& poly : map.boundaries) {
    for (const Vec2& p : poly) ext.add(p);
  }
  for (const auto& r : map.obstacles) {
    ext.add({r.min_x(), r.min_y()});
    ext.add({r.max_x(), r.max_y()});
  }
  for (const Vec2& p : reference.waypoints) ext.add(p);
  if (ext.empty()) {
    for (const Vec2& p : trajectory) ext.add(p);
  }
  if (ext.empty()) throw std::invalid_argument("nothing to plot");

  const double pad = 1.0;
  ext.min_x -= pad;
  ext.min_y -= pad;
  ext.max_x += pad;
  ext.max_y += pad;
  const Mapper m{ext.min_y + ext.max_y};

  std::ostringstream svg;
  svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" viewBox=\"" << fmt(ext.min_x)
      << ' ' << fmt(ext.min_y) << ' ' << fmt(ext.max_x - ext.min_x) << ' '
      << fmt(ext.max_y - ext.min_y) << "\" width=\"900\">\n";
  svg << "  <rect x=\"" << fmt(ext.min_x) << "\" y=\"" << fmt(ext.min_y)
      << "\" width=\"" << fmt(ext.max_x - ext.min_x) << "\" height=\""
      << fmt(ext.max_y - ext.min_y) << "\" fill=\"white\"/>\n";

  if (!map.boundaries.empty()) {
    svg << "  <path d=\"";
    for (const auto& poly : map.boundaries) {
      for (size_t i = 0; i < poly.size(); ++i) {
        svg << (i == 0 ? 'M' : 'L') << fmt(poly[i].x) << ' '
            << fmt(m.map_y(poly[i].y)) << ' ';
      }
      svg << "Z ";
    }
    svg << "\" fill=\"#dddddd\" fill-rule=\"evenodd\" stroke=\"black\" "
           "stroke-width=\"0.05\"/>\n";
  }
  for (const auto& r : map.obstacles) {
    svg << "  <rect x=\"" << fmt(r.min_x()) << "\" y=\"" << fmt(m.map_y(r.max_y()))
        << "\" width=\"" << fmt(r.w) << "\" height=\"" << fmt(r.h)
        << "\" fill=\"#4a6fd4\"/>\n";
  }
  if (!reference.waypoints.empty()) {
    svg << "  <polyline points=\"" << polyline_points(reference.waypoints, m)
        << "\" fill=\"none\" stroke=\"#2a9d2a\" stroke-width=\"0.06\" "
           "stroke-dasharray=\"0.3 0.25\"/>\n";
  }
  if (!trajectory.empty()) {
    svg << "  <polyline points=\"" << polyline_points(trajectory, m)
        << "\" fill=\"none\" stroke=\"#d43a3a\" stroke-width=\"0.08\"/>\n";
  }
  if (!reference.waypoints.empty()) {
    svg << star(reference.waypoints.front(), 0.45, m, "#f5d33a");
    if (!reference.closed) {
      svg << star(reference.waypoints.back(), 0.45, m, "#f5d33a");
    }
  }
  svg << "</svg>\n";
  return svg.str();
}

std::string render_series_svg(const std::vector<double>& t,
                              const std::vector<double>& y,
                              const std::string& y_label) {
  if (t.size() != y.size()) {
    throw std::invalid_argument("series lengths differ");
  }
  const double width = 900.0, height = 260.0;
  const double ml = 60.0, mr = 15.0, mt = 15.0, mb = 40.0;
  const double t_max = t.empty() ? 1.0 : std::max(t.back(), 1e-9);
  auto px = [&](double tv) { return ml + (width - ml - mr) * tv / t_max; };
  auto py = [&](double yv) {
    const double clamped = std::clamp(yv, -1.0, 1.0);
    return mt + (height - mt - mb) * (1.0 - (clamped + 1.0) / 2.0);
  };

  std::ostringstream svg;
  svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << fmt(width)
      << "\" height=\"" << fmt(height) << "\">\n";
  svg << "  <rect width=\"" << fmt(width) << "\" height=\"" << fmt(height)
      << "\" fill=\"white\"/>\n";
  for (const double g : {-1.0, -0.5, 0.0, 0.5, 1.0}) {
    svg << "  <line x1=\"" << fmt(ml) << "\" y1=\"" << fmt(py(g)) << "\" x2=\""
        << fmt(width - mr) << "\" y2=\"" << fmt(py(g))
        << "\" stroke=\"#cccccc\" stroke-dasharray=\"4 4\"/>\n";
    svg << "  <text x=\"" << fmt(ml - 8.0) << "\" y=\"" << fmt(py(g) + 4.0)
        << "\" text-anchor=\"end\" font-size=\"12\">" << fmt(g) << "</text>\n";
  }
  if (!t.empty()) {
    std::string pts;
    for (size_t i = 0; i < t.size(); ++i) {
      if (!pts.empty()) pts += ' ';
      pts += fmt(px(t[i])) + ',' + fmt(py(y[i]));
    }
    svg << "  <polyline points=\"" << pts
        << "\" fill=\"none\" stroke=\"#2a4fd4\" stroke-width=\"1.5\"/>\n";
  }
  svg << "  <text x=\"" << fmt(ml + (width - ml - mr) / 2.0) << "\" y=\""
      << fmt(height - 10.0) << "\" text-anchor=\"middle\" font-size=\"13\">"
      << "Time [s]</text>\n";
  svg << "  <text x=\"14\" y=\"" << fmt(mt + (height - mt - mb) / 2.0)
      << "\" font-size=\"13\" transform=\"rotate(-90 14 "
      << fmt(mt + (height - mt - mb) / 2.0) << ")\" text-anchor=\"middle\">"
      << y_label << "</text>\n";
  svg << "</svg>\n";
  return svg.str();
}

}  // namespace refmod
