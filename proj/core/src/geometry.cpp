#include "refmod/geometry.hpp"

#include <algorithm>

namespace refmod {

double wrap_angle(double a) {
  const double two_pi = 2.0 * M_PI;
  a = std::fmod(a, two_pi);
  if (a <= -M_PI) a += two_pi;
  if (a > M_PI) a -= two_pi;
  return a;
}

std::vector<Vec2> Obb::corners() const {
  const Vec2 ax = Vec2{std::cos(angle), std::sin(angle)};
  const Vec2 ay = ax.perp();
  const Vec2 ex = ax * half_len;
  const Vec2 ey = ay * half_wid;
  return {center + ex + ey, center - ex + ey, center - ex - ey,
          center + ex - ey};
}

bool ray_segment_hit(const Vec2& origin, const Vec2& dir, const Vec2& a,
                     const Vec2& b, double& t_out) {
  // Solve origin + t*dir = a + u*(b-a), t >= 0, u in [0,1].
  const Vec2 e = b - a;
  const double denom = dir.cross(e);
  if (denom == 0.0) return false;  // parallel (collinear treated as miss)
  const Vec2 ao = a - origin;
  const double t = ao.cross(e) / denom;
  const double u = ao.cross(dir) / denom;
  if (t < 0.0 || u < 0.0 || u > 1.0) return false;
  t_out = t;
  return true;
}

namespace {

int orientation(const Vec2& a, const Vec2& b, const Vec2& c) {
  const double v = (b - a).cross(c - a);
  if (v > 0.0) return 1;
  if (v < 0.0) return -1;
  return 0;
}

bool on_segment(const Vec2& a, const Vec2& b, const Vec2& p) {
  return std::min(a.x, b.x) <= p.x && p.x <= std::max(a.x, b.x) &&
         std::min(a.y, b.y) <= p.y && p.y <= std::max(a.y, b.y);
}

}  // namespace

bool segments_intersect(const Vec2& p1, const Vec2& p2, const Vec2& q1,
                        const Vec2& q2) {
  const int o1 = orientation(p1, p2, q1);
  const int o2 = orientation(p1, p2, q2);
  const int o3 = orientation(q1, q2, p1);
  const int o4 = orientation(q1, q2, p2);
  if (o1 != o2 && o3 != o4) return true;
  if (o1 == 0 && on_segment(p1, p2, q1)) return true;
  if (o2 == 0 && on_segment(p1, p2, q2)) return true;
  if (o3 == 0 && on_segment(q1, q2, p1)) return true;
  if (o4 == 0 && on_segment(q1, q2, p2)) return true;
  return false;
}

bool point_in_polygon(const Vec2& p, const std::vector<Vec2>& poly) {
  bool inside = false;
  const size_t n = poly.size();
  for (size_t i = 0, j = n - 1; i < n; j = i++) {
    const Vec2& a = poly[j];
    const Vec2& b = poly[i];
    if ((b.y > p.y) != (a.y > p.y)) {
      const double x_cross = b.x + (p.y - b.y) * (a.x - b.x) / (a.y - b.y);
      if (p.x < x_cross) inside = !inside;
    }
  }
  return inside;
}

bool obb_intersects_rect(const Obb& box, const Rect& rect) {
  const auto bc = box.corners();
  const std::vector<Vec2> rc = {{rect.min_x(), rect.min_y()},
                                {rect.max_x(), rect.min_y()},
                                {rect.max_x(), rect.max_y()},
                                {rect.min_x(), rect.max_y()}};
  const Vec2 axes[4] = {{1.0, 0.0},
                        {0.0, 1.0},
                        {std::cos(box.angle), std::sin(box.angle)},
                        {-std::sin(box.angle), std::cos(box.angle)}};
  for (const Vec2& ax : axes) {
    double amin = 1e300, amax = -1e300, bmin = 1e300, bmax = -1e300;
    for (const Vec2& c : bc) {
      const double v = ax.dot(c);
      amin = std::min(amin, v);
      amax = std::max(amax, v);
    }
    for (const Vec2& c : rc) {
      const double v = ax.dot(c);
      bmin = std::min(bmin, v);
      bmax = std::max(bmax, v);
    }
    if (amax < bmin || bmax < amin) return false;
  }
  return true;
}

double rect_distance(const Rect& a, const Rect& b) {
  const double dx =
      std::max({a.min_x() - b.max_x(), b.min_x() - a.max_x(), 0.0});
  const double dy =
      std::max({a.min_y() - b.max_y(), b.min_y() - a.max_y(), 0.0});
  return std::hypot(dx, dy);
}

double point_segment_distance(const Vec2& p, const Vec2& a, const Vec2& b) {
  const Vec2 ab = b - a;
  const double len2 = ab.squared_norm();
  if (len2 == 0.0) return (p - a).norm();
  const double t = std::clamp((p - a).dot(ab) / len2, 0.0, 1.0);
  return (p - (a + ab * t)).norm();
}

}  // namespace refmod
