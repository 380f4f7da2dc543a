#pragma once

#include <cmath>
#include <vector>

namespace refmod {

struct Vec2 {
  double x{0.0};
  double y{0.0};

  Vec2() = default;
  Vec2(double x_, double y_) : x(x_), y(y_) {}

  Vec2 operator+(const Vec2& o) const { return {x + o.x, y + o.y}; }
  Vec2 operator-(const Vec2& o) const { return {x - o.x, y - o.y}; }
  Vec2 operator*(double s) const { return {x * s, y * s}; }
  Vec2 operator/(double s) const { return {x / s, y / s}; }

  double dot(const Vec2& o) const { return x * o.x + y * o.y; }
  double cross(const Vec2& o) const { return x * o.y - y * o.x; }
  double norm() const { return std::hypot(x, y); }
  double squared_norm() const { return x * x + y * y; }
  Vec2 normalized() const {
    const double n = norm();
    return n > 0.0 ? Vec2{x / n, y / n} : Vec2{0.0, 0.0};
  }
  // 90 degree counter-clockwise rotation
  Vec2 perp() const { return {-y, x}; }
  Vec2 rotated(double angle) const {
    const double c = std::cos(angle), s = std::sin(angle);
    return {c * x - s * y, s * x + c * y};
  }
};

inline Vec2 operator*(double s, const Vec2& v) { return v * s; }

/// Wraps an angle to (-pi, pi].
double wrap_angle(double a);

/// Axis-aligned rectangle given by center and full side lengths.
struct Rect {
  Vec2 center;
  double w{0.0};
  double h{0.0};

  double min_x() const { return center.x - 0.5 * w; }
  double max_x() const { return center.x + 0.5 * w; }
  double min_y() const { return center.y - 0.5 * h; }
  double max_y() const { return center.y + 0.5 * h; }
};

/// Oriented rectangle (vehicle footprint).
struct Obb {
  Vec2 center;
  double half_len{0.0};
  double half_wid{0.0};
  double angle{0.0};

  std::vector<Vec2> corners() const;
};

/// First hit of the ray origin + t*dir (t >= 0) against segment [a, b].
/// Returns true and the ray parameter t on hit. dir need not be unit length;
/// t is in units of |dir|.
bool ray_segment_hit(const Vec2& origin, const Vec2& dir, const Vec2& a,
                     const Vec2& b, double& t_out);

/// Proper or touching intersection of segments [p1,p2] and [q1,q2].
bool segments_intersect(const Vec2& p1, const Vec2& p2, const Vec2& q1,
                        const Vec2& q2);

/// Even-odd test against a closed polygon (last vertex connects to first).
bool point_in_polygon(const Vec2& p, const std::vector<Vec2>& poly);

/// Separating-axis test between an oriented box and an axis-aligned rectangle.
bool obb_intersects_rect(const Obb& box, const Rect& rect);

/// Euclidean distance between the boundaries of two axis-aligned rectangles
/// (zero if they overlap).
double rect_distance(const Rect& a, const Rect& b);

/// Shortest distance from a point to a segment.
double point_segment_distance(const Vec2& p, const Vec2& a, const Vec2& b);

}  // namespace refmod
