#include "refmod/sim.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace refmod {

void SimParams::validate() const {
  auto positive = [](double v) { return std::isfinite(v) && v > 0.0; };
  if (!positive(wheelbase) || !positive(length) || !positive(width) ||
      !positive(mass) || !positive(friction) || !positive(gravity) ||
      !positive(delta_max) || !positive(v_max) || !positive(max_steer_rate) ||
      !positive(max_accel) || !positive(kp_steer) || !positive(kp_vel) ||
      !positive(dt) || !positive(beam_fov) || !positive(max_range)) {
    throw std::invalid_argument("SimParams: physical constants must be finite and > 0");
  }
  if (n_beams < 1) throw std::invalid_argument("SimParams: n_beams must be >= 1");
}

bool ObstacleMap::point_in_region(const Vec2& p) const {
  if (boundaries.empty()) return true;
  if (!point_in_polygon(p, boundaries.front())) return false;
  for (size_t i = 1; i < boundaries.size(); ++i) {
    if (point_in_polygon(p, boundaries[i])) return false;
  }
  return true;
}

ObstacleMap load_obstacle_map(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("cannot open map file: " + path);
  ObstacleMap map;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    std::istringstream ss(line);
    std::string tag;
    if (!(ss >> tag)) continue;
    if (tag == "boundary") {
      std::vector<Vec2> poly;
      std::string pair;
      while (ss >> pair) {
        const auto comma = pair.find(',');
        if (comma == std::string::npos) {
          throw std::invalid_argument(path + ":" + std::to_string(line_no) +
                                      ": boundary vertices must be x,y pairs");
        }
        poly.push_back({std::stod(pair.substr(0, comma)),
                        std::stod(pair.substr(comma + 1))});
      }
      if (poly.size() < 3) {
        throw std::invalid_argument(path + ":" + std::to_string(line_no) +
                                    ": boundary needs at least 3 vertices");
      }
      map.boundaries.push_back(std::move(poly));
    } else if (tag == "obstacle") {
      Rect r;
      if (!(ss >> r.center.x >> r.center.y >> r.w >> r.h)) {
        throw std::invalid_argument(path + ":" + std::to_string(line_no) +
                                    ": obstacle needs cx cy w h");
      }
      map.obstacles.push_back(r);
    } else {
      throw std::invalid_argument(path + ":" + std::to_string(line_no) +
                                  ": unknown map entry '" + tag + "'");
    }
  }
  return map;
}

void save_obstacle_map(const ObstacleMap& map, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write map file: " + path);
  out.precision(17);
  for (const auto& poly : map.boundaries) {
    out << "boundary";
    for (const auto& p : poly) out << ' ' << p.x << ',' << p.y;
    out << '\n';
  }
  for (const auto& r : map.obstacles) {
    out << "obstacle " << r.center.x << ' ' << r.center.y << ' ' << r.w << ' '
        << r.h << '\n';
  }
}

std::vector<double> beam_angles(const SimParams& params) {
  std::vector<double> angles(static_cast<size_t>(params.n_beams));
  const int n = params.n_beams;
  if (n == 1) {
    angles[0] = 0.0;
    return angles;
  }
  for (int i = 0; i < n; ++i) {
    angles[static_cast<size_t>(i)] =
        -0.5 * params.beam_fov + params.beam_fov * i / (n - 1);
  }
  return angles;
}

VehicleState step(const VehicleState& state, double v_ref, double delta_ref,
                  const SimParams& params) {
  if (!std::isfinite(v_ref) || !std::isfinite(delta_ref) ||
      !std::isfinite(state.x) || !std::isfinite(state.y) ||
      !std::isfinite(state.theta) || !std::isfinite(state.v) ||
      !std::isfinite(state.delta)) {
    throw std::invalid_argument("step: non-finite input");
  }
  delta_ref = std::clamp(delta_ref, -params.delta_max, params.delta_max);
  v_ref = std::clamp(v_ref, 0.0, params.v_max);

  VehicleState next = state;

  const double steer_rate = std::clamp(params.kp_steer * (delta_ref - state.delta),
                                       -params.max_steer_rate, params.max_steer_rate);
  next.delta = std::clamp(state.delta + steer_rate * params.dt,
                          -params.delta_max, params.delta_max);

  const double accel = std::clamp(params.kp_vel * (v_ref - state.v),
                                  -params.max_accel, params.max_accel);
  next.v = std::clamp(state.v + accel * params.dt, 0.0, params.v_max);

  next.x = state.x + next.v * std::cos(state.theta) * params.dt;
  next.y = state.y + next.v * std::sin(state.theta) * params.dt;
  next.theta = wrap_angle(state.theta +
                          next.v * std::tan(next.delta) / params.wheelbase * params.dt);
  return next;
}

namespace {

double min_hit_distance(const Vec2& origin, const Vec2& dir,
                        const ObstacleMap& map, double max_range) {
  double best = max_range;
  double t = 0.0;
  for (const auto& poly : map.boundaries) {
    const size_t n = poly.size();
    for (size_t i = 0, j = n - 1; i < n; j = i++) {
      if (ray_segment_hit(origin, dir, poly[j], poly[i], t) && t < best) best = t;
    }
  }
  for (const auto& r : map.obstacles) {
    const Vec2 c[4] = {{r.min_x(), r.min_y()},
                       {r.max_x(), r.min_y()},
                       {r.max_x(), r.max_y()},
                       {r.min_x(), r.max_y()}};
    for (int i = 0; i < 4; ++i) {
      if (ray_segment_hit(origin, dir, c[i], c[(i + 1) % 4], t) && t < best) best = t;
    }
  }
  return best;
}

}  // namespace

Scan cast_scan(const VehicleState& state, const ObstacleMap& map,
               const SimParams& params) {
  Scan scan;
  scan.angles = beam_angles(params);
  scan.ranges.resize(scan.angles.size());
  const Vec2 origin = state.position();
  for (size_t i = 0; i < scan.angles.size(); ++i) {
    const double a = state.theta + scan.angles[i];
    const Vec2 dir{std::cos(a), std::sin(a)};
    scan.ranges[i] = min_hit_distance(origin, dir, map, params.max_range);
  }
  return scan;
}

Obb vehicle_footprint(const VehicleState& state, const SimParams& params) {
  Obb box;
  const Vec2 heading{std::cos(state.theta), std::sin(state.theta)};
  box.center = state.position() + heading * (0.5 * params.length);
  box.half_len = 0.5 * params.length;
  box.half_wid = 0.5 * params.width;
  box.angle = state.theta;
  return box;
}

bool check_collision(const VehicleState& state, const ObstacleMap& map,
                     const SimParams& params) {
  const Obb foot = vehicle_footprint(state, params);
  for (const auto& r : map.obstacles) {
    if (obb_intersects_rect(foot, r)) return true;
  }
  if (map.boundaries.empty()) return false;

  const auto corners = foot.corners();
  for (const auto& c : corners) {
    if (!map.point_in_region(c)) return true;
  }
  for (const auto& poly : map.boundaries) {
    const size_t n = poly.size();
    for (size_t i = 0, j = n - 1; i < n; j = i++) {
      for (int k = 0; k < 4; ++k) {
        if (segments_intersect(poly[j], poly[i], corners[static_cast<size_t>(k)],
                               corners[static_cast<size_t>((k + 1) % 4)])) {
          return true;
        }
      }
    }
  }
  return false;
}

}  // namespace refmod
