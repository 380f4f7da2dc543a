#include "refmod/pure_pursuit.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>
#include <stdexcept>

namespace refmod {

double PlanPath::total_length() const {
  if (waypoints.empty()) return 0.0;
  double len = arclength.back();
  if (closed) len += (waypoints.front() - waypoints.back()).norm();
  return len;
}

PlanPath make_plan_path(std::vector<Vec2> waypoints, bool closed) {
  if (waypoints.size() < 2) {
    throw std::invalid_argument("plan path needs at least 2 waypoints");
  }
  PlanPath path;
  path.closed = closed;
  path.arclength.resize(waypoints.size());
  path.arclength[0] = 0.0;
  for (size_t i = 1; i < waypoints.size(); ++i) {
    const double d = (waypoints[i] - waypoints[i - 1]).norm();
    if (d == 0.0) {
      throw std::invalid_argument("plan path has coincident consecutive waypoints");
    }
    path.arclength[i] = path.arclength[i - 1] + d;
  }
  if (closed && (waypoints.front() - waypoints.back()).norm() == 0.0) {
    throw std::invalid_argument("closed plan path repeats the first waypoint");
  }
  path.waypoints = std::move(waypoints);
  return path;
}

PlanPath load_plan_path(const std::string& file, bool closed) {
  std::ifstream in(file);
  if (!in) throw std::invalid_argument("cannot open plan path: " + file);
  std::string line;
  if (!std::getline(in, line)) {
    throw std::invalid_argument(file + ": empty plan path file");
  }
  std::vector<Vec2> pts;
  int line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line[0] == '#') continue;
    std::istringstream ss(line);
    Vec2 p;
    char comma;
    if (!(ss >> p.x >> comma >> p.y) || comma != ',') {
      throw std::invalid_argument(file + ":" + std::to_string(line_no) +
                                  ": expected x,y");
    }
    pts.push_back(p);
  }
  return make_plan_path(std::move(pts), closed);
}

void save_plan_path(const PlanPath& path, const std::string& file) {
  std::ofstream out(file);
  if (!out) throw std::runtime_error("cannot write plan path: " + file);
  out.precision(17);
  out << "x,y\n";
  for (const auto& p : path.waypoints) out << p.x << ',' << p.y << '\n';
}

namespace {

// Endpoints of segment k, accounting for the implicit closing segment.
void segment_endpoints(const PlanPath& path, size_t k, Vec2& a, Vec2& b) {
  a = path.waypoints[k];
  b = path.waypoints[(k + 1) % path.waypoints.size()];
}

// Projection data for the on-path point at arclength s.
PathProjection projection_at(const PlanPath& path, double s) {
  const double total = path.total_length();
  if (path.closed) {
    s = std::fmod(s, total);
    if (s < 0.0) s += total;
  } else {
    s = std::clamp(s, 0.0, total);
  }
  // arclength is strictly increasing: binary-search the segment.
  const auto it =
      std::upper_bound(path.arclength.begin(), path.arclength.end(), s);
  size_t k = it == path.arclength.begin()
                 ? 0
                 : static_cast<size_t>(it - path.arclength.begin()) - 1;
  k = std::min(k, path.segment_count() - 1);
  PathProjection proj;
  Vec2 a, b;
  segment_endpoints(path, k, a, b);
  const double len = (b - a).norm();
  proj.segment = k;
  proj.t = std::clamp((s - path.arclength[k]) / len, 0.0, 1.0);
  proj.s = s;
  proj.distance = 0.0;
  proj.point = a + (b - a) * proj.t;
  return proj;
}

}  // namespace

PathProjection project_onto_path(const PlanPath& path, const Vec2& p) {
  PathProjection best;
  best.distance = std::numeric_limits<double>::infinity();
  Vec2 a, b;
  for (size_t k = 0; k < path.segment_count(); ++k) {
    segment_endpoints(path, k, a, b);
    const Vec2 e = b - a;
    const double t = std::clamp((p - a).dot(e) / e.squared_norm(), 0.0, 1.0);
    const Vec2 q = a + e * t;
    const double d = (p - q).norm();
    if (d < best.distance) {
      best.distance = d;
      best.segment = k;
      best.t = t;
      best.point = q;
      best.s = path.arclength[k] + e.norm() * t;
    }
  }
  return best;
}

void path_point_at(const PlanPath& path, double s, Vec2& point, Vec2& tangent) {
  const PathProjection proj = projection_at(path, s);
  point = proj.point;
  Vec2 a, b;
  segment_endpoints(path, proj.segment, a, b);
  tangent = (b - a).normalized();
}

namespace {

// First crossing of the circle |q - center| = radius along segment [a,b],
// restricted to parameters >= t_min. Returns the parameter in [t_min, 1].
bool circle_segment_crossing(const Vec2& a, const Vec2& b, const Vec2& center,
                             double radius, double t_min, double& t_out) {
  const Vec2 e = b - a;
  const Vec2 f = a - center;
  const double qa = e.squared_norm();
  if (qa == 0.0) return false;
  const double qb = 2.0 * f.dot(e);
  const double qc = f.squared_norm() - radius * radius;
  const double disc = qb * qb - 4.0 * qa * qc;
  if (disc < 0.0) return false;
  const double sq = std::sqrt(disc);
  for (const double t : {(-qb - sq) / (2.0 * qa), (-qb + sq) / (2.0 * qa)}) {
    if (t >= t_min && t <= 1.0) {
      t_out = t;
      return true;
    }
  }
  return false;
}

Vec2 lookahead_from(const PlanPath& path, const Vec2& pos,
                    const PathProjection& proj, double l_d) {
  const size_t nseg = path.segment_count();
  const size_t max_walk = path.closed ? nseg + 1 : nseg - proj.segment;
  double t_min = proj.t;
  Vec2 a, b;
  for (size_t i = 0; i < max_walk; ++i) {
    const size_t k = (proj.segment + i) % nseg;
    segment_endpoints(path, k, a, b);
    double t = 0.0;
    if (circle_segment_crossing(a, b, pos, l_d, t_min, t)) {
      return a + (b - a) * t;
    }
    t_min = 0.0;
  }
  // Open path ending closer than l_d, or no crossing anywhere on a loop.
  return path.closed ? proj.point : path.waypoints.back();
}

}  // namespace

Vec2 find_lookahead(const PlanPath& path, const VehicleState& state, double l_d) {
  if (l_d <= 0.0) throw std::invalid_argument("lookahead must be > 0");
  const Vec2 pos = state.position();
  return lookahead_from(path, pos, project_onto_path(path, pos), l_d);
}

double pp_steering(const VehicleState& state, const Vec2& target,
                   double wheelbase, double l_d, double delta_max) {
  const Vec2 to_target = target - state.position();
  if (to_target.squared_norm() == 0.0) {
    throw std::invalid_argument("pp_steering: target coincides with vehicle");
  }
  const double alpha =
      wrap_angle(std::atan2(to_target.y, to_target.x) - state.theta);
  const double delta = std::atan(2.0 * wheelbase * std::sin(alpha) / l_d);
  return std::clamp(delta, -delta_max, delta_max);
}

double friction_velocity(double delta_max_horizon, const SimParams& params) {
  const double d = std::abs(delta_max_horizon);
  if (d < 1e-12) return params.v_max;
  const double v = std::sqrt(params.friction * params.gravity *
                             params.wheelbase / std::tan(d));
  return std::clamp(v, 0.0, params.v_max);
}

PpCommand pp_plan(const VehicleState& state, const PlanPath& path,
                  const PPConfig& cfg, const SimParams& params) {
  const Vec2 pos = state.position();
  const PathProjection proj = project_onto_path(path, pos);
  const Vec2 target = lookahead_from(path, pos, proj, cfg.lookahead);

  PpCommand cmd;
  const double dist = std::max((target - pos).norm(), 1e-9);
  cmd.delta_ref = pp_steering(state, target, params.wheelbase, dist,
                              params.delta_max);

  // Horizon sweep: steering the follower would command at on-path poses over
  // the next cfg.horizon meters, sampled at the projection point and at each
  // waypoint in range.
  const double total = path.total_length();
  double delta_horizon = 0.0;
  auto sample = [&](const PathProjection& p) {
    Vec2 a, b;
    segment_endpoints(path, p.segment, a, b);
    const Vec2 tangent = (b - a).normalized();
    VehicleState pose;
    pose.x = p.point.x;
    pose.y = p.point.y;
    pose.theta = std::atan2(tangent.y, tangent.x);
    const Vec2 tgt = lookahead_from(path, p.point, p, cfg.lookahead);
    const double d = (tgt - p.point).norm();
    if (d > 1e-9) {
      const double steer =
          pp_steering(pose, tgt, params.wheelbase, d, params.delta_max);
      delta_horizon = std::max(delta_horizon, std::abs(steer));
    }
  };

  sample(projection_at(path, proj.s));
  const double s_end =
      path.closed ? proj.s + cfg.horizon : std::min(proj.s + cfg.horizon, total);
  const size_t n = path.waypoints.size();
  size_t i = (proj.segment + 1) % n;
  for (size_t walked = 0; walked < n; ++walked, i = (i + 1) % n) {
    if (!path.closed && i == 0) break;
    double s = path.arclength[i];
    if (path.closed && s <= proj.s) s += total;
    if (s > s_end) break;
    if (s > proj.s) sample(projection_at(path, s));
  }

  cmd.v_ref = friction_velocity(delta_horizon, params);
  return cmd;
}

}  // namespace refmod
