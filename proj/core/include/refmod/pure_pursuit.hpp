#pragma once

#include <string>
#include <vector>

#include "refmod/geometry.hpp"
#include "refmod/sim.hpp"

namespace refmod {

/// Piecewise-linear reference path. `arclength[i]` is the cumulative distance
/// from the first waypoint; for closed paths the segment from the last
/// waypoint back to the first is implicit.
struct PlanPath {
  std::vector<Vec2> waypoints;
  std::vector<double> arclength;
  bool closed{false};

  double total_length() const;
  size_t segment_count() const {
    return closed ? waypoints.size() : waypoints.size() - 1;
  }
};

struct PPConfig {
  double lookahead{1.0};  // l_d [m]
  double horizon{2.0};    // upcoming arclength scanned for delta_max [m]
};

struct PathProjection {
  size_t segment{0};   // index of the nearest segment
  double t{0.0};       // parameter within that segment, in [0, 1]
  double s{0.0};       // arclength of the nearest point
  double distance{0.0};
  Vec2 point;
};

/// Validates waypoints (>= 2, consecutive distinct) and computes arclengths.
PlanPath make_plan_path(std::vector<Vec2> waypoints, bool closed);

/// CSV with header `x,y`, one waypoint per row.
PlanPath load_plan_path(const std::string& file, bool closed);
void save_plan_path(const PlanPath& path, const std::string& file);

/// Nearest point on the path to p (full search over segments).
PathProjection project_onto_path(const PlanPath& path, const Vec2& p);

/// Position and unit tangent at arclength s (wrapped on closed paths,
/// clamped on open ones).
void path_point_at(const PlanPath& path, double s, Vec2& point, Vec2& tangent);

/// First point on the path, at or beyond the nearest-point projection of the
/// vehicle, at straight-line distance l_d from the vehicle. Falls back to the
/// final waypoint when an open path ends closer than l_d.
Vec2 find_lookahead(const PlanPath& path, const VehicleState& state, double l_d);

/// Pure pursuit steering toward `target`: alpha is the signed angle from the
/// heading to the target bearing, delta = arctan(2 L sin(alpha) / l_d),
/// clipped to [-delta_max, delta_max].
double pp_steering(const VehicleState& state, const Vec2& target,
                   double wheelbase, double l_d, double delta_max);

/// Friction-limited speed for a given steering magnitude:
/// V = sqrt(b g l / tan(delta)), clipped to [0, v_max]. delta -> 0 yields
/// v_max.
double friction_velocity(double delta_max_horizon, const SimParams& params);

struct PpCommand {
  double v_ref{0.0};
  double delta_ref{0.0};
};

/// Full follower: steering from the lookahead target, velocity from the
/// friction limit at the largest |steering| over the upcoming horizon
/// (sampled at waypoint resolution with the vehicle assumed on-path).
PpCommand pp_plan(const VehicleState& state, const PlanPath& path,
                  const PPConfig& cfg, const SimParams& params);

}  // namespace refmod
