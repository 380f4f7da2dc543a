#pragma once

#include <string>
#include <vector>

#include "refmod/geometry.hpp"

namespace refmod {

/// Pose, speed and steering angle of the simulated car. The position is the
/// rear-axle point; heading is wrapped to (-pi, pi], |delta| <= delta_max and
/// 0 <= v <= v_max are maintained by step().
struct VehicleState {
  double x{0.0};      // east position [m]
  double y{0.0};      // north position [m]
  double theta{0.0};  // heading [rad]
  double v{0.0};      // speed [m/s]
  double delta{0.0};  // steering angle [rad]

  Vec2 position() const { return {x, y}; }
};

struct SimParams {
  double wheelbase{0.33};       // l [m]
  double length{0.5};           // L, footprint length [m]
  double width{0.30};           // footprint width [m]
  double mass{3.74};            // m [kg]
  double friction{0.8};         // b [-]
  double gravity{9.81};         // g [m/s^2]
  double delta_max{0.4};        // [rad]
  double v_max{7.0};            // [m/s]
  double max_steer_rate{3.2};   // [rad/s]
  double max_accel{8.0};        // [m/s^2]
  double kp_steer{40.0};        // low-level steering gain [1/s]
  double kp_vel{5.0};           // low-level velocity gain [1/s]
  double dt{0.01};              // integration step [s]
  int n_beams{10};
  double beam_fov{M_PI};        // total angular spread [rad]
  double max_range{10.0};       // [m]

  void validate() const;  // throws std::invalid_argument on bad values
};

/// Fixed-length range-finder sweep. Beam i points at angles[i] relative to
/// the vehicle heading; beams span beam_fov symmetrically, endpoints included.
struct Scan {
  std::vector<double> ranges;
  std::vector<double> angles;
};

/// Drivable region bounded by closed polygons (first polygon is the outer
/// boundary, any further ones are holes) with axis-aligned rectangular
/// obstacles inside. An empty boundary list means unbounded open space.
struct ObstacleMap {
  std::vector<std::vector<Vec2>> boundaries;
  std::vector<Rect> obstacles;

  bool point_in_region(const Vec2& p) const;
};

/// Loads the line-oriented map format:
///   boundary x0,y0 x1,y1 x2,y2 ...
///   obstacle cx cy w h
///   # comment
ObstacleMap load_obstacle_map(const std::string& path);
void save_obstacle_map(const ObstacleMap& map, const std::string& path);

/// Beam offsets from heading for the given params (evenly spaced over
/// beam_fov, endpoints included; a single beam points straight ahead).
std::vector<double> beam_angles(const SimParams& params);

/// Advances the vehicle one dt: the proportional low-level controller moves
/// delta toward delta_ref (rate limited) and v toward v_ref (acceleration
/// limited), then the kinematic bicycle model integrates one explicit Euler
/// step. Throws std::invalid_argument on non-finite input.
VehicleState step(const VehicleState& state, double v_ref, double delta_ref,
                  const SimParams& params);

/// Casts every beam against all obstacle edges and region boundaries; ranges
/// are clipped to max_range.
Scan cast_scan(const VehicleState& state, const ObstacleMap& map,
               const SimParams& params);

/// True iff the vehicle footprint (length x width rectangle extending forward
/// from the rear axle) intersects an obstacle or leaves the drivable region.
bool check_collision(const VehicleState& state, const ObstacleMap& map,
                     const SimParams& params);

/// Footprint rectangle used by check_collision.
Obb vehicle_footprint(const VehicleState& state, const SimParams& params);

}  // namespace refmod
