#pragma once

#include <string>
#include <vector>

#include "refmod/geometry.hpp"
#include "refmod/pure_pursuit.hpp"
#include "refmod/sim.hpp"

namespace refmod {

/// Trajectory over the map: grey drivable area, blue obstacles, green dashed
/// reference, red trajectory, yellow start/goal stars. Output is a
/// self-contained SVG string with a viewBox covering the map extent;
/// identical inputs produce identical bytes.
std::string render_trajectory_svg(const ObstacleMap& map,
                                  const PlanPath& reference,
                                  const std::vector<Vec2>& trajectory);

/// Time series in [-1, 1] (network output over an episode).
std::string render_series_svg(const std::vector<double>& t,
                              const std::vector<double>& y,
                              const std::string& y_label);

}  // namespace refmod
