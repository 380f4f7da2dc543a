#pragma once

#include <Eigen/Dense>
#include <optional>
#include <string>
#include <vector>

#include "refmod/pure_pursuit.hpp"
#include "refmod/sim.hpp"

namespace refmod {

/// Discretized corridor: centerline points with unit normals (left of the
/// travel direction) and the drivable width on each side of every point.
struct TrackModel {
  std::vector<Vec2> centerline;
  std::vector<Vec2> normals;
  std::vector<double> width_pos;  // along +normal [m]
  std::vector<double> width_neg;  // along -normal [m]
  bool closed{false};

  size_t size() const { return centerline.size(); }
};

/// Computes normals from central-difference tangents (periodic when closed,
/// one-sided at open ends) and validates the corridor, including that the
/// boundary polylines at the given widths do not self-intersect.
TrackModel build_track(std::vector<Vec2> centerline,
                       std::vector<double> width_pos,
                       std::vector<double> width_neg, bool closed);

/// CSV with header `x,y,w_left,w_right` (w_left is the +normal side).
TrackModel load_track(const std::string& file, bool closed);

/// Boundary polylines at the track widths (left = +normal side).
std::vector<Vec2> track_boundary(const TrackModel& track, bool left);

/// Squared second differences of the offset raceline points
/// P_k = c_k + n_k N_k (periodic wrap when closed; open tracks keep their
/// endpoints on the centerline and sum interior terms only).
double curvature_cost(const TrackModel& track, const Eigen::VectorXd& offsets);

struct OptimizeOptions {
  double wall_margin{0.0};         // shrinks the box on both sides [m]
  double obstacle_inflation{0.0};  // grows obstacle rectangles [m]
  double bound_eps{1e-6};          // strict-interior shim on the box [m]
  double tol{1e-8};                // projected-gradient residual target
  int max_iterations{200000};
};

struct Interval {
  double lo{0.0};
  double hi{0.0};
  double width() const { return hi - lo; }
};

/// Admissible offset interval at point k: the width box shrunk by the wall
/// margin, reduced to the larger obstacle-free sub-interval when the normal
/// segment crosses any (inflated) obstacle. Throws when nothing remains.
Interval admissible_interval(const TrackModel& track, size_t k,
                             const ObstacleMap* obstacles,
                             const OptimizeOptions& opts);

struct OffsetResult {
  Eigen::VectorXd offsets;  // one entry per track point
  double cost{0.0};
  double kkt_residual{0.0};
  int iterations{0};
};

/// Minimizes curvature_cost subject to the admissible-interval boxes:
/// projected gradient with a spectral step (Nesterov-accelerated) plus an
/// active-set polish so the projected-gradient residual meets opts.tol.
OffsetResult optimize_offsets(const TrackModel& track,
                              const ObstacleMap* obstacles,
                              const OptimizeOptions& opts = {});

/// Offset raceline resampled to uniform arclength spacing
/// (size() * samples_per_segment points along the polyline).
PlanPath to_plan_path(const TrackModel& track, const Eigen::VectorXd& offsets,
                      int samples_per_segment);

}  // namespace refmod
