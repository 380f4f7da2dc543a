#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "refmod/global_plan.hpp"
#include "refmod/mod_planner.hpp"
#include "refmod/pure_pursuit.hpp"
#include "refmod/sim.hpp"

namespace refmod {

/// Straight strip with seeded square obstacles. The free gap between any two
/// obstacles is kept at or above vehicle width + gap_margin so a corridor
/// through the field always exists.
struct ForestSpec {
  double length{25.0};
  double width{8.0};
  int obstacle_count{6};
  double obstacle_size{1.0};
  double gap_margin{0.4};
  double start_clear{3.0};
  double goal_clear{2.0};
  uint64_t seed{0};
};

/// Everything an episode needs: map, reference path, start pose and the
/// termination condition (a goal line for strips, a full lap for loops).
struct World {
  enum class Goal { LineX, Lap };

  ObstacleMap map;
  PlanPath reference;
  VehicleState start;
  Goal goal{Goal::LineX};
  double goal_x{0.0};
  double lap_length{0.0};
};

World gen_forest(const ForestSpec& spec, const SimParams& params);

/// Seeded obstacles on a closed track at random arclength/lateral positions.
/// Every obstacle keeps at least vehicle width + margin of free lateral room
/// on one side and min_arc_gap of arclength to its neighbours.
struct TrackObstacleSpec {
  int count{6};
  double size{0.7};
  double min_arc_gap{4.0};
  double margin{0.3};
  double start_clear_arc{5.0};
  uint64_t seed{0};
};

ObstacleMap place_track_obstacles(const TrackModel& track,
                                  const TrackObstacleSpec& spec,
                                  const SimParams& params);

/// Track region only (boundary polygons, no obstacles).
ObstacleMap track_map(const TrackModel& track);

/// Assembles a lap world from a track and a reference raceline, starting at
/// the raceline's first point.
World make_track_world(const TrackModel& track, PlanPath raceline,
                       ObstacleMap map);

enum class Outcome { Success, Crash, Timeout };

struct StepRecord {
  size_t step{0};
  double t{0.0};
  VehicleState state;  // state after the step
  double v_ref{0.0};
  double delta_ref{0.0};
  double pf_v_ref{0.0};
  double pf_delta_ref{0.0};
  double action{0.0};
  double delta_nn{0.0};
  double reward{0.0};
};

struct EpisodeOutcome {
  Outcome outcome{Outcome::Timeout};
  bool success{false};
  double elapsed{0.0};
  size_t steps{0};
  double sum_reward{0.0};
  double mean_abs_action{0.0};
  std::vector<StepRecord> trace;
};

/// Per-step policy interface used by episode execution.
class LocalPlanner {
 public:
  virtual ~LocalPlanner() = default;
  virtual HybridStep plan(const VehicleState& state, const Scan& scan) = 0;
};

/// Executed pure pursuit: follower plus the safety filter (zero action).
class PurePursuitPlanner final : public LocalPlanner {
 public:
  PurePursuitPlanner(PlanPath path, PPConfig cfg, SimParams params)
      : path_(std::move(path)), cfg_(cfg), params_(params) {}
  HybridStep plan(const VehicleState& state, const Scan& scan) override {
    return plan_pure_pursuit(state, scan, path_, cfg_, params_);
  }

 private:
  PlanPath path_;
  PPConfig cfg_;
  SimParams params_;
};

/// Hybrid planner evaluating a fixed actor (no exploration noise).
class HybridPlanner final : public LocalPlanner {
 public:
  HybridPlanner(PlanPath path, PPConfig cfg, SimParams params, Mlp actor)
      : path_(std::move(path)), cfg_(cfg), params_(params),
        actor_(std::move(actor)) {}
  HybridStep plan(const VehicleState& state, const Scan& scan) override {
    return plan_hybrid(state, scan, path_, cfg_, params_, actor_);
  }
  const PlanPath& path() const { return path_; }

 private:
  PlanPath path_;
  PPConfig cfg_;
  SimParams params_;
  Mlp actor_;
};

/// scan -> plan -> step -> collision/goal check until crash, goal or timeout.
EpisodeOutcome run_episode(LocalPlanner& planner, const World& world,
                           const SimParams& params, const RewardConfig& rcfg,
                           size_t max_steps);

void save_episode_csv(const EpisodeOutcome& episode, const std::string& path);

struct EpisodeTrace {
  std::vector<StepRecord> rows;
  std::string summary;
};

/// Parses an episode CSV; malformed rows raise with the line number.
EpisodeTrace load_episode_csv(const std::string& path);

}  // namespace refmod
