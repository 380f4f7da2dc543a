#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "refmod/config.hpp"
#include "refmod/environments.hpp"
#include "refmod/global_plan.hpp"
#include "refmod/td3.hpp"

namespace refmod {

/// Parsed run settings (config file keys, see README for the key reference).
struct HarnessSettings {
  SimParams sim;
  PPConfig pp;
  RewardConfig reward;
  Td3Config td3;
  ForestSpec forest;
  TrackObstacleSpec track_obstacles;

  std::string environment{"forest"};        // forest | track
  std::vector<std::string> planners{{"hybrid"}};  // hybrid | benchmark | pure-pursuit
  uint64_t seed{0};
  int episodes{100};
  int64_t train_steps{100000};
  double max_episode_seconds{60.0};
  std::string track_file;
  bool track_closed{true};
  double wall_margin{0.3};        // raceline clearance to the walls [m]
  double obstacle_margin{0.25};   // benchmark clearance beyond half width [m]
  double plan_spacing{0.1};       // raceline resample spacing [m]
  int eval_workers{2};
  int eval_save_traces{1};
  int64_t checkpoint_every{10000};
  bool keep_snapshots{false};
  std::string checkpoint;
  std::string out_dir{"out"};

  size_t max_episode_steps() const;
};

HarnessSettings parse_settings(const Config& cfg);

/// Builds evaluation/training worlds for the configured environment and
/// plans the references the planners follow. Construction runs the global
/// planner once for the nominal reference; benchmark_plan re-plans around a
/// world's obstacles.
class EnvironmentFactory {
 public:
  explicit EnvironmentFactory(const HarnessSettings& settings);

  World make_world(uint64_t episode_seed, bool with_obstacles) const;
  PlanPath benchmark_plan(const World& world) const;
  const PlanPath& nominal_reference() const { return nominal_; }

 private:
  HarnessSettings s_;
  std::optional<TrackModel> track_;        // race track (track environment)
  std::optional<TrackModel> strip_track_;  // forest corridor model
  PlanPath nominal_;
};

struct TrainEpisodeRow {
  int64_t step{0};
  double episode_reward{0.0};
  double success_rate_window{0.0};
  double mean_abs_delta_nn{0.0};
};

struct TrainOptions {
  int64_t total_steps{100000};
  std::string snapshot_dir;  // empty disables periodic snapshots
  int64_t checkpoint_every{10000};
  std::function<void(int64_t, const TrainEpisodeRow&)> on_episode;
};

struct TrainOutput {
  Td3Agent agent;
  std::vector<TrainEpisodeRow> curve;
  int64_t episodes{0};
};

/// Runs the TD3 loop in the configured environment (fresh obstacle layout
/// every episode). Fully seed-deterministic.
TrainOutput train_td3(const HarnessSettings& settings, uint64_t seed,
                      const TrainOptions& opts);

void write_training_curve(const std::vector<TrainEpisodeRow>& curve,
                          const std::string& path);

/// Per-condition evaluation summary (success percentage, mean time over the
/// successful episodes).
struct EvalCell {
  std::string planner;
  bool with_obstacles{false};
  int episodes{0};
  int successes{0};
  int crashes{0};
  int timeouts{0};
  double mean_time_success{0.0};
  double mean_abs_action{0.0};
};

struct EvalReport {
  std::vector<EvalCell> cells;
  std::string table_text;
};

EvalReport evaluate(const HarnessSettings& settings);

/// CLI entry points; each writes its outputs plus a manifest under the
/// configured output directory and throws on validation/runtime errors.
void cmd_train(const Config& cfg);
void cmd_eval(const Config& cfg);
void cmd_plan(const Config& cfg);
void cmd_plot(const Config& cfg);

}  // namespace refmod
