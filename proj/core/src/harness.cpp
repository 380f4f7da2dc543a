#include "refmod/harness.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <sstream>
#include <stdexcept>
#include <thread>

#include <nlohmann/json.hpp>

#include "refmod/rng.hpp"
#include "refmod/svg_plot.hpp"

namespace refmod {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> items;
  std::string item;
  std::istringstream ss(s);
  while (std::getline(ss, item, ',')) {
    const auto b = item.find_first_not_of(" \t");
    const auto e = item.find_last_not_of(" \t");
    if (b != std::string::npos) items.push_back(item.substr(b, e - b + 1));
  }
  return items;
}

}  // namespace

HarnessSettings parse_settings(const Config& cfg) {
  HarnessSettings s;

  s.sim.wheelbase = cfg.get_double("sim.wheelbase", s.sim.wheelbase);
  s.sim.length = cfg.get_double("sim.length", s.sim.length);
  s.sim.width = cfg.get_double("sim.width", s.sim.width);
  s.sim.mass = cfg.get_double("sim.mass", s.sim.mass);
  s.sim.friction = cfg.get_double("sim.friction", s.sim.friction);
  s.sim.gravity = cfg.get_double("sim.gravity", s.sim.gravity);
  s.sim.delta_max = cfg.get_double("sim.delta_max", s.sim.delta_max);
  s.sim.v_max = cfg.get_double("sim.v_max", s.sim.v_max);
  s.sim.max_steer_rate = cfg.get_double("sim.max_steer_rate", s.sim.max_steer_rate);
  s.sim.max_accel = cfg.get_double("sim.max_accel", s.sim.max_accel);
  s.sim.kp_steer = cfg.get_double("sim.kp_steer", s.sim.kp_steer);
  s.sim.kp_vel = cfg.get_double("sim.kp_vel", s.sim.kp_vel);
  s.sim.dt = cfg.get_double("sim.dt", s.sim.dt);
  s.sim.n_beams = static_cast<int>(cfg.get_int("sim.n_beams", s.sim.n_beams));
  s.sim.beam_fov = cfg.get_double("sim.beam_fov", s.sim.beam_fov);
  s.sim.max_range = cfg.get_double("sim.max_range", s.sim.max_range);
  s.sim.validate();

  s.pp.lookahead = cfg.get_double("pp.lookahead", s.pp.lookahead);
  s.pp.horizon = cfg.get_double("pp.horizon", s.pp.horizon);
  if (s.pp.lookahead <= 0.0 || s.pp.horizon <= 0.0) {
    throw std::invalid_argument("pp.lookahead and pp.horizon must be > 0");
  }

  s.reward.beta1 = cfg.get_double("reward.beta1", s.reward.beta1);
  s.reward.beta2 = cfg.get_double("reward.beta2", s.reward.beta2);
  s.reward.r_crash = cfg.get_double("reward.r_crash", s.reward.r_crash);
  s.reward.validate();

  s.td3.hidden1 = static_cast<int>(cfg.get_int("td3.hidden1", s.td3.hidden1));
  s.td3.hidden2 = static_cast<int>(cfg.get_int("td3.hidden2", s.td3.hidden2));
  s.td3.gamma = cfg.get_double("td3.gamma", s.td3.gamma);
  s.td3.tau = cfg.get_double("td3.tau", s.td3.tau);
  s.td3.policy_noise = cfg.get_double("td3.policy_noise", s.td3.policy_noise);
  s.td3.noise_clip = cfg.get_double("td3.noise_clip", s.td3.noise_clip);
  s.td3.policy_delay =
      static_cast<int>(cfg.get_int("td3.policy_delay", s.td3.policy_delay));
  s.td3.exploration_noise =
      cfg.get_double("td3.exploration_noise", s.td3.exploration_noise);
  s.td3.batch_size = static_cast<int>(cfg.get_int("td3.batch_size", s.td3.batch_size));
  s.td3.buffer_capacity = cfg.get_uint("td3.buffer_capacity", s.td3.buffer_capacity);
  s.td3.warmup_steps = cfg.get_int("td3.warmup_steps", s.td3.warmup_steps);
  s.td3.actor_lr = cfg.get_double("td3.actor_lr", s.td3.actor_lr);
  s.td3.critic_lr = cfg.get_double("td3.critic_lr", s.td3.critic_lr);
  s.td3.state_dim = 4 + s.sim.n_beams;
  s.td3.validate();

  s.forest.length = cfg.get_double("forest.length", s.forest.length);
  s.forest.width = cfg.get_double("forest.width", s.forest.width);
  s.forest.obstacle_count =
      static_cast<int>(cfg.get_int("forest.obstacles", s.forest.obstacle_count));
  s.forest.obstacle_size =
      cfg.get_double("forest.obstacle_size", s.forest.obstacle_size);
  s.forest.gap_margin = cfg.get_double("forest.gap_margin", s.forest.gap_margin);
  s.forest.start_clear = cfg.get_double("forest.start_clear", s.forest.start_clear);
  s.forest.goal_clear = cfg.get_double("forest.goal_clear", s.forest.goal_clear);

  s.track_obstacles.count =
      static_cast<int>(cfg.get_int("track.obstacles", s.track_obstacles.count));
  s.track_obstacles.size =
      cfg.get_double("track.obstacle_size", s.track_obstacles.size);
  s.track_obstacles.min_arc_gap =
      cfg.get_double("track.min_arc_gap", s.track_obstacles.min_arc_gap);
  s.track_obstacles.margin =
      cfg.get_double("track.obstacle_free_margin", s.track_obstacles.margin);
  s.track_obstacles.start_clear_arc =
      cfg.get_double("track.start_clear_arc", s.track_obstacles.start_clear_arc);

  s.environment = cfg.get_string("run.environment", s.environment);
  if (s.environment != "forest" && s.environment != "track") {
    throw std::invalid_argument("run.environment must be forest or track");
  }
  s.planners = split_list(cfg.get_string("run.planner", "hybrid"));
  if (s.planners.empty()) throw std::invalid_argument("run.planner is empty");
  for (const auto& p : s.planners) {
    if (p != "hybrid" && p != "benchmark" && p != "pure-pursuit") {
      throw std::invalid_argument("unknown planner '" + p + "'");
    }
  }
  s.seed = cfg.get_uint("run.seed", s.seed);
  s.episodes = static_cast<int>(cfg.get_int("run.episodes", s.episodes));
  s.train_steps = cfg.get_int("run.train_steps", s.train_steps);
  s.max_episode_seconds =
      cfg.get_double("run.max_episode_seconds", s.max_episode_seconds);
  if (s.episodes <= 0 || s.train_steps < 0 || s.max_episode_seconds <= 0.0) {
    throw std::invalid_argument("run counts must be positive");
  }
  s.track_file = cfg.get_string("track.file", s.track_file);
  s.track_closed = cfg.get_bool("track.closed", s.track_closed);
  s.wall_margin = cfg.get_double("plan.wall_margin", s.wall_margin);
  s.obstacle_margin = cfg.get_double("plan.obstacle_margin", s.obstacle_margin);
  s.plan_spacing = cfg.get_double("plan.spacing", s.plan_spacing);
  s.eval_workers = static_cast<int>(cfg.get_int("eval.workers", s.eval_workers));
  s.eval_save_traces =
      static_cast<int>(cfg.get_int("eval.save_traces", s.eval_save_traces));
  s.checkpoint_every = cfg.get_int("train.checkpoint_every", s.checkpoint_every);
  s.keep_snapshots = cfg.get_bool("train.keep_snapshots", s.keep_snapshots);
  s.checkpoint = cfg.get_string("run.checkpoint", s.checkpoint);
  s.out_dir = cfg.get_string("run.out", s.out_dir);
  return s;
}

namespace {

TrackModel make_strip_track(const ForestSpec& forest) {
  const double overrun = 1.5;
  const double spacing = 0.5;
  const int count = static_cast<int>(std::llround((forest.length + overrun) / spacing));
  std::vector<Vec2> center;
  std::vector<double> wp, wn;
  for (int i = 0; i <= count; ++i) {
    center.push_back({spacing * i, 0.0});
    wp.push_back(0.5 * forest.width);
    wn.push_back(0.5 * forest.width);
  }
  return build_track(std::move(center), std::move(wp), std::move(wn), false);
}

int samples_for_spacing(const TrackModel& track, double spacing) {
  double arc = 0.0;
  for (size_t i = 1; i < track.size(); ++i) {
    arc += (track.centerline[i] - track.centerline[i - 1]).norm();
  }
  if (track.closed) {
    arc += (track.centerline.front() - track.centerline.back()).norm();
  }
  const double per_point = arc / static_cast<double>(track.size());
  return std::max(1, static_cast<int>(std::ceil(per_point / spacing)));
}

}  // namespace

EnvironmentFactory::EnvironmentFactory(const HarnessSettings& settings)
    : s_(settings) {
  if (s_.environment == "track") {
    if (s_.track_file.empty()) {
      throw std::invalid_argument("track.file is required for the track environment");
    }
    track_ = load_track(s_.track_file, s_.track_closed);
    OptimizeOptions opts;
    opts.wall_margin = s_.wall_margin;
    const OffsetResult res = optimize_offsets(*track_, nullptr, opts);
    nominal_ = to_plan_path(*track_, res.offsets,
                            samples_for_spacing(*track_, s_.plan_spacing));
  } else {
    strip_track_ = make_strip_track(s_.forest);
    ForestSpec empty = s_.forest;
    empty.obstacle_count = 0;
    empty.seed = 0;
    nominal_ = gen_forest(empty, s_.sim).reference;
  }
}

World EnvironmentFactory::make_world(uint64_t episode_seed,
                                     bool with_obstacles) const {
  if (s_.environment == "forest") {
    ForestSpec spec = s_.forest;
    spec.seed = episode_seed;
    if (!with_obstacles) spec.obstacle_count = 0;
    return gen_forest(spec, s_.sim);
  }
  ObstacleMap map;
  if (with_obstacles) {
    TrackObstacleSpec spec = s_.track_obstacles;
    spec.seed = episode_seed;
    map = place_track_obstacles(*track_, spec, s_.sim);
  } else {
    map = track_map(*track_);
  }
  return make_track_world(*track_, nominal_, std::move(map));
}

PlanPath EnvironmentFactory::benchmark_plan(const World& world) const {
  const TrackModel& track = s_.environment == "track" ? *track_ : *strip_track_;
  ObstacleMap obstacles_only;
  obstacles_only.obstacles = world.map.obstacles;
  OptimizeOptions opts;
  opts.wall_margin = s_.wall_margin;
  opts.obstacle_inflation = 0.5 * s_.sim.width + s_.obstacle_margin;
  const OffsetResult res = optimize_offsets(track, &obstacles_only, opts);
  return to_plan_path(track, res.offsets, samples_for_spacing(track, s_.plan_spacing));
}

namespace {

void write_manifest(const HarnessSettings& s, const Config& cfg,
                    const std::string& command,
                    const std::vector<std::string>& outputs) {
  json m;
  m["command"] = command;
  m["version"] = "0.1.0";
  m["seed"] = s.seed;
  char hash_hex[32];
  std::snprintf(hash_hex, sizeof(hash_hex), "%016llx",
                static_cast<unsigned long long>(cfg.hash()));
  m["config_hash"] = hash_hex;
  m["config"] = json::object();
  for (const auto& [k, v] : cfg.entries()) m["config"][k] = v;
  m["outputs"] = outputs;
  std::ofstream out(s.out_dir + "/manifest.json");
  if (!out) throw std::runtime_error("cannot write manifest");
  out << m.dump(2) << '\n';
}

std::unique_ptr<LocalPlanner> make_planner(const std::string& kind,
                                           const HarnessSettings& s,
                                           const EnvironmentFactory& factory,
                                           const World& world,
                                           const Mlp* actor) {
  if (kind == "hybrid") {
    if (actor == nullptr) throw std::invalid_argument("hybrid planner needs a checkpoint");
    return std::make_unique<HybridPlanner>(world.reference, s.pp, s.sim, *actor);
  }
  if (kind == "benchmark") {
    return std::make_unique<PurePursuitPlanner>(factory.benchmark_plan(world),
                                                s.pp, s.sim);
  }
  return std::make_unique<PurePursuitPlanner>(world.reference, s.pp, s.sim);
}

struct EpisodeResult {
  int index{0};
  uint64_t seed{0};
  Outcome outcome{Outcome::Timeout};
  double elapsed{0.0};
  size_t steps{0};
  double mean_abs_action{0.0};
  double sum_reward{0.0};
};

}  // namespace

EvalReport evaluate(const HarnessSettings& s) {
  const EnvironmentFactory factory(s);
  std::optional<Mlp> actor;
  for (const auto& p : s.planners) {
    if (p == "hybrid") {
      if (s.checkpoint.empty()) {
        throw std::invalid_argument("run.checkpoint is required to evaluate hybrid");
      }
      actor = load_mlp(s.checkpoint + "/actor.mlp");
      if (actor->input_size() != 4 + s.sim.n_beams) {
        throw std::invalid_argument("checkpoint state size does not match sim.n_beams");
      }
    }
  }

  EvalReport report;
  std::ostringstream table;
  table << "environment: " << s.environment << "  episodes: " << s.episodes
        << "  seed: " << s.seed << "\n";
  table << "planner        condition   success  crash  timeout  mean_time_success\n";

  const size_t max_steps = s.max_episode_steps();
  fs::create_directories(s.out_dir);
  std::ofstream per_episode(s.out_dir + "/episodes.csv");
  per_episode.precision(17);
  per_episode << "planner,condition,episode,seed,outcome,elapsed,steps,"
                 "mean_abs_action,sum_reward\n";

  for (const std::string& planner_kind : s.planners) {
    for (const bool with_obstacles : {false, true}) {
      std::vector<EpisodeResult> results(static_cast<size_t>(s.episodes));
      std::atomic<int> next_index{0};
      const int workers =
          std::max(1, std::min(s.eval_workers, s.episodes));
      auto run_one = [&](int idx) {
        const uint64_t ep_seed =
            derive_seed(s.seed, static_cast<uint64_t>(idx) +
                                    (with_obstacles ? 1000000u : 0u));
        const World world = factory.make_world(ep_seed, with_obstacles);
        const auto planner =
            make_planner(planner_kind, s, factory, world,
                         actor.has_value() ? &*actor : nullptr);
        const EpisodeOutcome ep =
            run_episode(*planner, world, s.sim, s.reward, max_steps);
        EpisodeResult r;
        r.index = idx;
        r.seed = ep_seed;
        r.outcome = ep.outcome;
        r.elapsed = ep.elapsed;
        r.steps = ep.steps;
        r.mean_abs_action = ep.mean_abs_action;
        r.sum_reward = ep.sum_reward;
        results[static_cast<size_t>(idx)] = r;
        if (idx < s.eval_save_traces) {
          const std::string stem = s.out_dir + "/trace_" + planner_kind +
                                   (with_obstacles ? "_obstacles_" : "_empty_") +
                                   std::to_string(idx);
          save_episode_csv(ep, stem + ".csv");
          save_obstacle_map(world.map, stem + ".map");
          if (planner_kind == "benchmark") {
            save_plan_path(factory.benchmark_plan(world), stem + "_plan.csv");
          } else {
            save_plan_path(world.reference, stem + "_plan.csv");
          }
        }
      };
      std::vector<std::thread> pool;
      for (int w = 0; w < workers; ++w) {
        pool.emplace_back([&]() {
          for (int idx = next_index.fetch_add(1); idx < s.episodes;
               idx = next_index.fetch_add(1)) {
            run_one(idx);
          }
        });
      }
      for (auto& t : pool) t.join();

      EvalCell cell;
      cell.planner = planner_kind;
      cell.with_obstacles = with_obstacles;
      cell.episodes = s.episodes;
      double time_sum = 0.0, action_sum = 0.0;
      for (const EpisodeResult& r : results) {
        switch (r.outcome) {
          case Outcome::Success:
            cell.successes += 1;
            time_sum += r.elapsed;
            break;
          case Outcome::Crash:
            cell.crashes += 1;
            break;
          case Outcome::Timeout:
            cell.timeouts += 1;
            break;
        }
        action_sum += r.mean_abs_action;
        per_episode << planner_kind << ','
                    << (with_obstacles ? "obstacles" : "empty") << ','
                    << r.index << ',' << r.seed << ','
                    << (r.outcome == Outcome::Success
                            ? "success"
                            : r.outcome == Outcome::Crash ? "crash" : "timeout")
                    << ',' << r.elapsed << ',' << r.steps << ','
                    << r.mean_abs_action << ',' << r.sum_reward << '\n';
      }
      cell.mean_time_success =
          cell.successes > 0 ? time_sum / cell.successes : 0.0;
      cell.mean_abs_action = action_sum / static_cast<double>(s.episodes);
      report.cells.push_back(cell);

      char line[160];
      std::snprintf(line, sizeof(line), "%-14s %-11s %5.1f%%  %5d  %7d  %17.2f\n",
                    planner_kind.c_str(),
                    with_obstacles ? "obstacles" : "empty",
                    100.0 * cell.successes / cell.episodes, cell.crashes,
                    cell.timeouts, cell.mean_time_success);
      table << line;
    }
  }
  report.table_text = table.str();

  std::ofstream summary(s.out_dir + "/results.csv");
  summary.precision(17);
  summary << "planner,condition,episodes,successes,crashes,timeouts,"
             "success_rate,mean_time_success,mean_abs_action\n";
  for (const EvalCell& c : report.cells) {
    summary << c.planner << ',' << (c.with_obstacles ? "obstacles" : "empty")
            << ',' << c.episodes << ',' << c.successes << ',' << c.crashes
            << ',' << c.timeouts << ','
            << static_cast<double>(c.successes) / c.episodes << ','
            << c.mean_time_success << ',' << c.mean_abs_action << '\n';
  }
  return report;
}

void cmd_train(const Config& cfg) {
  const HarnessSettings s = parse_settings(cfg);
  fs::create_directories(s.out_dir);

  TrainOptions opts;
  opts.total_steps = s.train_steps;
  opts.checkpoint_every = s.checkpoint_every;
  if (s.keep_snapshots) opts.snapshot_dir = s.out_dir + "/snapshots";
  int64_t last_print = 0;
  opts.on_episode = [&](int64_t step, const TrainEpisodeRow& row) {
    if (step - last_print >= 5000) {
      last_print = step;
      std::fprintf(stderr,
                   "step %lld  episode_reward %.1f  success_window %.2f  "
                   "mean|dnn| %.4f\n",
                   static_cast<long long>(step), row.episode_reward,
                   row.success_rate_window, row.mean_abs_delta_nn);
    }
  };

  try {
    TrainOutput out = train_td3(s, s.seed, opts);
    out.agent.save(s.out_dir + "/checkpoint");
    write_training_curve(out.curve, s.out_dir + "/training_curve.csv");
  } catch (const std::runtime_error& e) {
    std::ofstream dump(s.out_dir + "/diagnostic_dump.txt");
    dump << "training aborted\nreason: " << e.what() << "\nseed: " << s.seed
         << "\nenvironment: " << s.environment << '\n';
    throw;
  }
  write_manifest(s, cfg, "train",
                 {"checkpoint", "training_curve.csv", "manifest.json"});
}

void cmd_eval(const Config& cfg) {
  const HarnessSettings s = parse_settings(cfg);
  fs::create_directories(s.out_dir);
  const EvalReport report = evaluate(s);
  std::cout << report.table_text;
  std::ofstream table(s.out_dir + "/results.txt");
  table << report.table_text;
  write_manifest(s, cfg, "eval",
                 {"results.csv", "results.txt", "episodes.csv", "manifest.json"});
}

void cmd_plan(const Config& cfg) {
  const HarnessSettings s = parse_settings(cfg);
  fs::create_directories(s.out_dir);
  const EnvironmentFactory factory(s);
  const bool with_obstacles = cfg.get_bool("plan.with_obstacles", false);
  const World world = factory.make_world(derive_seed(s.seed, 0), with_obstacles);

  save_plan_path(world.reference, s.out_dir + "/reference.csv");
  save_obstacle_map(world.map, s.out_dir + "/map.txt");
  std::vector<std::string> outputs{"reference.csv", "map.txt", "manifest.json"};
  if (with_obstacles || s.environment == "forest") {
    save_plan_path(factory.benchmark_plan(world), s.out_dir + "/benchmark_plan.csv");
    outputs.push_back("benchmark_plan.csv");
  }
  write_manifest(s, cfg, "plan", outputs);
}

void cmd_plot(const Config& cfg) {
  const HarnessSettings s = parse_settings(cfg);
  fs::create_directories(s.out_dir);
  const std::vector<std::string> episodes =
      split_list(cfg.require_string("plot.episode"));
  ObstacleMap map;
  if (cfg.has("plot.map")) map = load_obstacle_map(cfg.require_string("plot.map"));
  PlanPath reference;
  if (cfg.has("plot.plan")) {
    reference = load_plan_path(cfg.require_string("plot.plan"),
                               cfg.get_bool("plot.plan_closed", false));
  }

  std::vector<std::string> outputs{"manifest.json"};
  for (const std::string& file : episodes) {
    const EpisodeTrace trace = load_episode_csv(file);
    std::vector<Vec2> traj;
    std::vector<double> t, a;
    traj.reserve(trace.rows.size());
    for (const StepRecord& r : trace.rows) {
      traj.push_back(r.state.position());
      t.push_back(r.t);
      a.push_back(r.action);
    }
    const std::string stem =
        s.out_dir + "/" + fs::path(file).stem().string();
    {
      std::ofstream out(stem + ".svg");
      if (!out) throw std::runtime_error("cannot write " + stem + ".svg");
      out << render_trajectory_svg(map, reference, traj);
    }
    {
      std::ofstream out(stem + "_network.svg");
      if (!out) throw std::runtime_error("cannot write " + stem + "_network.svg");
      out << render_series_svg(t, a, "Network output");
    }
    outputs.push_back(fs::path(stem + ".svg").filename().string());
    outputs.push_back(fs::path(stem + "_network.svg").filename().string());
  }
  write_manifest(s, cfg, "plot", outputs);
}

}  // namespace refmod
