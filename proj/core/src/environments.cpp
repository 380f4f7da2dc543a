#include "refmod/environments.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "refmod/rng.hpp"

namespace refmod {

World gen_forest(const ForestSpec& spec, const SimParams& params) {
  if (spec.obstacle_count < 0 || spec.length <= 0.0 || spec.width <= 0.0) {
    throw std::invalid_argument("gen_forest: invalid spec");
  }
  if (spec.obstacle_size >= spec.width) {
    throw std::invalid_argument("gen_forest: obstacle wider than the corridor");
  }
  const double half_w = 0.5 * spec.width;
  const double overrun = 1.5;  // region continues past the goal line

  World world;
  world.goal = World::Goal::LineX;
  world.goal_x = spec.length;
  world.start = VehicleState{};  // origin, heading +x, at rest
  world.reference =
      make_plan_path({{0.0, 0.0}, {spec.length + overrun, 0.0}}, false);
  world.map.boundaries.push_back({{-1.0, -half_w},
                                  {spec.length + overrun + 0.5, -half_w},
                                  {spec.length + overrun + 0.5, half_w},
                                  {-1.0, half_w}});

  const double min_gap = params.width + spec.gap_margin;
  const double x_lo = spec.start_clear + 0.5 * spec.obstacle_size;
  const double x_hi = spec.length - spec.goal_clear - 0.5 * spec.obstacle_size;
  const double y_hi = half_w - 0.5 * spec.obstacle_size;
  if (spec.obstacle_count > 0 && x_lo >= x_hi) {
    throw std::invalid_argument("gen_forest: no room for obstacles");
  }

  Rng rng(spec.seed);
  const Rect start_disc{{0.0, 0.0}, 0.0, 0.0};
  const Rect goal_disc{{spec.length, 0.0}, 0.0, 0.0};
  for (int layout = 0; layout < 100; ++layout) {
    std::vector<Rect> placed;
    bool ok = true;
    for (int i = 0; i < spec.obstacle_count && ok; ++i) {
      ok = false;
      for (int attempt = 0; attempt < 300; ++attempt) {
        Rect r{{rng.uniform(x_lo, x_hi), rng.uniform(-y_hi, y_hi)},
               spec.obstacle_size,
               spec.obstacle_size};
        if (rect_distance(r, start_disc) < spec.start_clear) continue;
        if (rect_distance(r, goal_disc) < spec.goal_clear) continue;
        bool clear = true;
        for (const Rect& other : placed) {
          if (rect_distance(r, other) < min_gap) {
            clear = false;
            break;
          }
        }
        if (clear) {
          placed.push_back(r);
          ok = true;
          break;
        }
      }
    }
    if (ok) {
      world.map.obstacles = std::move(placed);
      return world;
    }
  }
  throw std::runtime_error("gen_forest: cannot place obstacles at this density");
}

ObstacleMap track_map(const TrackModel& track) {
  ObstacleMap map;
  std::vector<Vec2> left = track_boundary(track, true);
  std::vector<Vec2> right = track_boundary(track, false);
  if (!track.closed) {
    // single boundary: out along one side, back along the other
    std::vector<Vec2> loop = left;
    loop.insert(loop.end(), right.rbegin(), right.rend());
    map.boundaries.push_back(std::move(loop));
    return map;
  }
  auto area = [](const std::vector<Vec2>& poly) {
    double a = 0.0;
    for (size_t i = 0, j = poly.size() - 1; i < poly.size(); j = i++) {
      a += poly[j].cross(poly[i]);
    }
    return std::abs(0.5 * a);
  };
  if (area(left) >= area(right)) {
    map.boundaries.push_back(std::move(left));
    map.boundaries.push_back(std::move(right));
  } else {
    map.boundaries.push_back(std::move(right));
    map.boundaries.push_back(std::move(left));
  }
  return map;
}

namespace {

// Largest free lateral piece at track point k against the given obstacles.
double widest_free_width(const TrackModel& track, size_t k,
                         const ObstacleMap& map) {
  OptimizeOptions opts;
  opts.bound_eps = 0.0;
  try {
    return admissible_interval(track, k, &map, opts).width();
  } catch (const std::runtime_error&) {
    return 0.0;
  }
}

}  // namespace

ObstacleMap place_track_obstacles(const TrackModel& track,
                                  const TrackObstacleSpec& spec,
                                  const SimParams& params) {
  ObstacleMap map = track_map(track);
  if (spec.count == 0) return map;
  if (!track.closed) {
    throw std::invalid_argument("place_track_obstacles: track must be closed");
  }

  // arclength lookup over the centerline
  std::vector<double> arc(track.size(), 0.0);
  for (size_t i = 1; i < track.size(); ++i) {
    arc[i] = arc[i - 1] + (track.centerline[i] - track.centerline[i - 1]).norm();
  }
  const double total =
      arc.back() + (track.centerline.front() - track.centerline.back()).norm();
  auto index_at = [&](double s) {
    s = std::fmod(s, total);
    if (s < 0.0) s += total;
    const auto it = std::upper_bound(arc.begin(), arc.end(), s);
    return it == arc.begin() ? 0 : static_cast<size_t>(it - arc.begin() - 1);
  };

  const double needed = params.width + spec.margin;
  Rng rng(spec.seed);
  for (int layout = 0; layout < 100; ++layout) {
    std::vector<double> arcs;
    std::vector<Rect> placed;
    bool ok = true;
    for (int i = 0; i < spec.count && ok; ++i) {
      ok = false;
      for (int attempt = 0; attempt < 300; ++attempt) {
        const double s =
            rng.uniform(spec.start_clear_arc, total - spec.min_arc_gap);
        bool gap_ok = true;
        for (double prev : arcs) {
          double ds = std::abs(s - prev);
          ds = std::min(ds, total - ds);
          if (ds < spec.min_arc_gap) {
            gap_ok = false;
            break;
          }
        }
        if (!gap_ok) continue;

        const size_t k = index_at(s);
        const double w_pos = track.width_pos[k], w_neg = track.width_neg[k];
        const double side = rng.uniform() < 0.5 ? 1.0 : -1.0;
        const double wall = side > 0.0 ? w_pos : w_neg;
        const double contact = rng.uniform(0.05, 0.3);
        const double lateral = side * (wall - 0.5 * spec.size - contact);
        const Vec2 center = track.centerline[k] + track.normals[k] * lateral;
        const Rect r{center, spec.size, spec.size};

        // verify the free-side rule on the points the obstacle spans
        map.obstacles.push_back(r);
        bool free_ok = true;
        for (size_t j = 0; j < track.size(); ++j) {
          double ds = std::abs(arc[j] - s);
          ds = std::min(ds, total - ds);
          if (ds > spec.size) continue;
          if (widest_free_width(track, j, map) < needed) {
            free_ok = false;
            break;
          }
        }
        map.obstacles.pop_back();
        if (!free_ok) continue;

        placed.push_back(r);
        arcs.push_back(s);
        ok = true;
        break;
      }
    }
    if (ok) {
      map.obstacles = std::move(placed);
      return map;
    }
    map.obstacles.clear();
  }
  throw std::runtime_error("place_track_obstacles: cannot satisfy spacing rules");
}

World make_track_world(const TrackModel& track, PlanPath raceline,
                       ObstacleMap map) {
  World world;
  world.goal = World::Goal::Lap;
  world.lap_length = raceline.total_length();
  Vec2 point, tangent;
  path_point_at(raceline, 0.0, point, tangent);
  world.start.x = point.x;
  world.start.y = point.y;
  world.start.theta = std::atan2(tangent.y, tangent.x);
  world.reference = std::move(raceline);
  world.map = std::move(map);
  return world;
}

EpisodeOutcome run_episode(LocalPlanner& planner, const World& world,
                           const SimParams& params, const RewardConfig& rcfg,
                           size_t max_steps) {
  EpisodeOutcome episode;
  episode.trace.reserve(std::min<size_t>(max_steps, 1 << 16));

  VehicleState state = world.start;
  double progress = 0.0;
  double prev_s = world.goal == World::Goal::Lap
                      ? project_onto_path(world.reference, state.position()).s
                      : 0.0;
  double abs_action_sum = 0.0;

  for (size_t i = 0; i < max_steps; ++i) {
    const Scan scan = cast_scan(state, world.map, params);
    const HybridStep cmd = planner.plan(state, scan);
    state = step(state, cmd.v_ref, cmd.delta_ref, params);
    const bool crashed = check_collision(state, world.map, params);
    const double r = reward(crashed, cmd.delta_nn, rcfg, params.delta_max);

    StepRecord rec;
    rec.step = i + 1;
    rec.t = static_cast<double>(i + 1) * params.dt;
    rec.state = state;
    rec.v_ref = cmd.v_ref;
    rec.delta_ref = cmd.delta_ref;
    rec.pf_v_ref = cmd.pf.v_ref;
    rec.pf_delta_ref = cmd.pf.delta_ref;
    rec.action = cmd.action;
    rec.delta_nn = cmd.delta_nn;
    rec.reward = r;
    episode.trace.push_back(rec);

    episode.sum_reward += r;
    abs_action_sum += std::abs(cmd.action);
    episode.steps = i + 1;

    if (crashed) {
      episode.outcome = Outcome::Crash;
      break;
    }
    bool reached = false;
    if (world.goal == World::Goal::LineX) {
      reached = state.x >= world.goal_x;
    } else {
      const double s = project_onto_path(world.reference, state.position()).s;
      double ds = s - prev_s;
      const double total = world.lap_length;
      if (ds > 0.5 * total) ds -= total;
      if (ds < -0.5 * total) ds += total;
      progress += ds;
      prev_s = s;
      reached = progress >= total;
    }
    if (reached) {
      episode.outcome = Outcome::Success;
      episode.success = true;
      break;
    }
  }
  episode.elapsed = static_cast<double>(episode.steps) * params.dt;
  episode.mean_abs_action =
      episode.steps > 0 ? abs_action_sum / static_cast<double>(episode.steps) : 0.0;
  return episode;
}

namespace {

const char* outcome_name(Outcome o) {
  switch (o) {
    case Outcome::Success: return "success";
    case Outcome::Crash: return "crash";
    case Outcome::Timeout: return "timeout";
  }
  return "unknown";
}

constexpr const char* kEpisodeHeader =
    "step,t,x,y,theta,v,delta,v_ref,delta_ref,pf_v_ref,pf_delta_ref,action,"
    "delta_nn,reward";

}  // namespace

void save_episode_csv(const EpisodeOutcome& episode, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write episode csv: " + path);
  out.precision(17);
  out << kEpisodeHeader << '\n';
  for (const StepRecord& r : episode.trace) {
    out << r.step << ',' << r.t << ',' << r.state.x << ',' << r.state.y << ','
        << r.state.theta << ',' << r.state.v << ',' << r.state.delta << ','
        << r.v_ref << ',' << r.delta_ref << ',' << r.pf_v_ref << ','
        << r.pf_delta_ref << ',' << r.action << ',' << r.delta_nn << ','
        << r.reward << '\n';
  }
  out << "# summary outcome=" << outcome_name(episode.outcome)
      << " steps=" << episode.steps << " elapsed=" << episode.elapsed
      << " sum_reward=" << episode.sum_reward
      << " mean_abs_action=" << episode.mean_abs_action << '\n';
}

EpisodeTrace load_episode_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("cannot open episode csv: " + path);
  std::string line;
  if (!std::getline(in, line) || line != kEpisodeHeader) {
    throw std::invalid_argument(path + ":1: bad or missing episode header");
  }
  EpisodeTrace trace;
  int line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    if (line[0] == '#') {
      if (line.rfind("# summary", 0) == 0) trace.summary = line;
      continue;
    }
    std::replace(line.begin(), line.end(), ',', ' ');
    std::istringstream ss(line);
    StepRecord r;
    if (!(ss >> r.step >> r.t >> r.state.x >> r.state.y >> r.state.theta >>
          r.state.v >> r.state.delta >> r.v_ref >> r.delta_ref >> r.pf_v_ref >>
          r.pf_delta_ref >> r.action >> r.delta_nn >> r.reward)) {
      throw std::invalid_argument(path + ":" + std::to_string(line_no) +
                                  ": malformed episode row");
    }
    trace.rows.push_back(r);
  }
  return trace;
}

}  // namespace refmod
