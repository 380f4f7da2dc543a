#include <cmath>
#include <deque>
#include <filesystem>
#include <fstream>
#include <stdexcept>

#include "refmod/harness.hpp"
#include "refmod/rng.hpp"

namespace refmod {

namespace fs = std::filesystem;

size_t HarnessSettings::max_episode_steps() const {
  return static_cast<size_t>(std::llround(max_episode_seconds / sim.dt));
}

TrainOutput train_td3(const HarnessSettings& settings, uint64_t seed,
                      const TrainOptions& opts) {
  Td3Config td3 = settings.td3;
  td3.state_dim = 4 + settings.sim.n_beams;
  TrainOutput out{Td3Agent(td3, derive_seed(seed, 11)), {}, 0};
  Td3Agent& agent = out.agent;
  ReplayBuffer buffer(td3.buffer_capacity, td3.state_dim, derive_seed(seed, 12));
  Rng warmup_rng(derive_seed(seed, 13));
  const uint64_t episode_seed_base = derive_seed(seed, 14);
  const EnvironmentFactory factory(settings);
  const size_t max_ep_steps = settings.max_episode_steps();

  World world;
  VehicleState vehicle;
  Scan scan;
  PpCommand pf;
  std::vector<double> svec;
  double lap_progress = 0.0, prev_s = 0.0;
  size_t ep_steps = 0;
  double ep_reward = 0.0, ep_abs_dnn = 0.0;
  std::deque<bool> window;

  auto observe = [&](const VehicleState& v, Scan& scan_out, PpCommand& pf_out,
                     std::vector<double>& svec_out) {
    scan_out = cast_scan(v, world.map, settings.sim);
    pf_out = pp_plan(v, world.reference, settings.pp, settings.sim);
    svec_out = assemble_state(v, pf_out, scan_out, settings.sim);
  };

  auto reset_episode = [&]() {
    world = factory.make_world(
        derive_seed(episode_seed_base, static_cast<uint64_t>(out.episodes)), true);
    vehicle = world.start;
    ep_steps = 0;
    ep_reward = 0.0;
    ep_abs_dnn = 0.0;
    lap_progress = 0.0;
    prev_s = world.goal == World::Goal::Lap
                 ? project_onto_path(world.reference, vehicle.position()).s
                 : 0.0;
    observe(vehicle, scan, pf, svec);
  };
  reset_episode();

  for (int64_t step_i = 1; step_i <= opts.total_steps; ++step_i) {
    const double action = step_i <= td3.warmup_steps
                              ? warmup_rng.uniform(-1.0, 1.0)
                              : agent.select_action(svec, true);
    const HybridStep cmd =
        finish_hybrid_step(vehicle, pf, std::move(svec), action, settings.sim);
    const VehicleState next = step(vehicle, cmd.v_ref, cmd.delta_ref, settings.sim);
    const bool crashed = check_collision(next, world.map, settings.sim);
    ++ep_steps;

    bool reached = false;
    if (world.goal == World::Goal::LineX) {
      reached = next.x >= world.goal_x;
    } else {
      const double s = project_onto_path(world.reference, next.position()).s;
      double ds = s - prev_s;
      if (ds > 0.5 * world.lap_length) ds -= world.lap_length;
      if (ds < -0.5 * world.lap_length) ds += world.lap_length;
      lap_progress += ds;
      prev_s = s;
      reached = lap_progress >= world.lap_length;
    }
    const bool timeout = ep_steps >= max_ep_steps;
    const double r = reward(crashed, cmd.delta_nn, settings.reward,
                            settings.sim.delta_max);

    Scan next_scan;
    PpCommand next_pf;
    std::vector<double> next_svec;
    observe(next, next_scan, next_pf, next_svec);

    // A crash ends the return; reaching the goal line does too. Lap
    // completion and timeouts are truncations and keep bootstrapping.
    const bool done_flag =
        crashed || (reached && world.goal == World::Goal::LineX);
    buffer.push({cmd.state, action, r, next_svec, done_flag});
    if (step_i > td3.warmup_steps) {
      const TrainDiagnostics diag = agent.train_step(buffer, step_i);
      if (diag.performed &&
          (!std::isfinite(diag.critic1_loss) || !std::isfinite(diag.critic2_loss))) {
        throw std::runtime_error("training diverged: non-finite critic loss at step " +
                                 std::to_string(step_i));
      }
    }

    ep_reward += r;
    ep_abs_dnn += std::abs(cmd.delta_nn);

    if (!opts.snapshot_dir.empty() && opts.checkpoint_every > 0 &&
        step_i % opts.checkpoint_every == 0) {
      agent.save(opts.snapshot_dir + "/step_" + std::to_string(step_i));
    }

    if (crashed || reached || timeout) {
      window.push_back(reached && !crashed);
      if (window.size() > 20) window.pop_front();
      double rate = 0.0;
      for (const bool s : window) rate += s ? 1.0 : 0.0;
      rate /= static_cast<double>(window.size());
      TrainEpisodeRow row{step_i, ep_reward, rate,
                          ep_abs_dnn / static_cast<double>(ep_steps)};
      out.curve.push_back(row);
      out.episodes += 1;
      if (opts.on_episode) opts.on_episode(step_i, row);
      reset_episode();
    } else {
      vehicle = next;
      scan = std::move(next_scan);
      pf = next_pf;
      svec = std::move(next_svec);
    }
  }
  return out;
}

void write_training_curve(const std::vector<TrainEpisodeRow>& curve,
                          const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write training curve: " + path);
  out.precision(17);
  out << "step,episode_reward,success_rate_window,mean_abs_delta_nn\n";
  for (const auto& row : curve) {
    out << row.step << ',' << row.episode_reward << ','
        << row.success_rate_window << ',' << row.mean_abs_delta_nn << '\n';
  }
}

}  // namespace refmod
