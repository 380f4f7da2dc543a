#include "refmod/mod_planner.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace refmod {

void RewardConfig::validate() const {
  if (!(r_crash < 0.0)) throw std::invalid_argument("reward: r_crash must be < 0");
  if (!(beta1 > 0.0) || !(beta2 > 0.0)) {
    throw std::invalid_argument("reward: beta1 and beta2 must be > 0");
  }
  // r_crash must undercut every non-crash reward; the worst of those is
  // beta1 - beta2 (|delta_nn| <= delta_max).
  if (!(r_crash < beta1 - beta2)) {
    throw std::invalid_argument("reward: r_crash must be below beta1 - beta2");
  }
}

namespace {

double scale_unit(double value, double max, ClipStats* stats) {
  double u = value / max;            // nominal [0, 1]
  const double scaled = 2.0 * u - 1.0;
  if (scaled < -1.0 || scaled > 1.0) {
    if (stats != nullptr) stats->clipped_components += 1;
    return std::clamp(scaled, -1.0, 1.0);
  }
  return scaled;
}

double scale_symmetric(double value, double max, ClipStats* stats) {
  const double scaled = value / max;  // nominal [-1, 1]
  if (scaled < -1.0 || scaled > 1.0) {
    if (stats != nullptr) stats->clipped_components += 1;
    return std::clamp(scaled, -1.0, 1.0);
  }
  return scaled;
}

}  // namespace

std::vector<double> assemble_state(const VehicleState& vehicle,
                                   const PpCommand& pf, const Scan& scan,
                                   const SimParams& params, ClipStats* stats) {
  if (scan.ranges.size() != static_cast<size_t>(params.n_beams)) {
    throw std::invalid_argument("assemble_state: scan length mismatch");
  }
  std::vector<double> state;
  state.reserve(4 + scan.ranges.size());
  state.push_back(scale_unit(vehicle.v, params.v_max, stats));
  state.push_back(scale_symmetric(vehicle.delta, params.delta_max, stats));
  state.push_back(scale_unit(pf.v_ref, params.v_max, stats));
  state.push_back(scale_symmetric(pf.delta_ref, params.delta_max, stats));
  for (double r : scan.ranges) {
    state.push_back(scale_unit(r, params.max_range, stats));
  }
  return state;
}

double modify_steering(double delta_pf, double action, double delta_max) {
  return delta_pf + action * delta_max;
}

FilteredCommand safety_filter(double delta_combined, double v_now,
                              const SimParams& params) {
  double bound = params.delta_max;
  if (v_now > 1e-9) {
    const double limit = std::atan(params.friction * params.gravity *
                                   params.wheelbase / (v_now * v_now));
    bound = std::min(bound, limit);
  }
  FilteredCommand cmd;
  cmd.delta_ref = std::clamp(delta_combined, -bound, bound);
  cmd.v_ref = friction_velocity(std::max(std::abs(cmd.delta_ref), 1e-9), params);
  return cmd;
}

double reward(bool crashed, double delta_nn, const RewardConfig& cfg,
              double delta_max) {
  if (crashed) return cfg.r_crash;
  const double deviation = std::abs(delta_nn) / delta_max;
  return cfg.beta1 - cfg.beta2 * deviation;
}

HybridStep finish_hybrid_step(const VehicleState& vehicle, const PpCommand& pf,
                              std::vector<double> state, double action,
                              const SimParams& params) {
  HybridStep out;
  out.pf = pf;
  out.state = std::move(state);
  out.action = action;
  out.delta_nn = action * params.delta_max;
  const double combined = modify_steering(pf.delta_ref, action, params.delta_max);
  const FilteredCommand cmd = safety_filter(combined, vehicle.v, params);
  out.v_ref = cmd.v_ref;
  out.delta_ref = cmd.delta_ref;
  return out;
}

HybridStep plan_hybrid(const VehicleState& vehicle, const Scan& scan,
                       const PlanPath& path, const PPConfig& pp_cfg,
                       const SimParams& params, const Mlp& actor,
                       ClipStats* stats) {
  const PpCommand pf = pp_plan(vehicle, path, pp_cfg, params);
  std::vector<double> state = assemble_state(vehicle, pf, scan, params, stats);
  const Eigen::VectorXd x =
      Eigen::Map<const Eigen::VectorXd>(state.data(), static_cast<Eigen::Index>(state.size()));
  const double action = std::clamp(forward(actor, x)(0), -1.0, 1.0);
  return finish_hybrid_step(vehicle, pf, std::move(state), action, params);
}

HybridStep plan_pure_pursuit(const VehicleState& vehicle, const Scan& scan,
                             const PlanPath& path, const PPConfig& pp_cfg,
                             const SimParams& params, ClipStats* stats) {
  const PpCommand pf = pp_plan(vehicle, path, pp_cfg, params);
  std::vector<double> state = assemble_state(vehicle, pf, scan, params, stats);
  return finish_hybrid_step(vehicle, pf, std::move(state), 0.0, params);
}

}  // namespace refmod
