#pragma once

#include <cstdint>
#include <vector>

#include "refmod/mlp.hpp"
#include "refmod/pure_pursuit.hpp"
#include "refmod/sim.hpp"

namespace refmod {

/// Reward shaping: a fixed penalty on crashes, otherwise a per-step bonus
/// minus a penalty proportional to the normalized steering modification.
struct RewardConfig {
  double r_crash{-1.0};
  double beta1{1.0};
  double beta2{0.5};

  void validate() const;
};

struct ClipStats {
  int64_t clipped_components{0};
};

/// Scaled network state [v, delta, v_ref, delta_ref, r_1..r_n], every
/// component mapped affinely into [-1, 1]. Out-of-range physical inputs are
/// clipped and counted in stats when given.
std::vector<double> assemble_state(const VehicleState& vehicle,
                                   const PpCommand& pf, const Scan& scan,
                                   const SimParams& params,
                                   ClipStats* stats = nullptr);

/// Steering modification: the action in [-1, 1] scales to delta_max and adds
/// to the follower reference. The sum may exceed delta_max until filtered.
double modify_steering(double delta_pf, double action, double delta_max);

struct FilteredCommand {
  double v_ref{0.0};
  double delta_ref{0.0};
};

/// Clips steering to what the current speed allows under the friction limit
/// (inverting the friction-velocity law at v_now), then recomputes the
/// velocity reference for the clipped steering so the commanded pair never
/// exceeds the limit.
FilteredCommand safety_filter(double delta_combined, double v_now,
                              const SimParams& params);

/// Crash branch returns r_crash; otherwise beta1 - beta2 * |delta_nn| /
/// delta_max.
double reward(bool crashed, double delta_nn, const RewardConfig& cfg,
              double delta_max);

/// One planner evaluation: follower references, scaled state, steering
/// modification and safety filter.
struct HybridStep {
  double v_ref{0.0};      // executed velocity command
  double delta_ref{0.0};  // executed steering command
  double action{0.0};
  double delta_nn{0.0};
  PpCommand pf;
  std::vector<double> state;
};

/// Applies the modification and safety filter for a chosen action.
HybridStep finish_hybrid_step(const VehicleState& vehicle, const PpCommand& pf,
                              std::vector<double> state, double action,
                              const SimParams& params);

/// Full pipeline with the actor network choosing the action
/// (pp_plan -> assemble_state -> actor -> modify_steering -> safety_filter).
HybridStep plan_hybrid(const VehicleState& vehicle, const Scan& scan,
                       const PlanPath& path, const PPConfig& pp_cfg,
                       const SimParams& params, const Mlp& actor,
                       ClipStats* stats = nullptr);

/// Same pipeline with the action pinned to zero: the executed pure-pursuit
/// planner (also used by the benchmark vehicle on its obstacle-aware plan).
HybridStep plan_pure_pursuit(const VehicleState& vehicle, const Scan& scan,
                             const PlanPath& path, const PPConfig& pp_cfg,
                             const SimParams& params,
                             ClipStats* stats = nullptr);

}  // namespace refmod
