#pragma once

#include <Eigen/Dense>
#include <string>
#include <vector>

#include "refmod/mlp.hpp"
#include "refmod/rng.hpp"

namespace refmod {

struct Transition {
  std::vector<double> state;
  double action{0.0};
  double reward{0.0};
  std::vector<double> next_state;
  bool done{false};
};

struct Batch {
  Eigen::MatrixXd states;       // state_dim x n
  Eigen::MatrixXd next_states;  // state_dim x n
  Eigen::VectorXd actions;
  Eigen::VectorXd rewards;
  Eigen::VectorXd done;         // 1.0 terminal, 0.0 otherwise
};

/// Seeded ring buffer; push overwrites the oldest entry once full and
/// sampling is uniform with replacement.
class ReplayBuffer {
 public:
  ReplayBuffer(size_t capacity, int state_dim, uint64_t seed);

  void push(const Transition& t);
  void sample(size_t n, Batch& out);
  size_t size() const { return size_; }
  size_t capacity() const { return capacity_; }
  int state_dim() const { return state_dim_; }

 private:
  size_t capacity_;
  int state_dim_;
  size_t size_{0};
  size_t cursor_{0};
  // flat row-major storage: [state | action | reward | next_state | done]
  std::vector<double> data_;
  size_t stride_;
  Rng rng_;
};

struct Td3Config {
  int state_dim{14};
  int hidden1{300};
  int hidden2{300};
  double gamma{0.99};
  double tau{0.005};
  double policy_noise{0.2};
  double noise_clip{0.5};
  int policy_delay{2};
  double exploration_noise{0.1};
  int batch_size{100};
  size_t buffer_capacity{100000};
  int64_t warmup_steps{1000};
  double actor_lr{1e-3};
  double critic_lr{1e-3};

  void validate() const;
};

struct TrainDiagnostics {
  bool performed{false};
  double critic1_loss{0.0};
  double critic2_loss{0.0};
  bool actor_updated{false};
  double actor_loss{0.0};
};

/// Twin-delayed DDPG agent: tanh-head actor over the scaled planner state,
/// two identity-head critics over state (+) action, and polyak-averaged
/// target copies of all three.
class Td3Agent {
 public:
  Td3Agent(const Td3Config& cfg, uint64_t seed);

  /// Actor output, optionally with clipped Gaussian exploration noise.
  double select_action(const std::vector<double>& state, bool explore);

  /// One TD3 update from a sampled minibatch. No-op (performed = false) when
  /// the buffer holds fewer than batch_size transitions. The actor and the
  /// target networks update every policy_delay calls.
  TrainDiagnostics train_step(ReplayBuffer& buffer, int64_t step_index);

  void save(const std::string& dir) const;
  static Td3Agent load(const std::string& dir);

  const Td3Config& config() const { return cfg_; }
  const Mlp& actor() const { return actor_; }
  const Mlp& actor_target() const { return actor_target_; }
  const Mlp& critic1() const { return critic1_; }
  const Mlp& critic2() const { return critic2_; }
  const Mlp& critic1_target() const { return critic1_target_; }
  const Mlp& critic2_target() const { return critic2_target_; }
  uint64_t seed() const { return seed_; }

  /// Overwrites the actor (used by tests to pin specific policies).
  void set_actor(const Mlp& actor);

 private:
  Td3Config cfg_;
  uint64_t seed_;
  Mlp actor_, actor_target_;
  Mlp critic1_, critic2_, critic1_target_, critic2_target_;
  AdamState actor_opt_, critic1_opt_, critic2_opt_;
  Rng explore_rng_;
  Rng smooth_rng_;
  Batch batch_;
};

}  // namespace refmod
