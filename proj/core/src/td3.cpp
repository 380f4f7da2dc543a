#include "refmod/td3.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <stdexcept>

namespace refmod {

namespace fs = std::filesystem;

ReplayBuffer::ReplayBuffer(size_t capacity, int state_dim, uint64_t seed)
    : capacity_(capacity),
      state_dim_(state_dim),
      stride_(2 * static_cast<size_t>(state_dim) + 3),
      rng_(seed) {
  if (capacity == 0) throw std::invalid_argument("replay capacity must be > 0");
  if (state_dim <= 0) throw std::invalid_argument("state_dim must be > 0");
  data_.resize(capacity_ * stride_);
}

void ReplayBuffer::push(const Transition& t) {
  if (t.state.size() != static_cast<size_t>(state_dim_) ||
      t.next_state.size() != static_cast<size_t>(state_dim_)) {
    throw std::invalid_argument("transition state dimension mismatch");
  }
  auto check = [](double v) {
    if (!std::isfinite(v)) {
      throw std::invalid_argument("transition contains non-finite values");
    }
  };
  for (double v : t.state) check(v);
  for (double v : t.next_state) check(v);
  check(t.action);
  check(t.reward);

  double* row = data_.data() + cursor_ * stride_;
  std::copy(t.state.begin(), t.state.end(), row);
  row[state_dim_] = t.action;
  row[state_dim_ + 1] = t.reward;
  std::copy(t.next_state.begin(), t.next_state.end(), row + state_dim_ + 2);
  row[stride_ - 1] = t.done ? 1.0 : 0.0;

  cursor_ = (cursor_ + 1) % capacity_;
  size_ = std::min(size_ + 1, capacity_);
}

void ReplayBuffer::sample(size_t n, Batch& out) {
  if (size_ == 0) throw std::runtime_error("cannot sample from an empty buffer");
  if (n == 0) throw std::invalid_argument("sample size must be > 0");
  out.states.resize(state_dim_, static_cast<Eigen::Index>(n));
  out.next_states.resize(state_dim_, static_cast<Eigen::Index>(n));
  out.actions.resize(static_cast<Eigen::Index>(n));
  out.rewards.resize(static_cast<Eigen::Index>(n));
  out.done.resize(static_cast<Eigen::Index>(n));
  for (size_t i = 0; i < n; ++i) {
    const double* row = data_.data() + rng_.uniform_int(size_) * stride_;
    const auto col = static_cast<Eigen::Index>(i);
    for (int d = 0; d < state_dim_; ++d) {
      out.states(d, col) = row[d];
      out.next_states(d, col) = row[state_dim_ + 2 + d];
    }
    out.actions(col) = row[state_dim_];
    out.rewards(col) = row[state_dim_ + 1];
    out.done(col) = row[stride_ - 1];
  }
}

void Td3Config::validate() const {
  if (gamma <= 0.0 || gamma >= 1.0) throw std::invalid_argument("td3: need 0 < gamma < 1");
  if (tau <= 0.0 || tau > 1.0) throw std::invalid_argument("td3: need 0 < tau <= 1");
  if (batch_size <= 0) throw std::invalid_argument("td3: batch_size must be > 0");
  if (policy_delay <= 0) throw std::invalid_argument("td3: policy_delay must be > 0");
  if (state_dim <= 0 || hidden1 <= 0 || hidden2 <= 0) {
    throw std::invalid_argument("td3: network sizes must be > 0");
  }
}

Td3Agent::Td3Agent(const Td3Config& cfg, uint64_t seed)
    : cfg_(cfg),
      seed_(seed),
      actor_([&] {
        Rng r(derive_seed(seed, 0));
        return make_mlp({cfg.state_dim, cfg.hidden1, cfg.hidden2, 1},
                        Activation::Relu, Activation::Tanh, r);
      }()),
      actor_target_(actor_),
      critic1_([&] {
        Rng r(derive_seed(seed, 1));
        return make_mlp({cfg.state_dim + 1, cfg.hidden1, cfg.hidden2, 1},
                        Activation::Relu, Activation::Identity, r);
      }()),
      critic2_([&] {
        Rng r(derive_seed(seed, 2));
        return make_mlp({cfg.state_dim + 1, cfg.hidden1, cfg.hidden2, 1},
                        Activation::Relu, Activation::Identity, r);
      }()),
      critic1_target_(critic1_),
      critic2_target_(critic2_),
      actor_opt_(make_adam_state(actor_)),
      critic1_opt_(make_adam_state(critic1_)),
      critic2_opt_(make_adam_state(critic2_)),
      explore_rng_(derive_seed(seed, 3)),
      smooth_rng_(derive_seed(seed, 4)) {
  cfg_.validate();
}

double Td3Agent::select_action(const std::vector<double>& state, bool explore) {
  if (state.size() != static_cast<size_t>(cfg_.state_dim)) {
    throw std::invalid_argument("select_action: state dimension mismatch");
  }
  const Eigen::VectorXd x =
      Eigen::Map<const Eigen::VectorXd>(state.data(), cfg_.state_dim);
  if (!x.allFinite()) {
    throw std::invalid_argument("select_action: non-finite state");
  }
  double a = forward(actor_, x)(0);
  if (explore) {
    a += explore_rng_.normal(0.0, cfg_.exploration_noise);
  }
  return std::clamp(a, -1.0, 1.0);
}

TrainDiagnostics Td3Agent::train_step(ReplayBuffer& buffer, int64_t step_index) {
  TrainDiagnostics diag;
  if (buffer.size() < static_cast<size_t>(cfg_.batch_size)) return diag;
  diag.performed = true;

  const auto n = static_cast<Eigen::Index>(cfg_.batch_size);
  buffer.sample(static_cast<size_t>(cfg_.batch_size), batch_);

  // Target action with clipped smoothing noise, then clipped double-Q target.
  Eigen::MatrixXd next_actions = forward_batch(actor_target_, batch_.next_states);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double eps = std::clamp(smooth_rng_.normal(0.0, cfg_.policy_noise),
                                  -cfg_.noise_clip, cfg_.noise_clip);
    next_actions(0, i) = std::clamp(next_actions(0, i) + eps, -1.0, 1.0);
  }
  Eigen::MatrixXd next_input(cfg_.state_dim + 1, n);
  next_input.topRows(cfg_.state_dim) = batch_.next_states;
  next_input.bottomRows(1) = next_actions;
  const Eigen::RowVectorXd q1t = forward_batch(critic1_target_, next_input).row(0);
  const Eigen::RowVectorXd q2t = forward_batch(critic2_target_, next_input).row(0);
  Eigen::RowVectorXd y(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    y(i) = batch_.rewards(i) + cfg_.gamma * (1.0 - batch_.done(i)) *
                                   std::min(q1t(i), q2t(i));
  }

  Eigen::MatrixXd input(cfg_.state_dim + 1, n);
  input.topRows(cfg_.state_dim) = batch_.states;
  input.bottomRows(1) = batch_.actions.transpose();

  auto critic_update = [&](Mlp& critic, AdamState& opt) {
    ForwardCache cache;
    const Eigen::RowVectorXd q = forward_batch(critic, input, cache).row(0);
    const Eigen::RowVectorXd err = q - y;
    // d/dq of mean squared error
    const Eigen::MatrixXd dloss = (2.0 / static_cast<double>(n)) * err;
    const Gradients grads = backward_batch(critic, cache, dloss);
    adam_step(critic, grads, opt, cfg_.critic_lr);
    return err.squaredNorm() / static_cast<double>(n);
  };
  diag.critic1_loss = critic_update(critic1_, critic1_opt_);
  diag.critic2_loss = critic_update(critic2_, critic2_opt_);

  if (step_index % cfg_.policy_delay == 0) {
    diag.actor_updated = true;
    // Deterministic policy gradient: ascend critic1(s, actor(s)) through the
    // critic's action input.
    ForwardCache actor_cache;
    const Eigen::MatrixXd actions = forward_batch(actor_, batch_.states, actor_cache);
    Eigen::MatrixXd q_input(cfg_.state_dim + 1, n);
    q_input.topRows(cfg_.state_dim) = batch_.states;
    q_input.bottomRows(1) = actions;
    ForwardCache critic_cache;
    const Eigen::RowVectorXd q = forward_batch(critic1_, q_input, critic_cache).row(0);
    diag.actor_loss = -q.mean();
    const Eigen::MatrixXd dloss =
        Eigen::MatrixXd::Constant(1, n, -1.0 / static_cast<double>(n));
    Eigen::MatrixXd dinput;
    backward_batch(critic1_, critic_cache, dloss, &dinput);
    const Eigen::MatrixXd daction = dinput.bottomRows(1);
    const Gradients actor_grads = backward_batch(actor_, actor_cache, daction);
    adam_step(actor_, actor_grads, actor_opt_, cfg_.actor_lr);

    polyak_update(actor_, actor_target_, cfg_.tau);
    polyak_update(critic1_, critic1_target_, cfg_.tau);
    polyak_update(critic2_, critic2_target_, cfg_.tau);
  }
  return diag;
}

void Td3Agent::set_actor(const Mlp& actor) {
  if (actor.input_size() != cfg_.state_dim || actor.output_size() != 1) {
    throw std::invalid_argument("set_actor: shape mismatch");
  }
  actor_ = actor;
  actor_target_ = actor;
  actor_opt_ = make_adam_state(actor_);
}

namespace {

void write_meta(const Td3Config& cfg, uint64_t seed, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << "seed = " << seed << '\n'
      << "state_dim = " << cfg.state_dim << '\n'
      << "hidden1 = " << cfg.hidden1 << '\n'
      << "hidden2 = " << cfg.hidden2 << '\n'
      << "gamma = " << cfg.gamma << '\n'
      << "tau = " << cfg.tau << '\n'
      << "policy_noise = " << cfg.policy_noise << '\n'
      << "noise_clip = " << cfg.noise_clip << '\n'
      << "policy_delay = " << cfg.policy_delay << '\n'
      << "exploration_noise = " << cfg.exploration_noise << '\n'
      << "batch_size = " << cfg.batch_size << '\n'
      << "buffer_capacity = " << cfg.buffer_capacity << '\n'
      << "warmup_steps = " << cfg.warmup_steps << '\n'
      << "actor_lr = " << cfg.actor_lr << '\n'
      << "critic_lr = " << cfg.critic_lr << '\n';
}

}  // namespace

void Td3Agent::save(const std::string& dir) const {
  fs::create_directories(dir);
  save_mlp(actor_, dir + "/actor.mlp");
  save_mlp(actor_target_, dir + "/actor_target.mlp");
  save_mlp(critic1_, dir + "/critic1.mlp");
  save_mlp(critic2_, dir + "/critic2.mlp");
  save_mlp(critic1_target_, dir + "/critic1_target.mlp");
  save_mlp(critic2_target_, dir + "/critic2_target.mlp");
  write_meta(cfg_, seed_, dir + "/agent.txt");
}

Td3Agent Td3Agent::load(const std::string& dir) {
  std::ifstream in(dir + "/agent.txt");
  if (!in) throw std::invalid_argument("cannot open checkpoint meta: " + dir + "/agent.txt");
  Td3Config cfg;
  uint64_t seed = 0;
  std::string key, eq, tok;
  while (in >> key >> eq >> tok) {
    if (key == "seed") {
      seed = std::stoull(tok);
      continue;
    }
    const double v = std::stod(tok);
    if (key == "state_dim") cfg.state_dim = static_cast<int>(v);
    else if (key == "hidden1") cfg.hidden1 = static_cast<int>(v);
    else if (key == "hidden2") cfg.hidden2 = static_cast<int>(v);
    else if (key == "gamma") cfg.gamma = v;
    else if (key == "tau") cfg.tau = v;
    else if (key == "policy_noise") cfg.policy_noise = v;
    else if (key == "noise_clip") cfg.noise_clip = v;
    else if (key == "policy_delay") cfg.policy_delay = static_cast<int>(v);
    else if (key == "exploration_noise") cfg.exploration_noise = v;
    else if (key == "batch_size") cfg.batch_size = static_cast<int>(v);
    else if (key == "buffer_capacity") cfg.buffer_capacity = static_cast<size_t>(v);
    else if (key == "warmup_steps") cfg.warmup_steps = static_cast<int64_t>(v);
    else if (key == "actor_lr") cfg.actor_lr = v;
    else if (key == "critic_lr") cfg.critic_lr = v;
  }
  Td3Agent agent(cfg, seed);
  agent.actor_ = load_mlp(dir + "/actor.mlp");
  agent.actor_target_ = load_mlp(dir + "/actor_target.mlp");
  agent.critic1_ = load_mlp(dir + "/critic1.mlp");
  agent.critic2_ = load_mlp(dir + "/critic2.mlp");
  agent.critic1_target_ = load_mlp(dir + "/critic1_target.mlp");
  agent.critic2_target_ = load_mlp(dir + "/critic2_target.mlp");
  return agent;
}

}  // namespace refmod
