#include <cmath>
#include <filesystem>

#include "doctest.h"
#include "refmod/rng.hpp"
#include "refmod/td3.hpp"

using namespace refmod;

namespace {

Td3Config small_config() {
  Td3Config cfg;
  cfg.state_dim = 14;
  cfg.hidden1 = 64;
  cfg.hidden2 = 64;
  cfg.batch_size = 100;
  cfg.buffer_capacity = 20000;
  return cfg;
}

void zero_actor(Td3Agent& agent) {
  Mlp actor = agent.actor();
  for (auto& l : actor.layers) {
    l.W.setZero();
    l.b.setZero();
  }
  agent.set_actor(actor);
}

double max_param_diff(const Mlp& a, const Mlp& b) {
  double worst = 0.0;
  for (size_t l = 0; l < a.layers.size(); ++l) {
    worst = std::max(worst, (a.layers[l].W - b.layers[l].W).cwiseAbs().maxCoeff());
    worst = std::max(worst, (a.layers[l].b - b.layers[l].b).cwiseAbs().maxCoeff());
  }
  return worst;
}

double param_norm_diff(const Mlp& a, const Mlp& b) {
  double sum = 0.0;
  for (size_t l = 0; l < a.layers.size(); ++l) {
    sum += (a.layers[l].W - b.layers[l].W).squaredNorm();
    sum += (a.layers[l].b - b.layers[l].b).squaredNorm();
  }
  return std::sqrt(sum);
}

}  // namespace

TEST_CASE("replay buffer: ring overwrite drops the oldest item") {
  ReplayBuffer buffer(2, 2, 1);
  for (int i = 0; i < 3; ++i) {
    Transition t;
    t.state = {0.1, 0.2};
    t.next_state = {0.3, 0.4};
    t.reward = static_cast<double>(i);
    buffer.push(t);
  }
  CHECK(buffer.size() == 2);
  Batch batch;
  buffer.sample(256, batch);
  for (int i = 0; i < batch.rewards.size(); ++i) {
    CHECK(batch.rewards(i) >= 1.0);  // reward 0 was overwritten
  }
}

TEST_CASE("replay buffer: fixed seed reproduces batches; empty buffer raises") {
  Transition t;
  t.state = {0.0, 0.0};
  t.next_state = {0.0, 0.0};
  ReplayBuffer a(100, 2, 42), b(100, 2, 42);
  for (int i = 0; i < 50; ++i) {
    t.reward = i;
    a.push(t);
    b.push(t);
  }
  Batch ba, bb;
  a.sample(32, ba);
  b.sample(32, bb);
  CHECK((ba.rewards - bb.rewards).cwiseAbs().maxCoeff() == 0.0);

  ReplayBuffer empty(10, 2, 0);
  Batch out;
  CHECK_THROWS_AS(empty.sample(1, out), std::runtime_error);
}

TEST_CASE("replay buffer: sampling is uniform within 3 sigma") {
  ReplayBuffer buffer(10, 1, 7);
  for (int i = 0; i < 10; ++i) {
    Transition t;
    t.state = {0.0};
    t.next_state = {0.0};
    t.reward = i;
    buffer.push(t);
  }
  const int draws = 100000;
  std::vector<int> counts(10, 0);
  Batch batch;
  for (int rep = 0; rep < draws / 1000; ++rep) {
    buffer.sample(1000, batch);
    for (int i = 0; i < batch.rewards.size(); ++i) {
      counts[static_cast<size_t>(batch.rewards(i))] += 1;
    }
  }
  const double expected = draws / 10.0;
  const double sigma = std::sqrt(draws * 0.1 * 0.9);
  for (const int c : counts) {
    CHECK(std::abs(c - expected) < 3.0 * sigma);
  }
}

TEST_CASE("replay buffer: rejects non-finite and mis-sized transitions") {
  ReplayBuffer buffer(10, 2, 0);
  Transition t;
  t.state = {0.0, 0.0};
  t.next_state = {0.0, std::nan("")};
  CHECK_THROWS_AS(buffer.push(t), std::invalid_argument);
  t.next_state = {0.0};
  CHECK_THROWS_AS(buffer.push(t), std::invalid_argument);
}

TEST_CASE("select_action: zero actor gives zero; exploration stays clipped") {
  Td3Agent agent(small_config(), 3);
  zero_actor(agent);
  const std::vector<double> state(14, 0.3);
  CHECK(agent.select_action(state, false) == 0.0);
  for (int i = 0; i < 10000; ++i) {
    const double a = agent.select_action(state, true);
    CHECK(a >= -1.0);
    CHECK(a <= 1.0);
  }
}

TEST_CASE("select_action: fixed seed reproduces the noisy sequence") {
  Td3Agent a(small_config(), 5), b(small_config(), 5);
  const std::vector<double> state(14, -0.2);
  for (int i = 0; i < 100; ++i) {
    CHECK(a.select_action(state, true) == b.select_action(state, true));
  }
}

TEST_CASE("polyak: tau = 1 copies the online net; decay is geometric") {
  Rng rng(6);
  Mlp online = make_mlp({4, 8, 1}, Activation::Relu, Activation::Tanh, rng);
  Mlp target = make_mlp({4, 8, 1}, Activation::Relu, Activation::Tanh, rng);
  Mlp t1 = target;
  polyak_update(online, t1, 1.0);
  CHECK(max_param_diff(t1, online) == 0.0);

  const double tau = 0.01;
  double prev = param_norm_diff(target, online);
  for (int i = 0; i < 20; ++i) {
    polyak_update(online, target, tau);
    const double cur = param_norm_diff(target, online);
    CHECK(cur == doctest::Approx((1.0 - tau) * prev).epsilon(1e-9));
    prev = cur;
  }
}

TEST_CASE("train_step: no-op below one batch of data") {
  Td3Config cfg = small_config();
  Td3Agent agent(cfg, 7);
  ReplayBuffer buffer(cfg.buffer_capacity, cfg.state_dim, 7);
  const TrainDiagnostics diag = agent.train_step(buffer, 1);
  CHECK_FALSE(diag.performed);
}

TEST_CASE("train_step: with done everywhere the critics regress to the reward") {
  Td3Config cfg = small_config();
  cfg.policy_noise = 0.0;
  Td3Agent agent(cfg, 11);
  ReplayBuffer buffer(cfg.buffer_capacity, cfg.state_dim, 11);
  // two clusters: action -0.5 pays 0.2, action +0.5 pays 0.8, all terminal,
  // so the regression target is exactly the reward
  for (int i = 0; i < 2000; ++i) {
    Transition t;
    t.state.assign(14, 0.0);
    t.next_state.assign(14, 0.0);
    t.action = i % 2 == 0 ? -0.5 : 0.5;
    t.reward = i % 2 == 0 ? 0.2 : 0.8;
    t.done = true;
    buffer.push(t);
  }
  for (int64_t it = 1; it <= 1500; ++it) agent.train_step(buffer, it);

  Eigen::VectorXd input(15);
  input.setZero();
  input(14) = -0.5;
  CHECK(forward(agent.critic1(), input)(0) == doctest::Approx(0.2).epsilon(0.15));
  input(14) = 0.5;
  CHECK(forward(agent.critic1(), input)(0) == doctest::Approx(0.8).epsilon(0.15));
}

TEST_CASE("clipped double-Q: the target uses the pointwise minimum") {
  Td3Config cfg = small_config();
  Td3Agent agent(cfg, 13);
  Rng rng(13);
  for (int trial = 0; trial < 200; ++trial) {
    Eigen::VectorXd input(15);
    for (int i = 0; i < 15; ++i) input(i) = rng.uniform(-1.0, 1.0);
    const double q1 = forward(agent.critic1_target(), input)(0);
    const double q2 = forward(agent.critic2_target(), input)(0);
    const double used = std::min(q1, q2);
    CHECK(used <= q1);
    CHECK(used <= q2);
  }
}

TEST_CASE("train_step: continuous bandit converges near the reward argmax") {
  Td3Config cfg = small_config();
  cfg.exploration_noise = 0.2;
  cfg.tau = 0.01;
  Td3Agent agent(cfg, 17);
  ReplayBuffer buffer(cfg.buffer_capacity, cfg.state_dim, 17);
  Rng warmup(18);
  const std::vector<double> state(14, 0.0);

  for (int64_t step = 1; step <= 5000; ++step) {
    const double a = step <= 500 ? warmup.uniform(-1.0, 1.0)
                                 : agent.select_action(state, true);
    Transition t;
    t.state = state;
    t.next_state = state;
    t.action = a;
    t.reward = -(a - 0.5) * (a - 0.5);
    t.done = true;
    buffer.push(t);
    if (step > 200) agent.train_step(buffer, step);
  }
  const double greedy = agent.select_action(state, false);
  CHECK(std::abs(greedy - 0.5) < 0.1);
}

TEST_CASE("agent determinism: identical seeds give identical parameters") {
  Td3Config cfg = small_config();
  auto run = [&cfg]() {
    Td3Agent agent(cfg, 23);
    ReplayBuffer buffer(cfg.buffer_capacity, cfg.state_dim, 23);
    Rng rng(24);
    std::vector<double> s(14);
    for (int64_t step = 1; step <= 400; ++step) {
      for (auto& v : s) v = rng.uniform(-1.0, 1.0);
      Transition t;
      t.state = s;
      t.next_state = s;
      t.action = agent.select_action(s, true);
      t.reward = rng.uniform(-1.0, 1.0);
      t.done = step % 7 == 0;
      buffer.push(t);
      agent.train_step(buffer, step);
    }
    return agent;
  };
  const Td3Agent a = run();
  const Td3Agent b = run();
  CHECK(max_param_diff(a.actor(), b.actor()) == 0.0);
  CHECK(max_param_diff(a.critic1(), b.critic1()) == 0.0);
  CHECK(max_param_diff(a.critic2_target(), b.critic2_target()) == 0.0);
}

TEST_CASE("checkpoint directory round trip") {
  Td3Config cfg = small_config();
  Td3Agent agent(cfg, 29);
  ReplayBuffer buffer(cfg.buffer_capacity, cfg.state_dim, 29);
  Rng rng(30);
  std::vector<double> s(14);
  for (int64_t step = 1; step <= 300; ++step) {
    for (auto& v : s) v = rng.uniform(-1.0, 1.0);
    Transition t;
    t.state = s;
    t.next_state = s;
    t.action = agent.select_action(s, true);
    t.reward = rng.uniform(-1.0, 1.0);
    buffer.push(t);
    agent.train_step(buffer, step);
  }
  const auto dir = std::filesystem::temp_directory_path() / "refmod_td3_ckpt";
  std::filesystem::remove_all(dir);
  agent.save(dir.string());
  const Td3Agent loaded = Td3Agent::load(dir.string());
  CHECK(max_param_diff(loaded.actor(), agent.actor()) == 0.0);
  CHECK(max_param_diff(loaded.critic1(), agent.critic1()) == 0.0);
  CHECK(max_param_diff(loaded.actor_target(), agent.actor_target()) == 0.0);
  CHECK(loaded.config().gamma == cfg.gamma);
  CHECK(loaded.config().batch_size == cfg.batch_size);
}
