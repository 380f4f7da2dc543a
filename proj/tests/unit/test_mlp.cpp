#include <cmath>
#include <filesystem>
#include <fstream>

#include "doctest.h"
#include "oracles.hpp"
#include "refmod/mlp.hpp"
#include "refmod/rng.hpp"

using namespace refmod;

namespace {

Eigen::VectorXd random_vec(int n, Rng& rng, double lo = -1.0, double hi = 1.0) {
  Eigen::VectorXd v(n);
  for (int i = 0; i < n; ++i) v(i) = rng.uniform(lo, hi);
  return v;
}

// Finite-difference check of every parameter gradient of sum(w . f(x)).
double max_param_grad_rel_error(Mlp& net, const Eigen::VectorXd& x,
                                const Eigen::VectorXd& weights, double h) {
  auto loss = [&]() { return weights.dot(forward(net, x)); };
  const auto [grads, din] = backward(net, x, weights);
  (void)din;
  double worst = 0.0;
  for (size_t l = 0; l < net.layers.size(); ++l) {
    auto check_entry = [&](double& p, double analytic) {
      const double saved = p;
      p = saved + h;
      const double up = loss();
      p = saved - h;
      const double down = loss();
      p = saved;
      const double fd = (up - down) / (2.0 * h);
      if (analytic == 0.0 && fd == 0.0) return;
      worst = std::max(worst, oracles::rel_error(analytic, fd));
    };
    for (Eigen::Index i = 0; i < net.layers[l].W.rows(); ++i) {
      for (Eigen::Index j = 0; j < net.layers[l].W.cols(); ++j) {
        check_entry(net.layers[l].W(i, j), grads.layers[l].W(i, j));
      }
      check_entry(net.layers[l].b(i), grads.layers[l].b(i));
    }
  }
  return worst;
}

}  // namespace

TEST_CASE("forward: zero weights with tanh head give zero output") {
  Rng rng(1);
  Mlp net = make_mlp({4, 8, 2}, Activation::Relu, Activation::Tanh, rng);
  for (auto& l : net.layers) {
    l.W.setZero();
    l.b.setZero();
  }
  const Eigen::VectorXd y = forward(net, random_vec(4, rng));
  CHECK(y(0) == 0.0);
  CHECK(y(1) == 0.0);
}

TEST_CASE("forward: identity single layer reproduces the input") {
  Rng rng(2);
  Mlp net = make_mlp({3, 3}, Activation::Relu, Activation::Identity, rng);
  net.layers[0].W = Eigen::MatrixXd::Identity(3, 3);
  net.layers[0].b.setZero();
  const Eigen::VectorXd x = random_vec(3, rng);
  const Eigen::VectorXd y = forward(net, x);
  for (int i = 0; i < 3; ++i) CHECK(y(i) == x(i));
}

TEST_CASE("forward: matches the plain-loop oracle on a random 3-4-2 net") {
  Rng rng(3);
  const Mlp net = make_mlp({3, 4, 2}, Activation::Relu, Activation::Tanh, rng);
  const oracles::DenseNet oracle = oracles::from_mlp(net);
  for (int trial = 0; trial < 20; ++trial) {
    const Eigen::VectorXd x = random_vec(3, rng, -2.0, 2.0);
    const Eigen::VectorXd y = forward(net, x);
    const std::vector<double> expect =
        oracles::dense_forward(oracle, {x(0), x(1), x(2)});
    CHECK(std::abs(y(0) - expect[0]) < 1e-12);
    CHECK(std::abs(y(1) - expect[1]) < 1e-12);
  }
}

TEST_CASE("forward: dimension mismatch raises") {
  Rng rng(4);
  const Mlp net = make_mlp({3, 4, 2}, Activation::Relu, Activation::Tanh, rng);
  CHECK_THROWS_AS(forward(net, random_vec(5, rng)), std::invalid_argument);
}

TEST_CASE("backward: zero output gradient yields zero parameter gradients") {
  Rng rng(5);
  const Mlp net = make_mlp({4, 6, 3}, Activation::Relu, Activation::Tanh, rng);
  const auto [grads, din] = backward(net, random_vec(4, rng),
                                     Eigen::VectorXd::Zero(3));
  for (const auto& l : grads.layers) {
    CHECK(l.W.cwiseAbs().maxCoeff() == 0.0);
    CHECK(l.b.cwiseAbs().maxCoeff() == 0.0);
  }
  CHECK(din.cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("backward: every parameter of a 14-300-300-1 net passes the "
          "finite-difference check") {
  Rng rng(6);
  Mlp net = make_mlp({14, 300, 300, 1}, Activation::Relu, Activation::Tanh, rng);
  const Eigen::VectorXd x = random_vec(14, rng);
  const Eigen::VectorXd w = Eigen::VectorXd::Ones(1);
  CHECK(max_param_grad_rel_error(net, x, w, 1e-5) < 1e-5);
}

TEST_CASE("backward: input gradient of a linear net is W^T dLoss") {
  Rng rng(7);
  Mlp net = make_mlp({5, 3}, Activation::Relu, Activation::Identity, rng);
  const Eigen::VectorXd x = random_vec(5, rng);
  const Eigen::VectorXd dout = random_vec(3, rng);
  const auto [grads, din] = backward(net, x, dout);
  (void)grads;
  const Eigen::VectorXd expect = net.layers[0].W.transpose() * dout;
  for (int i = 0; i < 5; ++i) CHECK(din(i) == doctest::Approx(expect(i)).epsilon(1e-14));
}

TEST_CASE("backward: finite differences on the input gradient") {
  Rng rng(8);
  Mlp net = make_mlp({6, 16, 16, 2}, Activation::Relu, Activation::Tanh, rng);
  Eigen::VectorXd x = random_vec(6, rng);
  const Eigen::VectorXd w = random_vec(2, rng);
  const auto [grads, din] = backward(net, x, w);
  (void)grads;
  for (int i = 0; i < 6; ++i) {
    const double fd = oracles::central_diff(
        [&](double v) {
          Eigen::VectorXd xx = x;
          xx(i) = v;
          return w.dot(forward(net, xx));
        },
        x(i), 1e-6);
    CHECK(oracles::rel_error(din(i), fd) < 1e-5);
  }
}

TEST_CASE("adam: zero gradient leaves fresh parameters unchanged") {
  Rng rng(9);
  Mlp net = make_mlp({3, 4, 1}, Activation::Relu, Activation::Identity, rng);
  const Mlp before = net;
  AdamState state = make_adam_state(net);
  Gradients zero;
  zero.layers.resize(net.layers.size());
  for (size_t l = 0; l < net.layers.size(); ++l) {
    zero.layers[l].W = Eigen::MatrixXd::Zero(net.layers[l].W.rows(),
                                             net.layers[l].W.cols());
    zero.layers[l].b = Eigen::VectorXd::Zero(net.layers[l].b.size());
  }
  adam_step(net, zero, state, 1e-3);
  for (size_t l = 0; l < net.layers.size(); ++l) {
    CHECK((net.layers[l].W - before.layers[l].W).cwiseAbs().maxCoeff() == 0.0);
  }

  // nonzero moments decay by beta factors under a zero gradient
  state.m[0].W(0, 0) = 1.0;
  state.v[0].W(0, 0) = 1.0;
  adam_step(net, zero, state, 0.0);
  CHECK(state.m[0].W(0, 0) == doctest::Approx(0.9));
  CHECK(state.v[0].W(0, 0) == doctest::Approx(0.999));
}

TEST_CASE("adam: one step on f(w) = w^2 descends toward zero") {
  Rng rng(10);
  Mlp net = make_mlp({1, 1}, Activation::Relu, Activation::Identity, rng);
  net.layers[0].W(0, 0) = 1.0;
  net.layers[0].b(0) = 0.0;
  AdamState state = make_adam_state(net);
  Gradients g;
  g.layers.resize(1);
  g.layers[0].W = Eigen::MatrixXd::Constant(1, 1, 2.0);  // d(w^2)/dw at w=1
  g.layers[0].b = Eigen::VectorXd::Zero(1);
  adam_step(net, g, state, 1e-2);
  CHECK(net.layers[0].W(0, 0) < 1.0);
  CHECK(net.layers[0].W(0, 0) > 0.9);
}

TEST_CASE("adam: 2000 steps solve a two-parameter quadratic") {
  Rng rng(11);
  Mlp net = make_mlp({1, 1}, Activation::Relu, Activation::Identity, rng);
  net.layers[0].W(0, 0) = 1.3;
  net.layers[0].b(0) = -0.8;
  AdamState state = make_adam_state(net);
  for (int i = 0; i < 2000; ++i) {
    Gradients g;
    g.layers.resize(1);
    g.layers[0].W = Eigen::MatrixXd::Constant(1, 1, 2.0 * net.layers[0].W(0, 0));
    g.layers[0].b = Eigen::VectorXd::Constant(1, 2.0 * net.layers[0].b(0));
    adam_step(net, g, state, 1e-2);
  }
  CHECK(std::abs(net.layers[0].W(0, 0)) < 1e-3);
  CHECK(std::abs(net.layers[0].b(0)) < 1e-3);
}

TEST_CASE("adam: non-finite gradients are rejected without touching weights") {
  Rng rng(12);
  Mlp net = make_mlp({2, 2}, Activation::Relu, Activation::Identity, rng);
  const Mlp before = net;
  AdamState state = make_adam_state(net);
  Gradients g;
  g.layers.resize(1);
  g.layers[0].W = Eigen::MatrixXd::Constant(2, 2, std::nan(""));
  g.layers[0].b = Eigen::VectorXd::Zero(2);
  CHECK_THROWS_AS(adam_step(net, g, state, 1e-3), std::runtime_error);
  CHECK((net.layers[0].W - before.layers[0].W).cwiseAbs().maxCoeff() == 0.0);
  CHECK(state.t == 0);
}

TEST_CASE("checkpoint: bit-exact round trip") {
  Rng rng(13);
  const Mlp net = make_mlp({14, 300, 300, 1}, Activation::Relu, Activation::Tanh, rng);
  const auto dir = std::filesystem::temp_directory_path() / "refmod_mlp_test";
  std::filesystem::create_directories(dir);
  const std::string path = (dir / "net.mlp").string();
  save_mlp(net, path);
  const Mlp loaded = load_mlp(path);
  REQUIRE(loaded.layers.size() == net.layers.size());
  CHECK(loaded.hidden == net.hidden);
  CHECK(loaded.head == net.head);
  for (size_t l = 0; l < net.layers.size(); ++l) {
    REQUIRE(loaded.layers[l].W.rows() == net.layers[l].W.rows());
    REQUIRE(loaded.layers[l].W.cols() == net.layers[l].W.cols());
    CHECK((loaded.layers[l].W - net.layers[l].W).cwiseAbs().maxCoeff() == 0.0);
    CHECK((loaded.layers[l].b - net.layers[l].b).cwiseAbs().maxCoeff() == 0.0);
  }
  // saving the loaded net reproduces the file byte for byte
  const std::string path2 = (dir / "net2.mlp").string();
  save_mlp(loaded, path2);
  std::ifstream f1(path, std::ios::binary), f2(path2, std::ios::binary);
  const std::string b1((std::istreambuf_iterator<char>(f1)), {});
  const std::string b2((std::istreambuf_iterator<char>(f2)), {});
  CHECK(b1 == b2);
  CHECK(!b1.empty());

  CHECK_THROWS_AS(load_mlp((dir / "missing.mlp").string()), std::invalid_argument);
}

TEST_CASE("tanh head stays strictly inside (-1, 1) on the scaled state box") {
  Rng rng(14);
  const Mlp net = make_mlp({14, 300, 300, 1}, Activation::Relu, Activation::Tanh, rng);
  for (int trial = 0; trial < 200; ++trial) {
    const double y = forward(net, random_vec(14, rng, -1.0, 1.0))(0);
    CHECK(y > -1.0);
    CHECK(y < 1.0);
  }
}

TEST_CASE("forward_batch: column order independence and determinism") {
  Rng rng(15);
  const Mlp net = make_mlp({6, 40, 2}, Activation::Relu, Activation::Tanh, rng);
  Eigen::MatrixXd x(6, 32);
  for (int i = 0; i < x.size(); ++i) x(i) = rng.uniform(-1.0, 1.0);
  const Eigen::MatrixXd y = forward_batch(net, x);
  const Eigen::MatrixXd y2 = forward_batch(net, x);
  CHECK((y - y2).cwiseAbs().maxCoeff() == 0.0);

  // reversed columns give reversed outputs
  const Eigen::MatrixXd xr = x.rowwise().reverse();
  const Eigen::MatrixXd yr = forward_batch(net, xr);
  CHECK((yr.rowwise().reverse() - y).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("backward_batch: matches the sum of single-sample gradients") {
  Rng rng(16);
  const Mlp net = make_mlp({5, 12, 1}, Activation::Relu, Activation::Tanh, rng);
  Eigen::MatrixXd x(5, 7);
  for (int i = 0; i < x.size(); ++i) x(i) = rng.uniform(-1.0, 1.0);
  const Eigen::MatrixXd dout = Eigen::MatrixXd::Ones(1, 7);

  ForwardCache cache;
  forward_batch(net, x, cache);
  const Gradients batch = backward_batch(net, cache, dout);

  Gradients total;
  total.layers.resize(net.layers.size());
  for (size_t l = 0; l < net.layers.size(); ++l) {
    total.layers[l].W = Eigen::MatrixXd::Zero(net.layers[l].W.rows(),
                                              net.layers[l].W.cols());
    total.layers[l].b = Eigen::VectorXd::Zero(net.layers[l].b.size());
  }
  for (int c = 0; c < 7; ++c) {
    const auto [g, din] = backward(net, x.col(c), Eigen::VectorXd::Ones(1));
    (void)din;
    for (size_t l = 0; l < net.layers.size(); ++l) {
      total.layers[l].W += g.layers[l].W;
      total.layers[l].b += g.layers[l].b;
    }
  }
  for (size_t l = 0; l < net.layers.size(); ++l) {
    CHECK((batch.layers[l].W - total.layers[l].W).cwiseAbs().maxCoeff() < 1e-12);
    CHECK((batch.layers[l].b - total.layers[l].b).cwiseAbs().maxCoeff() < 1e-12);
  }
}
