#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <string>
#include <vector>

#include "refmod/rng.hpp"

namespace refmod {

enum class Activation : uint8_t { Identity = 0, Tanh = 1, Relu = 2 };

/// Dense feed-forward network. All arithmetic is 64-bit; weights are
/// (out x in) matrices applied to column vectors.
struct Mlp {
  struct Layer {
    Eigen::MatrixXd W;
    Eigen::VectorXd b;
  };
  std::vector<Layer> layers;
  Activation hidden{Activation::Relu};
  Activation head{Activation::Identity};

  int input_size() const { return static_cast<int>(layers.front().W.cols()); }
  int output_size() const { return static_cast<int>(layers.back().W.rows()); }
  size_t parameter_count() const;
};

/// Parameter-shaped gradient container.
struct Gradients {
  std::vector<Mlp::Layer> layers;
};

/// Builds a network with the given layer sizes (e.g. {14, 300, 300, 1}).
/// Weights and biases are drawn uniformly from +-1/sqrt(fan_in).
Mlp make_mlp(const std::vector<int>& sizes, Activation hidden, Activation head,
             Rng& rng);

Eigen::VectorXd forward(const Mlp& net, const Eigen::VectorXd& x);

/// Exact reverse-mode gradients of the forward map at x. Returns the
/// parameter gradients and the loss gradient with respect to the input.
std::pair<Gradients, Eigen::VectorXd> backward(const Mlp& net,
                                               const Eigen::VectorXd& x,
                                               const Eigen::VectorXd& dloss_dout);

/// Batch evaluation; columns of X are samples. The cache keeps activations
/// for the matching backward_batch call.
struct ForwardCache {
  std::vector<Eigen::MatrixXd> activations;  // activations[0] is the input
  std::vector<Eigen::MatrixXd> pre;          // pre-activation per layer
};

Eigen::MatrixXd forward_batch(const Mlp& net, const Eigen::MatrixXd& X);
const Eigen::MatrixXd& forward_batch(const Mlp& net, const Eigen::MatrixXd& X,
                                     ForwardCache& cache);

/// Gradients summed over the batch columns; scale dloss_dout beforehand for
/// mean losses. Optionally emits the gradient with respect to the input.
Gradients backward_batch(const Mlp& net, const ForwardCache& cache,
                         const Eigen::MatrixXd& dloss_dout,
                         Eigen::MatrixXd* dloss_din = nullptr);

struct AdamState {
  std::vector<Mlp::Layer> m;
  std::vector<Mlp::Layer> v;
  int64_t t{0};
};

AdamState make_adam_state(const Mlp& net);

/// One adaptive-moment update, in place. Throws std::runtime_error without
/// touching the parameters if any gradient entry is non-finite.
void adam_step(Mlp& net, const Gradients& grads, AdamState& state, double lr,
               double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8);

/// Little-endian binary checkpoint (header with layer sizes and activation
/// tags, then row-major parameter blocks). Round-trips bit-exactly.
void save_mlp(const Mlp& net, const std::string& path);
Mlp load_mlp(const std::string& path);

/// In-place polyak update: target = tau * online + (1 - tau) * target.
void polyak_update(const Mlp& online, Mlp& target, double tau);

}  // namespace refmod
