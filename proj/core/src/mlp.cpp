#include "refmod/mlp.hpp"

#include <bit>
#include <cstdio>
#include <memory>
#include <stdexcept>

static_assert(std::endian::native == std::endian::little,
              "checkpoint format assumes a little-endian host");

namespace refmod {

namespace {

void apply_activation(Activation act, Eigen::MatrixXd& z) {
  switch (act) {
    case Activation::Identity:
      break;
    case Activation::Tanh:
      z = z.array().tanh();
      break;
    case Activation::Relu:
      z = z.cwiseMax(0.0);
      break;
  }
}

// Derivative as a function of the pre-activation z.
Eigen::MatrixXd activation_grad(Activation act, const Eigen::MatrixXd& z) {
  switch (act) {
    case Activation::Identity:
      return Eigen::MatrixXd::Ones(z.rows(), z.cols());
    case Activation::Tanh: {
      const Eigen::ArrayXXd t = z.array().tanh();
      return (1.0 - t.square()).matrix();
    }
    case Activation::Relu:
      return (z.array() > 0.0).cast<double>().matrix();
  }
  return {};
}

}  // namespace

size_t Mlp::parameter_count() const {
  size_t n = 0;
  for (const auto& l : layers) {
    n += static_cast<size_t>(l.W.size()) + static_cast<size_t>(l.b.size());
  }
  return n;
}

Mlp make_mlp(const std::vector<int>& sizes, Activation hidden, Activation head,
             Rng& rng) {
  if (sizes.size() < 2) throw std::invalid_argument("mlp needs >= 2 layer sizes");
  Mlp net;
  net.hidden = hidden;
  net.head = head;
  net.layers.resize(sizes.size() - 1);
  for (size_t l = 0; l + 1 < sizes.size(); ++l) {
    const int in = sizes[l], out = sizes[l + 1];
    if (in <= 0 || out <= 0) throw std::invalid_argument("mlp sizes must be > 0");
    const double bound = 1.0 / std::sqrt(static_cast<double>(in));
    auto& layer = net.layers[l];
    layer.W.resize(out, in);
    layer.b.resize(out);
    for (int i = 0; i < out; ++i) {
      for (int j = 0; j < in; ++j) layer.W(i, j) = rng.uniform(-bound, bound);
    }
    for (int i = 0; i < out; ++i) layer.b(i) = rng.uniform(-bound, bound);
  }
  return net;
}

Eigen::VectorXd forward(const Mlp& net, const Eigen::VectorXd& x) {
  if (x.size() != net.input_size()) {
    throw std::invalid_argument("forward: input dimension mismatch");
  }
  Eigen::MatrixXd a = x;
  for (size_t l = 0; l < net.layers.size(); ++l) {
    Eigen::MatrixXd z = net.layers[l].W * a;
    z.colwise() += net.layers[l].b;
    apply_activation(l + 1 == net.layers.size() ? net.head : net.hidden, z);
    a = std::move(z);
  }
  return a.col(0);
}

Eigen::MatrixXd forward_batch(const Mlp& net, const Eigen::MatrixXd& X) {
  ForwardCache cache;
  return forward_batch(net, X, cache);
}

const Eigen::MatrixXd& forward_batch(const Mlp& net, const Eigen::MatrixXd& X,
                                     ForwardCache& cache) {
  if (X.rows() != net.input_size()) {
    throw std::invalid_argument("forward_batch: input dimension mismatch");
  }
  const size_t n_layers = net.layers.size();
  cache.activations.resize(n_layers + 1);
  cache.pre.resize(n_layers);
  cache.activations[0] = X;
  for (size_t l = 0; l < n_layers; ++l) {
    Eigen::MatrixXd z = net.layers[l].W * cache.activations[l];
    z.colwise() += net.layers[l].b;
    cache.pre[l] = z;
    apply_activation(l + 1 == n_layers ? net.head : net.hidden, z);
    cache.activations[l + 1] = std::move(z);
  }
  return cache.activations.back();
}

Gradients backward_batch(const Mlp& net, const ForwardCache& cache,
                         const Eigen::MatrixXd& dloss_dout,
                         Eigen::MatrixXd* dloss_din) {
  const size_t n_layers = net.layers.size();
  if (cache.pre.size() != n_layers || cache.activations.size() != n_layers + 1) {
    throw std::invalid_argument("backward_batch: cache does not match network");
  }
  if (dloss_dout.rows() != net.output_size() ||
      dloss_dout.cols() != cache.activations[0].cols()) {
    throw std::invalid_argument("backward_batch: output gradient shape mismatch");
  }
  Gradients grads;
  grads.layers.resize(n_layers);
  Eigen::MatrixXd delta = dloss_dout;
  for (size_t l = n_layers; l-- > 0;) {
    const Activation act = l + 1 == n_layers ? net.head : net.hidden;
    delta = delta.cwiseProduct(activation_grad(act, cache.pre[l]));
    grads.layers[l].W.noalias() = delta * cache.activations[l].transpose();
    grads.layers[l].b = delta.rowwise().sum();
    if (l > 0 || dloss_din != nullptr) {
      Eigen::MatrixXd prev = net.layers[l].W.transpose() * delta;
      if (l == 0) {
        *dloss_din = std::move(prev);
      } else {
        delta = std::move(prev);
      }
    }
  }
  return grads;
}

std::pair<Gradients, Eigen::VectorXd> backward(const Mlp& net,
                                               const Eigen::VectorXd& x,
                                               const Eigen::VectorXd& dloss_dout) {
  if (x.size() != net.input_size()) {
    throw std::invalid_argument("backward: input dimension mismatch");
  }
  ForwardCache cache;
  forward_batch(net, x, cache);
  Eigen::MatrixXd din;
  Gradients grads = backward_batch(net, cache, dloss_dout, &din);
  return {std::move(grads), din.col(0)};
}

AdamState make_adam_state(const Mlp& net) {
  AdamState state;
  state.m.resize(net.layers.size());
  state.v.resize(net.layers.size());
  for (size_t l = 0; l < net.layers.size(); ++l) {
    const auto& layer = net.layers[l];
    state.m[l].W = Eigen::MatrixXd::Zero(layer.W.rows(), layer.W.cols());
    state.m[l].b = Eigen::VectorXd::Zero(layer.b.size());
    state.v[l].W = Eigen::MatrixXd::Zero(layer.W.rows(), layer.W.cols());
    state.v[l].b = Eigen::VectorXd::Zero(layer.b.size());
  }
  return state;
}

void adam_step(Mlp& net, const Gradients& grads, AdamState& state, double lr,
               double beta1, double beta2, double eps) {
  if (grads.layers.size() != net.layers.size()) {
    throw std::invalid_argument("adam_step: gradient/network shape mismatch");
  }
  for (const auto& g : grads.layers) {
    if (!g.W.allFinite() || !g.b.allFinite()) {
      throw std::runtime_error("adam_step: non-finite gradient, step rejected");
    }
  }
  state.t += 1;
  const double bc1 = 1.0 - std::pow(beta1, static_cast<double>(state.t));
  const double bc2 = 1.0 - std::pow(beta2, static_cast<double>(state.t));
  auto update = [&](auto& p, const auto& g, auto& m, auto& v) {
    m = beta1 * m + (1.0 - beta1) * g;
    v = beta2 * v + (1.0 - beta2) * g.cwiseProduct(g);
    p.array() -= lr * (m.array() / bc1) / ((v.array() / bc2).sqrt() + eps);
  };
  for (size_t l = 0; l < net.layers.size(); ++l) {
    update(net.layers[l].W, grads.layers[l].W, state.m[l].W, state.v[l].W);
    update(net.layers[l].b, grads.layers[l].b, state.m[l].b, state.v[l].b);
  }
}

namespace {

constexpr uint32_t kMagic = 0x504c4d52;  // "RMLP"
constexpr uint32_t kVersion = 1;

struct FileCloser {
  void operator()(std::FILE* f) const { std::fclose(f); }
};

template <typename T>
void write_pod(std::FILE* f, const T& v) {
  if (std::fwrite(&v, sizeof(T), 1, f) != 1) {
    throw std::runtime_error("checkpoint write failed");
  }
}

template <typename T>
T read_pod(std::FILE* f) {
  T v;
  if (std::fread(&v, sizeof(T), 1, f) != 1) {
    throw std::runtime_error("checkpoint read failed (truncated file)");
  }
  return v;
}

}  // namespace

void save_mlp(const Mlp& net, const std::string& path) {
  std::unique_ptr<std::FILE, FileCloser> f(std::fopen(path.c_str(), "wb"));
  if (!f) throw std::runtime_error("cannot open checkpoint for writing: " + path);
  write_pod(f.get(), kMagic);
  write_pod(f.get(), kVersion);
  write_pod(f.get(), static_cast<uint8_t>(net.hidden));
  write_pod(f.get(), static_cast<uint8_t>(net.head));
  write_pod(f.get(), static_cast<uint16_t>(0));
  write_pod(f.get(), static_cast<uint32_t>(net.layers.size()));
  write_pod(f.get(), static_cast<uint32_t>(net.input_size()));
  for (const auto& l : net.layers) {
    write_pod(f.get(), static_cast<uint32_t>(l.W.rows()));
  }
  for (const auto& l : net.layers) {
    for (Eigen::Index i = 0; i < l.W.rows(); ++i) {
      for (Eigen::Index j = 0; j < l.W.cols(); ++j) {
        write_pod(f.get(), l.W(i, j));
      }
    }
    for (Eigen::Index i = 0; i < l.b.size(); ++i) write_pod(f.get(), l.b(i));
  }
}

Mlp load_mlp(const std::string& path) {
  std::unique_ptr<std::FILE, FileCloser> f(std::fopen(path.c_str(), "rb"));
  if (!f) throw std::invalid_argument("cannot open checkpoint: " + path);
  if (read_pod<uint32_t>(f.get()) != kMagic) {
    throw std::invalid_argument(path + ": not a network checkpoint");
  }
  if (read_pod<uint32_t>(f.get()) != kVersion) {
    throw std::invalid_argument(path + ": unsupported checkpoint version");
  }
  Mlp net;
  net.hidden = static_cast<Activation>(read_pod<uint8_t>(f.get()));
  net.head = static_cast<Activation>(read_pod<uint8_t>(f.get()));
  read_pod<uint16_t>(f.get());
  const uint32_t n_layers = read_pod<uint32_t>(f.get());
  if (n_layers == 0 || n_layers > 64) {
    throw std::invalid_argument(path + ": implausible layer count");
  }
  uint32_t in = read_pod<uint32_t>(f.get());
  std::vector<uint32_t> outs(n_layers);
  for (auto& o : outs) o = read_pod<uint32_t>(f.get());
  net.layers.resize(n_layers);
  for (uint32_t l = 0; l < n_layers; ++l) {
    auto& layer = net.layers[l];
    layer.W.resize(outs[l], in);
    layer.b.resize(outs[l]);
    for (Eigen::Index i = 0; i < layer.W.rows(); ++i) {
      for (Eigen::Index j = 0; j < layer.W.cols(); ++j) {
        layer.W(i, j) = read_pod<double>(f.get());
      }
    }
    for (Eigen::Index i = 0; i < layer.b.size(); ++i) {
      layer.b(i) = read_pod<double>(f.get());
    }
    in = outs[l];
  }
  return net;
}

void polyak_update(const Mlp& online, Mlp& target, double tau) {
  if (online.layers.size() != target.layers.size()) {
    throw std::invalid_argument("polyak_update: network shape mismatch");
  }
  for (size_t l = 0; l < online.layers.size(); ++l) {
    target.layers[l].W = tau * online.layers[l].W + (1.0 - tau) * target.layers[l].W;
    target.layers[l].b = tau * online.layers[l].b + (1.0 - tau) * target.layers[l].b;
  }
}

}  // namespace refmod
