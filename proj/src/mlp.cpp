#include "manifold/mlp.hpp"

#include <cmath>
#include <random>

#include "manifold/errors.hpp"

namespace manifold {

namespace {

void apply_activation(Activation a, Eigen::MatrixXd& z) {
  switch (a) {
    case Activation::Sigmoid:
      z = (1.0 + (-z.array()).exp()).inverse();
      break;
    case Activation::Tanh:
      z = z.array().tanh();
      break;
    case Activation::Relu:
      z = z.array().max(0.0);
      break;
    case Activation::Linear:
      break;
  }
}

// Derivative expressed through the post-activation value.
Eigen::ArrayXXd activation_derivative(Activation a, const Eigen::MatrixXd& post) {
  switch (a) {
    case Activation::Sigmoid:
      return post.array() * (1.0 - post.array());
    case Activation::Tanh:
      return 1.0 - post.array().square();
    case Activation::Relu:
      return (post.array() > 0.0).cast<double>();
    case Activation::Linear:
      return Eigen::ArrayXXd::Ones(post.rows(), post.cols());
  }
  return Eigen::ArrayXXd::Ones(post.rows(), post.cols());
}

}  // namespace

std::string activation_name(Activation a) {
  switch (a) {
    case Activation::Sigmoid: return "sigmoid";
    case Activation::Tanh: return "tanh";
    case Activation::Relu: return "relu";
    case Activation::Linear: return "linear";
  }
  return "linear";
}

Activation activation_from_name(const std::string& name) {
  if (name == "sigmoid") return Activation::Sigmoid;
  if (name == "tanh") return Activation::Tanh;
  if (name == "relu") return Activation::Relu;
  if (name == "linear") return Activation::Linear;
  throw InvalidArgument("unknown activation '" + name + "'");
}

long Mlp::parameter_count() const {
  long n = 0;
  for (size_t i = 0; i < weights.size(); ++i) n += weights[i].size() + biases[i].size();
  return n;
}

void Mlp::validate() const {
  if (layer_sizes.size() < 2) throw InvalidArgument("mlp: need at least input and output layers");
  if (activations.size() != layer_sizes.size() - 1 || weights.size() != activations.size() ||
      biases.size() != activations.size())
    throw InvalidArgument("mlp: inconsistent layer bookkeeping");
  for (size_t i = 0; i < weights.size(); ++i) {
    if (weights[i].rows() != layer_sizes[i + 1] || weights[i].cols() != layer_sizes[i] ||
        biases[i].size() != layer_sizes[i + 1])
      throw InvalidArgument("mlp: weight shapes do not chain");
    if (!weights[i].allFinite() || !biases[i].allFinite())
      throw InvalidArgument("mlp: non-finite parameters");
  }
}

Mlp init_glorot(const std::vector<int>& layer_sizes, const std::vector<Activation>& activations,
                uint64_t seed) {
  if (layer_sizes.size() < 2 || activations.size() != layer_sizes.size() - 1)
    throw InvalidArgument("init_glorot: bad layer specification");
  for (int s : layer_sizes)
    if (s < 1) throw InvalidArgument("init_glorot: layer sizes must be positive");

  Mlp net;
  net.layer_sizes = layer_sizes;
  net.activations = activations;
  std::mt19937_64 rng(seed);
  for (size_t i = 0; i + 1 < layer_sizes.size(); ++i) {
    const int fan_in = layer_sizes[i];
    const int fan_out = layer_sizes[i + 1];
    const double limit = std::sqrt(6.0 / (fan_in + fan_out));
    std::uniform_real_distribution<double> dist(-limit, limit);
    Eigen::MatrixXd w(fan_out, fan_in);
    for (Eigen::Index r = 0; r < w.rows(); ++r)
      for (Eigen::Index c = 0; c < w.cols(); ++c) w(r, c) = dist(rng);
    net.weights.push_back(std::move(w));
    net.biases.push_back(Eigen::VectorXd::Zero(fan_out));
  }
  return net;
}

Eigen::VectorXd mlp_forward(const Mlp& net, const Eigen::VectorXd& x) {
  return mlp_forward_batch(net, x);
}

Eigen::MatrixXd mlp_forward_batch(const Mlp& net, const Eigen::MatrixXd& x) {
  if (x.rows() != net.input_dim()) throw InvalidArgument("mlp_forward: input dimension mismatch");
  Eigen::MatrixXd a = x;
  for (size_t i = 0; i < net.layer_count(); ++i) {
    Eigen::MatrixXd z = (net.weights[i] * a).colwise() + net.biases[i];
    apply_activation(net.activations[i], z);
    a = std::move(z);
  }
  return a;
}

const Eigen::MatrixXd& mlp_forward_batch_cached(const Mlp& net, const Eigen::MatrixXd& x,
                                                MlpCache& cache) {
  if (x.rows() != net.input_dim()) throw InvalidArgument("mlp_forward: input dimension mismatch");
  cache.acts.resize(net.layer_count() + 1);
  cache.acts[0] = x;
  for (size_t i = 0; i < net.layer_count(); ++i) {
    Eigen::MatrixXd z = (net.weights[i] * cache.acts[i]).colwise() + net.biases[i];
    apply_activation(net.activations[i], z);
    cache.acts[i + 1] = std::move(z);
  }
  return cache.acts.back();
}

MlpGrads MlpGrads::zeros_like(const Mlp& net) {
  MlpGrads g;
  for (size_t i = 0; i < net.layer_count(); ++i) {
    g.weights.emplace_back(Eigen::MatrixXd::Zero(net.weights[i].rows(), net.weights[i].cols()));
    g.biases.emplace_back(Eigen::VectorXd::Zero(net.biases[i].size()));
  }
  return g;
}

void MlpGrads::set_zero() {
  for (auto& w : weights) w.setZero();
  for (auto& b : biases) b.setZero();
}

void MlpGrads::add(const MlpGrads& other) {
  for (size_t i = 0; i < weights.size(); ++i) {
    weights[i] += other.weights[i];
    biases[i] += other.biases[i];
  }
}

void MlpGrads::scale(double s) {
  for (auto& w : weights) w *= s;
  for (auto& b : biases) b *= s;
}

bool MlpGrads::all_finite() const {
  for (const auto& w : weights)
    if (!w.allFinite()) return false;
  for (const auto& b : biases)
    if (!b.allFinite()) return false;
  return true;
}

Eigen::MatrixXd mlp_backward_batch(const Mlp& net, const MlpCache& cache,
                                   const Eigen::MatrixXd& output_cotangent, MlpGrads& grads) {
  const auto layers = static_cast<long>(net.layer_count());
  if (cache.acts.size() != static_cast<size_t>(layers) + 1)
    throw InvalidArgument("mlp_backward: cache does not match network");
  if (output_cotangent.rows() != net.output_dim() ||
      output_cotangent.cols() != cache.acts[0].cols())
    throw InvalidArgument("mlp_backward: cotangent shape mismatch");

  Eigen::MatrixXd delta =
      output_cotangent.array() * activation_derivative(net.activations[layers - 1], cache.acts[layers]);
  for (long i = layers - 1; i >= 0; --i) {
    grads.weights[i].noalias() += delta * cache.acts[i].transpose();
    grads.biases[i] += delta.rowwise().sum();
    if (i > 0) {
      delta = (net.weights[i].transpose() * delta).array() *
              activation_derivative(net.activations[i - 1], cache.acts[i]);
    } else {
      delta = net.weights[0].transpose() * delta;
    }
  }
  return delta;
}

std::pair<MlpGrads, Eigen::VectorXd> mlp_backward(const Mlp& net, const Eigen::VectorXd& x,
                                                  const Eigen::VectorXd& output_cotangent) {
  MlpCache cache;
  mlp_forward_batch_cached(net, x, cache);
  MlpGrads grads = MlpGrads::zeros_like(net);
  const Eigen::MatrixXd input_cot = mlp_backward_batch(net, cache, output_cotangent, grads);
  return {std::move(grads), Eigen::VectorXd(input_cot.col(0))};
}

AdamState AdamState::for_net(const Mlp& net, double learning_rate) {
  AdamState state;
  state.first_moment = MlpGrads::zeros_like(net);
  state.second_moment = MlpGrads::zeros_like(net);
  state.learning_rate = learning_rate;
  return state;
}

void adam_step(Mlp& net, const MlpGrads& grads, AdamState& state) {
  if (!grads.all_finite()) throw TrainingError("adam_step: non-finite gradient");
  state.step_count += 1;
  const double bc1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.step_count));
  const double bc2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.step_count));

  auto update = [&](auto& param, const auto& g, auto& m, auto& v) {
    m = state.beta1 * m + (1.0 - state.beta1) * g;
    v.array() = state.beta2 * v.array() + (1.0 - state.beta2) * g.array().square();
    param.array() -=
        state.learning_rate * (m.array() / bc1) / ((v.array() / bc2).sqrt() + state.epsilon);
  };
  for (size_t i = 0; i < net.weights.size(); ++i) {
    update(net.weights[i], grads.weights[i], state.first_moment.weights[i],
           state.second_moment.weights[i]);
    update(net.biases[i], grads.biases[i], state.first_moment.biases[i],
           state.second_moment.biases[i]);
  }
}

}  // namespace manifold
