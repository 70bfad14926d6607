#ifndef MANIFOLD_MLP_HPP
#define MANIFOLD_MLP_HPP

#include <Eigen/Dense>
#include <cstdint>
#include <string>
#include <vector>

namespace manifold {

enum class Activation { Sigmoid, Tanh, Relu, Linear };

std::string activation_name(Activation a);
Activation activation_from_name(const std::string& name);

// Dense feed-forward network. weights[i] maps layer i to layer i+1, so
// weights[i] is [layer_sizes[i+1] x layer_sizes[i]] and activations[i] is the
// nonlinearity applied after it.
struct Mlp {
  std::vector<int> layer_sizes;
  std::vector<Activation> activations;
  std::vector<Eigen::MatrixXd> weights;
  std::vector<Eigen::VectorXd> biases;

  int input_dim() const { return layer_sizes.front(); }
  int output_dim() const { return layer_sizes.back(); }
  size_t layer_count() const { return weights.size(); }
  long parameter_count() const;

  void validate() const;
};

// Glorot-uniform weights, zero biases, reproducible for a given seed.
Mlp init_glorot(const std::vector<int>& layer_sizes, const std::vector<Activation>& activations,
                uint64_t seed);

Eigen::VectorXd mlp_forward(const Mlp& net, const Eigen::VectorXd& x);

// Batched evaluation; one sample per column.
Eigen::MatrixXd mlp_forward_batch(const Mlp& net, const Eigen::MatrixXd& x);

// Post-activation values of every layer (acts[0] is the input), kept for the
// reverse pass.
struct MlpCache {
  std::vector<Eigen::MatrixXd> acts;
};

const Eigen::MatrixXd& mlp_forward_batch_cached(const Mlp& net, const Eigen::MatrixXd& x,
                                                MlpCache& cache);

// Parameter-shaped gradient buffers.
struct MlpGrads {
  std::vector<Eigen::MatrixXd> weights;
  std::vector<Eigen::VectorXd> biases;

  static MlpGrads zeros_like(const Mlp& net);
  void set_zero();
  void add(const MlpGrads& other);
  void scale(double s);
  bool all_finite() const;
};

// Reverse pass for <cotangent, net(x)> summed over the batch columns.
// Gradients are accumulated into grads (sum over samples); returns the
// cotangent with respect to the input.
Eigen::MatrixXd mlp_backward_batch(const Mlp& net, const MlpCache& cache,
                                   const Eigen::MatrixXd& output_cotangent, MlpGrads& grads);

// Single-sample convenience wrapper.
std::pair<MlpGrads, Eigen::VectorXd> mlp_backward(const Mlp& net, const Eigen::VectorXd& x,
                                                  const Eigen::VectorXd& output_cotangent);

// Adam optimizer state. learning_rate may be changed between steps.
struct AdamState {
  long step_count = 0;
  MlpGrads first_moment;
  MlpGrads second_moment;
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;

  static AdamState for_net(const Mlp& net, double learning_rate = 1e-3);
};

// Standard bias-corrected Adam update. Throws TrainingError on non-finite
// gradients.
void adam_step(Mlp& net, const MlpGrads& grads, AdamState& state);

}  // namespace manifold

#endif
