#ifndef MANIFOLD_NEURAL_ODE_HPP
#define MANIFOLD_NEURAL_ODE_HPP

#include <Eigen/Dense>
#include <filesystem>
#include <string>
#include <vector>

#include "manifold/autoencoder.hpp"
#include "manifold/mlp.hpp"
#include "manifold/trajectory.hpp"

namespace manifold {

// Which coordinates the learned vector field evolves: the autoencoder latent
// space, the physical grid values, or the packed Fourier coefficients of the
// (real) field.
enum class SpaceTag { Reduced, FullPhysical, FullFourier };

std::string space_tag_to_string(SpaceTag tag);
SpaceTag space_tag_from_string(const std::string& name);

// dh/dt = rhs(h), advanced with fixed-step classical 4th-order steps.
struct NodeModel {
  Mlp rhs;
  SpaceTag space = SpaceTag::Reduced;
  double sample_interval = 0.0;   // spacing tau of the training pairs
  double max_internal_step = 0.25;

  int dim() const { return rhs.input_dim(); }
  void validate() const;
};

// One-interval map h(t+tau) = map(h(t)); defined only at multiples of tau.
struct DiscreteMapModel {
  Mlp map;
  double sample_interval = 0.0;

  int dim() const { return map.input_dim(); }
  void validate() const;
};

// Integrates over duration with n = ceil(duration / max_internal_step) equal
// steps; returns all n+1 states, the initial one first.
Eigen::MatrixXd node_integrate(const NodeModel& model, const Eigen::VectorXd& h0,
                               double duration);

// Mean over the batch of the L1 mismatch between the integrated prediction
// over one sample interval and the target, plus exact reverse-mode parameter
// gradients through every integrator stage. Pairs are columns of h0/h1.
// The reduction order is fixed, so results do not depend on n_threads.
std::pair<double, MlpGrads> node_loss_and_grad(const NodeModel& model,
                                               const Eigen::MatrixXd& h0,
                                               const Eigen::MatrixXd& h1, int n_threads = 1);

// Forward-only version of the above.
double node_loss(const NodeModel& model, const Eigen::MatrixXd& h0, const Eigen::MatrixXd& h1);

struct NodeTrainOptions {
  int epochs = 500;
  int batch_size = 256;
  double learning_rate = 1e-3;  // dropped tenfold at the midpoint epoch
  uint64_t seed = 0;
  double max_internal_step = 0.25;
  int hidden_width = 200;
  int hidden_layers = 3;
  int n_threads = 1;
  const Trajectory* test = nullptr;  // latent-space trajectory, same spacing
  int history_eval_pairs = 2048;
};

struct NodeTraining {
  NodeModel model;
  std::vector<double> train_loss;
  std::vector<double> test_loss;
};

// Trains on every consecutive snapshot pair of the (already encoded)
// trajectory; the model's sample_interval is the trajectory's dt_sample.
NodeTraining train_node(const Trajectory& latent, SpaceTag space,
                        const NodeTrainOptions& options);

struct MapTrainOptions {
  int epochs = 500;
  int batch_size = 256;
  double learning_rate = 1e-3;
  uint64_t seed = 0;
  int hidden_width = 200;
  int hidden_layers = 3;
  const Trajectory* test = nullptr;
  int history_eval_pairs = 2048;
};

struct MapTraining {
  DiscreteMapModel model;
  std::vector<double> train_loss;
  std::vector<double> test_loss;
};

MapTraining train_discrete_map(const Trajectory& latent, const MapTrainOptions& options);

// Packs the independent real degrees of freedom of the conjugate-symmetric
// spectrum of a real field of even length d into a real vector of length d:
// [c0, Re c1, Im c1, ..., Re c_{d/2-1}, Im c_{d/2-1}, c_{d/2}], with the
// forward transform scaled by 1/d. unpack_fourier is its exact inverse.
Eigen::VectorXd pack_fourier(const Eigen::VectorXd& field);
Eigen::VectorXd unpack_fourier(const Eigen::VectorXd& packed);

// encode -> evolve -> decode. Rows are ambient-space states at
// t = sample_every, 2*sample_every, ..., duration (the initial state is not a
// row). sample_every defaults to the model's sample_interval; smaller values
// expose the integrator's internal resolution. For Reduced space `ae` is
// required; it is ignored otherwise.
Trajectory node_rollout(const AutoencoderModel* ae, const NodeModel& model,
                        const Eigen::VectorXd& u0, double duration, double sample_every = -1.0);

// Map predictions exist only at multiples of the sample interval.
Trajectory map_rollout(const AutoencoderModel* ae, const DiscreteMapModel& model,
                       const Eigen::VectorXd& u0, double duration);

void save_node(const std::filesystem::path& path, const NodeModel& model);
NodeModel load_node(const std::filesystem::path& path);
void save_discrete_map(const std::filesystem::path& path, const DiscreteMapModel& model);
DiscreteMapModel load_discrete_map(const std::filesystem::path& path);

}  // namespace manifold

#endif
