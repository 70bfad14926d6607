#ifndef MANIFOLD_AUTOENCODER_HPP
#define MANIFOLD_AUTOENCODER_HPP

#include <Eigen/Dense>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "manifold/mlp.hpp"
#include "manifold/pca.hpp"
#include "manifold/trajectory.hpp"

namespace manifold {

// The three encoder/decoder pairings:
//   LinearEncoderNnDecoder: encode = leading-k principal coefficients;
//     decode = basis reconstruction of a network correction added to the
//     zero-padded code (the network predicts the trailing coefficients).
//   HybridHnn: like the above, but the encoder also adds a learned correction
//     E(full coefficients) to the linear code.
//   NonlinearBoth: plain nets both ways, no principal-component structure.
enum class AeVariant { LinearEncoderNnDecoder, HybridHnn, NonlinearBoth };

std::string ae_variant_name(AeVariant v);
AeVariant ae_variant_from_name(const std::string& name);

struct AutoencoderModel {
  AeVariant variant = AeVariant::LinearEncoderNnDecoder;
  PcaBasis basis;
  std::optional<Mlp> encoder;  // absent for the linear-encoder variant
  Mlp decoder;
  int latent_dim = 0;

  int ambient_dim() const { return static_cast<int>(basis.dim()); }
  void validate() const;
};

Eigen::VectorXd ae_encode(const AutoencoderModel& model, const Eigen::VectorXd& u);
Eigen::VectorXd ae_decode(const AutoencoderModel& model, const Eigen::VectorXd& h);

// Row-wise batch versions (one sample per row).
Eigen::MatrixXd ae_encode_rows(const AutoencoderModel& model, const Eigen::MatrixXd& states);
Eigen::MatrixXd ae_decode_rows(const AutoencoderModel& model, const Eigen::MatrixXd& codes);

// Latent copy of a trajectory (states encoded, timing metadata kept).
Trajectory encode_trajectory(const AutoencoderModel& model, const Trajectory& traj);

// Mean over rows of |u - decode(encode(u))|^2 / d.
double ae_mse_on(const AutoencoderModel& model, const Trajectory& data);

struct AeTrainOptions {
  int epochs = 500;
  int batch_size = 256;
  double learning_rate = 1e-3;  // dropped tenfold at the midpoint epoch
  uint64_t seed = 0;
  int hidden_width = 500;
  int hidden_layers = 1;
  const Trajectory* test = nullptr;  // optional held-out set for the history
  int history_eval_rows = 4096;      // cap per-epoch evaluation cost; 0 skips
};

struct AutoencoderTraining {
  AutoencoderModel model;
  std::vector<double> train_mse;  // per epoch, same normalization as ae_mse_on
  std::vector<double> test_mse;   // empty when no test set was given
};

// Minimizes the reconstruction error of decode(encode(u)) over snapshots by
// Adam. For the principal-component variants the loss is evaluated in
// coefficient space, which is identical to the ambient-space loss because the
// mode basis is orthonormal.
AutoencoderTraining train_autoencoder(AeVariant variant, const Trajectory& data, int latent_dim,
                                      const AeTrainOptions& options);

void save_autoencoder(const std::filesystem::path& path, const AutoencoderModel& model);
AutoencoderModel load_autoencoder(const std::filesystem::path& path);

}  // namespace manifold

#endif
