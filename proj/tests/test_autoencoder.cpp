#include <doctest.h>

#include <Eigen/Dense>
#include <filesystem>
#include <random>

#include "manifold/autoencoder.hpp"
#include "manifold/errors.hpp"
#include "manifold/pca.hpp"

using namespace manifold;
using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

Trajectory gaussian_trajectory(int n, int d, uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal;
  Trajectory traj;
  traj.states.resize(n, d);
  for (int r = 0; r < n; ++r)
    for (int c = 0; c < d; ++c) traj.states(r, c) = normal(rng);
  traj.dt_sample = 1.0;
  return traj;
}

// Samples confined to a random k-dimensional linear subspace of R^d.
Trajectory subspace_trajectory(int n, int d, int k, uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal;
  MatrixXd lift(k, d);
  for (int r = 0; r < k; ++r)
    for (int c = 0; c < d; ++c) lift(r, c) = normal(rng);
  Trajectory traj;
  traj.states.resize(n, d);
  for (int r = 0; r < n; ++r) {
    VectorXd z(k);
    for (int i = 0; i < k; ++i) z[i] = normal(rng);
    traj.states.row(r) = z.transpose() * lift;
  }
  traj.dt_sample = 1.0;
  return traj;
}

double per_component_variance(const Trajectory& traj) {
  const MatrixXd centered = traj.states.rowwise() - traj.states.colwise().mean();
  return centered.squaredNorm() / static_cast<double>(traj.states.size());
}

AutoencoderModel untrained_model(AeVariant variant, const Trajectory& data, int latent_dim,
                                 uint64_t seed) {
  AeTrainOptions options;
  options.epochs = 1;
  options.seed = seed;
  options.hidden_width = 32;
  return train_autoencoder(variant, data, latent_dim, options).model;
}

}  // namespace

TEST_CASE("hybrid encoder with a zeroed net is the linear projection") {
  const Trajectory data = gaussian_trajectory(200, 12, 1);
  AutoencoderModel model = untrained_model(AeVariant::HybridHnn, data, 4, 2);
  for (auto& w : model.encoder->weights) w.setZero();
  for (auto& b : model.encoder->biases) b.setZero();

  std::mt19937_64 rng(3);
  std::normal_distribution<double> normal;
  for (int trial = 0; trial < 10; ++trial) {
    VectorXd u(12);
    for (int i = 0; i < 12; ++i) u[i] = normal(rng);
    const VectorXd got = ae_encode(model, u);
    const VectorXd want = pca_project(model.basis, u, 4);
    CHECK((got - want).cwiseAbs().maxCoeff() < 1e-12);
  }
}

TEST_CASE("decoder with a zeroed net is the truncated reconstruction") {
  const Trajectory data = gaussian_trajectory(200, 12, 4);
  for (AeVariant variant : {AeVariant::HybridHnn, AeVariant::LinearEncoderNnDecoder}) {
    AutoencoderModel model = untrained_model(variant, data, 4, 5);
    for (auto& w : model.decoder.weights) w.setZero();
    for (auto& b : model.decoder.biases) b.setZero();

    std::mt19937_64 rng(6);
    std::normal_distribution<double> normal;
    VectorXd h(4);
    for (int i = 0; i < 4; ++i) h[i] = normal(rng);
    const VectorXd got = ae_decode(model, h);
    const VectorXd want = pca_reconstruct(model.basis, h);
    CHECK((got - want).cwiseAbs().maxCoeff() < 1e-12);
  }
}

TEST_CASE("linear variant encodes the mean to zero") {
  const Trajectory data = gaussian_trajectory(150, 8, 7);
  const AutoencoderModel model = untrained_model(AeVariant::LinearEncoderNnDecoder, data, 3, 8);
  const VectorXd h = ae_encode(model, model.basis.mean);
  CHECK(h.cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("full-rank truncated reconstruction is numerically exact") {
  const Trajectory data = gaussian_trajectory(300, 6, 9);
  AutoencoderModel model = untrained_model(AeVariant::LinearEncoderNnDecoder, data, 6, 10);
  for (auto& w : model.decoder.weights) w.setZero();
  for (auto& b : model.decoder.biases) b.setZero();
  CHECK(ae_mse_on(model, data) < 1e-16 * per_component_variance(data));
}

TEST_CASE("encode and decode keep shapes and stay finite for all variants") {
  const Trajectory data = gaussian_trajectory(300, 10, 11);
  std::mt19937_64 rng(12);
  std::normal_distribution<double> normal;
  for (AeVariant variant :
       {AeVariant::LinearEncoderNnDecoder, AeVariant::HybridHnn, AeVariant::NonlinearBoth}) {
    const AutoencoderModel model = untrained_model(variant, data, 4, 13);
    for (int trial = 0; trial < 25; ++trial) {
      VectorXd u(10);
      for (int i = 0; i < 10; ++i) u[i] = 5.0 * normal(rng);
      const VectorXd h = ae_encode(model, u);
      REQUIRE(h.size() == 4);
      CHECK(h.allFinite());
      const VectorXd back = ae_decode(model, h);
      REQUIRE(back.size() == 10);
      CHECK(back.allFinite());
    }
  }
}

TEST_CASE("hybrid training on subspace data reaches machine-level reconstruction") {
  const Trajectory train = subspace_trajectory(2000, 8, 3, 14);
  const Trajectory test = subspace_trajectory(500, 8, 3, 14);

  AeTrainOptions options;
  options.epochs = 400;
  options.batch_size = 128;
  options.seed = 15;
  options.hidden_width = 64;
  options.test = &test;
  const AutoencoderTraining trained =
      train_autoencoder(AeVariant::HybridHnn, train, 3, options);

  const double variance = per_component_variance(test);
  const double mse = ae_mse_on(trained.model, test);
  INFO("relative mse ", mse / variance);
  CHECK(mse < 1e-6 * variance);
}

TEST_CASE("training histories are deterministic given the seed") {
  const Trajectory train = subspace_trajectory(400, 6, 2, 16);
  AeTrainOptions options;
  options.epochs = 10;
  options.batch_size = 64;
  options.seed = 17;
  options.hidden_width = 24;
  const auto a = train_autoencoder(AeVariant::HybridHnn, train, 2, options);
  const auto b = train_autoencoder(AeVariant::HybridHnn, train, 2, options);
  CHECK(a.train_mse == b.train_mse);
  for (size_t i = 0; i < a.model.decoder.weights.size(); ++i)
    CHECK(a.model.decoder.weights[i] == b.model.decoder.weights[i]);
}

TEST_CASE("smoothed training loss trends downward") {
  const Trajectory train = gaussian_trajectory(1000, 8, 18);
  AeTrainOptions options;
  options.epochs = 60;
  options.batch_size = 128;
  options.seed = 19;
  options.hidden_width = 32;
  const auto trained = train_autoencoder(AeVariant::HybridHnn, train, 4, options);

  const auto& loss = trained.train_mse;
  const int window = 10;
  double previous = std::numeric_limits<double>::infinity();
  for (size_t i = 0; i + window <= loss.size(); i += window) {
    double mean = 0.0;
    for (int j = 0; j < window; ++j) mean += loss[i + j];
    mean /= window;
    CHECK(mean <= previous * 1.02);
    previous = mean;
  }
}

TEST_CASE("autoencoder checkpoints round trip") {
  const Trajectory data = gaussian_trajectory(200, 8, 20);
  for (AeVariant variant :
       {AeVariant::LinearEncoderNnDecoder, AeVariant::HybridHnn, AeVariant::NonlinearBoth}) {
    const AutoencoderModel model = untrained_model(variant, data, 3, 21);
    const auto path = std::filesystem::temp_directory_path() / "manifold_test" /
                      ("ae_" + ae_variant_name(variant) + ".noda");
    std::filesystem::create_directories(path.parent_path());
    save_autoencoder(path, model);
    const AutoencoderModel back = load_autoencoder(path);
    CHECK(back.variant == model.variant);
    CHECK(back.latent_dim == model.latent_dim);
    CHECK(back.basis.modes == model.basis.modes);
    CHECK(back.decoder.weights[0] == model.decoder.weights[0]);
    CHECK(back.encoder.has_value() == model.encoder.has_value());

    std::mt19937_64 rng(22);
    std::normal_distribution<double> normal;
    VectorXd u(8);
    for (int i = 0; i < 8; ++i) u[i] = normal(rng);
    CHECK(ae_encode(back, u) == ae_encode(model, u));
  }
}

TEST_CASE("encode_trajectory carries timing metadata") {
  Trajectory data = gaussian_trajectory(100, 8, 23);
  data.dt_sample = 0.25;
  data.domain_length = 22.0;
  data.system = SystemTag::Kse;
  const AutoencoderModel model = untrained_model(AeVariant::LinearEncoderNnDecoder, data, 3, 24);
  const Trajectory latent = encode_trajectory(model, data);
  CHECK(latent.rows() == data.rows());
  CHECK(latent.dim() == 3);
  CHECK(latent.dt_sample == 0.25);
  CHECK(latent.system == SystemTag::Generic);
}

TEST_CASE("training rejects undersized inputs") {
  const Trajectory tiny = gaussian_trajectory(4, 8, 25);
  AeTrainOptions options;
  options.epochs = 1;
  CHECK_THROWS_AS(train_autoencoder(AeVariant::HybridHnn, tiny, 3, options), InvalidArgument);
  const Trajectory data = gaussian_trajectory(100, 8, 26);
  CHECK_THROWS_AS(train_autoencoder(AeVariant::HybridHnn, data, 9, options), InvalidArgument);
}
