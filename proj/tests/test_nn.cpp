#include <doctest.h>

#include <Eigen/Dense>
#include <cmath>
#include <random>

#include "manifold/errors.hpp"
#include "manifold/mlp.hpp"

using namespace manifold;
using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

VectorXd random_vector(int n, std::mt19937_64& rng) {
  std::normal_distribution<double> normal;
  VectorXd v(n);
  for (int i = 0; i < n; ++i) v[i] = normal(rng);
  return v;
}

double loss_of(const Mlp& net, const VectorXd& x, const VectorXd& cot) {
  return cot.dot(mlp_forward(net, x));
}

// Central finite differences against every parameter and the input; the
// oracle for the hand-derived reverse pass.
void check_gradients(Mlp net, uint64_t seed, double rtol) {
  std::mt19937_64 rng(seed);
  const VectorXd x = random_vector(net.input_dim(), rng);
  const VectorXd cot = random_vector(net.output_dim(), rng);
  const auto [grads, input_cot] = mlp_backward(net, x, cot);

  const double h = 1e-6;
  auto close = [&](double got, double want) {
    return std::abs(got - want) <= 1e-9 + rtol * std::max(std::abs(got), std::abs(want));
  };

  for (size_t layer = 0; layer < net.layer_count(); ++layer) {
    for (Eigen::Index r = 0; r < net.weights[layer].rows(); ++r)
      for (Eigen::Index c = 0; c < net.weights[layer].cols(); ++c) {
        const double keep = net.weights[layer](r, c);
        net.weights[layer](r, c) = keep + h;
        const double up = loss_of(net, x, cot);
        net.weights[layer](r, c) = keep - h;
        const double down = loss_of(net, x, cot);
        net.weights[layer](r, c) = keep;
        CHECK(close(grads.weights[layer](r, c), (up - down) / (2.0 * h)));
      }
    for (Eigen::Index r = 0; r < net.biases[layer].size(); ++r) {
      const double keep = net.biases[layer][r];
      net.biases[layer][r] = keep + h;
      const double up = loss_of(net, x, cot);
      net.biases[layer][r] = keep - h;
      const double down = loss_of(net, x, cot);
      net.biases[layer][r] = keep;
      CHECK(close(grads.biases[layer][r], (up - down) / (2.0 * h)));
    }
  }

  VectorXd xp = x;
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    const double keep = xp[i];
    xp[i] = keep + h;
    const double up = loss_of(net, xp, cot);
    xp[i] = keep - h;
    const double down = loss_of(net, xp, cot);
    xp[i] = keep;
    CHECK(close(input_cot[i], (up - down) / (2.0 * h)));
  }
}

}  // namespace

TEST_CASE("forward: zero parameters give zero output") {
  Mlp net = init_glorot({4, 6, 3}, {Activation::Sigmoid, Activation::Linear}, 1);
  for (auto& w : net.weights) w.setZero();
  std::mt19937_64 rng(2);
  const VectorXd y = mlp_forward(net, random_vector(4, rng));
  CHECK(y.cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("forward: identity single layer is the identity") {
  Mlp net = init_glorot({5, 5}, {Activation::Linear}, 1);
  net.weights[0] = MatrixXd::Identity(5, 5);
  std::mt19937_64 rng(3);
  const VectorXd x = random_vector(5, rng);
  CHECK(mlp_forward(net, x) == x);
}

TEST_CASE("forward matches an explicitly composed two-layer network") {
  Mlp net;
  net.layer_sizes = {2, 2, 1};
  net.activations = {Activation::Sigmoid, Activation::Linear};
  net.weights = {(MatrixXd(2, 2) << 0.1, -0.2, 0.3, 0.4).finished(),
                 (MatrixXd(1, 2) << 0.7, -0.6).finished()};
  net.biases = {(VectorXd(2) << 0.05, -0.05).finished(), (VectorXd(1) << 0.1).finished()};
  net.validate();

  const VectorXd x = (VectorXd(2) << 1.0, 2.0).finished();
  const double z0 = 0.1 * 1.0 + (-0.2) * 2.0 + 0.05;
  const double z1 = 0.3 * 1.0 + 0.4 * 2.0 - 0.05;
  const double a0 = 1.0 / (1.0 + std::exp(-z0));
  const double a1 = 1.0 / (1.0 + std::exp(-z1));
  const double want = 0.7 * a0 - 0.6 * a1 + 0.1;

  const VectorXd y = mlp_forward(net, x);
  CHECK(std::abs(y[0] - want) < 1e-14);
}

TEST_CASE("forward is pure") {
  Mlp net = init_glorot({6, 20, 6}, {Activation::Tanh, Activation::Linear}, 9);
  std::mt19937_64 rng(4);
  const VectorXd x = random_vector(6, rng);
  CHECK(mlp_forward(net, x) == mlp_forward(net, x));
}

TEST_CASE("backward: zero cotangent gives zero gradients") {
  Mlp net = init_glorot({3, 8, 2}, {Activation::Sigmoid, Activation::Linear}, 5);
  std::mt19937_64 rng(6);
  const auto [grads, input_cot] = mlp_backward(net, random_vector(3, rng), VectorXd::Zero(2));
  for (const auto& w : grads.weights) CHECK(w.cwiseAbs().maxCoeff() == 0.0);
  for (const auto& b : grads.biases) CHECK(b.cwiseAbs().maxCoeff() == 0.0);
  CHECK(input_cot.cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("backward: linear layer weight gradient is the outer product") {
  Mlp net = init_glorot({3, 2}, {Activation::Linear}, 7);
  std::mt19937_64 rng(8);
  const VectorXd x = random_vector(3, rng);
  const VectorXd cot = random_vector(2, rng);
  const auto [grads, input_cot] = mlp_backward(net, x, cot);
  CHECK((grads.weights[0] - cot * x.transpose()).cwiseAbs().maxCoeff() < 1e-14);
  CHECK((grads.biases[0] - cot).cwiseAbs().maxCoeff() < 1e-14);
  CHECK((input_cot - net.weights[0].transpose() * cot).cwiseAbs().maxCoeff() < 1e-14);
}

TEST_CASE("backward matches central finite differences") {
  check_gradients(init_glorot({4, 10, 7, 3}, {Activation::Sigmoid, Activation::Sigmoid,
                                              Activation::Linear}, 11), 100, 1e-5);
  check_gradients(init_glorot({5, 12, 5}, {Activation::Tanh, Activation::Linear}, 12), 101, 1e-5);
  check_gradients(init_glorot({6, 9, 6}, {Activation::Relu, Activation::Linear}, 13), 102, 1e-5);
  check_gradients(init_glorot({8, 8}, {Activation::Linear}, 14), 103, 1e-5);
}

TEST_CASE("batched backward equals the sum of per-sample gradients") {
  Mlp net = init_glorot({4, 9, 3}, {Activation::Sigmoid, Activation::Linear}, 15);
  std::mt19937_64 rng(16);
  const int batch = 5;
  MatrixXd x(4, batch), cot(3, batch);
  for (int c = 0; c < batch; ++c) {
    x.col(c) = random_vector(4, rng);
    cot.col(c) = random_vector(3, rng);
  }
  MlpCache cache;
  mlp_forward_batch_cached(net, x, cache);
  MlpGrads batch_grads = MlpGrads::zeros_like(net);
  const MatrixXd input_cot = mlp_backward_batch(net, cache, cot, batch_grads);

  MlpGrads summed = MlpGrads::zeros_like(net);
  for (int c = 0; c < batch; ++c) {
    const auto [g, ic] = mlp_backward(net, x.col(c), cot.col(c));
    summed.add(g);
    CHECK((input_cot.col(c) - ic).cwiseAbs().maxCoeff() < 1e-12);
  }
  for (size_t layer = 0; layer < net.layer_count(); ++layer) {
    CHECK((batch_grads.weights[layer] - summed.weights[layer]).cwiseAbs().maxCoeff() < 1e-12);
    CHECK((batch_grads.biases[layer] - summed.biases[layer]).cwiseAbs().maxCoeff() < 1e-12);
  }
}

TEST_CASE("adam: zero gradient leaves parameters unchanged") {
  Mlp net = init_glorot({3, 5, 2}, {Activation::Sigmoid, Activation::Linear}, 17);
  const Mlp before = net;
  AdamState state = AdamState::for_net(net);
  adam_step(net, MlpGrads::zeros_like(net), state);
  for (size_t i = 0; i < net.layer_count(); ++i) {
    CHECK(net.weights[i] == before.weights[i]);
    CHECK(net.biases[i] == before.biases[i]);
  }
  CHECK(state.step_count == 1);
}

TEST_CASE("adam: first step from zero moments moves by the learning rate") {
  Mlp net = init_glorot({2, 2}, {Activation::Linear}, 18);
  const Mlp before = net;
  AdamState state = AdamState::for_net(net, 1e-3);
  MlpGrads grads = MlpGrads::zeros_like(net);
  grads.weights[0].setOnes();
  grads.biases[0].setOnes();
  adam_step(net, grads, state);
  // Bias-corrected first step: lr * 1 / (1 + eps).
  const double want = 1e-3 / (1.0 + state.epsilon);
  CHECK(std::abs((before.weights[0] - net.weights[0]).maxCoeff() - want) < 1e-12);
  CHECK(std::abs((before.weights[0] - net.weights[0]).minCoeff() - want) < 1e-12);
}

TEST_CASE("adam: vanishing learning rate freezes parameters") {
  Mlp net = init_glorot({3, 4, 3}, {Activation::Sigmoid, Activation::Linear}, 19);
  const Mlp before = net;
  AdamState state = AdamState::for_net(net, 0.0);
  std::mt19937_64 rng(20);
  for (int step = 0; step < 5; ++step) {
    MlpGrads grads = MlpGrads::zeros_like(net);
    for (auto& w : grads.weights) w.setRandom();
    adam_step(net, grads, state);
  }
  for (size_t i = 0; i < net.layer_count(); ++i) CHECK(net.weights[i] == before.weights[i]);
}

TEST_CASE("adam rejects non-finite gradients") {
  Mlp net = init_glorot({2, 2}, {Activation::Linear}, 21);
  AdamState state = AdamState::for_net(net);
  MlpGrads grads = MlpGrads::zeros_like(net);
  grads.weights[0](0, 0) = std::numeric_limits<double>::quiet_NaN();
  CHECK_THROWS_AS(adam_step(net, grads, state), TrainingError);
}

TEST_CASE("glorot init: reproducible, zero biases, centered weights") {
  const std::vector<int> sizes = {64, 500, 8};
  const std::vector<Activation> acts = {Activation::Sigmoid, Activation::Linear};
  const Mlp a = init_glorot(sizes, acts, 37);
  const Mlp b = init_glorot(sizes, acts, 37);
  const Mlp c = init_glorot(sizes, acts, 38);
  for (size_t i = 0; i < a.layer_count(); ++i) {
    CHECK(a.weights[i] == b.weights[i]);
    CHECK(a.biases[i].cwiseAbs().maxCoeff() == 0.0);
  }
  CHECK(a.weights[0] != c.weights[0]);

  // Sample mean of ~3.2e4 uniform(-limit, limit) draws: within 3 standard errors.
  const double limit = std::sqrt(6.0 / (64 + 500));
  const double n = static_cast<double>(a.weights[0].size());
  const double se = limit / std::sqrt(3.0 * n);
  CHECK(std::abs(a.weights[0].mean()) < 3.0 * se);
}
