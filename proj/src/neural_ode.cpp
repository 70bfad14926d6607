#include "manifold/neural_ode.hpp"

#include <algorithm>
#include <cmath>
#include <future>
#include <numeric>
#include <random>

#include "manifold/config.hpp"
#include "manifold/errors.hpp"
#include "manifold/fft.hpp"
#include "manifold/model_io.hpp"

namespace manifold {

using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

constexpr int kChunkColumns = 32;

long internal_steps(double duration, double max_step) {
  return static_cast<long>(std::ceil(duration / max_step - 1e-12));
}

MatrixXd rk4_step_batch(const Mlp& rhs, const MatrixXd& h, double step) {
  const MatrixXd k1 = mlp_forward_batch(rhs, h);
  const MatrixXd k2 = mlp_forward_batch(rhs, h + (0.5 * step) * k1);
  const MatrixXd k3 = mlp_forward_batch(rhs, h + (0.5 * step) * k2);
  const MatrixXd k4 = mlp_forward_batch(rhs, h + step * k3);
  return h + (step / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
}

struct ChunkWork {
  double loss_sum = 0.0;  // sum over samples of the per-sample L1 error
  MlpGrads grads;
};

// Forward pass stores only the per-step states; the reverse pass recomputes
// each step's stage activations and applies vector-Jacobian products in the
// exact reverse order of the forward arithmetic.
ChunkWork chunk_loss_and_grad(const Mlp& rhs, const MatrixXd& h0, const MatrixXd& h1, double step,
                              long n_steps, bool want_grads) {
  ChunkWork work;
  std::vector<MatrixXd> states(static_cast<size_t>(n_steps) + 1);
  states[0] = h0;
  for (long s = 0; s < n_steps; ++s) states[s + 1] = rk4_step_batch(rhs, states[s], step);

  const MatrixXd residual = states[n_steps] - h1;
  work.loss_sum = residual.cwiseAbs().sum();
  if (!want_grads) return work;

  work.grads = MlpGrads::zeros_like(rhs);
  // dJ/dprediction for J = sum |residual|; the subgradient at zero is zero.
  MatrixXd bar = residual.array().sign();
  for (long s = n_steps - 1; s >= 0; --s) {
    const MatrixXd& h = states[s];
    MlpCache c1, c2, c3, c4;
    const MatrixXd& k1 = mlp_forward_batch_cached(rhs, h, c1);
    const MatrixXd& k2 = mlp_forward_batch_cached(rhs, h + (0.5 * step) * k1, c2);
    const MatrixXd& k3 = mlp_forward_batch_cached(rhs, h + (0.5 * step) * k2, c3);
    mlp_forward_batch_cached(rhs, h + step * k3, c4);

    const MatrixXd ck4 = (step / 6.0) * bar;
    const MatrixXd v4 = mlp_backward_batch(rhs, c4, ck4, work.grads);
    const MatrixXd ck3 = (step / 3.0) * bar + step * v4;
    const MatrixXd v3 = mlp_backward_batch(rhs, c3, ck3, work.grads);
    const MatrixXd ck2 = (step / 3.0) * bar + (0.5 * step) * v3;
    const MatrixXd v2 = mlp_backward_batch(rhs, c2, ck2, work.grads);
    const MatrixXd ck1 = (step / 6.0) * bar + (0.5 * step) * v2;
    const MatrixXd v1 = mlp_backward_batch(rhs, c1, ck1, work.grads);
    bar += v1 + v2 + v3 + v4;
  }
  return work;
}

std::pair<double, MlpGrads> batched_loss_and_grad(const NodeModel& model, const MatrixXd& h0,
                                                  const MatrixXd& h1, int n_threads,
                                                  bool want_grads) {
  model.validate();
  if (h0.cols() == 0) throw InvalidArgument("node_loss: empty batch");
  if (h0.rows() != model.dim() || h1.rows() != model.dim() || h0.cols() != h1.cols())
    throw InvalidArgument("node_loss: pair shapes do not match the model");

  const long n_steps = internal_steps(model.sample_interval, model.max_internal_step);
  const double step = model.sample_interval / static_cast<double>(n_steps);
  const auto cols = h0.cols();
  const long n_chunks = (cols + kChunkColumns - 1) / kChunkColumns;

  std::vector<ChunkWork> results(n_chunks);
  auto run_chunk = [&](long c) {
    const auto start = c * kChunkColumns;
    const auto width = std::min<Eigen::Index>(kChunkColumns, cols - start);
    results[c] = chunk_loss_and_grad(model.rhs, h0.middleCols(start, width),
                                     h1.middleCols(start, width), step, n_steps, want_grads);
  };

  if (n_threads <= 1 || n_chunks == 1) {
    for (long c = 0; c < n_chunks; ++c) run_chunk(c);
  } else {
    std::vector<std::future<void>> futures;
    std::atomic<long> next{0};
    const int workers = std::min<long>(n_threads, n_chunks);
    for (int w = 0; w < workers; ++w)
      futures.push_back(std::async(std::launch::async, [&]() {
        for (long c = next.fetch_add(1); c < n_chunks; c = next.fetch_add(1)) run_chunk(c);
      }));
    for (auto& f : futures) f.get();
  }

  // Chunk-ordered reduction keeps results identical for any thread count.
  double loss = 0.0;
  MlpGrads grads = want_grads ? MlpGrads::zeros_like(model.rhs) : MlpGrads{};
  for (long c = 0; c < n_chunks; ++c) {
    loss += results[c].loss_sum;
    if (want_grads) grads.add(results[c].grads);
  }
  const double inv_b = 1.0 / static_cast<double>(cols);
  loss *= inv_b;
  if (want_grads) grads.scale(inv_b);
  return {loss, std::move(grads)};
}

std::vector<int> square_net_sizes(int dim, int width, int hidden_layers) {
  std::vector<int> sizes = {dim};
  for (int i = 0; i < hidden_layers; ++i) sizes.push_back(width);
  sizes.push_back(dim);
  return sizes;
}

std::vector<Activation> square_net_activations(int hidden_layers) {
  std::vector<Activation> acts(hidden_layers, Activation::Sigmoid);
  acts.push_back(Activation::Linear);
  return acts;
}

// Columns are consecutive-pair inputs/targets of the trajectory.
void consecutive_pairs(const Trajectory& traj, MatrixXd& h0, MatrixXd& h1) {
  const auto n = traj.rows() - 1;
  h0 = traj.states.topRows(n).transpose();
  h1 = traj.states.bottomRows(n).transpose();
}

}  // namespace

std::string space_tag_to_string(SpaceTag tag) {
  switch (tag) {
    case SpaceTag::Reduced: return "reduced";
    case SpaceTag::FullPhysical: return "physical";
    case SpaceTag::FullFourier: return "fourier";
  }
  return "reduced";
}

SpaceTag space_tag_from_string(const std::string& name) {
  if (name == "reduced") return SpaceTag::Reduced;
  if (name == "physical") return SpaceTag::FullPhysical;
  if (name == "fourier") return SpaceTag::FullFourier;
  throw InvalidArgument("unknown space tag '" + name + "'");
}

void NodeModel::validate() const {
  rhs.validate();
  if (rhs.input_dim() != rhs.output_dim())
    throw InvalidArgument("node: vector-field net must be square");
  if (!(sample_interval > 0.0)) throw InvalidArgument("node: sample_interval must be positive");
  if (!(max_internal_step > 0.0) || max_internal_step > sample_interval + 1e-12)
    throw InvalidArgument("node: need 0 < max_internal_step <= sample_interval");
}

void DiscreteMapModel::validate() const {
  map.validate();
  if (map.input_dim() != map.output_dim())
    throw InvalidArgument("discrete map: net must be square");
  if (!(sample_interval > 0.0))
    throw InvalidArgument("discrete map: sample_interval must be positive");
}

Eigen::MatrixXd node_integrate(const NodeModel& model, const Eigen::VectorXd& h0,
                               double duration) {
  model.validate();
  if (!(duration > 0.0)) throw InvalidArgument("node_integrate: duration must be positive");
  if (h0.size() != model.dim()) throw InvalidArgument("node_integrate: state dimension mismatch");

  const long n_steps = internal_steps(duration, model.max_internal_step);
  const double step = duration / static_cast<double>(n_steps);
  MatrixXd states(n_steps + 1, model.dim());
  states.row(0) = h0;
  MatrixXd h = h0;
  for (long s = 0; s < n_steps; ++s) {
    h = rk4_step_batch(model.rhs, h, step);
    if (!h.allFinite())
      throw DivergenceError("node_integrate: non-finite state at t = " +
                                std::to_string((s + 1) * step),
                            (s + 1) * step);
    states.row(s + 1) = h.col(0);
  }
  return states;
}

std::pair<double, MlpGrads> node_loss_and_grad(const NodeModel& model, const Eigen::MatrixXd& h0,
                                               const Eigen::MatrixXd& h1, int n_threads) {
  return batched_loss_and_grad(model, h0, h1, n_threads, true);
}

double node_loss(const NodeModel& model, const Eigen::MatrixXd& h0, const Eigen::MatrixXd& h1) {
  return batched_loss_and_grad(model, h0, h1, 1, false).first;
}

NodeTraining train_node(const Trajectory& latent, SpaceTag space,
                        const NodeTrainOptions& options) {
  latent.validate();
  if (options.epochs < 1 || options.batch_size < 1)
    throw InvalidArgument("train_node: epochs and batch_size must be positive");
  const int dim = static_cast<int>(latent.dim());

  NodeTraining result;
  NodeModel& model = result.model;
  model.space = space;
  model.sample_interval = latent.dt_sample;
  model.max_internal_step = std::min(options.max_internal_step, latent.dt_sample);
  model.rhs = init_glorot(square_net_sizes(dim, options.hidden_width, options.hidden_layers),
                          square_net_activations(options.hidden_layers),
                          derive_seed(options.seed, "node-rhs", 0));
  model.validate();

  MatrixXd h0, h1;
  consecutive_pairs(latent, h0, h1);
  const auto n_pairs = h0.cols();

  MatrixXd test_h0, test_h1;
  bool have_test = false;
  if (options.test && options.history_eval_pairs > 0) {
    if (std::abs(options.test->dt_sample - latent.dt_sample) > 1e-9 * latent.dt_sample)
      throw InvalidArgument("train_node: test spacing differs from training spacing");
    consecutive_pairs(*options.test, test_h0, test_h1);
    const auto keep = std::min<Eigen::Index>(test_h0.cols(), options.history_eval_pairs);
    test_h0 = test_h0.leftCols(keep).eval();
    test_h1 = test_h1.leftCols(keep).eval();
    have_test = true;
  }

  AdamState adam = AdamState::for_net(model.rhs, options.learning_rate);
  std::vector<Eigen::Index> order(n_pairs);
  std::iota(order.begin(), order.end(), 0);
  std::mt19937_64 shuffle_rng(derive_seed(options.seed, "node-shuffle", 0));

  MatrixXd batch0(dim, options.batch_size), batch1(dim, options.batch_size);
  for (int epoch = 0; epoch < options.epochs; ++epoch) {
    if (epoch == options.epochs / 2 && epoch > 0)
      adam.learning_rate = options.learning_rate * 0.1;
    std::shuffle(order.begin(), order.end(), shuffle_rng);

    double loss_sum = 0.0;
    long batch_count = 0;
    for (Eigen::Index start = 0; start < n_pairs; start += options.batch_size) {
      const auto b = std::min<Eigen::Index>(options.batch_size, n_pairs - start);
      batch0.resize(dim, b);
      batch1.resize(dim, b);
      for (Eigen::Index j = 0; j < b; ++j) {
        batch0.col(j) = h0.col(order[start + j]);
        batch1.col(j) = h1.col(order[start + j]);
      }
      auto [loss, grads] = node_loss_and_grad(model, batch0, batch1, options.n_threads);
      if (!std::isfinite(loss)) throw TrainingError("train_node: non-finite loss");
      adam_step(model.rhs, grads, adam);
      loss_sum += loss;
      ++batch_count;
    }
    result.train_loss.push_back(loss_sum / static_cast<double>(batch_count));
    if (have_test) result.test_loss.push_back(node_loss(model, test_h0, test_h1));
  }
  return result;
}

MapTraining train_discrete_map(const Trajectory& latent, const MapTrainOptions& options) {
  latent.validate();
  if (options.epochs < 1 || options.batch_size < 1)
    throw InvalidArgument("train_discrete_map: epochs and batch_size must be positive");
  const int dim = static_cast<int>(latent.dim());

  MapTraining result;
  DiscreteMapModel& model = result.model;
  model.sample_interval = latent.dt_sample;
  model.map = init_glorot(square_net_sizes(dim, options.hidden_width, options.hidden_layers),
                          square_net_activations(options.hidden_layers),
                          derive_seed(options.seed, "map-net", 0));
  model.validate();

  MatrixXd h0, h1;
  consecutive_pairs(latent, h0, h1);
  const auto n_pairs = h0.cols();

  MatrixXd test_h0, test_h1;
  bool have_test = false;
  if (options.test && options.history_eval_pairs > 0) {
    consecutive_pairs(*options.test, test_h0, test_h1);
    const auto keep = std::min<Eigen::Index>(test_h0.cols(), options.history_eval_pairs);
    test_h0 = test_h0.leftCols(keep).eval();
    test_h1 = test_h1.leftCols(keep).eval();
    have_test = true;
  }

  AdamState adam = AdamState::for_net(model.map, options.learning_rate);
  MlpGrads grads = MlpGrads::zeros_like(model.map);
  std::vector<Eigen::Index> order(n_pairs);
  std::iota(order.begin(), order.end(), 0);
  std::mt19937_64 shuffle_rng(derive_seed(options.seed, "map-shuffle", 0));

  MatrixXd batch0, batch1;
  for (int epoch = 0; epoch < options.epochs; ++epoch) {
    if (epoch == options.epochs / 2 && epoch > 0)
      adam.learning_rate = options.learning_rate * 0.1;
    std::shuffle(order.begin(), order.end(), shuffle_rng);

    double loss_sum = 0.0;
    long batch_count = 0;
    for (Eigen::Index start = 0; start < n_pairs; start += options.batch_size) {
      const auto b = std::min<Eigen::Index>(options.batch_size, n_pairs - start);
      batch0.resize(dim, b);
      batch1.resize(dim, b);
      for (Eigen::Index j = 0; j < b; ++j) {
        batch0.col(j) = h0.col(order[start + j]);
        batch1.col(j) = h1.col(order[start + j]);
      }
      MlpCache cache;
      const MatrixXd& pred = mlp_forward_batch_cached(model.map, batch0, cache);
      const MatrixXd residual = pred - batch1;
      const double loss = residual.cwiseAbs().sum() / static_cast<double>(b);
      if (!std::isfinite(loss)) throw TrainingError("train_discrete_map: non-finite loss");
      const MatrixXd cot = residual.array().sign() / static_cast<double>(b);
      grads.set_zero();
      mlp_backward_batch(model.map, cache, cot, grads);
      adam_step(model.map, grads, adam);
      loss_sum += loss;
      ++batch_count;
    }
    result.train_loss.push_back(loss_sum / static_cast<double>(batch_count));
    if (have_test) {
      const MatrixXd pred = mlp_forward_batch(model.map, test_h0);
      result.test_loss.push_back((pred - test_h1).cwiseAbs().sum() /
                                 static_cast<double>(test_h0.cols()));
    }
  }
  return result;
}

Eigen::VectorXd pack_fourier(const Eigen::VectorXd& field) {
  const int d = static_cast<int>(field.size());
  if (d < 4 || d % 2 != 0) throw InvalidArgument("pack_fourier: need even dimension >= 4");
  RealDft dft(d);
  const Eigen::VectorXcd spectrum = dft.forward(field) / static_cast<double>(d);
  VectorXd packed(d);
  packed[0] = spectrum[0].real();
  for (int k = 1; k < d / 2; ++k) {
    packed[2 * k - 1] = spectrum[k].real();
    packed[2 * k] = spectrum[k].imag();
  }
  packed[d - 1] = spectrum[d / 2].real();
  return packed;
}

Eigen::VectorXd unpack_fourier(const Eigen::VectorXd& packed) {
  const int d = static_cast<int>(packed.size());
  if (d < 4 || d % 2 != 0) throw InvalidArgument("unpack_fourier: need even dimension >= 4");
  Eigen::VectorXcd spectrum(d / 2 + 1);
  spectrum[0] = packed[0];
  for (int k = 1; k < d / 2; ++k) spectrum[k] = {packed[2 * k - 1], packed[2 * k]};
  spectrum[d / 2] = packed[d - 1];
  RealDft dft(d);
  return dft.inverse((static_cast<double>(d) * spectrum).eval());
}

namespace {

VectorXd rollout_encode(const AutoencoderModel* ae, SpaceTag space, const VectorXd& u0) {
  switch (space) {
    case SpaceTag::Reduced:
      if (!ae) throw InvalidArgument("rollout: reduced-space model needs an autoencoder");
      return ae_encode(*ae, u0);
    case SpaceTag::FullPhysical:
      return u0;
    case SpaceTag::FullFourier:
      return pack_fourier(u0);
  }
  throw InvalidArgument("rollout: bad space tag");
}

VectorXd rollout_decode(const AutoencoderModel* ae, SpaceTag space, const VectorXd& h) {
  switch (space) {
    case SpaceTag::Reduced:
      return ae_decode(*ae, h);
    case SpaceTag::FullPhysical:
      return h;
    case SpaceTag::FullFourier:
      return unpack_fourier(h);
  }
  throw InvalidArgument("rollout: bad space tag");
}

}  // namespace

Trajectory node_rollout(const AutoencoderModel* ae, const NodeModel& model,
                        const Eigen::VectorXd& u0, double duration, double sample_every) {
  model.validate();
  if (sample_every <= 0.0) sample_every = model.sample_interval;
  if (!(duration >= sample_every)) throw InvalidArgument("rollout: duration < sample_every");

  const long n_steps = internal_steps(sample_every, model.max_internal_step);
  const double step = sample_every / static_cast<double>(n_steps);
  const auto n_samples = static_cast<long>(std::floor(duration / sample_every + 1e-9));

  VectorXd h = rollout_encode(ae, model.space, u0);
  if (h.size() != model.dim()) throw InvalidArgument("rollout: state dimension mismatch");

  Trajectory traj;
  traj.states.resize(n_samples, u0.size());
  traj.dt_sample = sample_every;
  for (long s = 0; s < n_samples; ++s) {
    for (long i = 0; i < n_steps; ++i) h = rk4_step_batch(model.rhs, h, step);
    if (!h.allFinite())
      throw DivergenceError(
          "rollout: model state diverged at t = " + std::to_string((s + 1) * sample_every),
          (s + 1) * sample_every);
    traj.states.row(s) = rollout_decode(ae, model.space, h);
  }
  return traj;
}

Trajectory map_rollout(const AutoencoderModel* ae, const DiscreteMapModel& model,
                       const Eigen::VectorXd& u0, double duration) {
  model.validate();
  const double tau = model.sample_interval;
  if (!(duration >= tau)) throw InvalidArgument("map_rollout: duration < sample interval");
  const auto n_samples = static_cast<long>(std::floor(duration / tau + 1e-9));

  VectorXd h;
  if (ae)
    h = ae_encode(*ae, u0);
  else
    h = u0;
  if (h.size() != model.dim()) throw InvalidArgument("map_rollout: state dimension mismatch");

  Trajectory traj;
  traj.states.resize(n_samples, u0.size());
  traj.dt_sample = tau;
  for (long s = 0; s < n_samples; ++s) {
    h = mlp_forward(model.map, h);
    if (!h.allFinite())
      throw DivergenceError("map_rollout: model state diverged at t = " +
                                std::to_string((s + 1) * tau),
                            (s + 1) * tau);
    traj.states.row(s) = ae ? ae_decode(*ae, h) : h;
  }
  return traj;
}

void save_node(const std::filesystem::path& path, const NodeModel& model) {
  model.validate();
  NodaFile file;
  nlohmann::json meta;
  meta["kind"] = "node";
  meta["space"] = space_tag_to_string(model.space);
  meta["sample_interval"] = model.sample_interval;
  meta["max_internal_step"] = model.max_internal_step;
  meta["rhs"] = mlp_structure_json(model.rhs);
  file.metadata_json = meta.dump();
  noda_add_mlp(file, "rhs", model.rhs);
  noda_write(path, file);
}

NodeModel load_node(const std::filesystem::path& path) {
  const NodaFile file = noda_read(path);
  nlohmann::json meta = nlohmann::json::parse(file.metadata_json, nullptr, false);
  if (meta.is_discarded() || meta.value("kind", "") != "node")
    throw IoError(IoError::Kind::Corruption, "node: not a vector-field checkpoint");
  NodeModel model;
  model.space = space_tag_from_string(meta.at("space").get<std::string>());
  model.sample_interval = meta.at("sample_interval").get<double>();
  model.max_internal_step = meta.at("max_internal_step").get<double>();
  model.rhs = noda_read_mlp(file, "rhs", meta.at("rhs"));
  model.validate();
  return model;
}

void save_discrete_map(const std::filesystem::path& path, const DiscreteMapModel& model) {
  model.validate();
  NodaFile file;
  nlohmann::json meta;
  meta["kind"] = "discrete_map";
  meta["sample_interval"] = model.sample_interval;
  meta["map"] = mlp_structure_json(model.map);
  file.metadata_json = meta.dump();
  noda_add_mlp(file, "map", model.map);
  noda_write(path, file);
}

DiscreteMapModel load_discrete_map(const std::filesystem::path& path) {
  const NodaFile file = noda_read(path);
  nlohmann::json meta = nlohmann::json::parse(file.metadata_json, nullptr, false);
  if (meta.is_discarded() || meta.value("kind", "") != "discrete_map")
    throw IoError(IoError::Kind::Corruption, "discrete map: not a map checkpoint");
  DiscreteMapModel model;
  model.sample_interval = meta.at("sample_interval").get<double>();
  model.map = noda_read_mlp(file, "map", meta.at("map"));
  model.validate();
  return model;
}

}  // namespace manifold
