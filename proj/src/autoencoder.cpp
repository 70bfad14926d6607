#include "manifold/autoencoder.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "manifold/config.hpp"
#include "manifold/errors.hpp"
#include "manifold/model_io.hpp"

namespace manifold {

using Eigen::MatrixXd;
using Eigen::VectorXd;

std::string ae_variant_name(AeVariant v) {
  switch (v) {
    case AeVariant::LinearEncoderNnDecoder: return "linear";
    case AeVariant::HybridHnn: return "hybrid";
    case AeVariant::NonlinearBoth: return "nonlinear";
  }
  return "linear";
}

AeVariant ae_variant_from_name(const std::string& name) {
  if (name == "linear") return AeVariant::LinearEncoderNnDecoder;
  if (name == "hybrid") return AeVariant::HybridHnn;
  if (name == "nonlinear") return AeVariant::NonlinearBoth;
  throw InvalidArgument("unknown autoencoder variant '" + name + "'");
}

void AutoencoderModel::validate() const {
  const int d = ambient_dim();
  if (latent_dim < 1 || latent_dim > d)
    throw InvalidArgument("autoencoder: latent_dim out of range");
  if (decoder.input_dim() != latent_dim || decoder.output_dim() != d)
    throw InvalidArgument("autoencoder: decoder must map latent_dim to ambient_dim");
  if (variant == AeVariant::LinearEncoderNnDecoder) {
    if (encoder) throw InvalidArgument("autoencoder: linear variant carries no encoder net");
  } else {
    if (!encoder) throw InvalidArgument("autoencoder: variant requires an encoder net");
    if (encoder->input_dim() != d || encoder->output_dim() != latent_dim)
      throw InvalidArgument("autoencoder: encoder must map ambient_dim to latent_dim");
  }
}

Eigen::VectorXd ae_encode(const AutoencoderModel& model, const Eigen::VectorXd& u) {
  if (u.size() != model.ambient_dim()) throw InvalidArgument("ae_encode: dimension mismatch");
  switch (model.variant) {
    case AeVariant::LinearEncoderNnDecoder:
      return pca_project(model.basis, u, model.latent_dim);
    case AeVariant::HybridHnn: {
      const VectorXd coeffs = pca_project(model.basis, u, model.ambient_dim());
      return mlp_forward(*model.encoder, coeffs) + coeffs.head(model.latent_dim);
    }
    case AeVariant::NonlinearBoth:
      return mlp_forward(*model.encoder, u);
  }
  throw InvalidArgument("ae_encode: bad variant");
}

Eigen::VectorXd ae_decode(const AutoencoderModel& model, const Eigen::VectorXd& h) {
  if (h.size() != model.latent_dim) throw InvalidArgument("ae_decode: dimension mismatch");
  if (model.variant == AeVariant::NonlinearBoth) return mlp_forward(model.decoder, h);
  VectorXd coeffs = mlp_forward(model.decoder, h);
  coeffs.head(model.latent_dim) += h;
  return pca_reconstruct(model.basis, coeffs);
}

Eigen::MatrixXd ae_encode_rows(const AutoencoderModel& model, const Eigen::MatrixXd& states) {
  if (states.cols() != model.ambient_dim())
    throw InvalidArgument("ae_encode_rows: dimension mismatch");
  switch (model.variant) {
    case AeVariant::LinearEncoderNnDecoder:
      return pca_project_rows(model.basis, states, model.latent_dim);
    case AeVariant::HybridHnn: {
      const MatrixXd coeffs = pca_project_rows(model.basis, states, model.ambient_dim());
      return mlp_forward_batch(*model.encoder, coeffs.transpose()).transpose() +
             coeffs.leftCols(model.latent_dim);
    }
    case AeVariant::NonlinearBoth:
      return mlp_forward_batch(*model.encoder, states.transpose()).transpose();
  }
  throw InvalidArgument("ae_encode_rows: bad variant");
}

Eigen::MatrixXd ae_decode_rows(const AutoencoderModel& model, const Eigen::MatrixXd& codes) {
  if (codes.cols() != model.latent_dim) throw InvalidArgument("ae_decode_rows: dimension mismatch");
  if (model.variant == AeVariant::NonlinearBoth)
    return mlp_forward_batch(model.decoder, codes.transpose()).transpose();
  MatrixXd coeffs = mlp_forward_batch(model.decoder, codes.transpose()).transpose();
  coeffs.leftCols(model.latent_dim) += codes;
  return pca_reconstruct_rows(model.basis, coeffs);
}

Trajectory encode_trajectory(const AutoencoderModel& model, const Trajectory& traj) {
  Trajectory latent = traj;
  latent.states = ae_encode_rows(model, traj.states);
  latent.system = SystemTag::Generic;
  latent.domain_length = 0.0;
  return latent;
}

double ae_mse_on(const AutoencoderModel& model, const Trajectory& data) {
  const MatrixXd rec = ae_decode_rows(model, ae_encode_rows(model, data.states));
  return (rec - data.states).squaredNorm() /
         static_cast<double>(data.states.rows() * data.states.cols());
}

namespace {

std::vector<int> net_sizes(int in, int out, const AeTrainOptions& options) {
  std::vector<int> sizes = {in};
  for (int i = 0; i < options.hidden_layers; ++i) sizes.push_back(options.hidden_width);
  sizes.push_back(out);
  return sizes;
}

std::vector<Activation> net_activations(int hidden_layers) {
  std::vector<Activation> acts(hidden_layers, Activation::Sigmoid);
  acts.push_back(Activation::Linear);
  return acts;
}

Trajectory head_rows(const Trajectory& traj, int max_rows) {
  if (max_rows <= 0 || traj.rows() <= max_rows) return traj;
  Trajectory out = traj;
  out.states = traj.states.topRows(max_rows);
  return out;
}

}  // namespace

AutoencoderTraining train_autoencoder(AeVariant variant, const Trajectory& data, int latent_dim,
                                      const AeTrainOptions& options) {
  data.validate();
  const int d = static_cast<int>(data.dim());
  const auto n = data.rows();
  if (latent_dim < 1 || latent_dim > d)
    throw InvalidArgument("train_autoencoder: latent_dim out of range");
  if (n < 2 * latent_dim)
    throw InvalidArgument("train_autoencoder: need at least 2*latent_dim snapshots");
  if (options.epochs < 1 || options.batch_size < 1)
    throw InvalidArgument("train_autoencoder: epochs and batch_size must be positive");

  AutoencoderTraining result;
  AutoencoderModel& model = result.model;
  model.variant = variant;
  model.latent_dim = latent_dim;
  model.basis = fit_pca(data.states);
  model.decoder = init_glorot(net_sizes(latent_dim, d, options),
                              net_activations(options.hidden_layers),
                              derive_seed(options.seed, "ae-decoder", 0));
  if (variant != AeVariant::LinearEncoderNnDecoder)
    model.encoder = init_glorot(net_sizes(d, latent_dim, options),
                                net_activations(options.hidden_layers),
                                derive_seed(options.seed, "ae-encoder", 0));
  model.validate();

  // Samples as columns. For the principal-component variants both the inputs
  // and the reconstruction residual live in coefficient space.
  const bool coefficient_space = variant != AeVariant::NonlinearBoth;
  const MatrixXd samples =
      coefficient_space ? MatrixXd(pca_project_rows(model.basis, data.states, d).transpose())
                        : MatrixXd(data.states.transpose());

  AdamState adam_dec = AdamState::for_net(model.decoder, options.learning_rate);
  AdamState adam_enc;
  if (model.encoder) adam_enc = AdamState::for_net(*model.encoder, options.learning_rate);

  MlpGrads grads_dec = MlpGrads::zeros_like(model.decoder);
  MlpGrads grads_enc;
  if (model.encoder) grads_enc = MlpGrads::zeros_like(*model.encoder);

  std::vector<int> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::mt19937_64 shuffle_rng(derive_seed(options.seed, "ae-shuffle", 0));

  const Trajectory test_view =
      options.test ? head_rows(*options.test, options.history_eval_rows) : Trajectory{};

  MatrixXd input, target, residual, cot;
  for (int epoch = 0; epoch < options.epochs; ++epoch) {
    if (epoch == options.epochs / 2 && epoch > 0) {
      adam_dec.learning_rate = options.learning_rate * 0.1;
      adam_enc.learning_rate = options.learning_rate * 0.1;
    }
    std::shuffle(order.begin(), order.end(), shuffle_rng);

    double loss_sum = 0.0;
    long batch_count = 0;
    for (Eigen::Index start = 0; start < n; start += options.batch_size) {
      const auto b = std::min<Eigen::Index>(options.batch_size, n - start);
      input.resize(d, b);
      for (Eigen::Index j = 0; j < b; ++j) input.col(j) = samples.col(order[start + j]);
      const double scale = 1.0 / static_cast<double>(b * d);

      double loss = 0.0;
      if (variant == AeVariant::NonlinearBoth) {
        MlpCache enc_cache, dec_cache;
        const MatrixXd& codes = mlp_forward_batch_cached(*model.encoder, input, enc_cache);
        const MatrixXd& rec = mlp_forward_batch_cached(model.decoder, codes, dec_cache);
        residual = rec - input;
        loss = residual.squaredNorm() * scale;
        cot = (2.0 * scale) * residual;
        grads_dec.set_zero();
        const MatrixXd code_cot = mlp_backward_batch(model.decoder, dec_cache, cot, grads_dec);
        grads_enc.set_zero();
        mlp_backward_batch(*model.encoder, enc_cache, code_cot, grads_enc);
      } else {
        MlpCache enc_cache, dec_cache;
        MatrixXd codes = input.topRows(latent_dim);
        if (variant == AeVariant::HybridHnn)
          codes += mlp_forward_batch_cached(*model.encoder, input, enc_cache);
        residual = mlp_forward_batch_cached(model.decoder, codes, dec_cache);
        residual.topRows(latent_dim) += codes;
        residual -= input;
        loss = residual.squaredNorm() * scale;
        cot = (2.0 * scale) * residual;
        grads_dec.set_zero();
        MatrixXd code_cot = mlp_backward_batch(model.decoder, dec_cache, cot, grads_dec);
        if (variant == AeVariant::HybridHnn) {
          code_cot += cot.topRows(latent_dim);
          grads_enc.set_zero();
          mlp_backward_batch(*model.encoder, enc_cache, code_cot, grads_enc);
        }
      }

      if (!std::isfinite(loss)) throw TrainingError("train_autoencoder: non-finite loss");
      adam_step(model.decoder, grads_dec, adam_dec);
      if (model.encoder) adam_step(*model.encoder, grads_enc, adam_enc);
      loss_sum += loss;
      ++batch_count;
    }
    result.train_mse.push_back(loss_sum / static_cast<double>(batch_count));
    if (options.test && options.history_eval_rows > 0)
      result.test_mse.push_back(ae_mse_on(model, test_view));
  }
  return result;
}

void save_autoencoder(const std::filesystem::path& path, const AutoencoderModel& model) {
  model.validate();
  NodaFile file;
  nlohmann::json meta;
  meta["kind"] = "autoencoder";
  meta["variant"] = ae_variant_name(model.variant);
  meta["latent_dim"] = model.latent_dim;
  meta["decoder"] = mlp_structure_json(model.decoder);
  meta["encoder"] = model.encoder ? mlp_structure_json(*model.encoder) : nlohmann::json(nullptr);
  file.metadata_json = meta.dump();
  file.add("pca/modes", NodaArray::from_matrix(model.basis.modes));
  file.add("pca/singular_values", NodaArray::from_vector(model.basis.singular_values));
  file.add("pca/mean", NodaArray::from_vector(model.basis.mean));
  noda_add_mlp(file, "decoder", model.decoder);
  if (model.encoder) noda_add_mlp(file, "encoder", *model.encoder);
  noda_write(path, file);
}

AutoencoderModel load_autoencoder(const std::filesystem::path& path) {
  const NodaFile file = noda_read(path);
  nlohmann::json meta;
  try {
    meta = nlohmann::json::parse(file.metadata_json);
  } catch (const nlohmann::json::exception& e) {
    throw IoError(IoError::Kind::Corruption, "autoencoder: bad metadata: " + std::string(e.what()));
  }
  if (meta.value("kind", "") != "autoencoder")
    throw IoError(IoError::Kind::Corruption, "autoencoder: not an autoencoder checkpoint");
  AutoencoderModel model;
  model.variant = ae_variant_from_name(meta.at("variant").get<std::string>());
  model.latent_dim = meta.at("latent_dim").get<int>();
  model.basis.modes = file.get("pca/modes").as_matrix();
  model.basis.singular_values = file.get("pca/singular_values").as_vector();
  model.basis.mean = file.get("pca/mean").as_vector();
  model.decoder = noda_read_mlp(file, "decoder", meta.at("decoder"));
  if (!meta.at("encoder").is_null())
    model.encoder = noda_read_mlp(file, "encoder", meta.at("encoder"));
  model.validate();
  return model;
}

}  // namespace manifold
