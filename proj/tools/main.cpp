// manifold-node: data generation, model training and evaluation for
// reduced-order models of chaotic dynamics.

#include <CLI11.hpp>
#include <Eigen/Dense>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <random>

#include "manifold/autoencoder.hpp"
#include "manifold/config.hpp"
#include "manifold/diagnostics.hpp"
#include "manifold/errors.hpp"
#include "manifold/kse.hpp"
#include "manifold/lorenz.hpp"
#include "manifold/neural_ode.hpp"
#include "manifold/noda.hpp"
#include "manifold/pca.hpp"
#include "manifold/study.hpp"
#include "manifold/trajectory.hpp"
#include "manifold/version.hpp"

namespace fs = std::filesystem;
using namespace manifold;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitValidation = 1;
constexpr int kExitRuntime = 2;

void write_csv(const fs::path& path, const std::vector<std::string>& columns,
               const Eigen::VectorXd& x, const Eigen::MatrixXd& y) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError(IoError::Kind::Io, "cannot write " + path.string());
  for (size_t c = 0; c < columns.size(); ++c) out << (c ? "," : "") << columns[c];
  out << "\n";
  out << std::setprecision(17);
  for (Eigen::Index r = 0; r < x.size(); ++r) {
    out << x[r];
    for (Eigen::Index c = 0; c < y.cols(); ++c) out << "," << y(r, c);
    out << "\n";
  }
}

struct GenerateArgs {
  std::string system = "kse";
  double domain_length = 22.0;
  int grid_points = 64;
  double duration = 1000.0;
  double sample_every = 0.25;
  double transient = 500.0;
  double dt_internal = 0.25;
  uint64_t seed = 0;
  double sigma = 10.0, rho = 28.0, beta = 8.0 / 3.0, alpha = 0.02;
  std::string out;
};

struct TrainAeArgs {
  std::string data, test, out_dir;
  std::string variant = "linear";
  int latent_dim = 8;
  int epochs = 200;
  int seeds = 1;
  uint64_t master_seed = 0;
  int batch = 256;
  int hidden = 500;
  int depth = 1;
};

struct TrainNodeArgs {
  std::string data, test, ae, out_dir;
  std::string space = "reduced";
  double tau = 0.25;
  double max_step = 0.25;
  int epochs = 200;
  int seeds = 1;
  uint64_t master_seed = 0;
  int batch = 256;
  int threads = 1;
};

struct EvaluateArgs {
  std::string stat;
  std::string truth, train, ae, node, map;
  std::string out = "evaluation.csv";
  double horizon = 44.4;
  int n_ic = 100;
  uint64_t seed = 0;
  int bins = 100;
  double rollout_duration = 5000.0;
  double sample_every = 0.0;
  double max_lag = 60.0;
};

Trajectory load_and_subsample(const std::string& path, double tau) {
  Trajectory traj = load_trajectory(path);
  const double stride_real = tau / traj.dt_sample;
  const long stride = std::llround(stride_real);
  if (stride < 1 || std::abs(stride_real - static_cast<double>(stride)) > 1e-9)
    throw InvalidArgument("tau must be an integer multiple of the data spacing");
  return stride == 1 ? traj : subsample(traj, stride);
}

// Model bundle for evaluation subcommands: optional autoencoder plus either a
// vector-field model or a discrete map.
struct LoadedModel {
  std::optional<AutoencoderModel> ae;
  std::optional<NodeModel> node;
  std::optional<DiscreteMapModel> map;

  double spacing() const {
    return node ? node->sample_interval : map->sample_interval;
  }
  RolloutFn rollout(double sample_every = -1.0) const {
    const AutoencoderModel* ae_ptr = ae ? &*ae : nullptr;
    if (node) {
      const NodeModel& model_ref = *node;
      return [ae_ptr, &model_ref, sample_every](const Eigen::VectorXd& u0, double duration) {
        return node_rollout(ae_ptr, model_ref, u0, duration, sample_every);
      };
    }
    const DiscreteMapModel& map_ref = *map;
    return [ae_ptr, &map_ref](const Eigen::VectorXd& u0, double duration) {
      return map_rollout(ae_ptr, map_ref, u0, duration);
    };
  }
};

LoadedModel load_model(const EvaluateArgs& args) {
  LoadedModel loaded;
  if (!args.ae.empty()) loaded.ae = load_autoencoder(args.ae);
  if (!args.node.empty()) loaded.node = load_node(args.node);
  if (!args.map.empty()) loaded.map = load_discrete_map(args.map);
  if (loaded.node && loaded.map)
    throw InvalidArgument("evaluate: pass either --node or --map, not both");
  return loaded;
}

int run_generate(const GenerateArgs& args) {
  Trajectory traj;
  if (args.system == "kse") {
    KseConfig config;
    config.domain_length = args.domain_length;
    config.grid_points = args.grid_points;
    config.dt_internal = args.dt_internal;
    config.transient_discard = args.transient;
    config.seed = args.seed;
    traj = simulate_kse(config, std::nullopt, args.duration, args.sample_every);
  } else if (args.system == "lorenz-spiral") {
    LorenzSpiralConfig config;
    config.sigma = args.sigma;
    config.rho = args.rho;
    config.beta = args.beta;
    config.alpha = args.alpha;
    config.seed = args.seed;
    traj = simulate_lorenz_spiral(config, args.duration, args.sample_every);
  } else {
    throw InvalidArgument("generate: unknown system '" + args.system + "'");
  }
  save_trajectory(args.out, traj);
  std::cout << "wrote " << traj.rows() << " x " << traj.dim() << " snapshots to " << args.out
            << "\n";
  return kExitOk;
}

int run_pca_fit(const std::string& data, const std::string& out) {
  const Trajectory traj = load_trajectory(data);
  save_pca(out, fit_pca(traj.states));
  std::cout << "wrote basis (" << traj.dim() << " modes) to " << out << "\n";
  return kExitOk;
}

int run_train_ae(const TrainAeArgs& args) {
  const Trajectory train = load_trajectory(args.data);
  Trajectory test;
  AeTrainOptions options;
  options.epochs = args.epochs;
  options.batch_size = args.batch;
  options.hidden_width = args.hidden;
  options.hidden_layers = args.depth;
  if (!args.test.empty()) {
    test = load_trajectory(args.test);
    options.test = &test;
  }
  fs::create_directories(args.out_dir);
  for (int member = 0; member < args.seeds; ++member) {
    options.seed = derive_seed(args.master_seed, "train-ae", member);
    const AutoencoderTraining trained =
        train_autoencoder(ae_variant_from_name(args.variant), train, args.latent_dim, options);
    const fs::path out = fs::path(args.out_dir) / ("ae_" + std::to_string(member) + ".noda");
    save_autoencoder(out, trained.model);
    std::cout << "member " << member << ": train mse " << trained.train_mse.back();
    if (!trained.test_mse.empty()) std::cout << ", test mse " << trained.test_mse.back();
    std::cout << " -> " << out << "\n";
  }
  return kExitOk;
}

int run_train_node(const TrainNodeArgs& args) {
  const SpaceTag space = space_tag_from_string(args.space);
  Trajectory train = load_and_subsample(args.data, args.tau);
  Trajectory test;
  const bool have_test = !args.test.empty();
  if (have_test) test = load_and_subsample(args.test, args.tau);

  std::optional<AutoencoderModel> ae;
  if (space == SpaceTag::Reduced) {
    if (args.ae.empty()) throw InvalidArgument("train-node: reduced space requires --ae");
    ae = load_autoencoder(args.ae);
    train = encode_trajectory(*ae, train);
    if (have_test) test = encode_trajectory(*ae, test);
  } else if (space == SpaceTag::FullFourier) {
    auto pack_rows = [](Trajectory& traj) {
      for (Eigen::Index i = 0; i < traj.rows(); ++i)
        traj.states.row(i) = pack_fourier(traj.states.row(i)).transpose();
      traj.system = SystemTag::Generic;
    };
    pack_rows(train);
    if (have_test) pack_rows(test);
  }

  NodeTrainOptions options;
  options.epochs = args.epochs;
  options.batch_size = args.batch;
  options.max_internal_step = args.max_step;
  options.n_threads = args.threads;
  if (have_test) options.test = &test;

  fs::create_directories(args.out_dir);
  for (int member = 0; member < args.seeds; ++member) {
    options.seed = derive_seed(args.master_seed, "train-node", member);
    const NodeTraining trained = train_node(train, space, options);
    const fs::path out = fs::path(args.out_dir) / ("node_" + std::to_string(member) + ".noda");
    save_node(out, trained.model);
    std::cout << "member " << member << ": train loss " << trained.train_loss.back();
    if (!trained.test_loss.empty()) std::cout << ", test loss " << trained.test_loss.back();
    std::cout << " -> " << out << "\n";
  }
  return kExitOk;
}

int run_train_map(const TrainNodeArgs& args) {
  Trajectory train = load_and_subsample(args.data, args.tau);
  Trajectory test;
  const bool have_test = !args.test.empty();
  if (have_test) test = load_and_subsample(args.test, args.tau);

  if (!args.ae.empty()) {
    const AutoencoderModel ae = load_autoencoder(args.ae);
    train = encode_trajectory(ae, train);
    if (have_test) test = encode_trajectory(ae, test);
  }

  MapTrainOptions options;
  options.epochs = args.epochs;
  options.batch_size = args.batch;
  if (have_test) options.test = &test;

  fs::create_directories(args.out_dir);
  for (int member = 0; member < args.seeds; ++member) {
    options.seed = derive_seed(args.master_seed, "train-map", member);
    const MapTraining trained = train_discrete_map(train, options);
    const fs::path out = fs::path(args.out_dir) / ("map_" + std::to_string(member) + ".noda");
    save_discrete_map(out, trained.model);
    std::cout << "member " << member << ": train loss " << trained.train_loss.back() << " -> "
              << out << "\n";
  }
  return kExitOk;
}

int run_evaluate(const EvaluateArgs& args) {
  const Trajectory truth = load_trajectory(args.truth);

  if (args.stat == "jointpdf" && args.node.empty() && args.map.empty()) {
    // Reference histogram of the truth data itself.
    const PdfRanges ranges = joint_pdf_ranges(truth);
    const JointPdf pdf = joint_pdf(truth, args.bins, ranges);
    NodaFile file;
    nlohmann::json meta;
    meta["kind"] = "jointpdf";
    meta["sample_count"] = pdf.sample_count;
    file.metadata_json = meta.dump();
    file.add("bin_edges_x", NodaArray::from_vector(pdf.bin_edges_x));
    file.add("bin_edges_y", NodaArray::from_vector(pdf.bin_edges_y));
    file.add("mass", NodaArray::from_matrix(pdf.mass));
    noda_write(args.out, file);
    std::cout << "wrote truth joint pdf to " << args.out << "\n";
    return kExitOk;
  }

  const Trajectory train = load_trajectory(args.train);
  const double normalization = rms_pair_distance(train, 10000, args.seed);

  if (args.stat == "select") {
    // Candidates: every *.noda model under --node (a directory), sharing --ae.
    std::vector<fs::path> paths;
    for (const auto& entry : fs::directory_iterator(args.node))
      if (entry.path().extension() == ".noda") paths.push_back(entry.path());
    std::sort(paths.begin(), paths.end());
    if (paths.empty()) throw InvalidArgument("select: no .noda models in " + args.node);

    std::optional<AutoencoderModel> ae;
    if (!args.ae.empty()) ae = load_autoencoder(args.ae);
    const AutoencoderModel* ae_ptr = ae ? &*ae : nullptr;
    std::vector<NodeModel> nodes;
    nodes.reserve(paths.size());
    for (const auto& p : paths) nodes.push_back(load_node(p));
    std::vector<ModelCandidate> candidates;
    for (size_t i = 0; i < nodes.size(); ++i) {
      const NodeModel& node_ref = nodes[i];
      candidates.push_back({paths[i].filename().string(),
                            [ae_ptr, &node_ref](const Eigen::VectorXd& u0, double duration) {
                              return node_rollout(ae_ptr, node_ref, u0, duration);
                            }});
    }
    const Trajectory truth_aligned =
        load_and_subsample(args.truth, nodes.front().sample_interval);
    const SelectionResult result = select_best_model(candidates, truth_aligned, args.horizon,
                                                     args.n_ic, normalization, args.seed);
    std::ofstream out(args.out, std::ios::trunc);
    out << "model,score\n" << std::setprecision(17);
    for (size_t i = 0; i < candidates.size(); ++i)
      out << candidates[i].label << "," << result.scores[i] << "\n";
    std::cout << "best: " << candidates[result.best_index].label << " (score "
              << result.scores[result.best_index] << ") -> " << args.out << "\n";
    return kExitOk;
  }

  const LoadedModel model = load_model(args);

  if (args.stat == "tracking") {
    const Trajectory truth_aligned = load_and_subsample(args.truth, model.spacing());
    const TrackingCurve curve = tracking_error(truth_aligned, model.rollout(), args.horizon,
                                               args.n_ic, normalization, args.seed);
    write_csv(args.out, {"time", "normalized_error"}, curve.times,
              Eigen::MatrixXd(curve.normalized_error));
    std::cout << "tracking curve over " << curve.ensemble_size << " initial conditions -> "
              << args.out << "\n";
    return kExitOk;
  }
  if (args.stat == "autocorr") {
    const Trajectory truth_aligned = load_and_subsample(args.truth, model.spacing());
    const AutocorrCurve truth_curve = temporal_autocorrelation({truth_aligned}, args.max_lag);
    std::vector<Trajectory> members;
    std::mt19937_64 rng(args.seed);
    std::uniform_int_distribution<Eigen::Index> pick(0, truth_aligned.rows() - 1);
    const RolloutFn rollout = model.rollout();
    for (int m = 0; m < 16; ++m)
      members.push_back(rollout(truth_aligned.states.row(pick(rng)), 3.0 * args.max_lag));
    const AutocorrCurve model_curve = temporal_autocorrelation(members, args.max_lag);
    Eigen::MatrixXd y(truth_curve.lags.size(), 2);
    y.col(0) = truth_curve.correlation;
    y.col(1) = model_curve.correlation;
    write_csv(args.out, {"time", "truth", "model"}, truth_curve.lags, y);
    std::cout << "autocorrelation -> " << args.out << "\n";
    return kExitOk;
  }
  if (args.stat == "jointpdf") {
    const PdfRanges ranges = joint_pdf_ranges(truth);
    const JointPdf truth_pdf = joint_pdf(truth, args.bins, ranges);
    const double sample_every =
        args.sample_every > 0 ? args.sample_every : std::min(model.spacing(), 1.0);
    const RolloutFn rollout = model.map ? model.rollout() : model.rollout(sample_every);
    Trajectory roll = rollout(truth.states.row(0), args.rollout_duration);
    roll.domain_length = truth.domain_length;
    roll.system = SystemTag::Kse;
    const JointPdf model_pdf = joint_pdf(roll, args.bins, ranges);
    const double err = pdf_relative_error(truth_pdf, model_pdf);
    std::ofstream out(args.out, std::ios::trunc);
    out << "stat,value\npdf_relative_error," << std::setprecision(17) << err << "\n";
    std::cout << "joint-pdf relative error " << err << " -> " << args.out << "\n";
    return kExitOk;
  }
  if (args.stat == "fourier") {
    const RolloutFn rollout = model.rollout();
    Trajectory roll = rollout(truth.states.row(0), args.rollout_duration);
    const Eigen::MatrixXd history = fourier_magnitude_history(roll);
    std::vector<std::string> columns = {"time"};
    for (int k = 0; k < history.cols(); ++k) columns.push_back("k" + std::to_string(k));
    const Eigen::VectorXd times =
        roll.dt_sample * Eigen::VectorXd::LinSpaced(history.rows(), 1.0,
                                                    static_cast<double>(history.rows()));
    write_csv(args.out, columns, times, history);
    std::cout << "wavenumber magnitudes -> " << args.out << "\n";
    return kExitOk;
  }
  throw InvalidArgument("evaluate: unknown --stat '" + args.stat + "'");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"reduced-order modeling of chaotic dynamics with learned vector fields"};
  app.set_version_flag("--version", kLibraryVersion);
  app.set_config("--config", "", "read options from a key-value config file");
  app.require_subcommand(1);

  GenerateArgs gen;
  auto* generate = app.add_subcommand("generate", "integrate a system and store snapshots");
  generate->add_option("--system", gen.system, "kse | lorenz-spiral");
  generate->add_option("--L", gen.domain_length, "domain length");
  generate->add_option("--d", gen.grid_points, "grid points");
  generate->add_option("--duration", gen.duration, "time units to record");
  generate->add_option("--sample-every", gen.sample_every, "snapshot spacing");
  generate->add_option("--transient", gen.transient, "discarded leading time units");
  generate->add_option("--dt-internal", gen.dt_internal, "solver step");
  generate->add_option("--seed", gen.seed, "random seed");
  generate->add_option("--sigma", gen.sigma, "");
  generate->add_option("--rho", gen.rho, "");
  generate->add_option("--beta", gen.beta, "");
  generate->add_option("--alpha", gen.alpha, "spiral coefficient");
  generate->add_option("--out", gen.out, "output container")->required();

  std::string pca_data, pca_out;
  auto* pca_cmd = app.add_subcommand("pca-fit", "fit principal components of a snapshot set");
  pca_cmd->add_option("--data", pca_data)->required();
  pca_cmd->add_option("--out", pca_out)->required();

  TrainAeArgs ae_args;
  auto* train_ae = app.add_subcommand("train-ae", "train an autoencoder ensemble");
  train_ae->add_option("--data", ae_args.data)->required();
  train_ae->add_option("--test", ae_args.test);
  train_ae->add_option("--variant", ae_args.variant, "linear | hybrid | nonlinear");
  train_ae->add_option("--dh", ae_args.latent_dim, "latent dimension");
  train_ae->add_option("--epochs", ae_args.epochs);
  train_ae->add_option("--seeds", ae_args.seeds, "ensemble size");
  train_ae->add_option("--master-seed", ae_args.master_seed);
  train_ae->add_option("--batch", ae_args.batch);
  train_ae->add_option("--hidden", ae_args.hidden, "hidden width");
  train_ae->add_option("--depth", ae_args.depth, "hidden layers");
  train_ae->add_option("--out-dir", ae_args.out_dir)->required();

  TrainNodeArgs node_args;
  auto* train_node_cmd = app.add_subcommand("train-node", "train vector-field models");
  train_node_cmd->add_option("--data", node_args.data)->required();
  train_node_cmd->add_option("--test", node_args.test);
  train_node_cmd->add_option("--ae", node_args.ae, "autoencoder for reduced space");
  train_node_cmd->add_option("--space", node_args.space, "reduced | physical | fourier");
  train_node_cmd->add_option("--tau", node_args.tau, "pair spacing");
  train_node_cmd->add_option("--max-step", node_args.max_step, "integrator step bound");
  train_node_cmd->add_option("--epochs", node_args.epochs);
  train_node_cmd->add_option("--seeds", node_args.seeds);
  train_node_cmd->add_option("--master-seed", node_args.master_seed);
  train_node_cmd->add_option("--batch", node_args.batch);
  train_node_cmd->add_option("--threads", node_args.threads);
  train_node_cmd->add_option("--out-dir", node_args.out_dir)->required();

  TrainNodeArgs map_args;
  auto* train_map_cmd = app.add_subcommand("train-map", "train one-interval map models");
  train_map_cmd->add_option("--data", map_args.data)->required();
  train_map_cmd->add_option("--test", map_args.test);
  train_map_cmd->add_option("--ae", map_args.ae);
  train_map_cmd->add_option("--tau", map_args.tau);
  train_map_cmd->add_option("--epochs", map_args.epochs);
  train_map_cmd->add_option("--seeds", map_args.seeds);
  train_map_cmd->add_option("--master-seed", map_args.master_seed);
  train_map_cmd->add_option("--batch", map_args.batch);
  train_map_cmd->add_option("--out-dir", map_args.out_dir)->required();

  EvaluateArgs eval_args;
  auto* evaluate = app.add_subcommand("evaluate", "model statistics");
  evaluate->add_option("--stat", eval_args.stat, "tracking | autocorr | jointpdf | fourier | select")
      ->required();
  evaluate->add_option("--truth", eval_args.truth, "held-out snapshots")->required();
  evaluate->add_option("--train", eval_args.train, "training snapshots (normalization)");
  evaluate->add_option("--ae", eval_args.ae);
  evaluate->add_option("--node", eval_args.node, "model file (or directory for select)");
  evaluate->add_option("--map", eval_args.map);
  evaluate->add_option("--horizon", eval_args.horizon);
  evaluate->add_option("--n-ic", eval_args.n_ic);
  evaluate->add_option("--seed", eval_args.seed);
  evaluate->add_option("--bins", eval_args.bins);
  evaluate->add_option("--rollout-duration", eval_args.rollout_duration);
  evaluate->add_option("--sample-every", eval_args.sample_every);
  evaluate->add_option("--max-lag", eval_args.max_lag);
  evaluate->add_option("--out", eval_args.out);

  std::string study_config, study_out;
  auto* run_study_cmd = app.add_subcommand("run-study", "execute a configured experiment");
  run_study_cmd->add_option("--config", study_config, "experiment config file")->required();
  run_study_cmd->add_option("--out-dir", study_out, "override [run] out_dir");

  std::string export_manifest, export_out;
  auto* export_cmd = app.add_subcommand("export", "convert run artifacts to CSV");
  export_cmd->add_option("--manifest", export_manifest)->required();
  export_cmd->add_option("--out-dir", export_out)->required();

  // Every subcommand can read its flags from a key-value file (run-study's
  // --config already names the experiment description itself).
  for (CLI::App* sub : {generate, pca_cmd, train_ae, train_node_cmd, train_map_cmd, evaluate,
                        export_cmd})
    sub->set_config("--config", "", "read these options from a config file");

  CLI11_PARSE(app, argc, argv);

  try {
    if (generate->parsed()) return run_generate(gen);
    if (pca_cmd->parsed()) return run_pca_fit(pca_data, pca_out);
    if (train_ae->parsed()) return run_train_ae(ae_args);
    if (train_node_cmd->parsed()) return run_train_node(node_args);
    if (train_map_cmd->parsed()) return run_train_map(map_args);
    if (evaluate->parsed()) return run_evaluate(eval_args);
    if (run_study_cmd->parsed()) {
      ExperimentConfig config =
          ExperimentConfig::from_key_value(KeyValueConfig::parse_file(study_config));
      if (!study_out.empty()) config.out_dir = study_out;
      const RunManifest manifest = run_study(config);
      std::cout << "study complete; manifest at " << (config.out_dir / "manifest.json").string()
                << " (" << manifest.stages.size() << " stages)\n";
      return kExitOk;
    }
    if (export_cmd->parsed()) {
      export_results(export_manifest, export_out);
      std::cout << "exported CSV bundle to " << export_out << "\n";
      return kExitOk;
    }
  } catch (const InvalidArgument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitValidation;
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitValidation;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitRuntime;
  }
  return kExitOk;
}
