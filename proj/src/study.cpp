#include "manifold/study.hpp"

#include <atomic>
#include <chrono>
#include <cstdlib>
#include <fstream>
#include <future>
#include <iomanip>
#include <random>
#include <sstream>

#include "manifold/autoencoder.hpp"
#include "manifold/diagnostics.hpp"
#include "manifold/errors.hpp"
#include "manifold/kse.hpp"
#include "manifold/neural_ode.hpp"
#include "manifold/noda.hpp"
#include "manifold/trajectory.hpp"
#include "manifold/version.hpp"

namespace manifold {

namespace fs = std::filesystem;
using Eigen::MatrixXd;
using Eigen::VectorXd;
using nlohmann::json;

namespace {

std::string hex16(uint64_t value) {
  std::ostringstream out;
  out << std::hex << std::setw(16) << std::setfill('0') << value;
  return out.str();
}

std::string format_number(double value) {
  std::ostringstream out;
  out << value;
  return out.str();
}

double now_seconds() {
  return std::chrono::duration<double>(std::chrono::steady_clock::now().time_since_epoch())
      .count();
}

void parallel_for(long count, int workers, const std::function<void(long)>& body) {
  if (count <= 0) return;
  if (workers <= 1 || count == 1) {
    for (long i = 0; i < count; ++i) body(i);
    return;
  }
  std::atomic<long> next{0};
  std::exception_ptr error;
  std::mutex error_mutex;
  std::vector<std::future<void>> futures;
  for (int w = 0; w < std::min<long>(workers, count); ++w)
    futures.push_back(std::async(std::launch::async, [&]() {
      for (long i = next.fetch_add(1); i < count; i = next.fetch_add(1)) {
        try {
          body(i);
        } catch (...) {
          std::lock_guard<std::mutex> lock(error_mutex);
          if (!error) error = std::current_exception();
        }
      }
    }));
  for (auto& f : futures) f.get();
  if (error) std::rethrow_exception(error);
}

// Curve artifacts: x/y arrays plus labeling metadata, converted to CSV on
// export.
void save_curve(const fs::path& path, const std::string& stat,
                const std::vector<std::string>& columns, const VectorXd& x, const MatrixXd& y,
                const json& labels) {
  NodaFile file;
  json meta = labels;
  meta["kind"] = "curve";
  meta["stat"] = stat;
  meta["columns"] = columns;
  file.metadata_json = meta.dump();
  file.add("x", NodaArray::from_vector(x));
  file.add("y", NodaArray::from_matrix(y));
  noda_write(path, file);
}

void save_curve(const fs::path& path, const std::string& stat,
                const std::vector<std::string>& columns, const VectorXd& x, const VectorXd& y,
                const json& labels) {
  save_curve(path, stat, columns, x, MatrixXd(y), labels);
}

struct StageScope {
  StageScope(RunManifest& manifest, std::string name) : manifest_(manifest) {
    record_.name = std::move(name);
    start_ = now_seconds();
  }
  void artifact(const fs::path& p) { record_.artifacts.push_back(p.string()); }
  void seed(uint64_t s) { record_.seeds.push_back(s); }
  void cached(bool c) { record_.from_cache = c; }
  void commit() {
    record_.seconds = now_seconds() - start_;
    manifest_.stages.push_back(record_);
  }

  RunManifest& manifest_;
  StageRecord record_;
  double start_;
};

Trajectory fourier_trajectory(const Trajectory& traj) {
  Trajectory packed = traj;
  packed.states.resize(traj.rows(), traj.dim());
  for (Eigen::Index i = 0; i < traj.rows(); ++i)
    packed.states.row(i) = pack_fourier(traj.states.row(i));
  packed.system = SystemTag::Generic;
  packed.domain_length = 0.0;
  return packed;
}

// Runs the rollout, salvaging the surviving prefix when the model diverges
// mid-flight. Returns an empty trajectory if nothing could be produced.
Trajectory rollout_salvaged(const RolloutFn& rollout, const Eigen::VectorXd& u0, double duration,
                            double sample_every) {
  try {
    return rollout(u0, duration);
  } catch (const DivergenceError& e) {
    const double safe =
        std::floor((e.time_of_failure - sample_every) / sample_every) * sample_every;
    if (safe >= sample_every) {
      try {
        return rollout(u0, safe);
      } catch (const DivergenceError&) {
      }
    }
    return Trajectory{};
  }
}

}  // namespace

std::string study_kind_name(StudyKind kind) {
  switch (kind) {
    case StudyKind::DimensionSweep: return "dimension-sweep";
    case StudyKind::SpaceComparison: return "space-comparison";
    case StudyKind::SpacingSweep: return "spacing-sweep";
  }
  return "spacing-sweep";
}

StudyKind study_kind_from_name(const std::string& name) {
  if (name == "dimension-sweep") return StudyKind::DimensionSweep;
  if (name == "space-comparison") return StudyKind::SpaceComparison;
  if (name == "spacing-sweep") return StudyKind::SpacingSweep;
  throw ConfigError("unknown study '" + name + "'");
}

ExperimentConfig ExperimentConfig::from_key_value(const KeyValueConfig& kv) {
  ExperimentConfig cfg;
  cfg.study = study_kind_from_name(kv.get("study", "type"));

  cfg.domain_length = kv.get_double_or("system", "L", cfg.domain_length);
  cfg.grid_points = static_cast<int>(kv.get_int_or("system", "d", cfg.grid_points));
  cfg.dt_internal = kv.get_double_or("system", "dt_internal", cfg.dt_internal);
  cfg.transient = kv.get_double_or("system", "transient", cfg.transient);
  cfg.data_scale = kv.get_double_or("system", "data_scale", cfg.data_scale);
  cfg.base_spacing = kv.get_double_or("system", "base_spacing", cfg.base_spacing);
  cfg.split_fraction = kv.get_double_or("system", "split_fraction", cfg.split_fraction);

  if (kv.has("model", "dh_list")) cfg.latent_dims = kv.get_int_list("model", "dh_list");
  if (kv.has("model", "tau_list")) cfg.taus = kv.get_double_list("model", "tau_list");
  cfg.ae_variant = kv.get_or("model", "ae_variant",
                             cfg.study == StudyKind::DimensionSweep ? "nonlinear" : "linear");
  cfg.n_ae = static_cast<int>(kv.get_int_or("model", "n_ae", cfg.n_ae));
  cfg.n_node = static_cast<int>(kv.get_int_or("model", "n_node", cfg.n_node));
  cfg.epochs_ae = static_cast<int>(kv.get_int_or("model", "epochs_ae", cfg.epochs_ae));
  cfg.epochs_node = static_cast<int>(kv.get_int_or("model", "epochs_node", cfg.epochs_node));
  cfg.batch_ae = static_cast<int>(kv.get_int_or("model", "batch_ae", cfg.batch_ae));
  cfg.batch_node = static_cast<int>(kv.get_int_or("model", "batch_node", cfg.batch_node));
  cfg.ae_hidden_layers =
      static_cast<int>(kv.get_int_or("model", "ae_hidden_layers", cfg.ae_hidden_layers));
  cfg.train_maps = kv.get_int_or("model", "train_maps",
                                 cfg.study == StudyKind::SpacingSweep ? 1 : 0) != 0;

  cfg.n_ic = static_cast<int>(kv.get_int_or("eval", "n_ic", cfg.n_ic));
  cfg.pdf_bins = static_cast<int>(kv.get_int_or("eval", "pdf_bins", cfg.pdf_bins));
  cfg.pdf_rollout_duration =
      kv.get_double_or("eval", "pdf_rollout_duration", cfg.pdf_rollout_duration);
  cfg.autocorr_max_lag_lyapunov =
      kv.get_double_or("eval", "autocorr_max_lag_lyapunov", cfg.autocorr_max_lag_lyapunov);
  cfg.autocorr_members =
      static_cast<int>(kv.get_int_or("eval", "autocorr_members", cfg.autocorr_members));

  cfg.master_seed = kv.get_uint64_or("run", "master_seed", cfg.master_seed);
  cfg.out_dir = kv.get_or("run", "out_dir", cfg.out_dir.string());
  cfg.cache_dir = kv.get_or("run", "cache_dir", "");
  cfg.n_workers = static_cast<int>(kv.get_int_or("run", "n_workers", cfg.n_workers));
  cfg.validate();
  return cfg;
}

KeyValueConfig ExperimentConfig::to_key_value() const {
  KeyValueConfig kv;
  kv.set("study", "type", study_kind_name(study));
  kv.set("system", "L", format_number(domain_length));
  kv.set("system", "d", std::to_string(grid_points));
  kv.set("system", "dt_internal", format_number(dt_internal));
  kv.set("system", "transient", format_number(transient));
  kv.set("system", "data_scale", format_number(data_scale));
  kv.set("system", "base_spacing", format_number(base_spacing));
  kv.set("system", "split_fraction", format_number(split_fraction));
  std::string dims;
  for (long dh : latent_dims) dims += (dims.empty() ? "" : ", ") + std::to_string(dh);
  kv.set("model", "dh_list", dims);
  std::string tau_text;
  for (double tau : taus) tau_text += (tau_text.empty() ? "" : ", ") + format_number(tau);
  kv.set("model", "tau_list", tau_text);
  kv.set("model", "ae_variant", ae_variant);
  kv.set("model", "n_ae", std::to_string(n_ae));
  kv.set("model", "n_node", std::to_string(n_node));
  kv.set("model", "epochs_ae", std::to_string(epochs_ae));
  kv.set("model", "epochs_node", std::to_string(epochs_node));
  kv.set("model", "batch_ae", std::to_string(batch_ae));
  kv.set("model", "batch_node", std::to_string(batch_node));
  kv.set("model", "ae_hidden_layers", std::to_string(ae_hidden_layers));
  kv.set("model", "train_maps", train_maps ? "1" : "0");
  kv.set("eval", "n_ic", std::to_string(n_ic));
  kv.set("eval", "pdf_bins", std::to_string(pdf_bins));
  kv.set("eval", "pdf_rollout_duration", format_number(pdf_rollout_duration));
  kv.set("eval", "autocorr_max_lag_lyapunov", format_number(autocorr_max_lag_lyapunov));
  kv.set("eval", "autocorr_members", std::to_string(autocorr_members));
  kv.set("run", "master_seed", std::to_string(master_seed));
  return kv;
}

void ExperimentConfig::validate() const {
  if (latent_dims.empty()) throw ConfigError("study config: dh_list must not be empty");
  if (taus.empty()) throw ConfigError("study config: tau_list must not be empty");
  if (!(data_scale > 0.0 && data_scale <= 1.0))
    throw ConfigError("study config: data_scale must lie in (0, 1]");
  if (!(split_fraction > 0.0 && split_fraction < 1.0))
    throw ConfigError("study config: split_fraction must lie in (0, 1)");
  if (n_ae < 1 || n_node < 1) throw ConfigError("study config: ensemble sizes must be positive");
  for (double tau : taus) {
    const double stride = tau / base_spacing;
    if (std::abs(stride - std::llround(stride)) > 1e-9)
      throw ConfigError("study config: every tau must be a multiple of base_spacing");
  }
  for (long dh : latent_dims)
    if (dh < 1 || dh > grid_points) throw ConfigError("study config: dh out of range");
  ae_variant_from_name(ae_variant);
}

std::filesystem::path ExperimentConfig::effective_cache_dir() const {
  if (!cache_dir.empty()) return cache_dir;
  if (const char* env = std::getenv("MANIFOLD_NODE_CACHE"); env && *env) return fs::path(env);
  return out_dir / "cache";
}

json RunManifest::to_json() const {
  json j;
  j["config_hash"] = config_hash;
  j["library_version"] = library_version;
  j["results"] = results;
  j["stages"] = json::array();
  for (const StageRecord& stage : stages) {
    json s;
    s["name"] = stage.name;
    s["seconds"] = stage.seconds;
    s["from_cache"] = stage.from_cache;
    s["artifacts"] = stage.artifacts;
    s["seeds"] = stage.seeds;
    j["stages"].push_back(std::move(s));
  }
  return j;
}

RunManifest RunManifest::from_json(const json& j) {
  RunManifest manifest;
  manifest.config_hash = j.at("config_hash").get<std::string>();
  manifest.library_version = j.at("library_version").get<std::string>();
  manifest.results = j.value("results", json::object());
  for (const json& s : j.at("stages")) {
    StageRecord stage;
    stage.name = s.at("name").get<std::string>();
    stage.seconds = s.at("seconds").get<double>();
    stage.from_cache = s.value("from_cache", false);
    stage.artifacts = s.value("artifacts", std::vector<std::string>{});
    stage.seeds = s.value("seeds", std::vector<uint64_t>{});
    manifest.stages.push_back(std::move(stage));
  }
  return manifest;
}

void save_manifest(const fs::path& path, const RunManifest& manifest) {
  for (const StageRecord& stage : manifest.stages)
    for (const std::string& artifact : stage.artifacts)
      if (!fs::exists(artifact))
        throw IoError(IoError::Kind::Io, "manifest: artifact does not exist: " + artifact);
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError(IoError::Kind::Io, "manifest: cannot write " + path.string());
  out << manifest.to_json().dump(2) << "\n";
}

RunManifest load_manifest(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError(IoError::Kind::Io, "manifest: cannot open " + path.string());
  json j = json::parse(in, nullptr, false);
  if (j.is_discarded())
    throw IoError(IoError::Kind::Corruption, "manifest: invalid JSON in " + path.string());
  return RunManifest::from_json(j);
}

namespace {

// Shared study machinery: data generation, ensemble training with caching,
// and the evaluation statistics.
class StudyRunner {
 public:
  explicit StudyRunner(const ExperimentConfig& cfg)
      : cfg_(cfg), cache_(cfg.effective_cache_dir()), hash_(hex16(cfg.hash())) {
    fs::create_directories(cfg_.out_dir);
    fs::create_directories(cache_);
    manifest_.config_hash = hash_;
    manifest_.library_version = kLibraryVersion;
  }

  RunManifest run() {
    try {
      prepare_data();
      switch (cfg_.study) {
        case StudyKind::SpacingSweep: run_spacing_sweep(); break;
        case StudyKind::DimensionSweep: run_dimension_sweep(); break;
        case StudyKind::SpaceComparison: run_space_comparison(); break;
      }
    } catch (...) {
      manifest_.results["failed"] = true;
      save_manifest(cfg_.out_dir / "manifest.json", manifest_);
      throw;
    }
    save_manifest(cfg_.out_dir / "manifest.json", manifest_);
    return manifest_;
  }

 private:
  fs::path cache_file(const std::string& stage, const std::string& detail) const {
    return cache_ / (stage + "_" + hash_ + (detail.empty() ? "" : "_" + detail) + ".noda");
  }

  json labels(double tau, long dh) const {
    json j;
    j["study"] = study_kind_name(cfg_.study);
    j["L"] = cfg_.domain_length;
    j["dh"] = dh;
    j["tau"] = tau;
    return j;
  }

  void prepare_data() {
    StageScope scope(manifest_, "generate");
    const uint64_t seed = derive_seed(cfg_.master_seed, "generate", 0);
    scope.seed(seed);
    const fs::path train_path = cache_file("gen-train", "");
    const fs::path test_path = cache_file("gen-test", "");
    if (fs::exists(train_path) && fs::exists(test_path)) {
      train_ = load_trajectory(train_path);
      test_ = load_trajectory(test_path);
      scope.cached(true);
    } else {
      KseConfig kse;
      kse.domain_length = cfg_.domain_length;
      kse.grid_points = cfg_.grid_points;
      kse.dt_internal = cfg_.dt_internal;
      kse.transient_discard = cfg_.transient;
      kse.seed = seed;
      const double total = 1e5 * cfg_.data_scale / cfg_.split_fraction;
      const Trajectory all = simulate_kse(kse, std::nullopt, total, cfg_.base_spacing);
      std::tie(train_, test_) = train_test_split(all, cfg_.split_fraction);
      save_trajectory(train_path, train_);
      save_trajectory(test_path, test_);
    }
    scope.artifact(train_path);
    scope.artifact(test_path);
    normalization_ = rms_pair_distance(train_, 10000, derive_seed(cfg_.master_seed, "pairs", 0));
    manifest_.results["normalization"] = normalization_;
    scope.commit();
  }

  std::vector<AutoencoderModel> train_ae_ensemble(const Trajectory& sub_train,
                                                  const Trajectory& sub_test, long dh,
                                                  const std::string& tag, AeVariant variant) {
    StageScope scope(manifest_, "train-ae-" + tag);
    std::vector<AutoencoderModel> models(cfg_.n_ae);
    std::vector<bool> cached(cfg_.n_ae, false);
    std::vector<fs::path> paths(cfg_.n_ae);
    std::vector<uint64_t> seeds(cfg_.n_ae);
    for (int a = 0; a < cfg_.n_ae; ++a) {
      seeds[a] = derive_seed(cfg_.master_seed, "train-ae-" + tag, a);
      paths[a] = cache_file("ae", tag + "_m" + std::to_string(a));
    }
    parallel_for(cfg_.n_ae, cfg_.n_workers, [&](long a) {
      if (fs::exists(paths[a])) {
        models[a] = load_autoencoder(paths[a]);
        cached[a] = true;
        return;
      }
      AeTrainOptions options;
      options.epochs = cfg_.epochs_ae;
      options.batch_size = cfg_.batch_ae;
      options.seed = seeds[a];
      options.hidden_layers = cfg_.ae_hidden_layers;
      options.test = &sub_test;
      options.history_eval_rows = 0;
      models[a] = train_autoencoder(variant, sub_train, dh, options).model;
      save_autoencoder(paths[a], models[a]);
    });
    for (int a = 0; a < cfg_.n_ae; ++a) {
      scope.seed(seeds[a]);
      scope.artifact(paths[a]);
    }
    scope.cached(std::all_of(cached.begin(), cached.end(), [](bool c) { return c; }));
    scope.commit();
    return models;
  }

  std::vector<NodeModel> train_node_ensemble(const std::vector<Trajectory>& latents,
                                             const std::vector<Trajectory>& latent_tests,
                                             SpaceTag space, const std::string& tag) {
    StageScope scope(manifest_, "train-node-" + tag);
    const long total = static_cast<long>(latents.size()) * cfg_.n_node;
    std::vector<NodeModel> models(total);
    std::vector<bool> cached(total, false);
    std::vector<fs::path> paths(total);
    std::vector<uint64_t> seeds(total);
    for (long i = 0; i < total; ++i) {
      seeds[i] = derive_seed(cfg_.master_seed, "train-node-" + tag, i);
      paths[i] = cache_file("node", tag + "_m" + std::to_string(i));
    }
    parallel_for(total, cfg_.n_workers, [&](long i) {
      if (fs::exists(paths[i])) {
        models[i] = load_node(paths[i]);
        cached[i] = true;
        return;
      }
      const long ae_index = i / cfg_.n_node;
      NodeTrainOptions options;
      options.epochs = cfg_.epochs_node;
      options.batch_size = cfg_.batch_node;
      options.seed = seeds[i];
      options.test = &latent_tests[ae_index];
      options.history_eval_pairs = 0;
      options.n_threads = 1;
      models[i] = train_node(latents[ae_index], space, options).model;
      save_node(paths[i], models[i]);
    });
    for (long i = 0; i < total; ++i) {
      scope.seed(seeds[i]);
      scope.artifact(paths[i]);
    }
    scope.cached(std::all_of(cached.begin(), cached.end(), [](bool c) { return c; }));
    scope.commit();
    return models;
  }

  std::vector<DiscreteMapModel> train_map_ensemble(const std::vector<Trajectory>& latents,
                                                   const std::vector<Trajectory>& latent_tests,
                                                   const std::string& tag) {
    StageScope scope(manifest_, "train-map-" + tag);
    const long total = static_cast<long>(latents.size()) * cfg_.n_node;
    std::vector<DiscreteMapModel> models(total);
    std::vector<fs::path> paths(total);
    std::vector<uint64_t> seeds(total);
    bool all_cached = true;
    for (long i = 0; i < total; ++i) {
      seeds[i] = derive_seed(cfg_.master_seed, "train-map-" + tag, i);
      paths[i] = cache_file("map", tag + "_m" + std::to_string(i));
      if (!fs::exists(paths[i])) all_cached = false;
    }
    parallel_for(total, cfg_.n_workers, [&](long i) {
      if (fs::exists(paths[i])) {
        models[i] = load_discrete_map(paths[i]);
        return;
      }
      const long ae_index = i / cfg_.n_node;
      MapTrainOptions options;
      options.epochs = cfg_.epochs_node;
      options.batch_size = cfg_.batch_node;
      options.seed = seeds[i];
      options.test = &latent_tests[ae_index];
      options.history_eval_pairs = 0;
      models[i] = train_discrete_map(latents[ae_index], options).model;
      save_discrete_map(paths[i], models[i]);
    });
    for (long i = 0; i < total; ++i) {
      scope.seed(seeds[i]);
      scope.artifact(paths[i]);
    }
    scope.cached(all_cached);
    scope.commit();
    return models;
  }

  // Long rollouts from a couple of held-out starts, concatenated. Diverged
  // models contribute their surviving prefixes; an empty histogram request
  // throws, which callers map to a null statistic.
  JointPdf model_joint_pdf(const RolloutFn& rollout, double sample_every, int bins,
                           const PdfRanges& ranges) {
    const int n_starts = 2;
    std::vector<Trajectory> pieces;
    const double leg = cfg_.pdf_rollout_duration / n_starts;
    Eigen::Index rows = 0;
    for (int s = 0; s < n_starts; ++s) {
      const Eigen::Index row = (test_.rows() - 1) * s / n_starts;
      Trajectory piece = rollout_salvaged(rollout, test_.states.row(row), leg, sample_every);
      rows += piece.rows();
      pieces.push_back(std::move(piece));
    }
    if (rows < 2) throw DivergenceError("model_joint_pdf: no usable rollout samples", 0.0);
    Trajectory merged;
    merged.states.resize(rows, cfg_.grid_points);
    Eigen::Index at = 0;
    for (const auto& piece : pieces) {
      if (piece.rows() == 0) continue;
      merged.states.middleRows(at, piece.rows()) = piece.states;
      at += piece.rows();
    }
    merged.dt_sample = sample_every;
    merged.domain_length = cfg_.domain_length;
    merged.system = SystemTag::Kse;
    return joint_pdf(merged, bins, ranges);
  }

  AutocorrCurve model_autocorr(const RolloutFn& rollout, double sample_every, double max_lag) {
    std::vector<Trajectory> members;
    std::mt19937_64 rng(derive_seed(cfg_.master_seed, "autocorr-ic", 0));
    std::uniform_int_distribution<Eigen::Index> pick(0, test_.rows() - 1);
    const double duration = 3.0 * max_lag;
    const auto min_rows = static_cast<Eigen::Index>(max_lag / sample_every) + 1;
    for (int m = 0; m < cfg_.autocorr_members; ++m) {
      Trajectory member =
          rollout_salvaged(rollout, test_.states.row(pick(rng)), duration, sample_every);
      if (member.rows() < std::max<Eigen::Index>(min_rows, 2)) continue;
      member.dt_sample = sample_every;
      members.push_back(std::move(member));
    }
    if (members.empty())
      throw DivergenceError("model_autocorr: every rollout diverged too early", 0.0);
    return temporal_autocorrelation(members, max_lag);
  }

  void run_spacing_sweep() {
    const double tau_lyap = lyapunov_time_for_domain(cfg_.domain_length);
    const long dh = cfg_.latent_dims.front();
    const PdfRanges ranges = joint_pdf_ranges(test_);
    const JointPdf truth_pdf = joint_pdf(test_, cfg_.pdf_bins, ranges);
    json sweep = json::array();

    for (size_t t = 0; t < cfg_.taus.size(); ++t) {
      const double tau = cfg_.taus[t];
      const std::string tag = "tau" + std::to_string(t);
      const long stride = std::llround(tau / cfg_.base_spacing);
      const Trajectory sub_train = subsample(train_, stride);
      const Trajectory sub_test = subsample(test_, stride);

      const auto aes = train_ae_ensemble(sub_train, sub_test, dh, tag,
                                         ae_variant_from_name(cfg_.ae_variant));
      std::vector<Trajectory> latents, latent_tests;
      for (const auto& ae : aes) {
        latents.push_back(encode_trajectory(ae, sub_train));
        latent_tests.push_back(encode_trajectory(ae, sub_test));
      }
      const auto nodes = train_node_ensemble(latents, latent_tests, SpaceTag::Reduced, tag);

      std::vector<ModelCandidate> candidates;
      for (long i = 0; i < static_cast<long>(nodes.size()); ++i) {
        const auto& ae = aes[i / cfg_.n_node];
        const auto& node = nodes[i];
        candidates.push_back({"ae" + std::to_string(i / cfg_.n_node) + "-node" +
                                  std::to_string(i % cfg_.n_node),
                              [&ae, &node](const VectorXd& u0, double duration) {
                                return node_rollout(&ae, node, u0, duration);
                              }});
      }

      StageScope eval_scope(manifest_, "evaluate-" + tag);
      const uint64_t eval_seed = derive_seed(cfg_.master_seed, "evaluate", t);
      eval_scope.seed(eval_seed);
      const SelectionResult selection = select_best_model(
          candidates, sub_test, 2.0 * tau_lyap, cfg_.n_ic, normalization_, eval_seed);
      const auto& best_ae = aes[selection.best_index / cfg_.n_node];
      const auto& best_node = nodes[selection.best_index];
      const RolloutFn best_rollout = [&](const VectorXd& u0, double duration) {
        return node_rollout(&best_ae, best_node, u0, duration);
      };

      const TrackingCurve tracking = tracking_error(sub_test, best_rollout, 5.0 * tau_lyap,
                                                    cfg_.n_ic, normalization_, eval_seed + 1);
      const fs::path tracking_path = cfg_.out_dir / ("tracking_" + tag + ".noda");
      save_curve(tracking_path, "tracking", {"time", "normalized_error"}, tracking.times,
                 tracking.normalized_error, labels(tau, dh));
      eval_scope.artifact(tracking_path);

      json row;
      row["tau"] = tau;
      row["selected"] = candidates[selection.best_index].label;
      row["selection_scores"] = selection.scores;

      const double pdf_sample = std::min(tau, 1.0);
      const RolloutFn pdf_rollout = [&](const VectorXd& u0, double duration) {
        return node_rollout(&best_ae, best_node, u0, duration, pdf_sample);
      };
      try {
        const JointPdf model_pdf =
            model_joint_pdf(pdf_rollout, pdf_sample, cfg_.pdf_bins, ranges);
        row["pdf_relative_error"] = pdf_relative_error(truth_pdf, model_pdf);
      } catch (const DivergenceError&) {
        row["pdf_relative_error"] = nullptr;
      }

      const double max_lag = cfg_.autocorr_max_lag_lyapunov * tau_lyap;
      try {
        const AutocorrCurve truth_ac = temporal_autocorrelation({sub_test}, max_lag);
        const AutocorrCurve model_ac = model_autocorr(best_rollout, tau, max_lag);
        const fs::path ac_path = cfg_.out_dir / ("autocorr_" + tag + ".noda");
        MatrixXd ac(truth_ac.lags.size(), 2);
        ac.col(0) = truth_ac.correlation;
        ac.col(1) = model_ac.correlation;
        save_curve(ac_path, "autocorr", {"time", "truth", "model"}, truth_ac.lags, ac,
                   labels(tau, dh));
        eval_scope.artifact(ac_path);
      } catch (const DivergenceError&) {
        row["autocorr"] = nullptr;
      }

      if (cfg_.train_maps) {
        const auto maps = train_map_ensemble(latents, latent_tests, tag);
        std::vector<ModelCandidate> map_candidates;
        for (long i = 0; i < static_cast<long>(maps.size()); ++i) {
          const auto& ae = aes[i / cfg_.n_node];
          const auto& map = maps[i];
          map_candidates.push_back({"map" + std::to_string(i),
                                    [&ae, &map](const VectorXd& u0, double duration) {
                                      return map_rollout(&ae, map, u0, duration);
                                    }});
        }
        const SelectionResult map_selection = select_best_model(
            map_candidates, sub_test, 2.0 * tau_lyap, cfg_.n_ic, normalization_, eval_seed);
        const auto& best_map_ae = aes[map_selection.best_index / cfg_.n_node];
        const auto& best_map = maps[map_selection.best_index];
        try {
          const JointPdf map_pdf = model_joint_pdf(
              [&](const VectorXd& u0, double duration) {
                return map_rollout(&best_map_ae, best_map, u0, duration);
              },
              tau, cfg_.pdf_bins, ranges);
          row["map_pdf_relative_error"] = pdf_relative_error(truth_pdf, map_pdf);
        } catch (const DivergenceError&) {
          row["map_pdf_relative_error"] = nullptr;
        }
        row["map_selection_scores"] = map_selection.scores;
      }
      sweep.push_back(std::move(row));
      eval_scope.commit();
    }
    manifest_.results["spacing_sweep"] = std::move(sweep);
  }

  void run_dimension_sweep() {
    const double tau_lyap = lyapunov_time_for_domain(cfg_.domain_length);
    const double tau = cfg_.taus.front();
    const long stride = std::llround(tau / cfg_.base_spacing);
    const Trajectory sub_train = stride > 1 ? subsample(train_, stride) : train_;
    const Trajectory sub_test = stride > 1 ? subsample(test_, stride) : test_;
    const PdfRanges ranges = joint_pdf_ranges(test_);
    const JointPdf truth_pdf = joint_pdf(test_, cfg_.pdf_bins, ranges);
    json sweep = json::array();

    for (size_t k = 0; k < cfg_.latent_dims.size(); ++k) {
      const long dh = cfg_.latent_dims[k];
      const std::string tag = "dh" + std::to_string(dh);
      const auto aes = train_ae_ensemble(sub_train, sub_test, dh, tag,
                                         ae_variant_from_name(cfg_.ae_variant));

      double best_mse = std::numeric_limits<double>::infinity();
      for (const auto& ae : aes) best_mse = std::min(best_mse, ae_mse_on(ae, sub_test));
      const double pca_mse =
          pca_reconstruction_mse(aes.front().basis, sub_test.states, static_cast<int>(dh));

      std::vector<Trajectory> latents, latent_tests;
      for (const auto& ae : aes) {
        latents.push_back(encode_trajectory(ae, sub_train));
        latent_tests.push_back(encode_trajectory(ae, sub_test));
      }
      const auto nodes = train_node_ensemble(latents, latent_tests, SpaceTag::Reduced, tag);

      std::vector<ModelCandidate> candidates;
      for (long i = 0; i < static_cast<long>(nodes.size()); ++i) {
        const auto& ae = aes[i / cfg_.n_node];
        const auto& node = nodes[i];
        candidates.push_back({"pair" + std::to_string(i),
                              [&ae, &node](const VectorXd& u0, double duration) {
                                return node_rollout(&ae, node, u0, duration);
                              }});
      }

      StageScope eval_scope(manifest_, "evaluate-" + tag);
      const uint64_t eval_seed = derive_seed(cfg_.master_seed, "evaluate-dim", k);
      eval_scope.seed(eval_seed);
      const SelectionResult selection = select_best_model(
          candidates, sub_test, 2.0 * tau_lyap, cfg_.n_ic, normalization_, eval_seed);

      // Long-time statistics for every pair, as in the per-dimension scatter.
      std::vector<double> pair_pdf_errors(candidates.size());
      const double pdf_sample = std::min(tau, 1.0);
      for (size_t i = 0; i < candidates.size(); ++i) {
        const auto& ae = aes[i / cfg_.n_node];
        const auto& node = nodes[i];
        try {
          const JointPdf pdf = model_joint_pdf(
              [&](const VectorXd& u0, double duration) {
                return node_rollout(&ae, node, u0, duration, pdf_sample);
              },
              pdf_sample, cfg_.pdf_bins, ranges);
          pair_pdf_errors[i] = pdf_relative_error(truth_pdf, pdf);
        } catch (const DivergenceError&) {
          pair_pdf_errors[i] = std::numeric_limits<double>::infinity();
        }
      }

      const auto& best_ae = aes[selection.best_index / cfg_.n_node];
      const auto& best_node = nodes[selection.best_index];
      const TrackingCurve tracking = tracking_error(
          sub_test,
          [&](const VectorXd& u0, double duration) {
            return node_rollout(&best_ae, best_node, u0, duration);
          },
          5.0 * tau_lyap, cfg_.n_ic, normalization_, eval_seed + 1);
      const fs::path tracking_path = cfg_.out_dir / ("tracking_" + tag + ".noda");
      save_curve(tracking_path, "tracking", {"time", "normalized_error"}, tracking.times,
                 tracking.normalized_error, labels(tau, dh));
      eval_scope.artifact(tracking_path);

      json row;
      row["dh"] = dh;
      row["ae_test_mse"] = best_mse;
      row["pca_test_mse"] = pca_mse;
      row["selected"] = candidates[selection.best_index].label;
      row["selection_scores"] = selection.scores;
      row["pair_pdf_errors"] = pair_pdf_errors;
      double best_pdf = std::numeric_limits<double>::infinity();
      for (double e : pair_pdf_errors) best_pdf = std::min(best_pdf, e);
      row["best_pdf_relative_error"] = best_pdf;
      row["selected_pdf_relative_error"] = pair_pdf_errors[selection.best_index];
      sweep.push_back(std::move(row));
      eval_scope.commit();
    }
    manifest_.results["dimension_sweep"] = std::move(sweep);
  }

  void run_space_comparison() {
    const double tau_lyap = lyapunov_time_for_domain(cfg_.domain_length);
    const double tau = cfg_.taus.front();
    const long dh = cfg_.latent_dims.front();
    const long stride = std::llround(tau / cfg_.base_spacing);
    const Trajectory sub_train = stride > 1 ? subsample(train_, stride) : train_;
    const Trajectory sub_test = stride > 1 ? subsample(test_, stride) : test_;

    // Reduced-space pipeline.
    const auto aes = train_ae_ensemble(sub_train, sub_test, dh, "reduced",
                                       ae_variant_from_name(cfg_.ae_variant));
    std::vector<Trajectory> latents, latent_tests;
    for (const auto& ae : aes) {
      latents.push_back(encode_trajectory(ae, sub_train));
      latent_tests.push_back(encode_trajectory(ae, sub_test));
    }
    const auto reduced_nodes =
        train_node_ensemble(latents, latent_tests, SpaceTag::Reduced, "reduced");

    // Ambient-space pipelines share the raw/packed trajectories across seeds.
    const std::vector<Trajectory> phys_train = {sub_train};
    const std::vector<Trajectory> phys_test = {sub_test};
    const auto physical_nodes =
        train_node_ensemble(phys_train, phys_test, SpaceTag::FullPhysical, "physical");
    const std::vector<Trajectory> fourier_train = {fourier_trajectory(sub_train)};
    const std::vector<Trajectory> fourier_test = {fourier_trajectory(sub_test)};
    const auto fourier_nodes =
        train_node_ensemble(fourier_train, fourier_test, SpaceTag::FullFourier, "fourier");

    StageScope eval_scope(manifest_, "evaluate-spaces");
    const uint64_t eval_seed = derive_seed(cfg_.master_seed, "evaluate-spaces", 0);
    eval_scope.seed(eval_seed);

    json spaces = json::object();
    const double rollout_duration = 500.0;
    const int top_quartile = cfg_.grid_points / 8;  // top quarter of d/2 wavenumbers

    auto evaluate_space = [&](const std::string& name,
                              const std::vector<ModelCandidate>& candidates) {
      const SelectionResult selection = select_best_model(
          candidates, sub_test, 2.0 * tau_lyap, cfg_.n_ic, normalization_, eval_seed);
      const auto& rollout = candidates[selection.best_index].rollout;

      json row;
      row["selected"] = candidates[selection.best_index].label;
      row["selection_scores"] = selection.scores;

      // Wavenumber magnitudes over a long rollout; divergence keeps the
      // partial history.
      Trajectory long_roll = rollout_salvaged(rollout, test_.states.row(0), rollout_duration, tau);
      if (long_roll.rows() < 2)
        throw DivergenceError("space comparison: rollout produced no samples", 0.0);
      if (long_roll.duration() < rollout_duration - tau)
        row["rollout_diverged_at"] = long_roll.duration();
      long_roll.domain_length = cfg_.domain_length;
      const MatrixXd history = fourier_magnitude_history(long_roll);
      const auto cols = history.cols();
      const VectorXd high_mean =
          history.rightCols(top_quartile).rowwise().mean();
      const VectorXd times = long_roll.dt_sample *
                             VectorXd::LinSpaced(history.rows(), 1.0,
                                                 static_cast<double>(history.rows()));
      const fs::path mag_path = cfg_.out_dir / ("fourier_" + name + ".noda");
      MatrixXd curve(history.rows(), cols + 1);
      curve.leftCols(cols) = history;
      curve.col(cols) = high_mean;
      std::vector<std::string> columns = {"time"};
      for (int kk = 0; kk < cols; ++kk) columns.push_back("k" + std::to_string(kk));
      columns.push_back("high_mean");
      save_curve(mag_path, "fourier_" + name, columns, times, curve, labels(tau, dh));
      eval_scope.artifact(mag_path);

      // Least-squares slope of the high-wavenumber mean.
      const double tx = times.mean(), ty = high_mean.mean();
      const double slope = ((times.array() - tx) * (high_mean.array() - ty)).sum() /
                           (times.array() - tx).square().sum();
      row["high_wavenumber_slope"] = slope;
      row["high_wavenumber_initial"] = high_mean.head(std::min<long>(100, high_mean.size())).mean();
      row["high_wavenumber_max"] = high_mean.maxCoeff();

      const TrackingCurve tracking = tracking_error(sub_test, rollout, 5.0 * tau_lyap,
                                                    cfg_.n_ic, normalization_, eval_seed + 1);
      const fs::path tracking_path = cfg_.out_dir / ("tracking_" + name + ".noda");
      save_curve(tracking_path, "tracking_" + name, {"time", "normalized_error"}, tracking.times,
                 tracking.normalized_error, labels(tau, dh));
      eval_scope.artifact(tracking_path);
      spaces[name] = std::move(row);
    };

    std::vector<ModelCandidate> reduced_candidates;
    for (long i = 0; i < static_cast<long>(reduced_nodes.size()); ++i) {
      const auto& ae = aes[i / cfg_.n_node];
      const auto& node = reduced_nodes[i];
      reduced_candidates.push_back({"reduced" + std::to_string(i),
                                    [&ae, &node](const VectorXd& u0, double duration) {
                                      return node_rollout(&ae, node, u0, duration);
                                    }});
    }
    evaluate_space("reduced", reduced_candidates);

    std::vector<ModelCandidate> physical_candidates;
    for (size_t i = 0; i < physical_nodes.size(); ++i) {
      const auto& node = physical_nodes[i];
      physical_candidates.push_back({"physical" + std::to_string(i),
                                     [&node](const VectorXd& u0, double duration) {
                                       return node_rollout(nullptr, node, u0, duration);
                                     }});
    }
    evaluate_space("physical", physical_candidates);

    std::vector<ModelCandidate> fourier_candidates;
    for (size_t i = 0; i < fourier_nodes.size(); ++i) {
      const auto& node = fourier_nodes[i];
      fourier_candidates.push_back({"fourier" + std::to_string(i),
                                    [&node](const VectorXd& u0, double duration) {
                                      return node_rollout(nullptr, node, u0, duration);
                                    }});
    }
    evaluate_space("fourier", fourier_candidates);

    eval_scope.commit();
    manifest_.results["space_comparison"] = std::move(spaces);
  }

  const ExperimentConfig& cfg_;
  fs::path cache_;
  std::string hash_;
  RunManifest manifest_;
  Trajectory train_, test_;
  double normalization_ = 0.0;
};

}  // namespace

RunManifest run_study(const ExperimentConfig& config) {
  config.validate();
  StudyRunner runner(config);
  return runner.run();
}

namespace {

std::string csv_double(double value) {
  std::ostringstream out;
  out << std::setprecision(17) << value;
  return out.str();
}

}  // namespace

void export_results(const fs::path& manifest_path, const fs::path& export_dir) {
  const RunManifest manifest = load_manifest(manifest_path);
  fs::create_directories(export_dir);

  json index;
  index["manifest"] = manifest_path.string();
  index["config_hash"] = manifest.config_hash;
  index["library_version"] = manifest.library_version;
  index["results"] = manifest.results;
  index["files"] = json::array();

  for (const StageRecord& stage : manifest.stages) {
    for (const std::string& artifact : stage.artifacts) {
      if (fs::path(artifact).extension() != ".noda") continue;
      json entry;
      entry["source"] = artifact;
      if (!fs::exists(artifact)) {
        entry["present"] = false;
        index["files"].push_back(std::move(entry));
        continue;
      }
      NodaFile file;
      try {
        file = noda_read(artifact);
      } catch (const IoError&) {
        entry["present"] = false;
        index["files"].push_back(std::move(entry));
        continue;
      }
      json meta = json::parse(file.metadata_json, nullptr, false);
      if (meta.is_discarded() || meta.value("kind", "") != "curve") continue;

      const std::string study = meta.value("study", "study");
      const std::string stat = meta.value("stat", "stat");
      std::ostringstream name;
      name << study << "_" << meta.value("L", 0.0) << "_" << meta.value("dh", 0) << "_"
           << meta.value("tau", 0.0) << "_" << stat << ".csv";
      const fs::path csv_path = export_dir / name.str();

      const VectorXd x = file.get("x").as_vector();
      const MatrixXd y = file.get("y").as_matrix();
      const auto columns = meta.value("columns", std::vector<std::string>{});
      std::ofstream out(csv_path, std::ios::trunc);
      if (!out) throw IoError(IoError::Kind::Io, "export: cannot write " + csv_path.string());
      for (size_t c = 0; c < columns.size(); ++c) out << (c ? "," : "") << columns[c];
      out << "\n";
      for (Eigen::Index r = 0; r < x.size(); ++r) {
        out << csv_double(x[r]);
        for (Eigen::Index c = 0; c < y.cols(); ++c) out << "," << csv_double(y(r, c));
        out << "\n";
      }
      entry["present"] = true;
      entry["name"] = name.str();
      entry["stat"] = stat;
      entry["rows"] = x.size();
      index["files"].push_back(std::move(entry));
    }
  }

  std::ofstream out(export_dir / "index.json", std::ios::trunc);
  if (!out) throw IoError(IoError::Kind::Io, "export: cannot write index.json");
  out << index.dump(2) << "\n";
}

}  // namespace manifold
