#ifndef MANIFOLD_STUDY_HPP
#define MANIFOLD_STUDY_HPP

#include <cstdint>
#include <filesystem>
#include <nlohmann/json.hpp>
#include <string>
#include <vector>

#include "manifold/config.hpp"

namespace manifold {

// The three end-to-end experiment families:
//   DimensionSweep: nonlinear autoencoders + vector-field models across a
//     list of latent dimensions; reconstruction error and long-time
//     statistics per dimension.
//   SpaceComparison: reduced vs full physical vs full Fourier dynamics at the
//     finest data spacing; wavenumber-magnitude drift and tracking.
//   SpacingSweep: reduced models trained on data subsampled to each spacing
//     in the list, with optional discrete-map baselines; tracking,
//     autocorrelation and joint-PDF error per spacing.
enum class StudyKind { DimensionSweep, SpaceComparison, SpacingSweep };

std::string study_kind_name(StudyKind kind);
StudyKind study_kind_from_name(const std::string& name);

struct ExperimentConfig {
  StudyKind study = StudyKind::SpacingSweep;

  // data generation
  double domain_length = 22.0;
  int grid_points = 64;
  double dt_internal = 0.25;
  double transient = 500.0;
  double data_scale = 0.1;     // fraction of the full 1e5 time units
  double base_spacing = 0.25;  // finest snapshot spacing
  double split_fraction = 0.8;

  // models
  std::vector<long> latent_dims = {8};
  std::vector<double> taus = {0.25};
  std::string ae_variant = "linear";
  int n_ae = 2;
  int n_node = 2;
  int epochs_ae = 200;
  int epochs_node = 200;
  int batch_ae = 256;
  int batch_node = 256;
  int ae_hidden_layers = 1;
  bool train_maps = false;

  // evaluation
  int n_ic = 100;
  int pdf_bins = 100;
  double pdf_rollout_duration = 5000.0;
  double autocorr_max_lag_lyapunov = 3.0;
  int autocorr_members = 16;

  // run
  uint64_t master_seed = 0;
  std::filesystem::path out_dir = "study_out";
  std::filesystem::path cache_dir;  // empty: out_dir/cache or MANIFOLD_NODE_CACHE
  int n_workers = 2;

  static ExperimentConfig from_key_value(const KeyValueConfig& kv);
  KeyValueConfig to_key_value() const;
  uint64_t hash() const { return to_key_value().hash(); }
  void validate() const;
  std::filesystem::path effective_cache_dir() const;
};

struct StageRecord {
  std::string name;
  double seconds = 0.0;
  bool from_cache = false;
  std::vector<std::string> artifacts;  // paths, all existing at manifest-write time
  std::vector<uint64_t> seeds;
};

struct RunManifest {
  std::string config_hash;
  std::string library_version;
  std::vector<StageRecord> stages;
  nlohmann::json results;

  nlohmann::json to_json() const;
  static RunManifest from_json(const nlohmann::json& j);
};

// Executes the configured study end to end, reusing cached stage outputs
// keyed by (stage, config hash, seed), and writes out_dir/manifest.json.
// Stage failures are recorded in the manifest (with partial results kept on
// disk) before the error is rethrown.
RunManifest run_study(const ExperimentConfig& config);

void save_manifest(const std::filesystem::path& path, const RunManifest& manifest);
RunManifest load_manifest(const std::filesystem::path& path);

// Converts every curve artifact referenced by the manifest into a CSV bundle
// with deterministic names plus an index.json describing each file. Missing
// artifacts are listed as absent rather than failing the export.
void export_results(const std::filesystem::path& manifest_path,
                    const std::filesystem::path& export_dir);

}  // namespace manifold

#endif
