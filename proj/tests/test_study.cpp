#include <doctest.h>

#include <filesystem>
#include <fstream>

#include "manifold/errors.hpp"
#include "manifold/noda.hpp"
#include "manifold/study.hpp"

using namespace manifold;
namespace fs = std::filesystem;

namespace {

ExperimentConfig micro_config(const fs::path& out_dir) {
  ExperimentConfig cfg;
  cfg.study = StudyKind::SpacingSweep;
  cfg.data_scale = 0.01;  // 1000 time units of training data
  cfg.latent_dims = {6};
  cfg.taus = {0.25};
  cfg.n_ae = 1;
  cfg.n_node = 1;
  cfg.epochs_ae = 3;
  cfg.epochs_node = 3;
  cfg.train_maps = true;
  cfg.n_ic = 5;
  cfg.pdf_bins = 20;
  cfg.pdf_rollout_duration = 50.0;
  cfg.autocorr_max_lag_lyapunov = 0.3;
  cfg.autocorr_members = 2;
  cfg.master_seed = 42;
  cfg.out_dir = out_dir;
  cfg.n_workers = 2;
  return cfg;
}

std::vector<char> read_bytes(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  REQUIRE(in.good());
  return std::vector<char>(std::istreambuf_iterator<char>(in), {});
}

fs::path fresh_dir(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / "manifold_study" / name;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

}  // namespace

TEST_CASE("experiment config: parsing, validation, hash stability") {
  const auto kv = KeyValueConfig::parse_string(
      "[study]\n"
      "type = spacing-sweep\n"
      "[system]\n"
      "L = 22\n"
      "data_scale = 0.05\n"
      "[model]\n"
      "dh_list = 8\n"
      "tau_list = 10, 16\n"
      "n_ae = 2\n"
      "[run]\n"
      "master_seed = 7\n");
  const ExperimentConfig cfg = ExperimentConfig::from_key_value(kv);
  CHECK(cfg.study == StudyKind::SpacingSweep);
  CHECK(cfg.taus == std::vector<double>{10, 16});
  CHECK(cfg.n_ae == 2);
  CHECK(cfg.master_seed == 7);

  ExperimentConfig reordered = cfg;
  CHECK(reordered.hash() == cfg.hash());
  reordered.master_seed = 8;
  CHECK(reordered.hash() != cfg.hash());

  ExperimentConfig bad = cfg;
  bad.taus = {};
  CHECK_THROWS_AS(bad.validate(), ConfigError);
  bad = cfg;
  bad.taus = {0.3};  // not a multiple of the base spacing
  CHECK_THROWS_AS(bad.validate(), ConfigError);
  bad = cfg;
  bad.latent_dims = {};
  CHECK_THROWS_AS(bad.validate(), ConfigError);
}

TEST_CASE("smoke study: manifest, caching and deterministic export") {
  const fs::path dir_a = fresh_dir("run_a");
  const fs::path dir_b = fresh_dir("run_b");

  ExperimentConfig cfg_a = micro_config(dir_a);
  const RunManifest manifest_a = run_study(cfg_a);

  SUBCASE("manifest paths resolve and containers parse") {
    CHECK(fs::exists(dir_a / "manifest.json"));
    const RunManifest loaded = load_manifest(dir_a / "manifest.json");
    CHECK(loaded.config_hash == manifest_a.config_hash);
    CHECK(!loaded.stages.empty());
    for (const StageRecord& stage : loaded.stages)
      for (const std::string& artifact : stage.artifacts) {
        CHECK(fs::exists(artifact));
        if (fs::path(artifact).extension() == ".noda") CHECK_NOTHROW(noda_read(artifact));
      }
    CHECK(loaded.results.contains("spacing_sweep"));
    const auto& row = loaded.results["spacing_sweep"][0];
    CHECK(row.contains("pdf_relative_error"));
    CHECK(row.contains("map_pdf_relative_error"));
  }

  SUBCASE("rerun hits the cache and reproduces artifacts bitwise") {
    // Fresh run in an isolated directory: same seeds, no shared cache.
    ExperimentConfig cfg_b = micro_config(dir_b);
    run_study(cfg_b);

    // Cached rerun of A: every training stage should come from cache.
    const RunManifest manifest_a2 = run_study(cfg_a);
    int cached_stages = 0;
    for (const StageRecord& stage : manifest_a2.stages)
      if (stage.from_cache) ++cached_stages;
    CHECK(cached_stages >= 4);  // generate + ae + node + map

    // Cache contents equal the fresh recomputation in B, bit for bit.
    for (const StageRecord& stage : manifest_a2.stages) {
      if (stage.name.rfind("train-", 0) != 0) continue;
      for (const std::string& artifact : stage.artifacts) {
        const fs::path a_path(artifact);
        const fs::path b_path =
            dir_b / "cache" / a_path.filename();
        REQUIRE(fs::exists(b_path));
        CHECK(read_bytes(a_path) == read_bytes(b_path));
      }
    }

    // Exports of both runs are byte-identical.
    export_results(dir_a / "manifest.json", dir_a / "export");
    export_results(dir_b / "manifest.json", dir_b / "export");
    int compared = 0;
    for (const auto& entry : fs::directory_iterator(dir_a / "export")) {
      if (entry.path().extension() != ".csv") continue;
      const fs::path other = dir_b / "export" / entry.path().filename();
      REQUIRE(fs::exists(other));
      CHECK(read_bytes(entry.path()) == read_bytes(other));
      ++compared;
    }
    CHECK(compared >= 2);  // tracking + autocorrelation curves

    // The index lists the exported files.
    std::ifstream index_in(dir_a / "export" / "index.json");
    REQUIRE(index_in.good());
    const auto index = nlohmann::json::parse(index_in);
    CHECK(index.contains("files"));
    CHECK(index["files"].size() >= 2);
    for (const auto& file : index["files"]) CHECK(file.contains("present"));
  }
}
