#include "manifold/trajectory.hpp"

#include <nlohmann/json.hpp>

#include "manifold/errors.hpp"
#include "manifold/noda.hpp"

namespace manifold {

std::string system_tag_name(SystemTag tag) {
  switch (tag) {
    case SystemTag::Kse: return "kse";
    case SystemTag::LorenzSpiral: return "lorenz_spiral";
    case SystemTag::Generic: return "generic";
  }
  return "generic";
}

SystemTag system_tag_from_name(const std::string& name) {
  if (name == "kse") return SystemTag::Kse;
  if (name == "lorenz_spiral") return SystemTag::LorenzSpiral;
  if (name == "generic") return SystemTag::Generic;
  throw InvalidArgument("unknown system tag '" + name + "'");
}

void Trajectory::validate() const {
  if (rows() < 2) throw InvalidArgument("trajectory: needs at least 2 snapshots");
  if (!(dt_sample > 0.0)) throw InvalidArgument("trajectory: dt_sample must be positive");
  if (!states.allFinite()) throw InvalidArgument("trajectory: non-finite state entries");
}

Trajectory subsample(const Trajectory& traj, long stride) {
  if (stride < 1) throw InvalidArgument("subsample: stride must be >= 1");
  if (stride == 1) return traj;
  const Eigen::Index kept = (traj.rows() + stride - 1) / stride;
  if (kept < 2) throw InvalidArgument("subsample: fewer than 2 rows would remain");
  Trajectory out;
  out.states.resize(kept, traj.dim());
  for (Eigen::Index i = 0; i < kept; ++i) out.states.row(i) = traj.states.row(i * stride);
  out.dt_sample = traj.dt_sample * static_cast<double>(stride);
  out.domain_length = traj.domain_length;
  out.system = traj.system;
  return out;
}

std::pair<Trajectory, Trajectory> train_test_split(const Trajectory& traj, double fraction) {
  if (!(fraction > 0.0 && fraction < 1.0))
    throw InvalidArgument("train_test_split: fraction must lie in (0,1)");
  const auto n_first =
      static_cast<Eigen::Index>(std::llround(fraction * static_cast<double>(traj.rows())));
  if (n_first < 2 || traj.rows() - n_first < 2)
    throw InvalidArgument("train_test_split: both splits need at least 2 rows");
  Trajectory first = traj;
  first.states = traj.states.topRows(n_first);
  Trajectory second = traj;
  second.states = traj.states.bottomRows(traj.rows() - n_first);
  return {std::move(first), std::move(second)};
}

void save_trajectory(const std::filesystem::path& path, const Trajectory& traj) {
  NodaFile file;
  nlohmann::json meta;
  meta["kind"] = "trajectory";
  meta["dt_sample"] = traj.dt_sample;
  meta["domain_length"] = traj.domain_length;
  meta["system"] = system_tag_name(traj.system);
  file.metadata_json = meta.dump();
  file.add("states", NodaArray::from_matrix(traj.states));
  noda_write(path, file);
}

Trajectory load_trajectory(const std::filesystem::path& path) {
  const NodaFile file = noda_read(path);
  nlohmann::json meta;
  try {
    meta = nlohmann::json::parse(file.metadata_json);
  } catch (const nlohmann::json::exception& e) {
    throw IoError(IoError::Kind::Corruption, "trajectory: bad metadata JSON: " + std::string(e.what()));
  }
  if (meta.value("kind", "") != "trajectory")
    throw IoError(IoError::Kind::Corruption, "trajectory: file is not a trajectory container");
  Trajectory traj;
  traj.states = file.get("states").as_matrix();
  traj.dt_sample = meta.at("dt_sample").get<double>();
  traj.domain_length = meta.value("domain_length", 0.0);
  traj.system = system_tag_from_name(meta.value("system", "generic"));
  traj.validate();
  return traj;
}

}  // namespace manifold
