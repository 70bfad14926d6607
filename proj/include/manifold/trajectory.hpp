#ifndef MANIFOLD_TRAJECTORY_HPP
#define MANIFOLD_TRAJECTORY_HPP

#include <Eigen/Dense>
#include <filesystem>
#include <string>
#include <utility>

namespace manifold {

enum class SystemTag { Kse, LorenzSpiral, Generic };

std::string system_tag_name(SystemTag tag);
SystemTag system_tag_from_name(const std::string& name);

// Uniformly sampled snapshot matrix: one state per row, dt_sample apart.
// domain_length is 0 for non-PDE systems.
struct Trajectory {
  Eigen::MatrixXd states;
  double dt_sample = 0.0;
  double domain_length = 0.0;
  SystemTag system = SystemTag::Generic;

  Eigen::Index rows() const { return states.rows(); }
  Eigen::Index dim() const { return states.cols(); }
  double duration() const { return dt_sample * static_cast<double>(rows()); }

  // Enforces: at least 2 rows, positive dt, all entries finite.
  void validate() const;
};

// Keeps every stride-th row (starting with the first) and scales dt_sample.
Trajectory subsample(const Trajectory& traj, long stride);

// Contiguous-in-time split; fraction is the share of rows in the first part.
std::pair<Trajectory, Trajectory> train_test_split(const Trajectory& traj, double fraction);

void save_trajectory(const std::filesystem::path& path, const Trajectory& traj);
Trajectory load_trajectory(const std::filesystem::path& path);

}  // namespace manifold

#endif
