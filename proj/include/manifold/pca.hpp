#ifndef MANIFOLD_PCA_HPP
#define MANIFOLD_PCA_HPP

#include <Eigen/Dense>
#include <filesystem>

namespace manifold {

// Principal components of a snapshot set: modes are the left singular vectors
// of the centered snapshot matrix (columns orthonormal, ordered by descending
// singular value), padded to a full orthonormal d x d basis when the data has
// fewer independent directions.
struct PcaBasis {
  Eigen::MatrixXd modes;            // [d x d]
  Eigen::VectorXd singular_values;  // [d], descending
  Eigen::VectorXd mean;             // [d]

  Eigen::Index dim() const { return modes.rows(); }
};

// data holds one sample per row.
PcaBasis fit_pca(const Eigen::MatrixXd& data);

// First k coefficients of (u - mean) in the mode basis.
Eigen::VectorXd pca_project(const PcaBasis& basis, const Eigen::VectorXd& u, int k);

// mean + modes[:, :k] * h with k = h.size().
Eigen::VectorXd pca_reconstruct(const PcaBasis& basis, const Eigen::VectorXd& h);

// Row-wise batch versions (rows are samples).
Eigen::MatrixXd pca_project_rows(const PcaBasis& basis, const Eigen::MatrixXd& data, int k);
Eigen::MatrixXd pca_reconstruct_rows(const PcaBasis& basis, const Eigen::MatrixXd& coeffs);

// Mean over rows of |u - reconstruct(project(u, k))|^2 / d.
double pca_reconstruction_mse(const PcaBasis& basis, const Eigen::MatrixXd& data, int k);

void save_pca(const std::filesystem::path& path, const PcaBasis& basis);
PcaBasis load_pca(const std::filesystem::path& path);

}  // namespace manifold

#endif
