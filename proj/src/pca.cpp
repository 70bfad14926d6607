#include "manifold/pca.hpp"

#include <Eigen/SVD>
#include <nlohmann/json.hpp>

#include "manifold/errors.hpp"
#include "manifold/noda.hpp"

namespace manifold {

PcaBasis fit_pca(const Eigen::MatrixXd& data) {
  const Eigen::Index n = data.rows();
  const Eigen::Index d = data.cols();
  if (n < 2) throw InvalidArgument("fit_pca: need at least 2 samples");

  PcaBasis basis;
  basis.mean = data.colwise().mean();
  // SVD of the d x N centered snapshot matrix; full U so the basis spans all
  // of R^d even for rank-deficient data.
  Eigen::MatrixXd snapshots = (data.rowwise() - basis.mean.transpose()).transpose();
  Eigen::BDCSVD<Eigen::MatrixXd> svd(snapshots, Eigen::ComputeFullU);
  basis.modes = svd.matrixU();
  basis.singular_values = Eigen::VectorXd::Zero(d);
  basis.singular_values.head(svd.singularValues().size()) = svd.singularValues();
  return basis;
}

Eigen::VectorXd pca_project(const PcaBasis& basis, const Eigen::VectorXd& u, int k) {
  if (k < 1 || k > basis.dim()) throw InvalidArgument("pca_project: k out of range");
  if (u.size() != basis.dim()) throw InvalidArgument("pca_project: dimension mismatch");
  return basis.modes.leftCols(k).transpose() * (u - basis.mean);
}

Eigen::VectorXd pca_reconstruct(const PcaBasis& basis, const Eigen::VectorXd& h) {
  const auto k = h.size();
  if (k < 1 || k > basis.dim()) throw InvalidArgument("pca_reconstruct: coefficient count out of range");
  return basis.mean + basis.modes.leftCols(k) * h;
}

Eigen::MatrixXd pca_project_rows(const PcaBasis& basis, const Eigen::MatrixXd& data, int k) {
  if (k < 1 || k > basis.dim()) throw InvalidArgument("pca_project_rows: k out of range");
  if (data.cols() != basis.dim()) throw InvalidArgument("pca_project_rows: dimension mismatch");
  return (data.rowwise() - basis.mean.transpose()) * basis.modes.leftCols(k);
}

Eigen::MatrixXd pca_reconstruct_rows(const PcaBasis& basis, const Eigen::MatrixXd& coeffs) {
  const auto k = coeffs.cols();
  if (k < 1 || k > basis.dim())
    throw InvalidArgument("pca_reconstruct_rows: coefficient count out of range");
  return (coeffs * basis.modes.leftCols(k).transpose()).rowwise() + basis.mean.transpose();
}

double pca_reconstruction_mse(const PcaBasis& basis, const Eigen::MatrixXd& data, int k) {
  const Eigen::MatrixXd rec = pca_reconstruct_rows(basis, pca_project_rows(basis, data, k));
  return (data - rec).squaredNorm() / static_cast<double>(data.rows() * data.cols());
}

void save_pca(const std::filesystem::path& path, const PcaBasis& basis) {
  NodaFile file;
  file.metadata_json = nlohmann::json{{"kind", "pca"}}.dump();
  file.add("modes", NodaArray::from_matrix(basis.modes));
  file.add("singular_values", NodaArray::from_vector(basis.singular_values));
  file.add("mean", NodaArray::from_vector(basis.mean));
  noda_write(path, file);
}

PcaBasis load_pca(const std::filesystem::path& path) {
  const NodaFile file = noda_read(path);
  PcaBasis basis;
  basis.modes = file.get("modes").as_matrix();
  basis.singular_values = file.get("singular_values").as_vector();
  basis.mean = file.get("mean").as_vector();
  return basis;
}

}  // namespace manifold
