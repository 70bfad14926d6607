#ifndef MANIFOLD_NODA_HPP
#define MANIFOLD_NODA_HPP

#include <Eigen/Dense>
#include <complex>
#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

namespace manifold {

// NODA: a small versioned binary container for named numeric arrays with a
// JSON text header. Layout (all integers little-endian):
//
//   magic "NODA" | u16 version (=1) | u32 metadata byte length | metadata (UTF-8 JSON)
//   then zero or more array records until end of file:
//     u16 name length | name bytes (ASCII)
//     u8 dtype (1 = float64, 2 = complex128 as interleaved float64 re,im)
//     u8 ndim | ndim x u64 dims | row-major payload
//
// Readers reject a bad magic or unknown version as corruption / unsupported,
// and report a file that ends inside a record as truncation.

struct NodaArray {
  enum class Dtype : uint8_t { Float64 = 1, Complex128 = 2 };

  Dtype dtype = Dtype::Float64;
  std::vector<uint64_t> shape;
  std::vector<double> real_data;                 // when dtype == Float64
  std::vector<std::complex<double>> complex_data;  // when dtype == Complex128

  uint64_t element_count() const;

  static NodaArray from_matrix(const Eigen::MatrixXd& m);
  static NodaArray from_vector(const Eigen::VectorXd& v);
  static NodaArray from_complex_vector(const Eigen::VectorXcd& v);
  static NodaArray from_scalar(double x);

  Eigen::MatrixXd as_matrix() const;  // requires ndim == 2, Float64
  Eigen::VectorXd as_vector() const;  // requires ndim == 1, Float64
  Eigen::VectorXcd as_complex_vector() const;
  double as_scalar() const;
};

struct NodaFile {
  std::string metadata_json = "{}";
  std::vector<std::pair<std::string, NodaArray>> arrays;

  void add(const std::string& name, NodaArray array);
  bool has(const std::string& name) const;
  const NodaArray& get(const std::string& name) const;
};

void noda_write(const std::filesystem::path& path, const NodaFile& file);
NodaFile noda_read(const std::filesystem::path& path);

}  // namespace manifold

#endif
