#include "manifold/noda.hpp"

#include <algorithm>
#include <cstring>
#include <fstream>
#include <limits>

#include "manifold/errors.hpp"

namespace manifold {

namespace {

constexpr char kMagic[4] = {'N', 'O', 'D', 'A'};
constexpr uint16_t kVersion = 1;

void put_bytes(std::ofstream& out, const void* p, size_t n) {
  out.write(static_cast<const char*>(p), static_cast<std::streamsize>(n));
  if (!out) throw IoError(IoError::Kind::Io, "noda: write failed");
}

template <typename T>
void put_le(std::ofstream& out, T value) {
  // Host is little-endian on every supported platform.
  put_bytes(out, &value, sizeof(T));
}

class Reader {
 public:
  explicit Reader(const std::filesystem::path& path) : in_(path, std::ios::binary) {
    if (!in_) throw IoError(IoError::Kind::Io, "noda: cannot open " + path.string());
  }

  bool at_eof() {
    in_.peek();
    return in_.eof();
  }

  void read_exact(void* p, size_t n, const char* context) {
    in_.read(static_cast<char*>(p), static_cast<std::streamsize>(n));
    if (static_cast<size_t>(in_.gcount()) != n)
      throw IoError(IoError::Kind::Truncation,
                    std::string("noda: file truncated while reading ") + context);
  }

  template <typename T>
  T read_le(const char* context) {
    T value;
    read_exact(&value, sizeof(T), context);
    return value;
  }

 private:
  std::ifstream in_;
};

bool is_ascii(const std::string& s) {
  return std::all_of(s.begin(), s.end(), [](unsigned char c) { return c < 128; });
}

}  // namespace

uint64_t NodaArray::element_count() const {
  uint64_t n = 1;
  for (uint64_t d : shape) n *= d;
  return n;
}

NodaArray NodaArray::from_matrix(const Eigen::MatrixXd& m) {
  NodaArray a;
  a.dtype = Dtype::Float64;
  a.shape = {static_cast<uint64_t>(m.rows()), static_cast<uint64_t>(m.cols())};
  a.real_data.resize(static_cast<size_t>(m.size()));
  size_t k = 0;
  for (Eigen::Index r = 0; r < m.rows(); ++r)
    for (Eigen::Index c = 0; c < m.cols(); ++c) a.real_data[k++] = m(r, c);
  return a;
}

NodaArray NodaArray::from_vector(const Eigen::VectorXd& v) {
  NodaArray a;
  a.dtype = Dtype::Float64;
  a.shape = {static_cast<uint64_t>(v.size())};
  a.real_data.assign(v.data(), v.data() + v.size());
  return a;
}

NodaArray NodaArray::from_complex_vector(const Eigen::VectorXcd& v) {
  NodaArray a;
  a.dtype = Dtype::Complex128;
  a.shape = {static_cast<uint64_t>(v.size())};
  a.complex_data.assign(v.data(), v.data() + v.size());
  return a;
}

NodaArray NodaArray::from_scalar(double x) {
  NodaArray a;
  a.dtype = Dtype::Float64;
  a.shape = {1};
  a.real_data = {x};
  return a;
}

Eigen::MatrixXd NodaArray::as_matrix() const {
  if (dtype != Dtype::Float64 || shape.size() != 2)
    throw IoError(IoError::Kind::Corruption, "noda: array is not a float64 matrix");
  Eigen::MatrixXd m(static_cast<Eigen::Index>(shape[0]), static_cast<Eigen::Index>(shape[1]));
  size_t k = 0;
  for (Eigen::Index r = 0; r < m.rows(); ++r)
    for (Eigen::Index c = 0; c < m.cols(); ++c) m(r, c) = real_data[k++];
  return m;
}

Eigen::VectorXd NodaArray::as_vector() const {
  if (dtype != Dtype::Float64 || shape.size() != 1)
    throw IoError(IoError::Kind::Corruption, "noda: array is not a float64 vector");
  return Eigen::Map<const Eigen::VectorXd>(real_data.data(),
                                           static_cast<Eigen::Index>(real_data.size()));
}

Eigen::VectorXcd NodaArray::as_complex_vector() const {
  if (dtype != Dtype::Complex128 || shape.size() != 1)
    throw IoError(IoError::Kind::Corruption, "noda: array is not a complex128 vector");
  return Eigen::Map<const Eigen::VectorXcd>(complex_data.data(),
                                            static_cast<Eigen::Index>(complex_data.size()));
}

double NodaArray::as_scalar() const {
  if (dtype != Dtype::Float64 || element_count() != 1)
    throw IoError(IoError::Kind::Corruption, "noda: array is not a scalar");
  return real_data[0];
}

void NodaFile::add(const std::string& name, NodaArray array) {
  if (has(name)) throw InvalidArgument("noda: duplicate array name '" + name + "'");
  arrays.emplace_back(name, std::move(array));
}

bool NodaFile::has(const std::string& name) const {
  return std::any_of(arrays.begin(), arrays.end(),
                     [&](const auto& kv) { return kv.first == name; });
}

const NodaArray& NodaFile::get(const std::string& name) const {
  for (const auto& kv : arrays)
    if (kv.first == name) return kv.second;
  throw IoError(IoError::Kind::Corruption, "noda: missing array '" + name + "'");
}

void noda_write(const std::filesystem::path& path, const NodaFile& file) {
  for (const auto& [name, array] : file.arrays) {
    if (name.empty() || name.size() > std::numeric_limits<uint16_t>::max() || !is_ascii(name))
      throw InvalidArgument("noda: array names must be non-empty ASCII, got '" + name + "'");
    const uint64_t n = array.element_count();
    if (array.dtype == NodaArray::Dtype::Float64 && array.real_data.size() != n)
      throw InvalidArgument("noda: payload size does not match shape for '" + name + "'");
    if (array.dtype == NodaArray::Dtype::Complex128 && array.complex_data.size() != n)
      throw InvalidArgument("noda: payload size does not match shape for '" + name + "'");
  }

  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError(IoError::Kind::Io, "noda: cannot open " + path.string() + " for writing");

  put_bytes(out, kMagic, 4);
  put_le<uint16_t>(out, kVersion);
  put_le<uint32_t>(out, static_cast<uint32_t>(file.metadata_json.size()));
  put_bytes(out, file.metadata_json.data(), file.metadata_json.size());

  for (const auto& [name, array] : file.arrays) {
    put_le<uint16_t>(out, static_cast<uint16_t>(name.size()));
    put_bytes(out, name.data(), name.size());
    put_le<uint8_t>(out, static_cast<uint8_t>(array.dtype));
    put_le<uint8_t>(out, static_cast<uint8_t>(array.shape.size()));
    for (uint64_t d : array.shape) put_le<uint64_t>(out, d);
    if (array.dtype == NodaArray::Dtype::Float64) {
      put_bytes(out, array.real_data.data(), array.real_data.size() * sizeof(double));
    } else {
      put_bytes(out, array.complex_data.data(),
                array.complex_data.size() * sizeof(std::complex<double>));
    }
  }
  out.flush();
  if (!out) throw IoError(IoError::Kind::Io, "noda: write failed for " + path.string());
}

NodaFile noda_read(const std::filesystem::path& path) {
  Reader reader(path);

  char magic[4];
  reader.read_exact(magic, 4, "magic");
  if (std::memcmp(magic, kMagic, 4) != 0)
    throw IoError(IoError::Kind::Corruption, "noda: bad magic in " + path.string());
  const auto version = reader.read_le<uint16_t>("version");
  if (version != kVersion)
    throw IoError(IoError::Kind::Unsupported,
                  "noda: unsupported format version " + std::to_string(version));

  NodaFile file;
  const auto meta_len = reader.read_le<uint32_t>("metadata length");
  file.metadata_json.resize(meta_len);
  if (meta_len > 0) reader.read_exact(file.metadata_json.data(), meta_len, "metadata");

  while (!reader.at_eof()) {
    const auto name_len = reader.read_le<uint16_t>("array name length");
    std::string name(name_len, '\0');
    if (name_len > 0) reader.read_exact(name.data(), name_len, "array name");

    NodaArray array;
    const auto dtype = reader.read_le<uint8_t>("dtype");
    if (dtype != static_cast<uint8_t>(NodaArray::Dtype::Float64) &&
        dtype != static_cast<uint8_t>(NodaArray::Dtype::Complex128))
      throw IoError(IoError::Kind::Unsupported,
                    "noda: unsupported dtype tag " + std::to_string(dtype));
    array.dtype = static_cast<NodaArray::Dtype>(dtype);

    const auto ndim = reader.read_le<uint8_t>("ndim");
    array.shape.resize(ndim);
    for (int i = 0; i < ndim; ++i) array.shape[i] = reader.read_le<uint64_t>("shape");

    const uint64_t n = array.element_count();
    if (array.dtype == NodaArray::Dtype::Float64) {
      array.real_data.resize(n);
      if (n > 0) reader.read_exact(array.real_data.data(), n * sizeof(double), "payload");
    } else {
      array.complex_data.resize(n);
      if (n > 0)
        reader.read_exact(array.complex_data.data(), n * sizeof(std::complex<double>), "payload");
    }
    file.add(name, std::move(array));
  }
  return file;
}

}  // namespace manifold
