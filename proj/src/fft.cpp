#include "manifold/fft.hpp"

#include <fftw3.h>

#include <cstring>
#include <mutex>

#include "manifold/errors.hpp"

namespace manifold {

namespace {
// FFTW's planner mutates global state; executions are safe concurrently.
std::mutex& planner_mutex() {
  static std::mutex m;
  return m;
}
}  // namespace

Dft::Dft(int n) : n_(n) {
  if (n < 1) throw InvalidArgument("Dft: size must be positive");
  std::lock_guard<std::mutex> lock(planner_mutex());
  in_buf_ = fftw_alloc_complex(static_cast<size_t>(n));
  out_buf_ = fftw_alloc_complex(static_cast<size_t>(n));
  plan_fwd_ = fftw_plan_dft_1d(n, static_cast<fftw_complex*>(in_buf_),
                               static_cast<fftw_complex*>(out_buf_), FFTW_FORWARD, FFTW_ESTIMATE);
  plan_bwd_ = fftw_plan_dft_1d(n, static_cast<fftw_complex*>(in_buf_),
                               static_cast<fftw_complex*>(out_buf_), FFTW_BACKWARD, FFTW_ESTIMATE);
}

Dft::~Dft() {
  if (!in_buf_) return;
  std::lock_guard<std::mutex> lock(planner_mutex());
  fftw_destroy_plan(static_cast<fftw_plan>(plan_fwd_));
  fftw_destroy_plan(static_cast<fftw_plan>(plan_bwd_));
  fftw_free(in_buf_);
  fftw_free(out_buf_);
  in_buf_ = nullptr;
}

Dft::Dft(Dft&& other) noexcept
    : n_(other.n_),
      in_buf_(other.in_buf_),
      out_buf_(other.out_buf_),
      plan_fwd_(other.plan_fwd_),
      plan_bwd_(other.plan_bwd_) {
  other.in_buf_ = nullptr;
}

void Dft::forward(const Eigen::VectorXcd& in, Eigen::VectorXcd& out) {
  if (in.size() != n_) throw InvalidArgument("Dft::forward: size mismatch");
  out.resize(n_);
  std::memcpy(in_buf_, in.data(), sizeof(fftw_complex) * n_);
  fftw_execute(static_cast<fftw_plan>(plan_fwd_));
  std::memcpy(out.data(), out_buf_, sizeof(fftw_complex) * n_);
}

void Dft::inverse(const Eigen::VectorXcd& in, Eigen::VectorXcd& out) {
  if (in.size() != n_) throw InvalidArgument("Dft::inverse: size mismatch");
  out.resize(n_);
  std::memcpy(in_buf_, in.data(), sizeof(fftw_complex) * n_);
  fftw_execute(static_cast<fftw_plan>(plan_bwd_));
  std::memcpy(out.data(), out_buf_, sizeof(fftw_complex) * n_);
  out /= static_cast<double>(n_);
}

Eigen::VectorXcd Dft::forward(const Eigen::VectorXcd& in) {
  Eigen::VectorXcd out;
  forward(in, out);
  return out;
}

Eigen::VectorXcd Dft::inverse(const Eigen::VectorXcd& in) {
  Eigen::VectorXcd out;
  inverse(in, out);
  return out;
}

Eigen::VectorXcd Dft::forward_real(const Eigen::VectorXd& in) {
  return forward(in.cast<std::complex<double>>().eval());
}

Eigen::VectorXd Dft::inverse_real(const Eigen::VectorXcd& in) {
  return inverse(in).real();
}

RealDft::RealDft(int n) : n_(n) {
  if (n < 2 || n % 2 != 0) throw InvalidArgument("RealDft: size must be even and positive");
  std::lock_guard<std::mutex> lock(planner_mutex());
  real_buf_ = fftw_alloc_real(static_cast<size_t>(n));
  complex_buf_ = fftw_alloc_complex(static_cast<size_t>(n / 2 + 1));
  plan_fwd_ = fftw_plan_dft_r2c_1d(n, static_cast<double*>(real_buf_),
                                   static_cast<fftw_complex*>(complex_buf_), FFTW_ESTIMATE);
  plan_bwd_ = fftw_plan_dft_c2r_1d(n, static_cast<fftw_complex*>(complex_buf_),
                                   static_cast<double*>(real_buf_), FFTW_ESTIMATE);
}

RealDft::~RealDft() {
  if (!real_buf_) return;
  std::lock_guard<std::mutex> lock(planner_mutex());
  fftw_destroy_plan(static_cast<fftw_plan>(plan_fwd_));
  fftw_destroy_plan(static_cast<fftw_plan>(plan_bwd_));
  fftw_free(real_buf_);
  fftw_free(complex_buf_);
  real_buf_ = nullptr;
}

RealDft::RealDft(RealDft&& other) noexcept
    : n_(other.n_),
      real_buf_(other.real_buf_),
      complex_buf_(other.complex_buf_),
      plan_fwd_(other.plan_fwd_),
      plan_bwd_(other.plan_bwd_) {
  other.real_buf_ = nullptr;
}

void RealDft::forward(const Eigen::VectorXd& in, Eigen::VectorXcd& out) {
  if (in.size() != n_) throw InvalidArgument("RealDft::forward: size mismatch");
  out.resize(spectrum_size());
  std::memcpy(real_buf_, in.data(), sizeof(double) * n_);
  fftw_execute(static_cast<fftw_plan>(plan_fwd_));
  std::memcpy(out.data(), complex_buf_, sizeof(fftw_complex) * spectrum_size());
}

void RealDft::inverse(const Eigen::VectorXcd& in, Eigen::VectorXd& out) {
  if (in.size() != spectrum_size()) throw InvalidArgument("RealDft::inverse: size mismatch");
  out.resize(n_);
  std::memcpy(complex_buf_, in.data(), sizeof(fftw_complex) * spectrum_size());
  fftw_execute(static_cast<fftw_plan>(plan_bwd_));
  std::memcpy(out.data(), real_buf_, sizeof(double) * n_);
  out /= static_cast<double>(n_);
}

Eigen::VectorXcd RealDft::forward(const Eigen::VectorXd& in) {
  Eigen::VectorXcd out;
  forward(in, out);
  return out;
}

Eigen::VectorXd RealDft::inverse(const Eigen::VectorXcd& in) {
  Eigen::VectorXd out;
  inverse(in, out);
  return out;
}

}  // namespace manifold
