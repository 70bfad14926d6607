#ifndef MANIFOLD_FFT_HPP
#define MANIFOLD_FFT_HPP

#include <Eigen/Dense>
#include <complex>

namespace manifold {

// Complex 1D DFT backed by FFTW. Conventions:
//   forward: X_k = sum_j x_j exp(-2*pi*i*j*k/n)   (unnormalized)
//   inverse: x_j = (1/n) sum_k X_k exp(+2*pi*i*j*k/n)
// so inverse(forward(x)) == x.
//
// An instance owns its FFTW plans and scratch buffers, so a single instance
// must not be used from two threads at once; distinct instances are
// independent. Plan creation/destruction is serialized internally (FFTW's
// planner is not thread-safe).
class Dft {
 public:
  explicit Dft(int n);
  ~Dft();

  Dft(const Dft&) = delete;
  Dft& operator=(const Dft&) = delete;
  Dft(Dft&& other) noexcept;
  Dft& operator=(Dft&&) = delete;

  int size() const { return n_; }

  void forward(const Eigen::VectorXcd& in, Eigen::VectorXcd& out);
  void inverse(const Eigen::VectorXcd& in, Eigen::VectorXcd& out);

  Eigen::VectorXcd forward(const Eigen::VectorXcd& in);
  Eigen::VectorXcd inverse(const Eigen::VectorXcd& in);

  // Forward transform of a real field; inverse_real takes the real part of the
  // inverse transform (imaginary residue is the caller's concern).
  Eigen::VectorXcd forward_real(const Eigen::VectorXd& in);
  Eigen::VectorXd inverse_real(const Eigen::VectorXcd& in);

 private:
  int n_;
  void* in_buf_;    // fftw_complex[n]
  void* out_buf_;   // fftw_complex[n]
  void* plan_fwd_;  // fftw_plan
  void* plan_bwd_;  // fftw_plan
};

// Half-spectrum DFT of a real field (bins 0..n/2). Same normalization as Dft.
// Working in this representation keeps the field exactly real: there is no
// redundant negative-wavenumber state whose conjugate symmetry could drift.
class RealDft {
 public:
  explicit RealDft(int n);
  ~RealDft();

  RealDft(const RealDft&) = delete;
  RealDft& operator=(const RealDft&) = delete;
  RealDft(RealDft&& other) noexcept;
  RealDft& operator=(RealDft&&) = delete;

  int size() const { return n_; }
  int spectrum_size() const { return n_ / 2 + 1; }

  void forward(const Eigen::VectorXd& in, Eigen::VectorXcd& out);
  void inverse(const Eigen::VectorXcd& in, Eigen::VectorXd& out);
  Eigen::VectorXcd forward(const Eigen::VectorXd& in);
  Eigen::VectorXd inverse(const Eigen::VectorXcd& in);

 private:
  int n_;
  void* real_buf_;     // double[n]
  void* complex_buf_;  // fftw_complex[n/2+1]
  void* plan_fwd_;
  void* plan_bwd_;
};

}  // namespace manifold

#endif
