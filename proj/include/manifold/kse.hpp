#ifndef MANIFOLD_KSE_HPP
#define MANIFOLD_KSE_HPP

#include <Eigen/Dense>
#include <cstdint>
#include <optional>

#include "manifold/trajectory.hpp"

namespace manifold {

// Kuramoto-Sivashinsky generator:
//   v_t = -v v_x - v_xx - v_xxxx
// on a periodic domain of length L, discretized by Fourier-Galerkin on
// grid_points equally spaced points and stepped with ETDRK4.
struct KseConfig {
  double domain_length = 22.0;
  int grid_points = 64;
  double dt_internal = 0.25;
  double transient_discard = 500.0;
  uint64_t seed = 0;

  void validate() const;
};

// Scalar coefficient tables for one ETDRK4 step of dh/dt = lambda*h + N(h).
// Entries are per spectral mode.
struct Etdrk4Coefficients {
  Eigen::VectorXcd E;   // exp(dt*lambda)
  Eigen::VectorXcd E2;  // exp(dt*lambda/2)
  Eigen::VectorXcd Q;
  Eigen::VectorXcd f1;
  Eigen::VectorXcd f2;
  Eigen::VectorXcd f3;
};

// Evaluates the phi-function coefficient integrals by averaging over a
// circular contour of unit radius centered at each dt*lambda, which avoids
// cancellation for eigenvalues near zero.
Etdrk4Coefficients etdrk4_coefficients(const Eigen::VectorXcd& linear_spectrum, double dt,
                                       int contour_points = 32);

// Fourier symbol of (-d^2/dx^2 - d^4/dx^4) in the standard full-spectrum
// ordering [0, 1, ..., d/2-1, nyquist, -(d/2-1), ..., -1]; the unresolved
// Nyquist wavenumber is zeroed.
Eigen::VectorXcd kse_linear_spectrum(double domain_length, int grid_points);

// Zero-mean random field with energy in wavenumbers 1..4, amplitude 0.1.
Eigen::VectorXd kse_random_initial_condition(const KseConfig& config);

// Integrates for transient_discard + duration time units, discarding the
// transient, and returns duration/sample_every snapshots taken at
// t = sample_every, 2*sample_every, ... (the initial state is not a row).
// sample_every must be an integer multiple of dt_internal.
Trajectory simulate_kse(const KseConfig& config, std::optional<Eigen::VectorXd> initial_condition,
                        double duration, double sample_every);

}  // namespace manifold

#endif
