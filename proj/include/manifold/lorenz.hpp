#ifndef MANIFOLD_LORENZ_HPP
#define MANIFOLD_LORENZ_HPP

#include <Eigen/Dense>
#include <cstdint>

#include "manifold/trajectory.hpp"

namespace manifold {

// Lorenz system embedded in four dimensions by wrapping the z coordinate on
// an Archimedean spiral:
//   [u1,u2,u3,u4] = [x, y, a*z*cos(a*z), a*z*sin(a*z)].
struct LorenzSpiralConfig {
  double sigma = 10.0;
  double rho = 28.0;
  double beta = 8.0 / 3.0;
  double alpha = 0.02;
  double dt_internal = 0.005;
  uint64_t seed = 0;

  void validate() const;
};

Eigen::Vector4d spiral_embed(const Eigen::Vector3d& xyz, double alpha);

// Analytic inverse of the embedding for z >= 0 (which holds on the attractor).
Eigen::Vector3d spiral_invert(const Eigen::Vector4d& u, double alpha);

// Raw (x, y, z) trajectory, classical fixed-step 4th-order integration, with
// a 100 time-unit transient discarded. Rows at t = sample_every, 2*sample_every, ...
Trajectory simulate_lorenz_raw(const LorenzSpiralConfig& config, double duration,
                               double sample_every);

// The 4D embedded trajectory used as autoencoder input data.
Trajectory simulate_lorenz_spiral(const LorenzSpiralConfig& config, double duration,
                                  double sample_every);

// Largest Lyapunov exponent estimate from two-trajectory divergence with
// periodic renormalization. Classical parameters give roughly 0.9.
double estimate_lorenz_lyapunov(const LorenzSpiralConfig& config, double total_time = 400.0,
                                double renorm_interval = 0.5);

}  // namespace manifold

#endif
