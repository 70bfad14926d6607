#include "manifold/lorenz.hpp"

#include <cmath>
#include <random>

#include "manifold/errors.hpp"

namespace manifold {

namespace {

constexpr double kTransientTime = 100.0;

using Eigen::Vector3d;
using Eigen::Vector4d;

Vector3d lorenz_rhs(const LorenzSpiralConfig& p, const Vector3d& s) {
  return {p.sigma * (s[1] - s[0]), s[0] * (p.rho - s[2]) - s[1], s[0] * s[1] - p.beta * s[2]};
}

Vector3d rk4_step(const LorenzSpiralConfig& p, const Vector3d& s, double dt) {
  const Vector3d k1 = lorenz_rhs(p, s);
  const Vector3d k2 = lorenz_rhs(p, s + 0.5 * dt * k1);
  const Vector3d k3 = lorenz_rhs(p, s + 0.5 * dt * k2);
  const Vector3d k4 = lorenz_rhs(p, s + dt * k3);
  return s + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
}

Vector3d seeded_initial_state(const LorenzSpiralConfig& config) {
  std::mt19937_64 rng(config.seed);
  std::uniform_real_distribution<double> jitter(-0.5, 0.5);
  return {1.0 + jitter(rng), 1.0 + jitter(rng), 1.0 + jitter(rng)};
}

long steps_for(double interval, double dt, const char* what) {
  const double ratio = interval / dt;
  const long n = std::lround(ratio);
  if (n < 1 || std::abs(ratio - static_cast<double>(n)) > 1e-9 * ratio)
    throw InvalidArgument(std::string(what) + " must be an integer multiple of dt_internal");
  return n;
}

}  // namespace

void LorenzSpiralConfig::validate() const {
  if (!(alpha > 0.0)) throw InvalidArgument("lorenz: alpha must be positive");
  if (!(dt_internal > 0.0)) throw InvalidArgument("lorenz: dt_internal must be positive");
}

Eigen::Vector4d spiral_embed(const Eigen::Vector3d& xyz, double alpha) {
  const double az = alpha * xyz[2];
  return {xyz[0], xyz[1], az * std::cos(az), az * std::sin(az)};
}

Eigen::Vector3d spiral_invert(const Eigen::Vector4d& u, double alpha) {
  const double az = std::sqrt(u[2] * u[2] + u[3] * u[3]);
  return {u[0], u[1], az / alpha};
}

Trajectory simulate_lorenz_raw(const LorenzSpiralConfig& config, double duration,
                               double sample_every) {
  config.validate();
  if (!(sample_every > 0.0) || duration < sample_every)
    throw InvalidArgument("simulate_lorenz: need duration >= sample_every > 0");
  const double dt = config.dt_internal;
  const long steps_per_sample = steps_for(sample_every, dt, "lorenz sample_every");

  Vector3d s = seeded_initial_state(config);
  const long transient_steps = std::lround(kTransientTime / dt);
  for (long i = 0; i < transient_steps; ++i) s = rk4_step(config, s, dt);

  const auto n_samples = static_cast<long>(std::floor(duration / sample_every + 1e-9));
  Trajectory traj;
  traj.states.resize(n_samples, 3);
  traj.dt_sample = sample_every;
  traj.system = SystemTag::Generic;
  for (long i = 0; i < n_samples; ++i) {
    for (long k = 0; k < steps_per_sample; ++k) s = rk4_step(config, s, dt);
    if (!s.allFinite())
      throw DivergenceError("simulate_lorenz: non-finite state", (i + 1) * sample_every);
    traj.states.row(i) = s;
  }
  return traj;
}

Trajectory simulate_lorenz_spiral(const LorenzSpiralConfig& config, double duration,
                                  double sample_every) {
  const Trajectory raw = simulate_lorenz_raw(config, duration, sample_every);
  Trajectory traj;
  traj.states.resize(raw.rows(), 4);
  traj.dt_sample = raw.dt_sample;
  traj.system = SystemTag::LorenzSpiral;
  for (Eigen::Index i = 0; i < raw.rows(); ++i)
    traj.states.row(i) = spiral_embed(raw.states.row(i).transpose(), config.alpha);
  return traj;
}

double estimate_lorenz_lyapunov(const LorenzSpiralConfig& config, double total_time,
                                double renorm_interval) {
  config.validate();
  const double dt = config.dt_internal;
  const long steps_per_leg = steps_for(renorm_interval, dt, "lorenz renorm_interval");
  const double d0 = 1e-9;

  Vector3d a = seeded_initial_state(config);
  const long transient_steps = std::lround(kTransientTime / dt);
  for (long i = 0; i < transient_steps; ++i) a = rk4_step(config, a, dt);
  Vector3d b = a + Vector3d(d0, 0.0, 0.0);

  const long legs = std::lround(total_time / renorm_interval);
  double log_sum = 0.0;
  for (long leg = 0; leg < legs; ++leg) {
    for (long i = 0; i < steps_per_leg; ++i) {
      a = rk4_step(config, a, dt);
      b = rk4_step(config, b, dt);
    }
    const double dist = (b - a).norm();
    log_sum += std::log(dist / d0);
    b = a + (d0 / dist) * (b - a);  // rescale back onto the d0 shell
  }
  return log_sum / (static_cast<double>(legs) * renorm_interval);
}

}  // namespace manifold
