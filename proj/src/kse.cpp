#include "manifold/kse.hpp"

#include <cmath>
#include <complex>
#include <random>

#include "manifold/errors.hpp"
#include "manifold/fft.hpp"

namespace manifold {

namespace {

constexpr double kBlowupThreshold = 1e6;

using Eigen::VectorXcd;
using Eigen::VectorXd;
using std::complex;

// Signed wavenumber index for FFT bin j of an n-point transform, with the
// Nyquist bin treated as unresolved (zero).
double signed_wavenumber(int j, int n) {
  if (j < n / 2) return static_cast<double>(j);
  if (j == n / 2) return 0.0;
  return static_cast<double>(j - n);
}

}  // namespace

void KseConfig::validate() const {
  if (!(domain_length > 0.0)) throw InvalidArgument("kse: domain_length must be positive");
  if (grid_points < 8 || grid_points % 2 != 0)
    throw InvalidArgument("kse: grid_points must be even and >= 8");
  if (!(dt_internal > 0.0)) throw InvalidArgument("kse: dt_internal must be positive");
  if (transient_discard < 0.0) throw InvalidArgument("kse: transient_discard must be >= 0");
}

Etdrk4Coefficients etdrk4_coefficients(const Eigen::VectorXcd& linear_spectrum, double dt,
                                       int contour_points) {
  if (!(dt > 0.0)) throw InvalidArgument("etdrk4: dt must be positive");
  if (contour_points < 4) throw InvalidArgument("etdrk4: need at least 4 contour points");

  const auto d = linear_spectrum.size();
  Etdrk4Coefficients c;
  c.E.resize(d);
  c.E2.resize(d);
  c.Q.resize(d);
  c.f1.resize(d);
  c.f2.resize(d);
  c.f3.resize(d);

  // Unit-radius contour points offset off the real axis so the integrands'
  // removable singularity at z = 0 is never hit.
  std::vector<complex<double>> ring(contour_points);
  for (int m = 0; m < contour_points; ++m) {
    const double theta = M_PI * (2.0 * m + 1.0) / contour_points;
    ring[m] = complex<double>(std::cos(theta), std::sin(theta));
  }

  for (Eigen::Index k = 0; k < d; ++k) {
    const complex<double> L = dt * linear_spectrum[k];
    c.E[k] = std::exp(L);
    c.E2[k] = std::exp(0.5 * L);
    complex<double> q(0, 0), f1(0, 0), f2(0, 0), f3(0, 0);
    for (const auto& r : ring) {
      const complex<double> z = L + r;
      const complex<double> ez = std::exp(z);
      const complex<double> z2 = z * z;
      const complex<double> z3 = z2 * z;
      q += (std::exp(0.5 * z) - 1.0) / z;
      f1 += (-4.0 - z + ez * (4.0 - 3.0 * z + z2)) / z3;
      f2 += (2.0 + z + ez * (-2.0 + z)) / z3;
      f3 += (-4.0 - 3.0 * z - z2 + ez * (4.0 - z)) / z3;
    }
    const double scale = dt / contour_points;
    c.Q[k] = scale * q;
    c.f1[k] = scale * f1;
    c.f2[k] = scale * f2;
    c.f3[k] = scale * f3;
  }

  for (const auto* v : {&c.E, &c.E2, &c.Q, &c.f1, &c.f2, &c.f3})
    if (!v->allFinite())
      throw ConfigError("etdrk4: non-finite coefficient; contour placement failed for this spectrum");
  return c;
}

Eigen::VectorXcd kse_linear_spectrum(double domain_length, int grid_points) {
  VectorXcd spectrum(grid_points);
  for (int j = 0; j < grid_points; ++j) {
    const double q = 2.0 * M_PI * signed_wavenumber(j, grid_points) / domain_length;
    const double q2 = q * q;
    spectrum[j] = complex<double>(q2 - q2 * q2, 0.0);
  }
  return spectrum;
}

Eigen::VectorXd kse_random_initial_condition(const KseConfig& config) {
  std::mt19937_64 rng(config.seed);
  std::uniform_real_distribution<double> amp(-0.1, 0.1);
  const int d = config.grid_points;
  VectorXd u = VectorXd::Zero(d);
  for (int k = 1; k <= 4; ++k) {
    const double a = amp(rng);
    const double b = amp(rng);
    for (int j = 0; j < d; ++j) {
      const double phase = 2.0 * M_PI * k * j / d;
      u[j] += a * std::cos(phase) + b * std::sin(phase);
    }
  }
  return u;
}

Trajectory simulate_kse(const KseConfig& config, std::optional<Eigen::VectorXd> initial_condition,
                        double duration, double sample_every) {
  config.validate();
  const int d = config.grid_points;
  const double dt = config.dt_internal;
  if (!(sample_every > 0.0)) throw InvalidArgument("simulate_kse: sample_every must be positive");
  if (duration < sample_every)
    throw InvalidArgument("simulate_kse: duration must be at least sample_every");
  const double ratio = sample_every / dt;
  const long steps_per_sample = std::lround(ratio);
  if (steps_per_sample < 1 ||
      std::abs(ratio - static_cast<double>(steps_per_sample)) > 1e-12 * ratio)
    throw InvalidArgument("simulate_kse: sample_every must be an integer multiple of dt_internal");

  const VectorXd u0 = initial_condition ? *initial_condition : kse_random_initial_condition(config);
  if (u0.size() != d) throw InvalidArgument("simulate_kse: initial condition has wrong size");
  if (!u0.allFinite()) throw InvalidArgument("simulate_kse: initial condition is not finite");

  // The state lives on the half-spectrum (bins 0..d/2) so the field is real by
  // representation. Evolving the redundant negative-wavenumber bins instead
  // would let their conjugate-symmetry error grow at the linearly unstable
  // rates, unchecked by the nonlinearity, and swamp the solution in finite
  // time.
  const int m = d / 2 + 1;
  VectorXcd spectrum(m);
  VectorXcd g(m);
  for (int k = 0; k < m; ++k) {
    const double q = (k == d / 2) ? 0.0 : 2.0 * M_PI * k / config.domain_length;
    const double q2 = q * q;
    spectrum[k] = complex<double>(q2 - q2 * q2, 0.0);
    // Nonlinear term -(1/2) d/dx (v^2), evaluated pseudo-spectrally; the k = 0
    // multiplier vanishes, so the spatial mean is conserved exactly.
    g[k] = complex<double>(0.0, -0.5 * q);
  }
  const Etdrk4Coefficients c = etdrk4_coefficients(spectrum, dt);

  RealDft dft(d);
  VectorXcd v = dft.forward(u0);
  v[d / 2] = 0.0;  // unresolved Nyquist bin carries no state

  double t = 0.0;
  VectorXd field(d);
  VectorXcd nv(m), na(m), nb(m), nc(m), a(m), b(m), cc(m);

  auto nonlinear = [&](const VectorXcd& vhat, VectorXcd& out, bool check_blowup) {
    dft.inverse(vhat, field);
    if (check_blowup) {
      if (!field.allFinite() || field.cwiseAbs().maxCoeff() > kBlowupThreshold)
        throw DivergenceError("simulate_kse: solution blew up at t = " + std::to_string(t), t);
    }
    dft.forward(field.array().square().matrix(), out);
    out = g.cwiseProduct(out);
  };

  auto step = [&]() {
    nonlinear(v, nv, true);
    a = c.E2.cwiseProduct(v) + c.Q.cwiseProduct(nv);
    nonlinear(a, na, false);
    b = c.E2.cwiseProduct(v) + c.Q.cwiseProduct(na);
    nonlinear(b, nb, false);
    cc = c.E2.cwiseProduct(a) + c.Q.cwiseProduct(2.0 * nb - nv);
    nonlinear(cc, nc, false);
    v = c.E.cwiseProduct(v) + c.f1.cwiseProduct(nv) + 2.0 * c.f2.cwiseProduct(na + nb) +
        c.f3.cwiseProduct(nc);
    t += dt;
  };

  const long transient_steps = std::lround(config.transient_discard / dt);
  for (long i = 0; i < transient_steps; ++i) step();

  const auto n_samples = static_cast<long>(std::floor(duration / sample_every + 1e-9));
  Trajectory traj;
  traj.states.resize(n_samples, d);
  traj.dt_sample = sample_every;
  traj.domain_length = config.domain_length;
  traj.system = SystemTag::Kse;

  for (long s = 0; s < n_samples; ++s) {
    for (long i = 0; i < steps_per_sample; ++i) step();
    dft.inverse(v, field);
    if (!field.allFinite() || field.cwiseAbs().maxCoeff() > kBlowupThreshold)
      throw DivergenceError("simulate_kse: solution blew up at t = " + std::to_string(t), t);
    traj.states.row(s) = field;
  }
  return traj;
}

}  // namespace manifold
