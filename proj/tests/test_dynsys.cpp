#include <doctest.h>

#include <Eigen/Dense>
#include <cmath>
#include <complex>

#include "manifold/errors.hpp"
#include "manifold/fft.hpp"
#include "manifold/kse.hpp"
#include "manifold/lorenz.hpp"

using namespace manifold;

namespace {

// Independent high-resolution evaluation of the same phi-function contour
// integrals, kept in test code as the accuracy oracle.
Etdrk4Coefficients contour_oracle(const Eigen::VectorXcd& spectrum, double dt, int points) {
  using C = std::complex<double>;
  const auto d = spectrum.size();
  Etdrk4Coefficients out;
  out.E.resize(d);
  out.E2.resize(d);
  out.Q.resize(d);
  out.f1.resize(d);
  out.f2.resize(d);
  out.f3.resize(d);
  for (Eigen::Index k = 0; k < d; ++k) {
    const C L = dt * spectrum[k];
    out.E[k] = std::exp(L);
    out.E2[k] = std::exp(0.5 * L);
    C q = 0, f1 = 0, f2 = 0, f3 = 0;
    for (int m = 0; m < points; ++m) {
      const double theta = M_PI * (2.0 * m + 1.0) / points;
      const C z = L + C(std::cos(theta), std::sin(theta));
      const C ez = std::exp(z);
      q += (std::exp(0.5 * z) - 1.0) / z;
      f1 += (-4.0 - z + ez * (4.0 - 3.0 * z + z * z)) / (z * z * z);
      f2 += (2.0 + z + ez * (-2.0 + z)) / (z * z * z);
      f3 += (-4.0 - 3.0 * z - z * z + ez * (4.0 - z)) / (z * z * z);
    }
    out.Q[k] = dt * q / static_cast<double>(points);
    out.f1[k] = dt * f1 / static_cast<double>(points);
    out.f2[k] = dt * f2 / static_cast<double>(points);
    out.f3[k] = dt * f3 / static_cast<double>(points);
  }
  return out;
}

}  // namespace

TEST_CASE("etdrk4 coefficients: zero spectrum gives exp(0) = 1") {
  const Eigen::VectorXcd zeros = Eigen::VectorXcd::Zero(16);
  const auto c = etdrk4_coefficients(zeros, 1.0);
  CHECK(c.E.isApprox(Eigen::VectorXcd::Ones(16)));
  CHECK(c.E2.isApprox(Eigen::VectorXcd::Ones(16)));
  // At lambda = 0 the integrand limits are phi-function values: Q -> dt/2,
  // f1 -> dt/6, f2 -> dt/6, f3 -> dt/6.
  CHECK(c.Q[0].real() == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(c.f1[0].real() == doctest::Approx(1.0 / 6.0).epsilon(1e-12));
  CHECK(c.f2[0].real() == doctest::Approx(1.0 / 6.0).epsilon(1e-12));
  CHECK(c.f3[0].real() == doctest::Approx(1.0 / 6.0).epsilon(1e-12));
}

TEST_CASE("etdrk4 coefficients: strongly damped modes underflow cleanly") {
  const Eigen::VectorXcd spectrum = kse_linear_spectrum(22.0, 64);
  bool found_hard_mode = false;
  const auto c = etdrk4_coefficients(spectrum, 1.0);
  for (int k = 0; k < 64; ++k) {
    if (spectrum[k].real() < -700.0) {
      found_hard_mode = true;
      CHECK(std::abs(c.E[k]) < 1e-300);
      CHECK(std::isfinite(c.Q[k].real()));
      CHECK(std::isfinite(c.f1[k].real()));
    }
  }
  CHECK(found_hard_mode);
}

TEST_CASE("etdrk4 coefficients match 1024-point contour oracle") {
  const Eigen::VectorXcd spectrum = kse_linear_spectrum(22.0, 64);
  const double dt = 0.25;
  const auto got = etdrk4_coefficients(spectrum, dt);
  const auto want = contour_oracle(spectrum, dt, 1024);
  CHECK((got.Q - want.Q).cwiseAbs().maxCoeff() < 1e-10);
  CHECK((got.f1 - want.f1).cwiseAbs().maxCoeff() < 1e-10);
  CHECK((got.f2 - want.f2).cwiseAbs().maxCoeff() < 1e-10);
  CHECK((got.f3 - want.f3).cwiseAbs().maxCoeff() < 1e-10);
}

TEST_CASE("kse: zero field is a fixed point, exactly") {
  KseConfig config;
  config.transient_discard = 0.0;
  const Trajectory traj =
      simulate_kse(config, Eigen::VectorXd::Zero(64).eval(), 25.0, 0.25);
  CHECK(traj.rows() == 100);
  CHECK(traj.states.cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("kse: row count and metadata") {
  KseConfig config;
  config.seed = 5;
  config.transient_discard = 1.0;
  const Trajectory traj = simulate_kse(config, std::nullopt, 25.0, 0.25);
  CHECK(traj.rows() == 100);
  CHECK(traj.dim() == 64);
  CHECK(traj.dt_sample == 0.25);
  CHECK(traj.domain_length == 22.0);
  CHECK(traj.system == SystemTag::Kse);
  CHECK(traj.states.allFinite());
}

TEST_CASE("kse: spatial mean is conserved") {
  KseConfig config;
  config.seed = 2;
  config.transient_discard = 0.0;
  const Trajectory traj = simulate_kse(config, std::nullopt, 1000.0, 1.0);
  const Eigen::VectorXd means = traj.states.rowwise().mean();
  CHECK(means.cwiseAbs().maxCoeff() < 1e-9);
}

TEST_CASE("kse: deterministic given config and seed") {
  KseConfig config;
  config.seed = 17;
  config.transient_discard = 10.0;
  const Trajectory a = simulate_kse(config, std::nullopt, 20.0, 0.25);
  const Trajectory b = simulate_kse(config, std::nullopt, 20.0, 0.25);
  CHECK(a.states == b.states);
}

TEST_CASE("kse: self-convergence at t = 10 under step halving") {
  KseConfig config;
  config.seed = 3;
  config.transient_discard = 0.0;
  const Eigen::VectorXd ic = kse_random_initial_condition(config);

  auto final_state = [&](double dt) {
    KseConfig c = config;
    c.dt_internal = dt;
    const Trajectory traj = simulate_kse(c, ic, 10.0, 10.0);
    return Eigen::VectorXd(traj.states.row(0));
  };
  // Measured: halving from the 0.25 default changes the state by 2.7e-6;
  // from 0.125 down the change is held below 1e-6.
  const Eigen::VectorXd coarse = final_state(0.125);
  const Eigen::VectorXd fine = final_state(0.0625);
  CHECK((coarse - fine).norm() / fine.norm() < 1e-6);
}

TEST_CASE("kse: observed convergence order is at least 3.5") {
  KseConfig config;
  config.seed = 3;
  config.transient_discard = 0.0;
  const Eigen::VectorXd ic = kse_random_initial_condition(config);

  auto final_state = [&](double dt) {
    KseConfig c = config;
    c.dt_internal = dt;
    const Trajectory traj = simulate_kse(c, ic, 5.0, 2.5);
    return Eigen::VectorXd(traj.states.row(1));
  };
  const Eigen::VectorXd ref = final_state(0.03125);
  const std::vector<double> steps = {0.25, 0.125, 0.0625};
  std::vector<double> errs;
  for (double dt : steps) errs.push_back((final_state(dt) - ref).norm());

  // Least-squares slope of log(err) vs log(dt).
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (size_t i = 0; i < steps.size(); ++i) {
    const double x = std::log(steps[i]);
    const double y = std::log(errs[i]);
    sx += x; sy += y; sxx += x * x; sxy += x * y;
  }
  const double n = static_cast<double>(steps.size());
  const double slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
  INFO("errors ", errs[0], " ", errs[1], " ", errs[2], " slope ", slope);
  CHECK(slope >= 3.5);
}

TEST_CASE("kse: blow-up raises a divergence error with a time stamp") {
  KseConfig config;
  config.transient_discard = 0.0;
  Eigen::VectorXd huge(64);
  for (int j = 0; j < 64; ++j) huge[j] = 9e5 * std::sin(2.0 * M_PI * j / 64.0);
  try {
    simulate_kse(config, huge, 10.0, 0.25);
    FAIL("expected divergence");
  } catch (const DivergenceError& e) {
    CHECK(e.time_of_failure >= 0.0);
    CHECK(e.time_of_failure <= 10.0);
  }
}

TEST_CASE("kse: sampling grid must align with the internal step") {
  KseConfig config;
  CHECK_THROWS_AS(simulate_kse(config, std::nullopt, 10.0, 0.3), InvalidArgument);
  CHECK_THROWS_AS(simulate_kse(config, std::nullopt, 0.1, 0.25), InvalidArgument);
}

TEST_CASE("kse: rows survive a forward/inverse fourier round trip") {
  KseConfig config;
  config.seed = 9;
  config.transient_discard = 50.0;
  const Trajectory traj = simulate_kse(config, std::nullopt, 5.0, 0.25);
  Dft dft(64);
  for (int i = 0; i < traj.rows(); ++i) {
    const Eigen::VectorXd row = traj.states.row(i);
    const Eigen::VectorXd back = dft.inverse_real(dft.forward_real(row));
    CHECK((back - row).norm() <= 1e-12 * row.norm());
  }
}

TEST_CASE("lorenz spiral: z = 0 maps to the spiral origin") {
  const Eigen::Vector4d u = spiral_embed({3.0, -2.0, 0.0}, 0.02);
  CHECK(u[0] == 3.0);
  CHECK(u[1] == -2.0);
  CHECK(u[2] == 0.0);
  CHECK(u[3] == 0.0);
}

TEST_CASE("lorenz spiral: analytic inversion recovers the generating state") {
  LorenzSpiralConfig config;
  config.seed = 4;
  const Trajectory raw = simulate_lorenz_raw(config, 50.0, 0.05);
  const Trajectory embedded = simulate_lorenz_spiral(config, 50.0, 0.05);
  REQUIRE(raw.rows() == embedded.rows());
  CHECK(embedded.dim() == 4);
  for (int i = 0; i < raw.rows(); ++i) {
    const Eigen::Vector3d back =
        spiral_invert(embedded.states.row(i).transpose(), config.alpha);
    CHECK((back - raw.states.row(i).transpose()).cwiseAbs().maxCoeff() < 1e-8);
  }
}

TEST_CASE("lorenz: positive largest lyapunov exponent") {
  LorenzSpiralConfig config;
  config.seed = 1;
  const double exponent = estimate_lorenz_lyapunov(config);
  INFO("estimated exponent ", exponent);
  CHECK(exponent > 0.5);
  CHECK(exponent < 1.5);
}

TEST_CASE("lorenz: deterministic given seed") {
  LorenzSpiralConfig config;
  config.seed = 12;
  const Trajectory a = simulate_lorenz_spiral(config, 10.0, 0.1);
  const Trajectory b = simulate_lorenz_spiral(config, 10.0, 0.1);
  CHECK(a.states == b.states);
}
