#include <doctest.h>

#include <Eigen/Dense>
#include <cmath>
#include <random>

#include "manifold/diagnostics.hpp"
#include "manifold/errors.hpp"
#include "manifold/kse.hpp"

using namespace manifold;
using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

Trajectory kse_truth(double duration, double sample_every, uint64_t seed) {
  KseConfig config;
  config.seed = seed;
  return simulate_kse(config, std::nullopt, duration, sample_every);
}

}  // namespace

TEST_CASE("spectral derivatives of a single mode are analytic") {
  const double L = 22.0;
  const int d = 64;
  VectorXd u(d), want_ux(d), want_uxx(d);
  const double q = 2.0 * M_PI / L;
  for (int j = 0; j < d; ++j) {
    const double x = L * j / d;
    u[j] = std::sin(q * x);
    want_ux[j] = q * std::cos(q * x);
    want_uxx[j] = -q * q * std::sin(q * x);
  }
  VectorXd ux, uxx;
  spectral_derivatives(u, L, ux, uxx);
  CHECK((ux - want_ux).cwiseAbs().maxCoeff() < 1e-10);
  CHECK((uxx - want_uxx).cwiseAbs().maxCoeff() < 1e-10);
}

TEST_CASE("spectral derivatives of a constant vanish") {
  VectorXd ux, uxx;
  spectral_derivatives(VectorXd::Constant(32, 3.7), 10.0, ux, uxx);
  CHECK(ux.cwiseAbs().maxCoeff() < 1e-12);
  CHECK(uxx.cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("finite differences approach the spectral derivative at second order") {
  const double L = 22.0;
  auto field = [&](double x) {
    return std::sin(2.0 * M_PI * x / L) + 0.5 * std::cos(2.0 * M_PI * 3.0 * x / L) +
           0.2 * std::sin(2.0 * M_PI * 4.0 * x / L);
  };
  auto fd_error = [&](int d) {
    VectorXd u(d);
    for (int j = 0; j < d; ++j) u[j] = field(L * j / d);
    VectorXd ux, uxx;
    spectral_derivatives(u, L, ux, uxx);
    const double dx = L / d;
    double worst = 0.0;
    for (int j = 0; j < d; ++j) {
      const double fd = (u[(j + 1) % d] - u[(j + d - 1) % d]) / (2.0 * dx);
      worst = std::max(worst, std::abs(fd - ux[j]));
    }
    return worst;
  };
  const double coarse = fd_error(64);
  const double fine = fd_error(128);
  CHECK(coarse / fine == doctest::Approx(4.0).epsilon(0.1));
}

TEST_CASE("spectral derivatives commute with cyclic shifts") {
  const Trajectory truth = kse_truth(20.0, 0.5, 3);
  const int d = static_cast<int>(truth.dim());
  const VectorXd u = truth.states.row(7);
  VectorXd ux, uxx;
  spectral_derivatives(u, truth.domain_length, ux, uxx);
  for (int shift : {1, 13, 40}) {
    VectorXd shifted(d);
    for (int j = 0; j < d; ++j) shifted[j] = u[(j + shift) % d];
    VectorXd sx, sxx;
    spectral_derivatives(shifted, truth.domain_length, sx, sxx);
    for (int j = 0; j < d; ++j) {
      CHECK(std::abs(sx[j] - ux[(j + shift) % d]) < 1e-10);
      CHECK(std::abs(sxx[j] - uxx[(j + shift) % d]) < 1e-10);
    }
  }
}

TEST_CASE("tracking error of the exact solver is null and of noise is one") {
  const Trajectory truth = kse_truth(400.0, 0.25, 5);
  const double normalization = rms_pair_distance(truth, 20000, 11);

  SUBCASE("exact solver") {
    KseConfig config;
    config.transient_discard = 0.0;
    const RolloutFn exact = [&](const VectorXd& u0, double duration) {
      return simulate_kse(config, u0, duration, 0.25);
    };
    const TrackingCurve curve = tracking_error(truth, exact, 10.0, 20, normalization, 21);
    CHECK(curve.ensemble_size == 20);
    CHECK(curve.diverged_count == 0);
    CHECK(curve.normalized_error.maxCoeff() < 1e-6);
  }

  SUBCASE("random predictor") {
    auto rng = std::make_shared<std::mt19937_64>(33);
    const RolloutFn scrambler = [&truth, rng](const VectorXd&, double duration) {
      const auto n = static_cast<long>(std::llround(duration / 0.25));
      std::uniform_int_distribution<Eigen::Index> pick(0, truth.rows() - 1);
      Trajectory out;
      out.dt_sample = 0.25;
      out.states.resize(n, truth.dim());
      for (long i = 0; i < n; ++i) out.states.row(i) = truth.states.row(pick(*rng));
      return out;
    };
    // Every start row is used, so the per-time fluctuation is dominated by
    // the scrambler's ~1.5k independent draws per lag.
    const TrackingCurve curve = tracking_error(truth, scrambler, 10.0, 2000, normalization, 22);
    const auto tail = curve.normalized_error.tail(curve.normalized_error.size() - 1);
    CHECK(tail.minCoeff() > 0.95);
    CHECK(tail.maxCoeff() < 1.05);
  }
}

TEST_CASE("shift-minimized error detects pure translations") {
  const Trajectory truth = kse_truth(25.0, 0.5, 7);
  const int d = static_cast<int>(truth.dim());

  Trajectory shifted = truth;
  for (Eigen::Index i = 0; i < truth.rows(); ++i)
    for (int j = 0; j < d; ++j) shifted.states(i, j) = truth.states(i, (j + 7) % d);

  const auto [raw, minimized] = shift_minimized_error(truth, shifted);
  CHECK(raw.minCoeff() > 0.1);
  CHECK(minimized.maxCoeff() < 1e-12);

  const auto [raw_same, min_same] = shift_minimized_error(truth, truth);
  CHECK(raw_same.maxCoeff() == 0.0);
  CHECK(min_same.maxCoeff() == 0.0);
}

TEST_CASE("shift-minimized error never exceeds the raw error") {
  std::mt19937_64 rng(17);
  std::normal_distribution<double> normal;
  Trajectory a, b;
  a.states.resize(40, 16);
  b.states.resize(40, 16);
  a.dt_sample = b.dt_sample = 1.0;
  for (int i = 0; i < 40; ++i)
    for (int j = 0; j < 16; ++j) {
      a.states(i, j) = normal(rng);
      b.states(i, j) = normal(rng);
    }
  const auto [raw, minimized] = shift_minimized_error(a, b);
  for (int i = 0; i < raw.size(); ++i) CHECK(minimized[i] <= raw[i] + 1e-12);
}

TEST_CASE("autocorrelation: white noise, unit lag zero, bounded") {
  std::mt19937_64 rng(23);
  std::normal_distribution<double> normal;
  Trajectory noise;
  noise.states.resize(100000, 2);
  noise.dt_sample = 1.0;
  for (Eigen::Index i = 0; i < noise.states.rows(); ++i) {
    noise.states(i, 0) = normal(rng);
    noise.states(i, 1) = normal(rng);
  }
  const AutocorrCurve curve = temporal_autocorrelation({noise}, 10.0);
  CHECK(curve.correlation[0] == 1.0);
  const double bound = 3.0 / std::sqrt(static_cast<double>(noise.states.rows()));
  for (int lag = 1; lag < curve.correlation.size(); ++lag) {
    CHECK(std::abs(curve.correlation[lag]) < bound);
    CHECK(std::abs(curve.correlation[lag]) <= 1.0 + 1e-9);
  }
}

TEST_CASE("autocorrelation of a cosine is a cosine") {
  const double omega = 1.3;
  const double dt = 0.01;
  const long n = 400000;
  Trajectory wave;
  wave.states.resize(n, 1);
  wave.dt_sample = dt;
  for (long i = 0; i < n; ++i) wave.states(i, 0) = std::cos(omega * dt * i);
  const AutocorrCurve curve = temporal_autocorrelation({wave}, 2.0);
  for (int lag = 0; lag < curve.lags.size(); ++lag) {
    const double want = std::cos(omega * curve.lags[lag]);
    CHECK(std::abs(curve.correlation[lag] - want) < 1e-3);
  }
}

TEST_CASE("autocorrelation rejects oversized lags") {
  Trajectory tiny;
  tiny.states = MatrixXd::Random(50, 2);
  tiny.dt_sample = 1.0;
  CHECK_THROWS_AS(temporal_autocorrelation({tiny}, 60.0), InvalidArgument);
}

TEST_CASE("joint pdf masses and errors") {
  const Trajectory truth = kse_truth(200.0, 0.5, 9);
  const PdfRanges ranges = joint_pdf_ranges(truth);
  const JointPdf pdf = joint_pdf(truth, 50, ranges);

  CHECK(std::abs(pdf.mass.sum() - 1.0) < 1e-12);
  CHECK(pdf.mass.minCoeff() >= 0.0);
  CHECK(pdf_relative_error(pdf, pdf) == 0.0);

  SUBCASE("all samples inside one bin") {
    Trajectory flat;
    flat.states = MatrixXd::Constant(10, 32, 1.5);
    flat.dt_sample = 1.0;
    flat.domain_length = 22.0;
    const JointPdf spike = joint_pdf(flat, 10, {-1.0, 1.0, -1.0, 1.0});
    CHECK(std::abs(spike.mass.sum() - 1.0) < 1e-12);
    CHECK(spike.mass.maxCoeff() == 1.0);  // derivatives are identically zero
  }

  SUBCASE("disjoint single-bin masses give sqrt(2)") {
    Trajectory flat;
    flat.states = MatrixXd::Zero(10, 32);
    flat.dt_sample = 1.0;
    flat.domain_length = 22.0;
    const JointPdf a = joint_pdf(flat, 10, {-1.0, 1.0, -1.0, 1.0});
    JointPdf b = a;
    b.mass.setZero();
    b.mass(9, 9) = 1.0;
    CHECK(pdf_relative_error(a, b) == doctest::Approx(std::sqrt(2.0)).epsilon(1e-12));
  }

  SUBCASE("mismatched grids are rejected") {
    const JointPdf other = joint_pdf(truth, 40, ranges);
    CHECK_THROWS_AS(pdf_relative_error(pdf, other), InvalidArgument);
  }

  SUBCASE("too few bins rejected") {
    CHECK_THROWS_AS(joint_pdf(truth, 9, ranges), InvalidArgument);
  }

  SUBCASE("out-of-range samples accumulate in edge bins") {
    PdfRanges clipped = ranges;
    clipped.x_min = 0.0;  // everything negative lands in column 0
    const JointPdf clipped_pdf = joint_pdf(truth, 50, clipped);
    CHECK(std::abs(clipped_pdf.mass.sum() - 1.0) < 1e-12);
    CHECK(clipped_pdf.mass.row(0).sum() > 0.2);
  }
}

TEST_CASE("truth joint pdf concentrates at moderate slopes") {
  const Trajectory truth = kse_truth(500.0, 0.5, 10);
  const PdfRanges ranges = joint_pdf_ranges(truth);
  const JointPdf pdf = joint_pdf(truth, 100, ranges);
  // Mass fraction with |u_x| <= 2.5.
  double inside = 0.0;
  for (int bx = 0; bx < 100; ++bx) {
    const double center = 0.5 * (pdf.bin_edges_x[bx] + pdf.bin_edges_x[bx + 1]);
    if (std::abs(center) <= 2.5) inside += pdf.mass.row(bx).sum();
  }
  CHECK(inside > 0.9);
}

TEST_CASE("fourier magnitude history picks out single modes") {
  Trajectory traj;
  const int d = 64;
  traj.states.resize(2, d);
  traj.dt_sample = 1.0;
  traj.domain_length = 22.0;
  traj.states.row(0).setConstant(0.75);
  for (int j = 0; j < d; ++j) traj.states(1, j) = std::sin(2.0 * M_PI * 5.0 * j / d);

  const MatrixXd history = fourier_magnitude_history(traj);
  REQUIRE(history.cols() == d / 2 + 1);
  CHECK(history(0, 0) == doctest::Approx(0.75 * d).epsilon(1e-12));
  CHECK(history.row(0).tail(d / 2).maxCoeff() < 1e-10);
  CHECK(history(1, 5) == doctest::Approx(d / 2.0).epsilon(1e-10));
  CHECK(history(1, 0) < 1e-10);
  CHECK(history(1, 6) < 1e-10);
}

TEST_CASE("model selection prefers the exact dynamics") {
  const Trajectory truth = kse_truth(300.0, 0.25, 12);
  const double normalization = rms_pair_distance(truth, 4000, 13);
  KseConfig config;
  config.transient_discard = 0.0;

  auto noisy_candidate = [&](double amplitude, uint64_t seed) {
    auto rng = std::make_shared<std::mt19937_64>(seed);
    return RolloutFn([&truth, amplitude, rng, config](const VectorXd& u0, double duration) {
      Trajectory out = simulate_kse(config, u0, duration, 0.25);
      std::normal_distribution<double> normal(0.0, amplitude);
      for (Eigen::Index i = 0; i < out.states.rows(); ++i)
        for (Eigen::Index j = 0; j < out.states.cols(); ++j) out.states(i, j) += normal(*rng);
      return out;
    });
  };

  std::vector<ModelCandidate> candidates;
  candidates.push_back({"noise-0.5", noisy_candidate(0.5, 1)});
  candidates.push_back({"exact", noisy_candidate(0.0, 2)});
  candidates.push_back({"noise-0.1", noisy_candidate(0.1, 3)});
  candidates.push_back({"noise-1.5", noisy_candidate(1.5, 4)});

  const SelectionResult result = select_best_model(candidates, truth, 5.0, 10, normalization, 14);
  CHECK(result.best_index == 1);
  REQUIRE(result.scores.size() == 4);
  // Scores ordered by the injected noise amplitude.
  CHECK(result.scores[1] < result.scores[2]);
  CHECK(result.scores[2] < result.scores[0]);
  CHECK(result.scores[0] < result.scores[3]);

  SUBCASE("single candidate returned directly") {
    const std::vector<ModelCandidate> one = {candidates[0]};
    CHECK(select_best_model(one, truth, 5.0, 5, normalization, 15).best_index == 0);
  }
}

TEST_CASE("lyapunov time lookup covers the studied domains") {
  CHECK(lyapunov_time_for_domain(22.0) == 22.2);
  CHECK(lyapunov_time_for_domain(44.0) == 12.3);
  CHECK(lyapunov_time_for_domain(66.0) == 11.6);
  CHECK_THROWS_AS(lyapunov_time_for_domain(30.0), InvalidArgument);
}
