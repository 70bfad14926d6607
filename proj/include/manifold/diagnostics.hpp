#ifndef MANIFOLD_DIAGNOSTICS_HPP
#define MANIFOLD_DIAGNOSTICS_HPP

#include <Eigen/Dense>
#include <functional>
#include <string>
#include <vector>

#include "manifold/trajectory.hpp"

namespace manifold {

// Produces the model's trajectory from an ambient-space initial condition,
// sampled at the truth spacing, covering (0, duration].
using RolloutFn = std::function<Trajectory(const Eigen::VectorXd& u0, double duration)>;

// Normalized ensemble tracking error vs time. normalization is the rms
// distance between randomly paired training snapshots, so an uninformed
// predictor sits near 1.
struct TrackingCurve {
  Eigen::VectorXd times;
  Eigen::VectorXd normalized_error;
  int ensemble_size = 0;
  double normalization = 0.0;
  int diverged_count = 0;  // initial conditions whose rollout died en route
};

// rms distance between n_pairs random snapshot pairs; the tracking-error
// normalization constant.
double rms_pair_distance(const Trajectory& train, int n_pairs = 10000, uint64_t seed = 0);

// Ensemble tracking error over n_ic initial conditions drawn from the
// held-out trajectory. A diverged rollout saturates that member's curve at
// its last finite value (at the normalization constant if it never produced
// one).
TrackingCurve tracking_error(const Trajectory& truth_test, const RolloutFn& model,
                             double horizon, int n_ic, double normalization, uint64_t seed);

// Per-time raw error and its minimum over all cyclic grid shifts of the
// prediction. Both trajectories must have the same shape.
std::pair<Eigen::VectorXd, Eigen::VectorXd> shift_minimized_error(const Trajectory& truth,
                                                                  const Trajectory& pred);

struct AutocorrCurve {
  Eigen::VectorXd lags;
  Eigen::VectorXd correlation;
};

// Mean-removed, variance-normalized temporal autocorrelation, averaged over
// gridpoints and ensemble members; exactly 1 at lag zero.
AutocorrCurve temporal_autocorrelation(const std::vector<Trajectory>& ensemble, double max_lag);

// First and second spatial derivatives of a periodic field by Fourier
// multipliers i*q and -q^2.
void spectral_derivatives(const Eigen::VectorXd& u, double domain_length, Eigen::VectorXd& ux,
                          Eigen::VectorXd& uxx);

struct PdfRanges {
  double x_min = 0.0, x_max = 0.0;
  double y_min = 0.0, y_max = 0.0;
};

// Axis ranges of (u_x, u_xx) over every sample of the reference data; shared
// across the models being compared.
PdfRanges joint_pdf_ranges(const Trajectory& truth);

// 2D histogram over (u_x, u_xx) samples from every gridpoint and snapshot,
// normalized to unit mass; out-of-range samples land in the edge bins.
struct JointPdf {
  Eigen::VectorXd bin_edges_x;
  Eigen::VectorXd bin_edges_y;
  Eigen::MatrixXd mass;
  long sample_count = 0;
};

JointPdf joint_pdf(const Trajectory& traj, int bins, const PdfRanges& ranges);

// Frobenius norm of the mass difference over the Frobenius norm of the
// reference mass. The two histograms must share bin grids exactly.
double pdf_relative_error(const JointPdf& reference, const JointPdf& model);

// Per-snapshot magnitudes of the nonnegative-wavenumber Fourier coefficients
// (unnormalized transform), shape [rows x d/2+1].
Eigen::MatrixXd fourier_magnitude_history(const Trajectory& traj);

struct ModelCandidate {
  std::string label;
  RolloutFn rollout;
};

struct SelectionResult {
  int best_index = -1;
  std::vector<double> scores;  // time-averaged normalized tracking error
};

// Scores every candidate by short-time tracking on the validation data and
// returns the argmin (ties broken by lower index). Throws if every candidate
// diverged on every initial condition.
SelectionResult select_best_model(const std::vector<ModelCandidate>& candidates,
                                  const Trajectory& validation, double horizon, int n_ic,
                                  double normalization, uint64_t seed);

// Literature values 22.2, 12.3, 11.6 for domain lengths 22, 44, 66; used for
// axis scaling and selection horizons only.
double lyapunov_time_for_domain(double domain_length);

}  // namespace manifold

#endif
