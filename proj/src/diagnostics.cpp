#include "manifold/diagnostics.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "manifold/errors.hpp"
#include "manifold/fft.hpp"

namespace manifold {

using Eigen::MatrixXd;
using Eigen::VectorXd;

double rms_pair_distance(const Trajectory& train, int n_pairs, uint64_t seed) {
  train.validate();
  if (n_pairs < 1) throw InvalidArgument("rms_pair_distance: need at least one pair");
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<Eigen::Index> pick(0, train.rows() - 1);
  double sum = 0.0;
  for (int p = 0; p < n_pairs; ++p) {
    Eigen::Index a = pick(rng);
    Eigen::Index b = pick(rng);
    while (b == a) b = pick(rng);
    sum += (train.states.row(a) - train.states.row(b)).squaredNorm();
  }
  return std::sqrt(sum / static_cast<double>(n_pairs));
}

TrackingCurve tracking_error(const Trajectory& truth_test, const RolloutFn& model,
                             double horizon, int n_ic, double normalization, uint64_t seed) {
  truth_test.validate();
  if (!(normalization > 0.0)) throw InvalidArgument("tracking_error: normalization must be positive");
  if (n_ic < 1) throw InvalidArgument("tracking_error: need at least one initial condition");
  const double dt = truth_test.dt_sample;
  // Floor like the rollouts do: predictions cover (0, horizon].
  const auto h = static_cast<long>(std::floor(horizon / dt + 1e-9));
  if (h < 1 || h >= truth_test.rows())
    throw InvalidArgument("tracking_error: horizon does not fit in the test data");

  const Eigen::Index n_starts = truth_test.rows() - h;
  std::vector<Eigen::Index> starts;
  if (n_ic >= n_starts) {
    starts.resize(n_starts);
    std::iota(starts.begin(), starts.end(), 0);
  } else {
    // Sample distinct start rows.
    std::mt19937_64 rng(seed);
    std::vector<Eigen::Index> all(n_starts);
    std::iota(all.begin(), all.end(), 0);
    std::shuffle(all.begin(), all.end(), rng);
    starts.assign(all.begin(), all.begin() + n_ic);
  }

  TrackingCurve curve;
  curve.ensemble_size = static_cast<int>(starts.size());
  curve.normalization = normalization;
  curve.times = dt * VectorXd::LinSpaced(h + 1, 0.0, static_cast<double>(h));
  VectorXd sum_sq = VectorXd::Zero(h + 1);

  for (const Eigen::Index start : starts) {
    const VectorXd u0 = truth_test.states.row(start);
    VectorXd err(h + 1);
    err[0] = 0.0;
    long produced = 0;
    try {
      const Trajectory pred = model(u0, horizon);
      if (pred.rows() < h || pred.dim() != truth_test.dim())
        throw InvalidArgument("tracking_error: rollout shape mismatch");
      for (long j = 1; j <= h; ++j)
        err[j] = (truth_test.states.row(start + j) - pred.states.row(j - 1)).norm();
      produced = h;
    } catch (const DivergenceError& diverged) {
      // The error reports when the rollout died; replay the surviving prefix
      // (the integration is deterministic) and saturate the tail.
      produced = std::clamp<long>(
          static_cast<long>(std::floor(diverged.time_of_failure / dt + 1e-9)) - 1, 0, h);
      if (produced > 0) {
        try {
          const Trajectory partial = model(u0, static_cast<double>(produced) * dt);
          for (long j = 1; j <= produced; ++j)
            err[j] = (truth_test.states.row(start + j) - partial.states.row(j - 1)).norm();
        } catch (const DivergenceError&) {
          produced = 0;
        }
      }
      const double saturate = produced > 0 ? err[produced] : normalization;
      for (long j = produced + 1; j <= h; ++j) err[j] = saturate;
      ++curve.diverged_count;
    }
    sum_sq += err.array().square().matrix();
  }

  curve.normalized_error =
      (sum_sq / static_cast<double>(starts.size())).array().sqrt() / normalization;
  return curve;
}

std::pair<Eigen::VectorXd, Eigen::VectorXd> shift_minimized_error(const Trajectory& truth,
                                                                  const Trajectory& pred) {
  if (truth.rows() != pred.rows() || truth.dim() != pred.dim())
    throw InvalidArgument("shift_minimized_error: trajectory shapes differ");
  const auto n = truth.rows();
  const auto d = truth.dim();
  VectorXd raw(n), shifted(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    raw[i] = (truth.states.row(i) - pred.states.row(i)).norm();
    double best = raw[i];
    for (Eigen::Index s = 1; s < d; ++s) {
      double sq = 0.0;
      for (Eigen::Index j = 0; j < d; ++j) {
        const double diff = truth.states(i, j) - pred.states(i, (j + s) % d);
        sq += diff * diff;
      }
      best = std::min(best, std::sqrt(sq));
    }
    shifted[i] = best;
  }
  return {std::move(raw), std::move(shifted)};
}

AutocorrCurve temporal_autocorrelation(const std::vector<Trajectory>& ensemble, double max_lag) {
  if (ensemble.empty()) throw InvalidArgument("temporal_autocorrelation: empty ensemble");
  const double dt = ensemble.front().dt_sample;
  const auto n_lags = static_cast<long>(std::floor(max_lag / dt + 1e-9));
  for (const Trajectory& traj : ensemble) {
    traj.validate();
    if (std::abs(traj.dt_sample - dt) > 1e-12 * dt)
      throw InvalidArgument("temporal_autocorrelation: members have mixed sampling");
    if (n_lags >= traj.rows())
      throw InvalidArgument("temporal_autocorrelation: max_lag exceeds trajectory length");
  }

  AutocorrCurve curve;
  curve.lags = dt * VectorXd::LinSpaced(n_lags + 1, 0.0, static_cast<double>(n_lags));
  VectorXd acc = VectorXd::Zero(n_lags + 1);
  long contributions = 0;

  for (const Trajectory& traj : ensemble) {
    const auto n = traj.rows();
    for (Eigen::Index g = 0; g < traj.dim(); ++g) {
      const VectorXd series = traj.states.col(g);
      const double mean = series.mean();
      const VectorXd centered = series.array() - mean;
      const double var_sum = centered.squaredNorm();
      if (var_sum <= 0.0) continue;  // silent gridpoint carries no signal
      for (long lag = 0; lag <= n_lags; ++lag) {
        const double covariance =
            centered.head(n - lag).dot(centered.tail(n - lag));
        acc[lag] += covariance / var_sum;
      }
      ++contributions;
    }
  }
  if (contributions == 0)
    throw InvalidArgument("temporal_autocorrelation: all gridpoint series are constant");
  curve.correlation = acc / static_cast<double>(contributions);
  return curve;
}

void spectral_derivatives(const Eigen::VectorXd& u, double domain_length, Eigen::VectorXd& ux,
                          Eigen::VectorXd& uxx) {
  const int d = static_cast<int>(u.size());
  if (d < 4 || d % 2 != 0)
    throw InvalidArgument("spectral_derivatives: need an even grid of at least 4 points");
  if (!(domain_length > 0.0)) throw InvalidArgument("spectral_derivatives: bad domain length");
  RealDft dft(d);
  const Eigen::VectorXcd spectrum = dft.forward(u);
  Eigen::VectorXcd first(d / 2 + 1), second(d / 2 + 1);
  for (int k = 0; k <= d / 2; ++k) {
    const double q = 2.0 * M_PI * k / domain_length;
    // The Nyquist bin has no resolved sign for odd derivatives.
    first[k] = (k == d / 2) ? 0.0 : std::complex<double>(0.0, q) * spectrum[k];
    second[k] = -q * q * spectrum[k];
  }
  ux = dft.inverse(first);
  uxx = dft.inverse(second);
}

PdfRanges joint_pdf_ranges(const Trajectory& truth) {
  truth.validate();
  PdfRanges ranges;
  bool first_sample = true;
  VectorXd ux, uxx;
  for (Eigen::Index i = 0; i < truth.rows(); ++i) {
    spectral_derivatives(truth.states.row(i), truth.domain_length, ux, uxx);
    const double xlo = ux.minCoeff(), xhi = ux.maxCoeff();
    const double ylo = uxx.minCoeff(), yhi = uxx.maxCoeff();
    if (first_sample) {
      ranges = {xlo, xhi, ylo, yhi};
      first_sample = false;
    } else {
      ranges.x_min = std::min(ranges.x_min, xlo);
      ranges.x_max = std::max(ranges.x_max, xhi);
      ranges.y_min = std::min(ranges.y_min, ylo);
      ranges.y_max = std::max(ranges.y_max, yhi);
    }
  }
  return ranges;
}

JointPdf joint_pdf(const Trajectory& traj, int bins, const PdfRanges& ranges) {
  traj.validate();
  if (bins < 10) throw InvalidArgument("joint_pdf: need at least 10 bins per axis");
  if (!(ranges.x_max > ranges.x_min) || !(ranges.y_max > ranges.y_min))
    throw InvalidArgument("joint_pdf: histogram ranges must be non-degenerate");

  JointPdf pdf;
  pdf.bin_edges_x = VectorXd::LinSpaced(bins + 1, ranges.x_min, ranges.x_max);
  pdf.bin_edges_y = VectorXd::LinSpaced(bins + 1, ranges.y_min, ranges.y_max);
  pdf.mass = MatrixXd::Zero(bins, bins);

  const double x_scale = bins / (ranges.x_max - ranges.x_min);
  const double y_scale = bins / (ranges.y_max - ranges.y_min);
  VectorXd ux, uxx;
  for (Eigen::Index i = 0; i < traj.rows(); ++i) {
    spectral_derivatives(traj.states.row(i), traj.domain_length, ux, uxx);
    for (Eigen::Index g = 0; g < traj.dim(); ++g) {
      auto bx = static_cast<long>((ux[g] - ranges.x_min) * x_scale);
      auto by = static_cast<long>((uxx[g] - ranges.y_min) * y_scale);
      bx = std::clamp<long>(bx, 0, bins - 1);
      by = std::clamp<long>(by, 0, bins - 1);
      pdf.mass(bx, by) += 1.0;
    }
  }
  pdf.sample_count = traj.rows() * traj.dim();
  pdf.mass /= static_cast<double>(pdf.sample_count);
  return pdf;
}

double pdf_relative_error(const JointPdf& reference, const JointPdf& model) {
  if (reference.bin_edges_x != model.bin_edges_x || reference.bin_edges_y != model.bin_edges_y)
    throw InvalidArgument("pdf_relative_error: histograms use different bin grids");
  const double ref_norm = reference.mass.norm();
  if (!(ref_norm > 0.0)) throw InvalidArgument("pdf_relative_error: reference has no mass");
  return (reference.mass - model.mass).norm() / ref_norm;
}

Eigen::MatrixXd fourier_magnitude_history(const Trajectory& traj) {
  traj.validate();
  const int d = static_cast<int>(traj.dim());
  if (d % 2 != 0) throw InvalidArgument("fourier_magnitude_history: need an even grid");
  RealDft dft(d);
  MatrixXd history(traj.rows(), d / 2 + 1);
  for (Eigen::Index i = 0; i < traj.rows(); ++i) {
    const Eigen::VectorXcd spectrum = dft.forward(traj.states.row(i));
    history.row(i) = spectrum.cwiseAbs();
  }
  return history;
}

SelectionResult select_best_model(const std::vector<ModelCandidate>& candidates,
                                  const Trajectory& validation, double horizon, int n_ic,
                                  double normalization, uint64_t seed) {
  if (candidates.empty()) throw InvalidArgument("select_best_model: no candidates");
  SelectionResult result;
  result.scores.reserve(candidates.size());
  for (const ModelCandidate& candidate : candidates) {
    const TrackingCurve curve =
        tracking_error(validation, candidate.rollout, horizon, n_ic, normalization, seed);
    if (curve.diverged_count == curve.ensemble_size) {
      result.scores.push_back(std::numeric_limits<double>::infinity());
      continue;
    }
    // Time-average excluding the trivial zero at lag 0.
    const auto n = curve.normalized_error.size();
    result.scores.push_back(curve.normalized_error.tail(n - 1).mean());
  }

  double best = std::numeric_limits<double>::infinity();
  for (size_t i = 0; i < result.scores.size(); ++i) {
    if (result.scores[i] < best) {
      best = result.scores[i];
      result.best_index = static_cast<int>(i);
    }
  }
  if (result.best_index < 0) {
    std::string detail = "select_best_model: every candidate diverged; scores:";
    for (size_t i = 0; i < result.scores.size(); ++i)
      detail += " " + candidates[i].label + "=inf";
    throw TrainingError(detail);
  }
  return result;
}

double lyapunov_time_for_domain(double domain_length) {
  if (std::abs(domain_length - 22.0) < 1e-6) return 22.2;
  if (std::abs(domain_length - 44.0) < 1e-6) return 12.3;
  if (std::abs(domain_length - 66.0) < 1e-6) return 11.6;
  throw InvalidArgument("lyapunov_time_for_domain: no tabulated value for this domain length");
}

}  // namespace manifold
