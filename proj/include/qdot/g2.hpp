#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include <boost/math/special_functions/gamma.hpp>
#include <Eigen/Dense>

#include "qdot/detail/levenberg_marquardt.hpp"
#include "qdot/photon_statistics.hpp"

namespace qdot {

/// Flat accidental background from independent dark clicks. Total click
/// rates are taken from the histogram metadata.
struct BackgroundFromRates {
  double dark_rate_a_cps = 0.0;
  double dark_rate_b_cps = 0.0;
};

/// Median of bins at least `min_distance` periods away from every peak centre.
struct BackgroundFromBaseline {
  double min_distance = 0.4;
};

using BackgroundModel = std::variant<BackgroundFromRates, BackgroundFromBaseline>;

struct G2Result {
  double g2_zero = 0.0;
  double upper_bound = 0.0;
  double g2_error = 0.0; // one standard deviation, counting statistics only
  std::optional<double> purity;
  double zero_peak_area = 0.0;
  /// Background-subtracted areas for k = -n..-1, 1..n.
  std::vector<double> side_peak_areas;
  double background_per_bin = 0.0;
  std::vector<std::string> warnings;
};

inline double purity(double g2_zero) {
  if (!(g2_zero >= 0.0 && g2_zero <= 1.0)) throw std::domain_error("purity needs 0 <= g2(0) <= 1");
  return std::sqrt(1.0 - g2_zero);
}

namespace detail {

inline void require_side_peaks(const CoincidenceHistogram& h, int n_side_peaks) {
  if (n_side_peaks < 2) throw std::invalid_argument("need at least two side peaks per side");
  if (h.counts.empty()) throw std::invalid_argument("empty coincidence histogram");
  const double reach = (double(n_side_peaks) + 0.5) * h.pulse_period_ns;
  if (reach > h.tau_max_ns + 1e-9 * h.tau_max_ns)
    throw std::invalid_argument("histogram window too short for " + std::to_string(n_side_peaks) + " side peaks");
}

inline double baseline_median(const CoincidenceHistogram& h, double min_distance) {
  const double t = h.pulse_period_ns;
  std::vector<double> v;
  for (std::size_t i = 0; i < h.size(); ++i) {
    const double c = h.bin_center(i);
    const double off = std::abs(c - std::round(c / t) * t);
    if (off >= min_distance * t) v.push_back(double(h.counts[i]));
  }
  if (v.empty()) throw std::invalid_argument("no baseline bins between peaks");
  const auto mid = v.begin() + std::ptrdiff_t(v.size() / 2);
  std::nth_element(v.begin(), mid, v.end());
  if (v.size() % 2 == 1) return *mid;
  const double hi = *mid;
  return 0.5 * (hi + *std::max_element(v.begin(), mid));
}

struct PeakWindow {
  double raw = 0.0;
  std::size_t bins = 0;
};

/// Bins whose centre lies in [kT - T/2, kT + T/2).
inline PeakWindow peak_window(const CoincidenceHistogram& h, int k) {
  const double t = h.pulse_period_ns;
  const double lo = (double(k) - 0.5) * t, hi = (double(k) + 0.5) * t;
  PeakWindow w;
  for (std::size_t i = 0; i < h.size(); ++i) {
    const double c = h.bin_center(i);
    if (c >= lo && c < hi) {
      w.raw += double(h.counts[i]);
      ++w.bins;
    }
  }
  return w;
}

} // namespace detail

/// Constant coincidence background per histogram bin.
inline double background_per_bin(const CoincidenceHistogram& h, const BackgroundModel& background) {
  if (const auto* rates = std::get_if<BackgroundFromRates>(&background)) {
    if (!(rates->dark_rate_a_cps >= 0.0 && rates->dark_rate_b_cps >= 0.0))
      throw std::domain_error("dark rates must be non-negative");
    if (!(h.duration_s > 0.0)) throw std::invalid_argument("histogram duration missing");
    const double ra = double(h.clicks_a) / h.duration_s;
    const double rb = double(h.clicks_b) / h.duration_s;
    const double da = rates->dark_rate_a_cps, db = rates->dark_rate_b_cps;
    const double pair_rate = da * rb + ra * db - da * db;
    return std::max(0.0, pair_rate) * h.bin_width_ns * 1e-9 * h.duration_s;
  }
  return detail::baseline_median(h, std::get<BackgroundFromBaseline>(background).min_distance);
}

/// Ratio of the background-subtracted zero-delay peak area to the mean side-peak area.
inline G2Result estimate_g2(const CoincidenceHistogram& h, int n_side_peaks = 5,
                            const BackgroundModel& background = BackgroundFromRates{}) {
  detail::require_side_peaks(h, n_side_peaks);
  G2Result r;

  r.background_per_bin = background_per_bin(h, background);

  double side_sum = 0.0, side_raw = 0.0;
  for (int k = -n_side_peaks; k <= n_side_peaks; ++k) {
    if (k == 0) continue;
    const auto w = detail::peak_window(h, k);
    const double area = w.raw - r.background_per_bin * double(w.bins);
    r.side_peak_areas.push_back(area);
    side_sum += area;
    side_raw += w.raw;
  }
  const double n_side = 2.0 * n_side_peaks;
  const double side_mean = side_sum / n_side;
  if (!(side_mean > 0.0)) throw std::runtime_error("side peaks vanish after background subtraction");

  double max_dev = 0.0;
  for (double a : r.side_peak_areas) max_dev = std::max(max_dev, std::abs(a - side_mean) / side_mean);
  if (max_dev > 0.2) r.warnings.push_back("side-peak areas vary by more than 20% (drift or bleaching)");

  const auto w0 = detail::peak_window(h, 0);
  double area0 = w0.raw - r.background_per_bin * double(w0.bins);
  if (area0 < 0.0) {
    r.warnings.push_back("zero-delay area negative after background subtraction; clamped to 0");
    area0 = 0.0;
  }
  r.zero_peak_area = area0;
  r.g2_zero = area0 / side_mean;

  // One-sided 95% Poisson limit on the raw zero-delay counts.
  const double raw_upper = boost::math::gamma_p_inv(w0.raw + 1.0, 0.95);
  r.upper_bound = std::max(r.g2_zero, std::max(0.0, raw_upper - r.background_per_bin * double(w0.bins)) / side_mean);

  const double var_side_mean = side_raw / (n_side * n_side);
  r.g2_error = std::sqrt(w0.raw / (side_mean * side_mean) +
                         r.g2_zero * r.g2_zero * var_side_mean / (side_mean * side_mean));
  if (r.g2_zero <= 1.0) r.purity = purity(r.g2_zero);
  return r;
}

// ---------------------------------------------------------------------------
// Model fit

struct HistogramModel {
  double background = 0.0; // counts per bin
  double side_amplitude = 0.0;
  double zero_amplitude = 0.0;
  double decay_ns = 1.0;
};

struct HistogramFitResult {
  HistogramModel model;
  HistogramModel errors;
  double g2_zero = 0.0;
  double g2_error = 0.0;
  double residual = 0.0;
  int iterations = 0;
};

class HistogramFitError : public std::runtime_error {
public:
  HistogramFitError(const std::string& what, HistogramFitResult best)
      : std::runtime_error(what), best_(std::move(best)) {}
  const HistogramFitResult& best_so_far() const noexcept { return best_; }

private:
  HistogramFitResult best_;
};

namespace detail {

/// (1/w) * integral over [lo, hi] of exp(-|tau - c| / d).
inline double two_sided_exp_bin(double lo, double hi, double c, double d) {
  const auto prim = [&](double x) {
    return x < c ? d * std::exp((x - c) / d) : 2.0 * d - d * std::exp(-(x - c) / d);
  };
  return (prim(hi) - prim(lo)) / (hi - lo);
}

} // namespace detail

/// Expected counts per bin for `m`, with peaks on every lattice point that can reach the window.
inline std::vector<double> evaluate_histogram_model(const HistogramModel& m, const CoincidenceHistogram& h) {
  const double t = h.pulse_period_ns;
  const int kmax = int(std::ceil(h.tau_max_ns / t)) + 1;
  std::vector<double> out(h.size());
  for (std::size_t i = 0; i < h.size(); ++i) {
    const double lo = h.bin_left(i), hi = lo + h.bin_width_ns;
    double v = m.background;
    for (int k = -kmax; k <= kmax; ++k)
      v += (k == 0 ? m.zero_amplitude : m.side_amplitude) * detail::two_sided_exp_bin(lo, hi, double(k) * t, m.decay_ns);
    out[i] = v;
  }
  return out;
}

struct HistogramFitOptions {
  int max_iterations = 300;
};

/// Unweighted least-squares fit of a flat background plus two-sided
/// exponential peaks with a shared side amplitude and a free zero-delay amplitude.
inline HistogramFitResult fit_histogram(const CoincidenceHistogram& h, int n_side_peaks = 5,
                                        const HistogramFitOptions& options = {}) {
  detail::require_side_peaks(h, n_side_peaks);
  const std::size_t m = h.size();
  Eigen::VectorXd y(static_cast<Eigen::Index>(m));
  for (std::size_t i = 0; i < m; ++i) y[Eigen::Index(i)] = double(h.counts[i]);

  const double base = detail::baseline_median(h, 0.4);
  double side_max = 0.0, side_area = 0.0;
  for (int k = 1; k <= n_side_peaks; ++k) {
    for (int s : {-k, k}) {
      const auto w = detail::peak_window(h, s);
      side_area += w.raw - base * double(w.bins);
    }
  }
  side_area /= 2.0 * n_side_peaks;
  double zero_max = 0.0;
  for (std::size_t i = 0; i < m; ++i) {
    const double c = h.bin_center(i);
    const double off = std::abs(c - std::round(c / h.pulse_period_ns) * h.pulse_period_ns);
    if (off > 2.0 * h.bin_width_ns) continue;
    const double v = double(h.counts[i]) - base;
    if (std::abs(c) < 0.5 * h.pulse_period_ns)
      zero_max = std::max(zero_max, v);
    else
      side_max = std::max(side_max, v);
  }
  side_max = std::max(side_max, 1.0);
  const double decay0 = std::clamp(side_area / (2.0 * side_max), 2.0 * h.bin_width_ns, 0.4 * h.pulse_period_ns);

  const auto unpack = [](const Eigen::VectorXd& p) { return HistogramModel{p[0], p[1], p[2], p[3]}; };
  const detail::ResidualFn f = [&](const Eigen::VectorXd& p) {
    const auto model = evaluate_histogram_model(unpack(p), h);
    Eigen::VectorXd r(static_cast<Eigen::Index>(m));
    for (std::size_t i = 0; i < m; ++i) r[Eigen::Index(i)] = model[i] - y[Eigen::Index(i)];
    return r;
  };
  const detail::JacobianFn jac = [&](const Eigen::VectorXd& p) {
    Eigen::VectorXd steps(4);
    steps << 1e-6 * (std::abs(p[0]) + 1.0), 1e-6 * (std::abs(p[1]) + 1.0), 1e-6 * (std::abs(p[2]) + 1.0),
        1e-6 * p[3];
    return detail::numeric_jacobian(f, p, steps);
  };

  Eigen::VectorXd p0(4), lower(4), upper(4), scale(4);
  p0 << std::max(base, 0.0), side_max, std::max(zero_max, 0.0), decay0;
  const double inf = std::numeric_limits<double>::infinity();
  lower << 0.0, 0.0, 0.0, 1e-3 * h.bin_width_ns;
  upper << inf, inf, inf, h.pulse_period_ns;
  scale << 1.0, 1.0, 1.0, h.bin_width_ns;
  detail::LmOptions lm;
  lm.max_iterations = options.max_iterations;
  lm.ftol = 1e-14;
  const auto fit = detail::levenberg_marquardt(f, jac, p0, lower, upper, scale, lm);

  HistogramFitResult r;
  r.model = unpack(fit.params);
  const Eigen::MatrixXd cov = fit.robust_covariance();
  r.errors = HistogramModel{std::sqrt(std::max(cov(0, 0), 0.0)), std::sqrt(std::max(cov(1, 1), 0.0)),
                            std::sqrt(std::max(cov(2, 2), 0.0)), std::sqrt(std::max(cov(3, 3), 0.0))};
  r.residual = fit.cost;
  r.iterations = fit.iterations;
  if (r.model.side_amplitude > 0.0) {
    const double a = r.model.side_amplitude, z = r.model.zero_amplitude;
    r.g2_zero = z / a;
    const double var = cov(2, 2) / (a * a) + z * z * cov(1, 1) / (a * a * a * a) - 2.0 * z * cov(1, 2) / (a * a * a);
    r.g2_error = std::sqrt(std::max(var, 0.0));
  }
  if (!fit.converged) throw HistogramFitError("histogram fit did not converge", r);
  if (!(r.model.side_amplitude > 0.0)) throw HistogramFitError("histogram fit found no side peaks", r);
  return r;
}

} // namespace qdot
