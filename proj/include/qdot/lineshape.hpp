#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <optional>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include "qdot/detail/levenberg_marquardt.hpp"
#include "qdot/spectrum.hpp"
#include "qdot/units.hpp"

namespace qdot {

/// Lorentzian line with integrated area `area` (counts) and full width at half maximum `fwhm_ev`.
class LorentzianPeak {
public:
  LorentzianPeak(PhotonEnergy center, double fwhm_ev, double area) : center_(center), fwhm_(fwhm_ev), area_(area) {
    if (!(fwhm_ev > 0.0) || !std::isfinite(fwhm_ev)) throw std::domain_error("Lorentzian FWHM must be positive");
    if (!(area >= 0.0) || !std::isfinite(area)) throw std::domain_error("Lorentzian area must be non-negative");
  }

  PhotonEnergy center() const noexcept { return center_; }
  double fwhm_ev() const noexcept { return fwhm_; }
  double area() const noexcept { return area_; }

  /// Counts per eV at energy `e_ev`.
  double density(double e_ev) const noexcept {
    const double hw = 0.5 * fwhm_;
    const double d = e_ev - center_.ev();
    return area_ * hw / (std::numbers::pi * (d * d + hw * hw));
  }

  friend bool operator==(const LorentzianPeak&, const LorentzianPeak&) = default;

private:
  PhotonEnergy center_;
  double fwhm_;
  double area_;
};

/// Sum of Lorentzians on a constant per-bin background.
class PeakModel {
public:
  PeakModel() = default;
  PeakModel(std::vector<LorentzianPeak> peaks, double background) : peaks_(std::move(peaks)), background_(background) {
    if (!(background >= 0.0) || !std::isfinite(background)) throw std::domain_error("background must be non-negative");
    std::stable_sort(peaks_.begin(), peaks_.end(),
                     [](const LorentzianPeak& a, const LorentzianPeak& b) { return a.center() < b.center(); });
  }

  const std::vector<LorentzianPeak>& peaks() const noexcept { return peaks_; }
  double background() const noexcept { return background_; }

  PeakModel scaled(double c) const {
    std::vector<LorentzianPeak> p;
    for (const auto& pk : peaks_) p.emplace_back(pk.center(), pk.fwhm_ev(), pk.area() * c);
    return PeakModel(std::move(p), background_ * c);
  }

  PeakModel without_background() const { return PeakModel(peaks_, 0.0); }

  /// Expected counts per bin on `axis` (bin widths from neighbour spacing).
  std::vector<double> evaluate(std::span<const double> axis) const {
    std::vector<double> out(axis.size(), background_);
    for (std::size_t i = 0; i < axis.size(); ++i) {
      const double w = local_bin_width(axis, i);
      for (const auto& pk : peaks_) out[i] += pk.density(axis[i]) * w;
    }
    return out;
  }

  static double local_bin_width(std::span<const double> axis, std::size_t i) {
    if (axis.size() < 2) return 1.0;
    if (i == 0) return axis[1] - axis[0];
    if (i + 1 == axis.size()) return axis[i] - axis[i - 1];
    return 0.5 * (axis[i + 1] - axis[i - 1]);
  }

  friend bool operator==(const PeakModel&, const PeakModel&) = default;

private:
  std::vector<LorentzianPeak> peaks_;
  double background_ = 0.0;
};

/// Unit-area Lorentzian spectrometer response.
class InstrumentResponse {
public:
  explicit InstrumentResponse(double fwhm_ev = 15.0 * kMicroEv) : fwhm_(fwhm_ev) {
    if (!(fwhm_ev > 0.0) || !std::isfinite(fwhm_ev)) throw std::domain_error("instrument response FWHM must be positive");
  }
  double fwhm_ev() const noexcept { return fwhm_; }

  /// Response mass falling in the bin of width h centred at offset m*h.
  double bin_weight(long m, double h) const noexcept {
    const double hw = 0.5 * fwhm_;
    return (std::atan((double(m) + 0.5) * h / hw) - std::atan((double(m) - 0.5) * h / hw)) / std::numbers::pi;
  }

  /// Zero-padding margin (samples) used on each side of a grid with spacing h.
  /// Ratios within 1e-9 of an integer are not rounded up, so h computed from
  /// an axis and the nominal spacing agree.
  std::size_t padding(double h) const { return std::size_t(std::ceil(10.0 * fwhm_ / h - 1e-9)); }

private:
  double fwhm_;
};

struct NoNoise {};
struct PoissonNoise {
  std::uint64_t seed = 0;
};
using NoiseModel = std::variant<NoNoise, PoissonNoise>;

namespace detail {

inline std::vector<double> poisson_draw(std::span<const double> mean, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::vector<double> out(mean.size());
  for (std::size_t i = 0; i < mean.size(); ++i) {
    if (mean[i] <= 0.0) {
      out[i] = 0.0;
      continue;
    }
    std::poisson_distribution<long long> dist(mean[i]);
    out[i] = double(dist(rng));
  }
  return out;
}

inline void require_uniform(const Spectrum& s, const char* what) {
  if (!s.is_uniform()) throw std::invalid_argument(std::string(what) + " requires a uniform energy axis");
}

inline void require_uniform(std::span<const double> axis, const char* what) {
  if (axis.size() < 2) throw std::invalid_argument(std::string(what) + " requires at least two samples");
  const double h = (axis.back() - axis.front()) / double(axis.size() - 1);
  for (std::size_t i = 1; i < axis.size(); ++i)
    if (std::abs(axis[i] - axis[i - 1] - h) > 1e-6 * h)
      throw std::invalid_argument(std::string(what) + " requires a uniform energy axis");
}

} // namespace detail

/// Model counts on `axis`, optionally with Poisson noise drawn from `seed`.
inline Spectrum synthesize(const PeakModel& model, std::span<const double> axis, const NoiseModel& noise = NoNoise{}) {
  std::vector<double> counts = model.evaluate(axis);
  if (const auto* p = std::get_if<PoissonNoise>(&noise)) counts = detail::poisson_draw(counts, p->seed);
  return Spectrum(std::vector<double>(axis.begin(), axis.end()), std::move(counts));
}

/// Discrete convolution of `model` with `irf` on a uniform axis. The model is
/// evaluated on the axis extended by `irf.padding()` samples per side and
/// zero beyond; the kernel holds the exact response mass per bin.
/// Grids coarser than fwhm/5 are accepted but lose accuracy.
inline Spectrum convolve(const PeakModel& model, const InstrumentResponse& irf, std::span<const double> axis) {
  detail::require_uniform(axis, "convolve");
  const std::size_t n = axis.size();
  const double h = (axis.back() - axis.front()) / double(n - 1);
  const std::size_t pad = irf.padding(h);
  std::vector<double> ext(n + 2 * pad);
  for (std::size_t j = 0; j < ext.size(); ++j) ext[j] = axis.front() + h * (double(j) - double(pad));
  if (!(ext.front() > 0.0)) throw std::domain_error("padded axis reaches non-positive energy");

  const std::vector<double> x = model.without_background().evaluate(ext);
  const long span = long(ext.size()) + long(n);
  std::vector<double> kernel(std::size_t(2 * span + 1));
  for (long m = -span; m <= span; ++m) kernel[std::size_t(m + span)] = irf.bin_weight(m, h);

  std::vector<double> y(n, model.background());
  for (std::size_t i = 0; i < n; ++i) {
    double acc = 0.0;
    for (std::size_t j = 0; j < ext.size(); ++j) acc += kernel[std::size_t(long(i + pad) - long(j) + span)] * x[j];
    y[i] += acc;
  }
  return Spectrum(std::vector<double>(axis.begin(), axis.end()), std::move(y));
}

// ---------------------------------------------------------------------------
// Peak fitting

struct PeakUncertainty {
  double center_ev = 0.0;
  double fwhm_ev = 0.0;
  double area = 0.0;
};

struct PeakFitResult {
  PeakModel model;
  std::vector<PeakUncertainty> errors;
  double background_err = 0.0;
  double residual = 0.0; // sum of squared residuals
  int iterations = 0;
  std::vector<std::string> warnings;
};

class FitError : public std::runtime_error {
public:
  FitError(const std::string& what, PeakFitResult best) : std::runtime_error(what), best_(std::move(best)) {}
  const PeakFitResult& best_so_far() const noexcept { return best_; }

private:
  PeakFitResult best_;
};

struct PeakFitOptions {
  int max_iterations = 500;
};

namespace detail {

inline double percentile(std::vector<double> v, double q) {
  std::sort(v.begin(), v.end());
  const double pos = q * double(v.size() - 1);
  const auto lo = std::size_t(std::floor(pos));
  const auto hi = std::min(lo + 1, v.size() - 1);
  return v[lo] + (pos - double(lo)) * (v[hi] - v[lo]);
}

/// Deterministic initial guess: strongest local maxima above bg + 5 sqrt(bg),
/// widths at three grid spacings.
inline PeakModel initial_peaks(const Spectrum& s, std::size_t n_peaks, std::vector<std::string>& warnings) {
  const auto e = s.energy();
  const auto c = s.counts();
  const std::size_t n = s.size();
  std::vector<double> sm(n);
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t lo = i == 0 ? 0 : i - 1;
    const std::size_t hi = std::min(n - 1, i + 1);
    double acc = 0.0;
    for (std::size_t k = lo; k <= hi; ++k) acc += c[k];
    sm[i] = acc / double(hi - lo + 1);
  }
  const double bg = percentile(std::vector<double>(c.begin(), c.end()), 0.1);
  const double threshold = bg + 5.0 * std::sqrt(std::max(bg, 0.0));

  std::vector<std::size_t> maxima;
  for (std::size_t i = 0; i < n; ++i) {
    const bool left = i == 0 || sm[i] >= sm[i - 1];
    const bool right = i + 1 == n || sm[i] > sm[i + 1];
    if (left && right) maxima.push_back(i);
  }
  std::stable_sort(maxima.begin(), maxima.end(), [&](std::size_t a, std::size_t b) { return sm[a] > sm[b]; });

  std::vector<bool> excluded(n, false);
  std::vector<std::size_t> chosen;
  bool below_threshold = false;
  for (std::size_t idx : maxima) {
    if (chosen.size() == n_peaks) break;
    if (excluded[idx]) continue;
    if (sm[idx] <= threshold) below_threshold = true;
    chosen.push_back(idx);
    const double half = bg + 0.5 * (sm[idx] - bg);
    std::size_t l = idx, r = idx;
    while (l > 0 && sm[l] > half) --l;
    while (r + 1 < n && sm[r] > half) ++r;
    const std::size_t lo = l >= (idx - l) ? l - (idx - l) : 0;
    const std::size_t hi = std::min(n - 1, r + (r - idx));
    for (std::size_t k = lo; k <= hi; ++k) excluded[k] = true;
  }
  if (below_threshold) warnings.push_back("initial peak below detection threshold bg + 5*sqrt(bg)");
  // Not enough separated maxima: split the strongest region.
  while (chosen.size() < n_peaks) {
    warnings.push_back("fewer resolved maxima than requested peaks");
    const std::size_t base = chosen.empty() ? n / 2 : chosen.front();
    const std::size_t shift = 3 * chosen.size() + 3;
    chosen.push_back(std::min(n - 1, base + shift));
  }

  std::vector<LorentzianPeak> peaks;
  for (std::size_t idx : chosen) {
    const double w = s.bin_width(idx);
    const double fwhm = 3.0 * w;
    const double height = std::max(c[idx] - bg, 1.0);
    peaks.emplace_back(PhotonEnergy(e[idx]), fwhm, height * std::numbers::pi * fwhm / (2.0 * w));
  }
  return PeakModel(std::move(peaks), std::max(bg, 0.0));
}

} // namespace detail

/// Least-squares fit of `n_peaks` Lorentzians plus a constant background.
/// Throws FitError (carrying the best model found) when the iteration limit is hit.
inline PeakFitResult fit_peaks(const Spectrum& s, std::size_t n_peaks, std::optional<PeakModel> init = std::nullopt,
                               const PeakFitOptions& options = {}) {
  if (n_peaks < 1) throw std::invalid_argument("fit_peaks needs at least one peak");
  if (s.size() < 5 * (3 * n_peaks + 1))
    throw std::invalid_argument("spectrum has too few points for " + std::to_string(n_peaks) + " peaks");

  PeakFitResult result;
  PeakModel start = init ? *init : detail::initial_peaks(s, n_peaks, result.warnings);
  if (start.peaks().size() != n_peaks) throw std::invalid_argument("initial model has the wrong number of peaks");

  // Work in micro-eV relative to the axis centre so parameters are O(1..1e3).
  const auto e = s.energy();
  const std::size_t m = s.size();
  const double ref = 0.5 * (e.front() + e.back());
  Eigen::VectorXd u(m), w(m), y(m);
  for (std::size_t i = 0; i < m; ++i) {
    u[Eigen::Index(i)] = (e[i] - ref) / kMicroEv;
    w[Eigen::Index(i)] = s.bin_width(i) / kMicroEv;
    y[Eigen::Index(i)] = s.counts()[i];
  }
  const auto np = Eigen::Index(3 * n_peaks + 1);
  Eigen::VectorXd p(np), lower(np), upper(np), scale(np);
  const double grid_u = s.mean_spacing() / kMicroEv;
  const double ymax = y.maxCoeff();
  for (std::size_t k = 0; k < n_peaks; ++k) {
    const auto& pk = start.peaks()[k];
    const auto b = Eigen::Index(3 * k);
    p[b] = (pk.center().ev() - ref) / kMicroEv;
    p[b + 1] = pk.fwhm_ev() / kMicroEv;
    p[b + 2] = pk.area();
    lower[b] = u[0];
    upper[b] = u[Eigen::Index(m - 1)];
    lower[b + 1] = 1e-3 * grid_u;
    upper[b + 1] = std::numeric_limits<double>::infinity();
    lower[b + 2] = 0.0;
    upper[b + 2] = std::numeric_limits<double>::infinity();
    scale[b] = grid_u;
    scale[b + 1] = grid_u;
    scale[b + 2] = std::max(1.0, ymax);
  }
  p[np - 1] = start.background();
  lower[np - 1] = 0.0;
  upper[np - 1] = std::numeric_limits<double>::infinity();
  scale[np - 1] = std::max(1.0, ymax);

  const auto model_at = [&](const Eigen::VectorXd& q, Eigen::Index i) {
    double v = q[np - 1];
    for (std::size_t k = 0; k < n_peaks; ++k) {
      const auto b = Eigen::Index(3 * k);
      const double d = u[i] - q[b];
      const double hw = 0.5 * q[b + 1];
      v += q[b + 2] * hw / (std::numbers::pi * (d * d + hw * hw)) * w[i];
    }
    return v;
  };
  const detail::ResidualFn resid = [&](const Eigen::VectorXd& q) {
    Eigen::VectorXd r(static_cast<Eigen::Index>(m));
    for (Eigen::Index i = 0; i < Eigen::Index(m); ++i) r[i] = model_at(q, i) - y[i];
    return r;
  };
  const detail::JacobianFn jac = [&](const Eigen::VectorXd& q) {
    Eigen::MatrixXd j(static_cast<Eigen::Index>(m), np);
    for (Eigen::Index i = 0; i < Eigen::Index(m); ++i) {
      for (std::size_t k = 0; k < n_peaks; ++k) {
        const auto b = Eigen::Index(3 * k);
        const double d = u[i] - q[b];
        const double g = q[b + 1];
        const double den = d * d + 0.25 * g * g;
        const double c = w[i] / (2.0 * std::numbers::pi);
        j(i, b) = q[b + 2] * g * c * 2.0 * d / (den * den);
        j(i, b + 1) = q[b + 2] * c * (den - 0.5 * g * g) / (den * den);
        j(i, b + 2) = g * c / den;
      }
      j(i, np - 1) = 1.0;
    }
    return j;
  };

  detail::LmOptions lm;
  lm.max_iterations = options.max_iterations;
  const auto fit = detail::levenberg_marquardt(resid, jac, p, lower, upper, scale, lm);

  const Eigen::MatrixXd cov = fit.robust_covariance();
  std::vector<LorentzianPeak> peaks;
  for (std::size_t k = 0; k < n_peaks; ++k) {
    const auto b = Eigen::Index(3 * k);
    peaks.emplace_back(PhotonEnergy(ref + fit.params[b] * kMicroEv), fit.params[b + 1] * kMicroEv, fit.params[b + 2]);
  }
  // Keep uncertainties aligned with the sorted peak order.
  std::vector<std::size_t> order(n_peaks);
  for (std::size_t k = 0; k < n_peaks; ++k) order[k] = k;
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return fit.params[Eigen::Index(3 * a)] < fit.params[Eigen::Index(3 * b)];
  });
  for (std::size_t k : order) {
    const auto b = Eigen::Index(3 * k);
    result.errors.push_back({std::sqrt(std::max(0.0, cov(b, b))) * kMicroEv,
                             std::sqrt(std::max(0.0, cov(b + 1, b + 1))) * kMicroEv,
                             std::sqrt(std::max(0.0, cov(b + 2, b + 2)))});
  }
  result.background_err = std::sqrt(std::max(0.0, cov(np - 1, np - 1)));
  result.model = PeakModel(std::move(peaks), fit.params[np - 1]);
  result.residual = fit.cost;
  result.iterations = fit.iterations;

  const auto& fp = result.model.peaks();
  for (std::size_t k = 1; k < fp.size(); ++k) {
    const double gap = fp[k].center().ev() - fp[k - 1].center().ev();
    if (gap < 1e-3 * std::min(fp[k].fwhm_ev(), fp[k - 1].fwhm_ev()))
      result.warnings.push_back("degenerate peaks: centres " + std::to_string(k - 1) + " and " + std::to_string(k) +
                                " collapsed");
  }
  if (!fit.converged) throw FitError("peak fit did not converge", result);
  return result;
}

} // namespace qdot
