#pragma once

// Bright-exciton fine structure of a dot whose hole states mix heavy- and
// light-hole character.
//
// Bloch-basis convention (Kane matrix element set to 1, frame x = [-1 1 0],
// y = [-1 -1 0], z = [0 0 1], polariser angle measured from x towards y):
//
//   |3/2, +3/2> = -(X + iY) up / sqrt2
//   |3/2, +1/2> = [-(X + iY) down + 2 Z up] / sqrt6
//   |3/2, -1/2> = [ (X - iY) up + 2 Z down] / sqrt6
//   |3/2, -3/2> =  (X - iY) down / sqrt2
//
// with electron states |1/2, +-1/2> = S up, S down and <S|x|X> = <S|y|Y> = <S|z|Z> = 1.
// The mixed hole states are
//
//   |h+-> = sqrt(1 - b^2 - g^2) |3/2, +-3/2> + b e^{+-2i theta} |3/2, -+1/2> +- g e^{+-2i phi} |3/2, +-1/2>
//
// and the two fine-structure dipoles are d_+- = <e+|r|h+> +- <e-|r|h->.

#include <algorithm>
#include <array>
#include <cmath>
#include <complex>
#include <limits>
#include <numbers>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "qdot/detail/levenberg_marquardt.hpp"

namespace qdot {

struct HoleMixingParams {
  double beta = 0.0;
  double gamma = 0.0;
  double theta_mix = 0.0; // rad
  double phi_mix = 0.0;   // rad; no in-plane effect in this geometry

  void validate() const {
    if (!(beta >= 0.0) || !(gamma >= 0.0) || !std::isfinite(beta) || !std::isfinite(gamma))
      throw std::domain_error("mixing amplitudes must be non-negative");
    if (beta * beta + gamma * gamma > 1.0) throw std::domain_error("beta^2 + gamma^2 exceeds 1");
  }

  /// Amplitude of the heavy-hole component.
  double heavy_hole_amplitude() const { return std::sqrt(std::max(0.0, 1.0 - beta * beta - gamma * gamma)); }

  /// Phases reduced to [0, pi).
  HoleMixingParams normalized() const {
    auto wrap = [](double a) {
      double r = std::fmod(a, std::numbers::pi);
      return r < 0.0 ? r + std::numbers::pi : r;
    };
    return {beta, gamma, wrap(theta_mix), wrap(phi_mix)};
  }
};

using ComplexVector3 = Eigen::Vector3cd;

struct FssDipolePair {
  ComplexVector3 plus;
  ComplexVector3 minus;
};

inline FssDipolePair dipoles_from_mixing(const HoleMixingParams& p) {
  p.validate();
  using C = std::complex<double>;
  const C i(0.0, 1.0);
  const double s2 = std::numbers::sqrt2;
  const double s6 = std::sqrt(6.0);
  const double a = p.heavy_hole_amplitude();
  const ComplexVector3 x(1.0, 0.0, 0.0), y(0.0, 1.0, 0.0), z(0.0, 0.0, 1.0);
  const C et = std::exp(2.0 * i * p.theta_mix);
  const C ep = std::exp(2.0 * i * p.phi_mix);

  const ComplexVector3 e_up = -a * (x + i * y) / s2 + p.beta * et * (x - i * y) / s6 + p.gamma * ep * 2.0 * z / s6;
  const ComplexVector3 e_down =
      a * (x - i * y) / s2 - p.beta * std::conj(et) * (x + i * y) / s6 - p.gamma * std::conj(ep) * 2.0 * z / s6;
  return {e_up + e_down, e_up - e_down};
}

/// Intensity through a linear polariser at `angle_deg`: |e.d+|^2 + |e.d-|^2.
inline double polarized_intensity(const FssDipolePair& d, double angle_deg) {
  const double a = angle_deg * std::numbers::pi / 180.0;
  const double cx = std::cos(a), sy = std::sin(a);
  const auto proj = [&](const ComplexVector3& v) { return std::norm(cx * v[0] + sy * v[1]); };
  return proj(d.plus) + proj(d.minus);
}

struct PolarPattern {
  std::vector<double> angles_deg;
  std::vector<double> intensities;
  std::vector<double> uncertainties; // empty, or one per angle

  std::size_t size() const noexcept { return angles_deg.size(); }

  void validate() const {
    if (angles_deg.size() != intensities.size()) throw std::invalid_argument("polar pattern length mismatch");
    if (!uncertainties.empty() && uncertainties.size() != angles_deg.size())
      throw std::invalid_argument("polar pattern uncertainty length mismatch");
    for (std::size_t k = 0; k < size(); ++k) {
      if (!(angles_deg[k] >= 0.0 && angles_deg[k] < 360.0))
        throw std::domain_error("polariser angle outside [0, 360): " + std::to_string(angles_deg[k]));
      if (!(intensities[k] >= 0.0)) throw std::domain_error("polar intensity must be non-negative");
      if (!uncertainties.empty() && !(uncertainties[k] >= 0.0))
        throw std::domain_error("polar uncertainty must be non-negative");
    }
  }
};

inline PolarPattern polar_pattern(const FssDipolePair& d, const std::vector<double>& angles_deg) {
  PolarPattern out;
  out.angles_deg = angles_deg;
  out.intensities.reserve(angles_deg.size());
  for (double a : angles_deg) out.intensities.push_back(polarized_intensity(d, a));
  return out;
}

/// Angles 0, step, 2*step, ... below `end_deg`.
inline std::vector<double> polarizer_angles(double step_deg = 10.0, double end_deg = 180.0) {
  if (!(step_deg > 0.0)) throw std::invalid_argument("angle step must be positive");
  std::vector<double> a;
  for (int k = 0; double(k) * step_deg < end_deg - 1e-9; ++k) a.push_back(double(k) * step_deg);
  return a;
}

namespace detail {

/// The closed-form denominator equals (sqrt(1 - beta^2) - beta/sqrt(3))^2 - gamma^2;
/// its first zero ends the branch on which the ellipticity grows with beta.
inline double ellipticity_branch_limit(double gamma) {
  double lo = 0.0, hi = 1.0;
  for (int it = 0; it < 200; ++it) {
    const double mid = 0.5 * (lo + hi);
    (std::sqrt(1.0 - mid * mid) - mid / std::sqrt(3.0) > gamma ? lo : hi) = mid;
  }
  return lo;
}

} // namespace detail

/// Closed-form polar-pattern ellipticity for mixing amplitudes (beta, gamma).
inline double closed_form_ellipticity(double beta, double gamma) {
  if (!(beta >= 0.0) || !(gamma >= 0.0)) throw std::domain_error("mixing amplitudes must be non-negative");
  if (beta * beta + gamma * gamma > 1.0) throw std::domain_error("beta^2 + gamma^2 exceeds 1");
  const double root = 2.0 * beta * std::sqrt((1.0 - beta * beta) / 3.0);
  const double base = 1.0 - 2.0 / 3.0 * beta * beta - gamma * gamma;
  const double den = base - root;
  if (!(den > 0.0)) throw std::domain_error("mixing outside formula's validity");
  return (base + root) / den;
}

/// Inverts closed_form_ellipticity in beta at fixed gamma by bisection.
inline double beta_from_ellipticity(double ellipticity, double gamma = 0.0) {
  if (!(ellipticity >= 1.0)) throw std::domain_error("ellipticity must be >= 1");
  if (!(gamma >= 0.0 && gamma < 1.0)) throw std::domain_error("gamma must lie in [0, 1)");
  if (ellipticity == 1.0) return 0.0;
  double b_hi = detail::ellipticity_branch_limit(gamma) * (1.0 - 1e-9), b_lo = 0.0;
  if (closed_form_ellipticity(b_hi, gamma) < ellipticity) return b_hi;
  for (int it = 0; it < 200 && b_hi - b_lo > 1e-15; ++it) {
    const double mid = 0.5 * (b_lo + b_hi);
    if (closed_form_ellipticity(mid, gamma) < ellipticity)
      b_lo = mid;
    else
      b_hi = mid;
  }
  return 0.5 * (b_lo + b_hi);
}

/// Harmonic summary of a 180-degree-periodic pattern I = c + a cos 2phi + b sin 2phi.
struct PatternHarmonics {
  double mean = 0.0;
  double cos2 = 0.0;
  double sin2 = 0.0;

  double amplitude() const { return std::hypot(cos2, sin2); }
  double ellipticity() const {
    const double r = amplitude();
    return mean - r > 0.0 ? (mean + r) / (mean - r) : std::numeric_limits<double>::infinity();
  }
  /// Direction of maximum intensity in [0, 180).
  double major_axis_deg() const {
    double a = 0.5 * std::atan2(sin2, cos2) * 180.0 / std::numbers::pi;
    return a < 0.0 ? a + 180.0 : a;
  }
};

/// Exact harmonics of the model pattern from four polariser settings.
inline PatternHarmonics pattern_harmonics(const FssDipolePair& d) {
  const double i0 = polarized_intensity(d, 0.0), i45 = polarized_intensity(d, 45.0);
  const double i90 = polarized_intensity(d, 90.0), i135 = polarized_intensity(d, 135.0);
  return {0.25 * (i0 + i45 + i90 + i135), 0.5 * (i0 - i90), 0.5 * (i45 - i135)};
}

/// Mirrors half-turn data onto [180, 360) using I(phi + 180) = I(phi).
/// Points that already have their mirror partner are left alone.
inline PolarPattern extend_polarizer_data(const PolarPattern& in) {
  in.validate();
  constexpr double tol = 1e-9;
  for (std::size_t i = 0; i < in.size(); ++i)
    for (std::size_t j = i + 1; j < in.size(); ++j)
      if (std::abs(in.angles_deg[i] - in.angles_deg[j]) < tol)
        throw std::invalid_argument("duplicate polariser angle " + std::to_string(in.angles_deg[i]));

  struct Point {
    double angle, value, err;
  };
  std::vector<Point> pts;
  const bool has_err = !in.uncertainties.empty();
  for (std::size_t i = 0; i < in.size(); ++i)
    pts.push_back({in.angles_deg[i], in.intensities[i], has_err ? in.uncertainties[i] : 0.0});
  const auto present = [&](double a) {
    return std::any_of(pts.begin(), pts.end(), [&](const Point& p) { return std::abs(p.angle - a) < tol; });
  };
  const std::size_t original = pts.size();
  for (std::size_t i = 0; i < original; ++i) {
    const Point p = pts[i];
    const double partner = p.angle < 180.0 ? p.angle + 180.0 : p.angle - 180.0;
    if (!present(partner)) pts.push_back({partner, p.value, p.err});
  }
  std::stable_sort(pts.begin(), pts.end(), [](const Point& a, const Point& b) { return a.angle < b.angle; });
  PolarPattern out;
  for (const auto& p : pts) {
    out.angles_deg.push_back(p.angle);
    out.intensities.push_back(p.value);
    if (has_err) out.uncertainties.push_back(p.err);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Fitting

struct PolarFitOptions {
  double fixed_gamma = 0.0;
  int max_iterations = 500;
  /// Data whose harmonic ellipticity falls below this are reported as beta = 0.
  double circular_threshold = 1.05;
};

struct PolarFitResult {
  HoleMixingParams params;
  double scale = 0.0;
  double ellipticity = 1.0;
  double major_axis_deg = 0.0;
  double residual = 0.0; // weighted sum of squares
  double beta_err = 0.0;
  double theta_err_deg = 0.0;
  std::optional<double> beta_upper_bound; // set when the data are consistent with a circle
  int iterations = 0;
  std::vector<std::string> warnings;

  double theta_deg() const { return params.theta_mix * 180.0 / std::numbers::pi; }
};

class PolarFitError : public std::runtime_error {
public:
  PolarFitError(const std::string& what, PolarFitResult best) : std::runtime_error(what), best_(std::move(best)) {}
  const PolarFitResult& best_so_far() const noexcept { return best_; }

private:
  PolarFitResult best_;
};

namespace detail {

inline std::vector<double> polar_weights(const PolarPattern& data) {
  std::vector<double> w(data.size());
  for (std::size_t k = 0; k < data.size(); ++k) {
    double sigma = data.uncertainties.empty() ? 0.0 : data.uncertainties[k];
    if (!(sigma > 0.0)) sigma = std::sqrt(std::max(data.intensities[k], 1.0));
    w[k] = 1.0 / sigma;
  }
  return w;
}

struct HarmonicFit {
  PatternHarmonics h;
  Eigen::Matrix3d cov;
};

inline HarmonicFit fit_harmonics(const PolarPattern& data, const std::vector<double>& w) {
  const auto m = Eigen::Index(data.size());
  Eigen::MatrixXd a(m, 3);
  Eigen::VectorXd b(m);
  for (Eigen::Index k = 0; k < m; ++k) {
    const double phi = 2.0 * data.angles_deg[std::size_t(k)] * std::numbers::pi / 180.0;
    const double wk = w[std::size_t(k)];
    a(k, 0) = wk;
    a(k, 1) = wk * std::cos(phi);
    a(k, 2) = wk * std::sin(phi);
    b[k] = wk * data.intensities[std::size_t(k)];
  }
  const Eigen::Matrix3d ata = a.transpose() * a;
  const Eigen::Vector3d c = ata.ldlt().solve(a.transpose() * b);
  const double chi2 = (a * c - b).squaredNorm();
  const double dof = m > 3 ? double(m - 3) : 1.0;
  // Scale the covariance by the reduced chi^2 only when the weights underestimate the scatter.
  const Eigen::Matrix3d cov = ata.inverse() * std::max(1.0, chi2 / dof);
  return {{c[0], c[1], c[2]}, cov};
}

} // namespace detail

/// Weighted least-squares fit of the fine-structure pattern over (beta, theta, scale)
/// with gamma held fixed.
inline PolarFitResult fit_polar(const PolarPattern& data, const PolarFitOptions& options = {}) {
  data.validate();
  {
    std::vector<double> distinct;
    for (double a : data.angles_deg)
      if (std::none_of(distinct.begin(), distinct.end(), [&](double d) { return std::abs(d - a) < 1e-9; }))
        distinct.push_back(a);
    if (distinct.size() < 8) throw std::invalid_argument("polar fit needs at least 8 distinct angles");
    const auto [lo, hi] = std::minmax_element(distinct.begin(), distinct.end());
    if (*hi - *lo < 150.0) throw std::invalid_argument("polar data must span at least 150 degrees");
  }
  const double gamma = options.fixed_gamma;
  if (!(gamma >= 0.0 && gamma < 1.0)) throw std::domain_error("fixed gamma must lie in [0, 1)");

  const std::vector<double> w = detail::polar_weights(data);
  const auto harm = detail::fit_harmonics(data, w);
  PolarFitResult result;

  const double deg = std::numbers::pi / 180.0;
  const auto unit_mean = [&](double beta) {
    const double a2 = 1.0 - beta * beta - gamma * gamma;
    return 2.0 * (a2 + beta * beta / 3.0);
  };

  if (harm.h.ellipticity() < options.circular_threshold) {
    // Indistinguishable from a circle: beta = 0 with a two-sigma bound.
    const auto& h = harm.h;
    const double r = h.amplitude();
    double sigma_r;
    if (r > 0.0)
      sigma_r = std::sqrt(std::max(0.0, (h.cos2 * h.cos2 * harm.cov(1, 1) + h.sin2 * h.sin2 * harm.cov(2, 2) +
                                         2.0 * h.cos2 * h.sin2 * harm.cov(1, 2)) /
                                            (r * r)));
    else
      sigma_r = std::sqrt(0.5 * (harm.cov(1, 1) + harm.cov(2, 2)));
    const double r_up = r + 2.0 * sigma_r;
    const double e_up = h.mean - r_up > 0.0 ? (h.mean + r_up) / (h.mean - r_up) : 1e6;
    result.params = {0.0, gamma, 0.0, 0.0};
    result.scale = h.mean / unit_mean(0.0);
    result.ellipticity = 1.0;
    result.major_axis_deg = h.major_axis_deg();
    result.beta_upper_bound = beta_from_ellipticity(std::max(1.0, e_up), gamma);
    const auto d = dipoles_from_mixing(result.params);
    for (std::size_t k = 0; k < data.size(); ++k) {
      const double r_k = (result.scale * polarized_intensity(d, data.angles_deg[k]) - data.intensities[k]) * w[k];
      result.residual += r_k * r_k;
    }
    result.warnings.push_back("pattern consistent with circular; beta reported as 0");
    return result;
  }

  // Start from the harmonic estimate; the pattern maximum sits at 90 deg + theta.
  const double e0 = harm.h.ellipticity();
  // Beyond a = beta/sqrt(3) the light-hole term dominates and the same
  // ellipticity recurs; keep to the heavy-hole-dominated branch.
  const double beta_max = std::sqrt(0.75 * (1.0 - gamma * gamma)) * (1.0 - 1e-9);
  const double beta0 = std::isfinite(e0) ? std::min(beta_from_ellipticity(e0, gamma), 0.95 * beta_max) : 0.9 * beta_max;
  const double theta0 = (harm.h.major_axis_deg() - 90.0) * deg;
  const double scale0 = harm.h.mean / unit_mean(beta0);

  const auto m = Eigen::Index(data.size());
  const auto model = [&](const Eigen::VectorXd& q) {
    const auto d = dipoles_from_mixing({q[0], gamma, q[1], 0.0});
    Eigen::VectorXd out(m);
    for (Eigen::Index k = 0; k < m; ++k) out[k] = q[2] * polarized_intensity(d, data.angles_deg[std::size_t(k)]);
    return out;
  };
  const detail::ResidualFn resid = [&](const Eigen::VectorXd& q) {
    Eigen::VectorXd r = model(q);
    for (Eigen::Index k = 0; k < m; ++k) r[k] = (r[k] - data.intensities[std::size_t(k)]) * w[std::size_t(k)];
    return r;
  };
  const double scale_ref = std::max(std::abs(scale0), 1e-300);
  const detail::JacobianFn jac = [&](const Eigen::VectorXd& q) {
    Eigen::VectorXd steps(3);
    steps << 1e-7, 1e-7, 1e-7 * scale_ref;
    // Keep the beta stencil inside the admissible range.
    Eigen::VectorXd c = q;
    c[0] = std::clamp(c[0], steps[0], beta_max - steps[0]);
    Eigen::MatrixXd j = detail::numeric_jacobian(resid, c, steps);
    return j;
  };

  Eigen::VectorXd p(3), lower(3), upper(3), scale(3);
  p << beta0, theta0, scale0;
  lower << 0.0, -std::numeric_limits<double>::infinity(), 0.0;
  upper << beta_max, std::numeric_limits<double>::infinity(), std::numeric_limits<double>::infinity();
  scale << 1e-3, 1e-3, scale_ref;
  detail::LmOptions lm;
  lm.max_iterations = options.max_iterations;
  lm.ftol = 1e-15;
  lm.xtol = 1e-13;
  const auto fit = detail::levenberg_marquardt(resid, jac, p, lower, upper, scale, lm);

  result.params = HoleMixingParams{fit.params[0], gamma, fit.params[1], 0.0}.normalized();
  result.scale = fit.params[2];
  result.residual = fit.cost;
  result.iterations = fit.iterations;
  const Eigen::MatrixXd cov = fit.covariance();
  result.beta_err = std::sqrt(std::max(0.0, cov(0, 0)));
  result.theta_err_deg = std::sqrt(std::max(0.0, cov(1, 1))) / deg;
  const auto h = pattern_harmonics(dipoles_from_mixing(result.params));
  result.ellipticity = h.ellipticity();
  result.major_axis_deg = h.major_axis_deg();
  if (!fit.converged) throw PolarFitError("polar fit did not converge", result);
  return result;
}

} // namespace qdot
