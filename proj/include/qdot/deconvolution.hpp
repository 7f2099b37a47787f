#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "qdot/lineshape.hpp"
#include "qdot/spectrum.hpp"

namespace qdot {

enum class LambdaRule { discrepancy, predictive_risk };

struct DeconvolutionOptions {
  /// Regularisation weight; unset selects it by the discrepancy principle.
  std::optional<double> lambda;
  LambdaRule rule = LambdaRule::discrepancy;
  /// Peaks fitted to the recovered intrinsic spectrum.
  std::size_t n_peaks = 1;
  int max_iterations = 200;
  /// Relative objective change that ends the solver loop.
  double tolerance = 1e-12;
  /// Multiplies the Poisson noise estimate used by the discrepancy rule.
  double discrepancy_factor = 1.0;
  double lambda_min = 1e-10;
  double lambda_max = 1e2;
};

struct DeconvolutionResult {
  Spectrum intrinsic;
  PeakFitResult fit;
  double lambda = 0.0;
  double residual = 0.0; // |Kx - y|^2
  int iterations = 0;
  /// Objective value after every accepted iteration of the final solve.
  std::vector<double> objective_log;
  std::vector<std::string> warnings;
};

/// Discretised convolution operator y = K x for a uniform grid: x lives on the
/// axis extended by `pad` samples per side, y on the original axis.
class ConvolutionOperator {
public:
  ConvolutionOperator(const InstrumentResponse& irf, std::size_t n, double h) : n_(n), pad_(irf.padding(h)) {
    const auto cols = Eigen::Index(n + 2 * pad_);
    k_.resize(Eigen::Index(n), cols);
    for (Eigen::Index i = 0; i < Eigen::Index(n); ++i)
      for (Eigen::Index j = 0; j < cols; ++j) k_(i, j) = irf.bin_weight(long(i) + long(pad_) - long(j), h);
  }

  std::size_t rows() const noexcept { return n_; }
  std::size_t cols() const noexcept { return n_ + 2 * pad_; }
  std::size_t padding() const noexcept { return pad_; }
  const Eigen::MatrixXd& matrix() const noexcept { return k_; }
  /// Ratio of the largest to the smallest singular value of K.
  double condition_estimate() const {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(k_ * k_.transpose(), Eigen::EigenvaluesOnly);
    const double lo = eig.eigenvalues().minCoeff(), hi = eig.eigenvalues().maxCoeff();
    return lo > 0.0 ? std::sqrt(hi / lo) : std::numeric_limits<double>::infinity();
  }

private:
  std::size_t n_;
  std::size_t pad_;
  Eigen::MatrixXd k_;
};

namespace detail {

struct NnlsTikhonovSolve {
  Eigen::VectorXd x;
  double residual = 0.0;
  double objective = 0.0;
  int iterations = 0;
  bool converged = false;
  std::vector<double> log;
};

/// Projected Newton method (Bertsekas) for
///   min |K x - y|^2 + lambda |x|^2  subject to x >= 0,
/// with the Gram matrix Q = K^T K given. Newton steps are taken on the free
/// variables and an Armijo search along the projection arc keeps the
/// objective non-increasing from one iteration to the next.
inline NnlsTikhonovSolve solve_nnls_tikhonov(const Eigen::MatrixXd& ktk, const Eigen::VectorXd& kty, double yty,
                                             double lambda, Eigen::VectorXd x0, int max_iter, double tol,
                                             bool keep_log) {
  const auto n = ktk.rows();
  const auto objective = [&](const Eigen::VectorXd& x) {
    return x.dot(ktk * x) - 2.0 * kty.dot(x) + yty + lambda * x.squaredNorm();
  };
  const auto gradient = [&](const Eigen::VectorXd& x) {
    return Eigen::VectorXd(2.0 * (ktk * x - kty + lambda * x));
  };
  NnlsTikhonovSolve out;
  Eigen::VectorXd x = x0.cwiseMax(0.0);
  double fx = objective(x);
  if (keep_log) out.log.push_back(fx);
  const double scale = std::max({yty, kty.cwiseAbs().maxCoeff(), 1.0});

  for (int it = 0; it < max_iter; ++it) {
    out.iterations = it + 1;
    const Eigen::VectorXd g = gradient(x);
    const Eigen::VectorXd pg = x - (x - g).cwiseMax(0.0);
    const double pg_norm = pg.norm();
    if (pg_norm <= 1e-13 * scale) {
      out.converged = true;
      break;
    }
    const double eps = std::min(1e-6 * (x.cwiseAbs().maxCoeff() + 1.0), pg_norm);
    std::vector<Eigen::Index> free, bound;
    for (Eigen::Index i = 0; i < n; ++i) {
      if (x[i] <= eps && g[i] > 0.0)
        bound.push_back(i);
      else
        free.push_back(i);
    }
    Eigen::VectorXd d = Eigen::VectorXd::Zero(n);
    if (!free.empty()) {
      const auto nf = Eigen::Index(free.size());
      Eigen::MatrixXd h(nf, nf);
      Eigen::VectorXd gf(nf);
      for (Eigen::Index a = 0; a < nf; ++a) {
        gf[a] = g[free[std::size_t(a)]];
        for (Eigen::Index b = 0; b < nf; ++b) h(a, b) = 2.0 * ktk(free[std::size_t(a)], free[std::size_t(b)]);
        h(a, a) += 2.0 * lambda;
      }
      h.diagonal().array() += 1e-14 * h.diagonal().maxCoeff();
      Eigen::VectorXd df = h.llt().solve(-gf);
      for (Eigen::Index a = 0; a < nf; ++a) d[free[std::size_t(a)]] = df[a];
    }
    for (Eigen::Index i : bound) d[i] = -g[i] / (2.0 * (ktk(i, i) + lambda) + 1e-300);

    // Armijo search along the projection arc.
    double alpha = 1.0;
    Eigen::VectorXd trial;
    double ft = fx;
    bool accepted = false;
    for (int ls = 0; ls < 60; ++ls) {
      trial = (x + alpha * d).cwiseMax(0.0);
      ft = objective(trial);
      double pred = 0.0;
      for (Eigen::Index i : free) pred += -g[i] * alpha * d[i];
      for (Eigen::Index i : bound) pred += g[i] * (x[i] - trial[i]);
      if (fx - ft >= 1e-4 * pred && ft <= fx) {
        accepted = true;
        break;
      }
      alpha *= 0.5;
    }
    if (!accepted) {
      out.converged = true; // no further descent at working precision
      break;
    }
    const double drop = fx - ft;
    x = std::move(trial);
    fx = ft;
    if (keep_log) out.log.push_back(fx);
    if (drop <= tol * std::max(std::abs(fx), 1e-300)) {
      out.converged = true;
      break;
    }
  }
  out.x = std::move(x);
  out.objective = fx;
  out.residual = std::max(0.0, fx - lambda * out.x.squaredNorm());
  return out;
}

} // namespace detail

/// Non-negative Tikhonov deconvolution of a spectrum on a uniform energy grid.
inline DeconvolutionResult deconvolve(const Spectrum& s, const InstrumentResponse& irf,
                                      const DeconvolutionOptions& options = {}) {
  if (options.lambda && !(*options.lambda >= 0.0)) throw std::domain_error("regularisation lambda must be >= 0");
  detail::require_uniform(s, "deconvolve");

  const std::size_t n = s.size();
  const double h = s.mean_spacing();
  ConvolutionOperator op(irf, n, h);
  const Eigen::MatrixXd& k = op.matrix();
  Eigen::VectorXd y(static_cast<Eigen::Index>(n));
  for (std::size_t i = 0; i < n; ++i) y[Eigen::Index(i)] = s.counts()[i];

  const Eigen::MatrixXd ktk = k.transpose() * k;
  const Eigen::VectorXd kty = k.transpose() * y;
  const double yty = y.squaredNorm();

  std::vector<std::string> warnings;
  // Start from the measured counts, extended flat into the padding.
  Eigen::VectorXd x0(Eigen::Index(op.cols()));
  for (std::size_t j = 0; j < op.cols(); ++j) {
    const std::size_t src = j < op.padding() ? 0 : std::min(n - 1, j - op.padding());
    x0[Eigen::Index(j)] = y[Eigen::Index(src)];
  }

  const auto run = [&](double lam, const Eigen::VectorXd& start, bool log) {
    return detail::solve_nnls_tikhonov(ktk, kty, yty, lam, start, options.max_iterations, options.tolerance, log);
  };

  double lambda = 0.0;
  detail::NnlsTikhonovSolve sol;
  if (options.lambda) {
    lambda = *options.lambda;
    sol = run(lambda, x0, true);
  } else if (options.rule == LambdaRule::discrepancy) {
    // Morozov: the largest lambda whose residual stays within the Poisson
    // noise estimate sum(max(y, 1)). Lambda is stepped down from lambda_max
    // in half decades with warm starts, then bisected in log space.
    double target = 0.0;
    for (std::size_t i = 0; i < n; ++i) target += std::max(y[Eigen::Index(i)], 1.0);
    target *= options.discrepancy_factor;
    const double log_min = std::log10(options.lambda_min);
    double hi = std::log10(options.lambda_max);
    auto prev = run(options.lambda_max, x0, false);
    if (prev.residual <= target) {
      warnings.push_back("discrepancy target met at the largest lambda; data may be over-regularised");
      lambda = options.lambda_max;
    } else {
      std::optional<double> lo;
      Eigen::VectorXd warm = prev.x;
      double best_log = hi, best_res = prev.residual;
      for (double l = hi - 0.5; l >= log_min - 1e-12; l -= 0.5) {
        auto trial = run(std::pow(10.0, l), warm, false);
        warm = trial.x;
        if (trial.converged && trial.residual < best_res) {
          best_res = trial.residual;
          best_log = l;
        }
        if (trial.converged && trial.residual <= target) {
          lo = l;
          break;
        }
        hi = l;
      }
      if (!lo) {
        warnings.push_back("residual exceeds the noise estimate even at the smallest lambda");
        lambda = std::pow(10.0, best_log);
      } else {
        double l0 = *lo;
        for (int it = 0; it < 40 && hi - l0 > 1e-3; ++it) {
          const double mid = 0.5 * (l0 + hi);
          auto trial = run(std::pow(10.0, mid), warm, false);
          if (trial.converged && trial.residual <= target) {
            l0 = mid;
            warm = trial.x;
          } else {
            hi = mid;
          }
        }
        lambda = std::pow(10.0, l0);
      }
    }
    sol = run(lambda, x0, true);
  } else {
    // Unbiased predictive risk: |r|^2 + 2 tr(A) s2 - n s2, with the Poisson
    // variance per bin and tr(A) from the unconstrained Tikhonov smoother.
    double s2 = 0.0;
    for (std::size_t i = 0; i < n; ++i) s2 += std::max(y[Eigen::Index(i)], 1.0);
    s2 /= double(n);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(k * k.transpose(), Eigen::EigenvaluesOnly);
    const Eigen::VectorXd sv2 = eig.eigenvalues().cwiseMax(0.0);
    Eigen::VectorXd warm = x0;
    const auto risk = [&](double log_lam) {
      const double lam = std::pow(10.0, log_lam);
      double tr = 0.0;
      for (Eigen::Index i = 0; i < sv2.size(); ++i) tr += sv2[i] / (sv2[i] + lam);
      auto sol_l = run(lam, warm, false);
      warm = sol_l.x;
      return sol_l.residual + 2.0 * tr * s2 - double(n) * s2;
    };
    const double lo = std::log10(options.lambda_min), hi = std::log10(options.lambda_max);
    const int steps = 24;
    double best = lo, best_risk = std::numeric_limits<double>::infinity();
    for (int i = steps; i >= 0; --i) {
      const double l = lo + (hi - lo) * double(i) / steps;
      const double r = risk(l);
      if (r < best_risk) {
        best_risk = r;
        best = l;
      }
    }
    // Golden-section refinement inside the bracketing grid cell pair.
    const double cell = (hi - lo) / steps;
    double a = std::max(lo, best - cell), b = std::min(hi, best + cell);
    const double gr = 0.5 * (std::sqrt(5.0) - 1.0);
    double c = b - gr * (b - a), d = a + gr * (b - a);
    double fc = risk(c), fd = risk(d);
    for (int it = 0; it < 30 && b - a > 1e-3; ++it) {
      if (fc < fd) {
        b = d;
        d = c;
        fd = fc;
        c = b - gr * (b - a);
        fc = risk(c);
      } else {
        a = c;
        c = d;
        fc = fd;
        d = a + gr * (b - a);
        fd = risk(d);
      }
    }
    lambda = std::pow(10.0, 0.5 * (a + b));
    sol = run(lambda, x0, true);
  }

  if (lambda == 0.0 && op.condition_estimate() > 1e6)
    warnings.push_back("ill-conditioned instrument response with lambda = 0 (condition ~" +
                       std::to_string(op.condition_estimate()) + ")");
  if (!sol.converged) warnings.push_back("non-negative solver hit its iteration limit");

  std::vector<double> intrinsic(n);
  for (std::size_t i = 0; i < n; ++i) intrinsic[i] = std::max(0.0, sol.x[Eigen::Index(i + op.padding())]);
  Spectrum out(std::vector<double>(s.energy().begin(), s.energy().end()), std::move(intrinsic), s.metadata());

  DeconvolutionResult result{out, {}, lambda, sol.residual, sol.iterations, std::move(sol.log), std::move(warnings)};
  try {
    result.fit = fit_peaks(out, options.n_peaks);
  } catch (const FitError& err) {
    result.fit = err.best_so_far();
    result.warnings.push_back("intrinsic peak fit did not converge");
  }
  return result;
}

} // namespace qdot
