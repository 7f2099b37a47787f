#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>

#include <Eigen/Dense>

namespace qdot::detail {

struct LmOptions {
  int max_iterations = 500;
  /// Stop once an accepted step lowers the cost by less than this fraction.
  double ftol = 1e-12;
  /// Stop once every parameter moves by less than xtol * (|p| + scale).
  double xtol = 1e-12;
  double initial_damping = 1e-3;
};

struct LmResult {
  Eigen::VectorXd params;
  Eigen::VectorXd residuals;
  Eigen::MatrixXd jacobian;
  double cost = 0.0; // sum of squared residuals
  int iterations = 0;
  bool converged = false;

  /// Covariance estimate s^2 (J^T J)^-1 with s^2 = cost / (m - n).
  Eigen::MatrixXd covariance() const {
    const auto m = residuals.size();
    const auto n = params.size();
    const double s2 = m > n ? cost / double(m - n) : 0.0;
    Eigen::MatrixXd jtj = jacobian.transpose() * jacobian;
    return s2 * jtj.completeOrthogonalDecomposition().pseudoInverse();
  }

  /// Sandwich estimate (J^T J)^-1 J^T diag(r^2) J (J^T J)^-1 scaled by m / (m - n);
  /// valid for unweighted fits whose noise variance differs between points.
  Eigen::MatrixXd robust_covariance() const {
    const auto m = residuals.size();
    const auto n = params.size();
    const double dof = m > n ? double(m) / double(m - n) : 0.0;
    const Eigen::MatrixXd bread = (jacobian.transpose() * jacobian).completeOrthogonalDecomposition().pseudoInverse();
    const Eigen::MatrixXd meat = jacobian.transpose() * residuals.array().square().matrix().asDiagonal() * jacobian;
    return dof * bread * meat * bread;
  }
};

using ResidualFn = std::function<Eigen::VectorXd(const Eigen::VectorXd&)>;
using JacobianFn = std::function<Eigen::MatrixXd(const Eigen::VectorXd&)>;

/// Central-difference Jacobian; `steps` gives the absolute step per parameter.
inline Eigen::MatrixXd numeric_jacobian(const ResidualFn& f, const Eigen::VectorXd& p, const Eigen::VectorXd& steps) {
  Eigen::VectorXd r0 = f(p);
  Eigen::MatrixXd jac(r0.size(), p.size());
  for (Eigen::Index j = 0; j < p.size(); ++j) {
    Eigen::VectorXd hi = p, lo = p;
    hi[j] += steps[j];
    lo[j] -= steps[j];
    jac.col(j) = (f(hi) - f(lo)) / (2.0 * steps[j]);
  }
  return jac;
}

/// Box-constrained Levenberg-Marquardt with Marquardt diagonal scaling.
/// Steps are projected onto [lower, upper]. `scale` sets the absolute size
/// of each parameter for the step-length test.
inline LmResult levenberg_marquardt(const ResidualFn& f, const JacobianFn& jac, Eigen::VectorXd p,
                                    const Eigen::VectorXd& lower, const Eigen::VectorXd& upper,
                                    const Eigen::VectorXd& scale, const LmOptions& opt = {}) {
  const auto n = p.size();
  p = p.cwiseMax(lower).cwiseMin(upper);
  LmResult res;
  res.residuals = f(p);
  res.cost = res.residuals.squaredNorm();
  res.jacobian = jac(p);
  double mu = opt.initial_damping;

  for (int it = 0; it < opt.max_iterations; ++it) {
    res.iterations = it + 1;
    Eigen::MatrixXd jtj = res.jacobian.transpose() * res.jacobian;
    Eigen::VectorXd g = res.jacobian.transpose() * res.residuals;
    // Parameters pinned at a bound by the gradient stay fixed for this step.
    for (Eigen::Index j = 0; j < n; ++j) {
      const bool at_lower = p[j] <= lower[j] && g[j] > 0.0;
      const bool at_upper = p[j] >= upper[j] && g[j] < 0.0;
      if (!at_lower && !at_upper) continue;
      jtj.row(j).setZero();
      jtj.col(j).setZero();
      jtj(j, j) = 1.0;
      g[j] = 0.0;
    }
    Eigen::VectorXd diag = jtj.diagonal();
    const double dmax = std::max(diag.maxCoeff(), std::numeric_limits<double>::min());
    for (Eigen::Index j = 0; j < n; ++j) diag[j] = std::max(diag[j], 1e-12 * dmax);

    bool accepted = false;
    while (mu < 1e20) {
      Eigen::MatrixXd a = jtj;
      a.diagonal() += mu * diag;
      Eigen::VectorXd step = a.ldlt().solve(-g);
      Eigen::VectorXd trial = (p + step).cwiseMax(lower).cwiseMin(upper);
      Eigen::VectorXd r = f(trial);
      const double cost = r.squaredNorm();
      if (std::isfinite(cost) && cost <= res.cost) {
        const double drop = res.cost - cost;
        Eigen::VectorXd moved = trial - p;
        bool small_step = true;
        for (Eigen::Index j = 0; j < n; ++j)
          if (std::abs(moved[j]) > opt.xtol * (std::abs(p[j]) + scale[j])) small_step = false;
        p = trial;
        res.residuals = std::move(r);
        res.cost = cost;
        res.jacobian = jac(p);
        mu = std::max(mu / 10.0, 1e-15);
        accepted = true;
        if (drop <= opt.ftol * std::max(cost, std::numeric_limits<double>::min()) || small_step) {
          res.params = p;
          res.converged = true;
          return res;
        }
        break;
      }
      mu *= 10.0;
    }
    if (!accepted) {
      // No descent direction left at machine precision: this is a minimum.
      res.params = p;
      res.converged = true;
      return res;
    }
  }
  res.params = p;
  res.converged = false;
  return res;
}

} // namespace qdot::detail
