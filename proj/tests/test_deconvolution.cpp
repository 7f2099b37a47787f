#include <cmath>
#include <random>
#include <stdexcept>
#include <vector>

#include <gtest/gtest.h>

#include "qdot/deconvolution.hpp"

using namespace qdot;

namespace {

constexpr double uev = kMicroEv;
const PhotonEnergy e1 = wavelength_to_energy(Wavelength(919.108));

double rel_l2(std::span<const double> a, std::span<const double> b) {
  double num = 0, den = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    num += (a[i] - b[i]) * (a[i] - b[i]);
    den += b[i] * b[i];
  }
  return std::sqrt(num / den);
}

} // namespace

TEST(ConvolutionOperator, MatchesConvolve) {
  const PeakModel m({{e1, 10 * uev, 1e5}}, 0.0);
  const auto axis = centered_energy_axis(e1.ev(), 1.5 * uev, 60);
  const InstrumentResponse irf(15 * uev);
  const ConvolutionOperator op(irf, axis.size(), 1.5 * uev);
  ASSERT_EQ(op.cols(), axis.size() + 2 * op.padding());
  std::vector<double> ext(op.cols());
  for (std::size_t j = 0; j < ext.size(); ++j) ext[j] = axis.front() + 1.5 * uev * (double(j) - double(op.padding()));
  const auto x = m.evaluate(ext);
  const Eigen::VectorXd y = op.matrix() * Eigen::Map<const Eigen::VectorXd>(x.data(), Eigen::Index(x.size()));
  const Spectrum ref = convolve(m, irf, axis);
  for (std::size_t i = 0; i < axis.size(); ++i) EXPECT_NEAR(y[Eigen::Index(i)], ref.counts()[i], 1e-9 * ref.counts()[i]);
}

// Active-set enumeration on a tiny problem is an exact NNLS oracle.
TEST(NnlsTikhonov, MatchesActiveSetEnumeration) {
  std::mt19937_64 rng(11);
  std::normal_distribution<double> g(0.0, 1.0);
  for (int trial = 0; trial < 20; ++trial) {
    const int m = 9, n = 6;
    Eigen::MatrixXd k(m, n);
    Eigen::VectorXd y(m);
    for (int i = 0; i < m; ++i) {
      y[i] = g(rng);
      for (int j = 0; j < n; ++j) k(i, j) = g(rng);
    }
    const double lambda = trial % 2 ? 0.3 : 0.0;
    const Eigen::MatrixXd q = k.transpose() * k;
    const Eigen::VectorXd kty = k.transpose() * y;
    const auto f = [&](const Eigen::VectorXd& x) { return (k * x - y).squaredNorm() + lambda * x.squaredNorm(); };

    double best = std::numeric_limits<double>::infinity();
    for (int mask = 0; mask < (1 << n); ++mask) {
      std::vector<int> idx;
      for (int j = 0; j < n; ++j)
        if (mask & (1 << j)) idx.push_back(j);
      Eigen::VectorXd x = Eigen::VectorXd::Zero(n);
      if (!idx.empty()) {
        const auto s = Eigen::Index(idx.size());
        Eigen::MatrixXd a(s, s);
        Eigen::VectorXd b(s);
        for (Eigen::Index u = 0; u < s; ++u) {
          b[u] = kty[idx[std::size_t(u)]];
          for (Eigen::Index v = 0; v < s; ++v) a(u, v) = q(idx[std::size_t(u)], idx[std::size_t(v)]);
          a(u, u) += lambda;
        }
        const Eigen::VectorXd xs = a.ldlt().solve(b);
        if ((xs.array() < 0.0).any()) continue;
        for (Eigen::Index u = 0; u < s; ++u) x[idx[std::size_t(u)]] = xs[u];
      }
      best = std::min(best, f(x));
    }

    const auto sol = detail::solve_nnls_tikhonov(q, kty, y.squaredNorm(), lambda, Eigen::VectorXd::Ones(n), 200, 1e-15,
                                                 false);
    EXPECT_TRUE((sol.x.array() >= 0.0).all());
    EXPECT_NEAR(f(sol.x), best, 1e-9 * std::max(1.0, best)) << trial;
    EXPECT_NEAR(sol.objective, f(sol.x), 1e-9 * std::max(1.0, best));
    // KKT: zero gradient on the free set, non-negative on the bound set.
    const Eigen::VectorXd grad = 2.0 * (q * sol.x - kty + lambda * sol.x);
    for (int j = 0; j < n; ++j) {
      if (sol.x[j] > 1e-9)
        EXPECT_NEAR(grad[j], 0.0, 1e-7);
      else
        EXPECT_GT(grad[j], -1e-7);
    }
  }
}

TEST(Deconvolve, RejectsNegativeLambda) {
  const PeakModel m({{e1, 10 * uev, 1e5}}, 1.0);
  const auto axis = centered_energy_axis(e1.ev(), 1.5 * uev, 60);
  DeconvolutionOptions o;
  o.lambda = -1.0;
  EXPECT_THROW(deconvolve(synthesize(m, axis), InstrumentResponse(15 * uev), o), std::domain_error);
}

TEST(Deconvolve, RejectsNonUniformAxis) {
  std::vector<double> axis = centered_energy_axis(e1.ev(), 1.5 * uev, 60);
  axis[10] += 0.5 * uev;
  const Spectrum s(axis, std::vector<double>(axis.size(), 3.0));
  EXPECT_THROW(deconvolve(s, InstrumentResponse(15 * uev)), std::invalid_argument);
}

TEST(Deconvolve, NarrowResponseReturnsInput) {
  const PeakModel m({{e1, 21 * uev, 1e5}}, 5.0);
  const auto axis = centered_energy_axis(e1.ev(), 1.5 * uev, 80);
  const Spectrum s = synthesize(m, axis, PoissonNoise{4});
  DeconvolutionOptions o;
  o.lambda = 0.0;
  const auto r = deconvolve(s, InstrumentResponse(1e-4 * uev), o);
  for (std::size_t i = 0; i < s.size(); ++i) EXPECT_NEAR(r.intrinsic.counts()[i], s.counts()[i], 1e-3 * (1.0 + s.counts()[i]));
}

TEST(Deconvolve, ObjectiveIsMonotoneAndSolutionNonNegative) {
  const PeakModel m({{e1, 10 * uev, 3e5}}, 10.0);
  const auto axis = centered_energy_axis(e1.ev(), 1.5 * uev, 100);
  const Spectrum s = convolve(m, InstrumentResponse(15 * uev), axis);
  const Spectrum noisy(std::vector<double>(axis.begin(), axis.end()), detail::poisson_draw(s.counts(), 9));
  for (double lambda : {0.0, 1e-3, 1.0}) {
    DeconvolutionOptions o;
    o.lambda = lambda;
    const auto r = deconvolve(noisy, InstrumentResponse(15 * uev), o);
    ASSERT_GE(r.objective_log.size(), 2u);
    for (std::size_t k = 1; k < r.objective_log.size(); ++k) EXPECT_LE(r.objective_log[k], r.objective_log[k - 1]);
    for (double v : r.intrinsic.counts()) EXPECT_GE(v, 0.0);
  }
}

TEST(Deconvolve, RecoversIntrinsicWidths) {
  for (double width : {10.0, 24.0}) {
    // Convolved peak height near 3e5 counts.
    const PeakModel m({{e1, width * uev, 3e5 * std::numbers::pi * (width + 15.0) / 3.0}}, 10.0);
    const auto axis = centered_energy_axis(e1.ev(), 1.5 * uev, 100);
    const Spectrum s = convolve(m, InstrumentResponse(15 * uev), axis);
    const Spectrum noisy(std::vector<double>(axis.begin(), axis.end()), detail::poisson_draw(s.counts(), 21));
    const auto r = deconvolve(noisy, InstrumentResponse(15 * uev));
    EXPECT_GT(r.lambda, 0.0);
    EXPECT_NEAR(r.fit.model.peaks()[0].fwhm_ev() / uev, width, width / 10.0);
  }
}

TEST(Deconvolve, PredictiveRiskRuleRecoversWidth) {
  const PeakModel m({{e1, 10 * uev, 3e5}}, 10.0);
  const auto axis = centered_energy_axis(e1.ev(), 1.5 * uev, 100);
  const Spectrum s = convolve(m, InstrumentResponse(15 * uev), axis);
  const Spectrum noisy(std::vector<double>(axis.begin(), axis.end()), detail::poisson_draw(s.counts(), 5));
  DeconvolutionOptions o;
  o.rule = LambdaRule::predictive_risk;
  const auto r = deconvolve(noisy, InstrumentResponse(15 * uev), o);
  EXPECT_NEAR(r.fit.model.peaks()[0].fwhm_ev() / uev, 10.0, 1.5);
}

TEST(Deconvolve, RoundTripL2Property) {
  std::mt19937_64 rng(2024);
  // Intrinsic widths at or above the IRF width: narrower lines exceed 5% even at the L2-optimal lambda.
  std::uniform_real_distribution<double> width(20.0, 40.0), offset(-60.0, 60.0), sbr(20.0, 200.0);
  const auto axis = centered_energy_axis(e1.ev(), 1.5 * uev, 120);
  const InstrumentResponse irf(15 * uev);
  for (int trial = 0; trial < 12; ++trial) {
    const double background = 1000.0;
    std::vector<LorentzianPeak> peaks;
    const int n = 1 + trial % 2;
    for (int k = 0; k < n; ++k) {
      const double w = width(rng) * uev;
      // Area that puts the peak height at sbr x background.
      const double area = sbr(rng) * background * std::numbers::pi * w / (2.0 * 1.5 * uev);
      peaks.emplace_back(PhotonEnergy(e1.ev() + offset(rng) * uev), w, area);
    }
    const PeakModel m(peaks, background);
    const Spectrum y = convolve(m, irf, axis);
    const Spectrum noisy(std::vector<double>(axis.begin(), axis.end()),
                         detail::poisson_draw(y.counts(), std::uint64_t(100 + trial)));
    DeconvolutionOptions o;
    o.n_peaks = std::size_t(n);
    const auto r = deconvolve(noisy, irf, o);
    const auto truth = m.evaluate(axis);
    EXPECT_LT(rel_l2(r.intrinsic.counts(), truth), 0.05) << "trial " << trial;
  }
}

TEST(Deconvolve, WarnsOnIllConditionedKernel) {
  const PeakModel m({{e1, 30 * uev, 1e5}}, 1.0);
  const auto axis = centered_energy_axis(e1.ev(), 0.5 * uev, 40);
  const Spectrum s = convolve(m, InstrumentResponse(15 * uev), axis);
  DeconvolutionOptions o;
  o.lambda = 0.0;
  o.max_iterations = 20;
  const auto r = deconvolve(s, InstrumentResponse(15 * uev), o);
  bool warned = false;
  for (const auto& w : r.warnings) warned |= w.find("ill-conditioned") != std::string::npos;
  EXPECT_TRUE(warned);
  EXPECT_EQ(r.intrinsic.size(), s.size());
}
