#include <gtest/gtest.h>

#include <cmath>

#include "kdnls/scattering.hpp"
#include "oracles.hpp"

using namespace kdnls;

namespace {

Spectrum gaussian_profile(const Grid& g, double amp = 0.1, double shift = 0.0) {
  return forward(Field::sample(g, [&](double x) { return amp * std::exp(-0.5 * x * x) * std::polar(1.0, shift * x); }));
}

// Trajectory with snapshot norms prescribed by m(t); the shape is a fixed Gaussian.
Trajectory norm_trajectory(const Grid& g, double beta, const std::vector<double>& times,
                           const std::function<double(double)>& m) {
  Trajectory tr;
  tr.config.coef = {1.0, beta};
  const Spectrum base = gaussian_profile(g, 1.0);
  const double n0 = l2_norm(base);
  for (double t : times) tr.snapshots.push_back({t, (m(t) / n0) * base});
  tr.final_state = tr.snapshots.back();
  return tr;
}

std::vector<double> mass_times() {
  std::vector<double> ts{0.0};
  for (double t = 5; t <= 200; t += 5) ts.push_back(t);
  return ts;
}

}  // namespace

TEST(HilbertXi, CosineToSine) {
  const std::size_t n = 64;
  std::vector<double> a(n), s(n);
  for (std::size_t k = 0; k < n; ++k) {
    a[k] = std::cos(2 * pi * 5 * k / n);
    s[k] = std::sin(2 * pi * 5 * k / n);
  }
  auto h = hilbert_xi(a);
  for (std::size_t k = 0; k < n; ++k) EXPECT_NEAR(h[k], s[k], 1e-13);
}

TEST(Phase, VanishesWithoutNonlinearity) {
  Grid g(256, 40.0);
  Spectrum f = forward(oracle::random_localized(g, 1));
  PhaseState ps = start_phase(f, {0.0, 0.0});
  for (double t = 1.5; t <= 10; t += 0.5) ps = accumulate_phase(ps, f, t);
  for (double b : ps.B()) EXPECT_EQ(b, 0.0);
  EXPECT_THROW(accumulate_phase(ps, f, 5.0), std::invalid_argument);
  EXPECT_THROW(start_phase(f, {1.0, 0.0}, 0.5), std::invalid_argument);
}

// For a profile frozen in time B1(T) = (alpha/2) xi |f^|^2 log T.
TEST(Phase, FrozenProfileLogGrowth) {
  Grid g(256, 40.0);
  Spectrum f = gaussian_profile(g, 0.1, 0.5);
  Coefficients c{1.3, 0.0};
  PhaseState ps = start_phase(f, c);
  double t = 1.0;
  while (t < 50.0) {
    t = std::min(50.0, t * 1.002);
    ps = accumulate_phase(ps, f, t);
  }
  const auto a = abs_squared(f.coeffs);
  for (std::size_t i = 0; i < f.size(); ++i) {
    const double expect = 0.5 * c.alpha * g.freq(i) * a[i] * std::log(50.0);
    EXPECT_NEAR(ps.B1[i], expect, 1e-6 * std::abs(expect) + 1e-15);
    EXPECT_EQ(ps.B2[i], 0.0);
  }
}

// |f^|^2 even in xi: B1 odd, B2 = xi H(even) even.
TEST(Phase, ParityForEvenModulus) {
  Grid g(512, 60.0);
  Spectrum f = gaussian_profile(g);
  PhaseState ps = start_phase(f, {1.0, -1.0});
  for (double t = 2; t <= 20; t += 1) ps = accumulate_phase(ps, f, t);
  const std::size_t n = g.n();
  double b2max = 0.0;
  for (double v : ps.B2) b2max = std::max(b2max, std::abs(v));
  EXPECT_GT(b2max, 0.0);
  for (std::size_t i = 1; i < n / 2; ++i) {
    EXPECT_NEAR(ps.B1[i], -ps.B1[n - i], 1e-15);
    EXPECT_NEAR(ps.B2[i], ps.B2[n - i], 1e-10 * b2max);
  }
}

TEST(Phase, TrackerFollowsRun) {
  SolverConfig cfg;
  cfg.coef = {1.0, -1.0};
  cfg.grid = Grid(1024, 128.0);
  cfg.t_end = 3.0;
  cfg.initial.target_epsilon = 0.1;
  cfg.snapshot_times = {0.5, 1.0, 2.0, 3.0};
  PhaseTracker tracker(cfg.coef);
  Trajectory tr = run(cfg, &tracker);
  EXPECT_THROW(tracker.at(0.5), std::out_of_range);
  const PhaseState& p3 = tracker.at(3.0);
  EXPECT_NEAR(p3.t_last, 3.0, 1e-12);
  EXPECT_LT(tracker.at(2.0).t_last, p3.t_last);
  for (double b : p3.B()) EXPECT_TRUE(std::isfinite(b));
  // Coarse check against a trapezoid over the stored snapshots only.
  PhaseState coarse = start_phase(tr.at(1.0).f_hat, cfg.coef);
  coarse = accumulate_phase(coarse, tr.at(2.0).f_hat, 2.0);
  coarse = accumulate_phase(coarse, tr.at(3.0).f_hat, 3.0);
  double diff = 0.0, ref = 0.0;
  const auto b = p3.B(), bc = coarse.B();
  for (std::size_t i = 0; i < b.size(); ++i) {
    diff = std::max(diff, std::abs(b[i] - bc[i]));
    ref = std::max(ref, std::abs(b[i]));
  }
  EXPECT_LT(diff, 0.1 * ref);
}

TEST(Extraction, FreeCaseReturnsProfile) {
  Grid g(256, 40.0);
  Spectrum f = forward(oracle::random_localized(g, 2));
  PhaseState ps = start_phase(f, {0.0, 0.0});
  ps = accumulate_phase(ps, f, 7.0);
  ProfileExtraction e = extract_profile(f, ps);
  EXPECT_EQ(e.T, 7.0);
  for (std::size_t i = 0; i < f.size(); ++i) {
    EXPECT_EQ(e.W[i], f[i]);
    EXPECT_EQ(e.Phi[i], 0.0);
  }
  EXPECT_EQ(weighted_sup_difference(g, phase_corrected(f, ps), f.coeffs), 0.0);
}

// Frozen profile: B exactly matches the log term, so Phi is the quadrature error.
TEST(Extraction, FrozenProfileHasSmallPhi) {
  Grid g(256, 40.0);
  Spectrum f = gaussian_profile(g, 0.1, 0.5);
  Coefficients c{1.0, 0.0};
  PhaseState ps = start_phase(f, c);
  for (double t = 1.0; t < 30.0;) ps = accumulate_phase(ps, f, t = std::min(30.0, t * 1.002));
  ProfileExtraction e = extract_profile(f, ps);
  for (std::size_t i = 0; i < f.size(); ++i)
    if (e.mask[i]) EXPECT_LT(std::abs(e.Phi[i]), 1e-7);
}

TEST(Remainder, ZeroCases) {
  Grid g(256, 40.0);
  Spectrum zero(g);
  EXPECT_EQ(resonant_remainder(2.0, zero, zero, {1.0, -1.0}, 5.0).weighted_sup, 0.0);
  Spectrum f = forward(oracle::random_localized(g, 3));
  EXPECT_EQ(resonant_remainder(2.0, f, zero, {0.0, 0.0}, 5.0).weighted_sup, 0.0);
  EXPECT_THROW(resonant_remainder(0.5, f, zero, {1.0, -1.0}, 5.0), std::invalid_argument);
}

// The resonant term alone produces R = 0.
TEST(Remainder, PureResonantDerivative) {
  Grid g(256, 40.0);
  Spectrum f = gaussian_profile(g);
  Coefficients c{1.0, -1.0};
  const double t = 4.0;
  PhaseIntegrands p = phase_integrands(f, t, c);
  Spectrum fd(g);
  for (std::size_t i = 0; i < f.size(); ++i) fd[i] = I * (p.b1[i] + p.b2[i]) * f[i];
  EXPECT_EQ(resonant_remainder(t, f, fd, c, 10.0).weighted_sup, 0.0);
}

TEST(Asymptotic, ZeroProfileGivesZero) {
  Grid g(512, 100.0);
  std::vector<cplx> W(g.n());
  std::vector<double> Phi(g.n());
  auto p = asymptotic_profile(10.0, W, Phi, g, g, {1.0, -1.0});
  EXPECT_EQ(sup_norm(p.u), 0.0);
  EXPECT_THROW(asymptotic_profile(0.5, W, Phi, g, g, {1.0, -1.0}), std::invalid_argument);
  EXPECT_THROW(asymptotic_profile(10.0, std::vector<cplx>(3), Phi, g, g, {1.0, -1.0}), GridMismatch);
}

TEST(Asymptotic, CubicInterpolationExactOnCubics) {
  std::vector<double> y(20);
  auto cubic = [](double x) { return 1 - 2 * x + 0.5 * x * x - 0.1 * x * x * x; };
  for (std::size_t k = 0; k < y.size(); ++k) y[k] = cubic(-1.0 + 0.25 * k);
  for (double x = -0.7; x < 3.5; x += 0.113) EXPECT_NEAR(detail::cubic_at(y, -1.0, 0.25, x), cubic(x), 1e-12);
}

// Stationary phase for the free flow: the error of the leading term is O(t^{-3/2}),
// so t^{1/2} sup|u - u_pred| falls like 1/t.
TEST(Asymptotic, FreeFlowStationaryPhase) {
  Grid g(8192, 4096.0);
  Spectrum f = gaussian_profile(g, 1.0, 0.3);
  std::vector<double> Phi(g.n(), 0.0);
  double prev = 1e300;
  std::vector<double> errs;
  for (double t : {10.0, 40.0, 160.0}) {
    auto p = asymptotic_profile(t, f.coeffs, Phi, g, g, {0.0, 0.0});
    auto cmp = compare_asymptotic(from_profile(f, t), p, t);
    EXPECT_LT(cmp.scaled_sup, prev);
    prev = cmp.scaled_sup;
    errs.push_back(cmp.scaled_sup);
  }
  EXPECT_LT(errs[2], errs[0] / 8.0);
}

TEST(MassLimit, ConservedIsDegenerate) {
  Grid g(256, 40.0);
  Trajectory tr = norm_trajectory(g, 0.0, mass_times(), [](double) { return 0.3; });
  MassLimit r = mass_limit(tr);
  EXPECT_TRUE(r.degenerate);
  EXPECT_FALSE(r.rate.has_value());
  EXPECT_NEAR(r.D_infty, 0.3, 1e-14);
  EXPECT_NEAR(r.initial, 0.3, 1e-14);

  Trajectory short_run = norm_trajectory(g, -1.0, {0.0, 10.0, 50.0}, [](double) { return 0.3; });
  EXPECT_THROW(mass_limit(short_run), std::invalid_argument);
}

// m(t) = D + C/t is reproduced exactly by the Aitken step and fits with slope -1.
TEST(MassLimit, AitkenOnInverseApproach) {
  Grid g(256, 40.0);
  auto m = [](double t) { return 0.25 + 0.05 / (1.0 + t); };
  Trajectory tr = norm_trajectory(g, -1.0, mass_times(), m);
  MassLimit r = mass_limit(tr);
  EXPECT_FALSE(r.degenerate);
  EXPECT_NEAR(r.D_infty, 0.25, 2e-4);
  ASSERT_TRUE(r.rate.has_value());
  EXPECT_NEAR(r.rate->slope, -1.0, 0.1);
  EXPECT_TRUE(r.monotone);
  EXPECT_TRUE(r.approach_side);

  auto exact = [](double t) { return 0.25 + 0.05 / t + (t == 0.0 ? 1.0 : 0.0); };
  EXPECT_NEAR(mass_limit(norm_trajectory(g, -1.0, mass_times(), exact)).D_infty, 0.25, 1e-12);
}

TEST(MassLimit, FlagsWrongDirection) {
  Grid g(256, 40.0);
  auto m = [](double t) { return 0.25 + 0.05 / (1.0 + t); };
  MassLimit r = mass_limit(norm_trajectory(g, +1.0, mass_times(), m));
  EXPECT_FALSE(r.monotone);
  EXPECT_FALSE(r.approach_side);
  EXPECT_GT(r.worst_violation, 0.0);
}
