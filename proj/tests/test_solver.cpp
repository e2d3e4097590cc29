#include <gtest/gtest.h>

#include <cmath>

#include "kdnls/solver.hpp"
#include "oracles.hpp"

using namespace kdnls;

namespace {

SolverConfig small_config(double alpha, double beta, double t_end, double dt = 0.05) {
  SolverConfig c;
  c.coef = {alpha, beta};
  c.grid = Grid(1024, 200.0);
  c.dt = dt;
  c.t_end = t_end;
  c.initial.amplitude = 0.2;
  c.initial.width = 1.0;
  return c;
}

// Independent reference for N(u): plain pointwise products on a much finer grid.
Field nonlinearity_reference(const Field& u, Coefficients c) {
  Field w = map(u, [](cplx v) { return cplx{std::norm(v), 0.0}; });
  Field g = c.alpha * w + c.beta * hilbert(w);
  return d_dx(pointwise(g, u));
}

Field reflect_conj(const Field& u) {
  Field out(u.grid);
  const std::size_t n = u.size();
  for (std::size_t j = 0; j < n; ++j) out[j] = std::conj(u[(n - j) % n]);
  return out;
}

double max_diff_shared_nodes(const Field& coarse, const Field& fine) {
  const std::size_t r = fine.size() / coarse.size();
  double m = 0.0;
  for (std::size_t j = 0; j < coarse.size(); ++j) m = std::max(m, std::abs(coarse[j] - fine[r * j]));
  return m;
}

}  // namespace

TEST(Nonlinearity, ZeroInZeroOut) {
  Grid g(256, 40.0);
  EXPECT_EQ(sup_norm(nonlinearity(Field(g), {1.0, -1.0})), 0.0);
}

TEST(Nonlinearity, PlaneWave) {
  Grid g(256, 40.0);
  const double w = g.freq(6);
  Field u = Field::sample(g, [&](double x) { return std::polar(1.0, w * x); });
  for (auto policy : {Dealias::padding, Dealias::two_thirds}) {
    Field N = nonlinearity(u, {0.7, 0.0}, policy);
    EXPECT_LT(oracle::max_abs_diff(N, (I * 0.7 * w) * u), 1e-12);
  }
}

TEST(Nonlinearity, HilbertTermMatchesFineGridOracle) {
  const double L = 40.0;
  Grid g(512, L), fine(2048, L);
  auto phi = [](double x) { return 0.3 * std::exp(-0.5 * x * x) * std::polar(1.0, 0.2 * x); };
  Field N = nonlinearity(Field::sample(g, phi), {0.0, 1.0});
  Field ref = nonlinearity_reference(Field::sample(fine, phi), {0.0, 1.0});
  EXPECT_LT(max_diff_shared_nodes(N, ref), 1e-8 * sup_norm(ref));
}

TEST(Nonlinearity, TwoThirdsAgreesOnResolvedData) {
  Grid g(1024, 40.0);
  Field u = Field::sample(g, [](double x) { return 0.3 * std::exp(-0.5 * x * x); });
  Field a = nonlinearity(u, {1.0, -1.0}, Dealias::padding);
  Field b = nonlinearity(u, {1.0, -1.0}, Dealias::two_thirds);
  EXPECT_LT(oracle::max_abs_diff(a, b), 1e-12);
}

TEST(ProfileRhs, ZeroAndInitialTime) {
  Grid g(512, 60.0);
  EXPECT_EQ(l2_norm(rhs_profile(1.3, Spectrum(g), {1, 1})), 0.0);

  Field u0 = oracle::random_localized(g, 4);
  Spectrum r = rhs_profile(0.0, forward(u0), {1.0, -1.0});
  Spectrum expect = forward(nonlinearity(u0, {1.0, -1.0}));
  EXPECT_LT(l2_norm(r - expect), 1e-12 * l2_norm(expect));
}

TEST(ProfileRhs, MatchesDefinitionAtPositiveTime) {
  Grid g(512, 60.0);
  Spectrum f = forward(oracle::random_localized(g, 8));
  const double t = 0.7;
  Spectrum r = rhs_profile(t, f, {0.5, 2.0});
  Spectrum expect = to_profile(nonlinearity(from_profile(f, t), {0.5, 2.0}), t);
  EXPECT_LT(l2_norm(r - expect), 1e-12 * l2_norm(expect));
}

TEST(ProfileRhs, LinearInCoefficients) {
  Grid g(512, 60.0);
  Spectrum f = forward(oracle::random_localized(g, 5));
  Spectrum a = rhs_profile(0.3, f, {1.0, 0.0});
  Spectrum b = rhs_profile(0.3, f, {0.0, 1.0});
  Spectrum ab = rhs_profile(0.3, f, {2.0, -3.0});
  EXPECT_LT(l2_norm(ab - (2.0 * a + (-3.0) * b)), 1e-12 * l2_norm(ab));
  Spectrum same = rhs_profile(0.3, f, {1.5, 1.5});
  EXPECT_LT(l2_norm(same - 1.5 * (a + b)), 1e-12 * l2_norm(same));
}

TEST(Step, FreeFlowKeepsProfileAndReverses) {
  Grid g(256, 40.0);
  SolverState s{0.0, forward(oracle::random_localized(g, 6))};
  SolverState a = step_rk4(s, 0.1, {0.0, 0.0});
  EXPECT_EQ(l2_norm(a.f_hat - s.f_hat), 0.0);
  SolverState back = step_rk4(a, -0.1, {0.0, 0.0});
  EXPECT_NEAR(back.t, 0.0, 1e-14);
  EXPECT_LT(l2_norm(back.f_hat - s.f_hat), 1e-14);
}

TEST(Step, FourthOrderSelfConvergence) {
  Grid g(512, 80.0);
  Spectrum f0 = forward(Field::sample(g, [](double x) { return 0.3 * std::exp(-0.5 * x * x); }));
  auto integrate = [&](double dt) {
    Rk4Stepper st(g, {1.0, -1.0});
    SolverState s{0.0, f0};
    const int n = static_cast<int>(std::lround(1.0 / dt));
    for (int k = 0; k < n; ++k) st.step(s, dt);
    return s.f_hat;
  };
  Spectrum ref = integrate(0.005);
  const double e1 = l2_norm(integrate(0.04) - ref);
  const double e2 = l2_norm(integrate(0.02) - ref);
  EXPECT_NEAR(e1 / e2, 16.0, 2.0);
}

TEST(Run, ZeroEndTimeGivesInitialSnapshot) {
  auto cfg = small_config(1, -1, 0.0);
  Trajectory tr = run(cfg);
  ASSERT_EQ(tr.snapshots.size(), 1u);
  EXPECT_EQ(tr.snapshots[0].t, 0.0);
  EXPECT_LT(oracle::max_abs_diff(tr.snapshots[0].field(), tr.initial), 1e-15);
}

TEST(Run, LandsExactlyOnSnapshots) {
  auto cfg = small_config(1, -1, 2.0, 0.07);
  cfg.snapshot_times = {0.0, 0.25, 1.0, 1.7};
  Trajectory tr = run(cfg);
  std::vector<double> expect{0.0, 0.25, 1.0, 1.7, 2.0};
  ASSERT_EQ(tr.times(), expect);
}

TEST(Run, FreeGaussianSupDecay) {
  auto cfg = small_config(0, 0, 10.0, 0.05);
  cfg.initial.amplitude = 1.0;
  cfg.grid = Grid(2048, 400.0);
  cfg.snapshot_times = {1.0, 5.0, 10.0};
  Trajectory tr = run(cfg);
  for (const auto& s : tr.snapshots) {
    const double expect = std::pow(1.0 + 4.0 * s.t * s.t, -0.25);
    EXPECT_NEAR(sup_norm(s.field()), expect, 1e-6) << s.t;
    EXPECT_NEAR(l2_norm(s.f_hat), l2_norm(tr.snapshots[0].f_hat), 1e-14);
  }
}

TEST(Run, SelfConvergenceUnderGridRefinement) {
  auto cfg = small_config(1.0, -1.0, 5.0, 0.025);
  cfg.initial.target_epsilon = 0.1;
  Trajectory a = run(cfg);
  cfg.grid = Grid(2048, 200.0);
  Trajectory b = run(cfg);
  Field ua = a.final_state.field(), ub = b.final_state.field();
  double acc = 0.0;
  for (std::size_t j = 0; j < ua.size(); ++j) acc += std::norm(ua[j] - ub[2 * j]);
  EXPECT_LT(std::sqrt(acc * ua.grid.dx()), 1e-6);
}

TEST(Run, L2BalanceMatchesDissipationIntegral) {
  auto cfg = small_config(1.0, -1.0, 4.0, 0.02);
  cfg.initial.amplitude = 0.3;
  for (int k = 0; k <= 200; ++k) cfg.snapshot_times.push_back(0.02 * k);
  Trajectory tr = run(cfg);
  std::vector<double> rate;
  for (const auto& s : tr.snapshots) {
    Field u = s.field();
    Field w = product(u, conj(u));
    rate.push_back(cfg.coef.beta * std::pow(l2_norm(d_abs_pow(w, 0.5)), 2));
  }
  double integral = 0.0;
  for (std::size_t k = 1; k < rate.size(); ++k)
    integral += 0.5 * (tr.snapshots[k].t - tr.snapshots[k - 1].t) * (rate[k] + rate[k - 1]);
  const double m0 = std::pow(l2_norm(tr.snapshots.front().f_hat), 2);
  const double m1 = std::pow(l2_norm(tr.snapshots.back().f_hat), 2);
  EXPECT_LT(m1, m0);
  EXPECT_NEAR((m1 - m0) / integral, 1.0, 1e-4);
  for (std::size_t k = 1; k < tr.snapshots.size(); ++k)
    EXPECT_LE(l2_norm(tr.snapshots[k].f_hat), l2_norm(tr.snapshots[k - 1].f_hat) + 1e-15);
}

// w(s,x) = conj(u(T-s,-x)) solves the equation with beta -> -beta, so evolving the
// reflected conjugate of u(T) with the mirrored coefficient for time T returns to
// the reflected conjugate of the data.
TEST(Run, ReflectionConjugationFlipsBeta) {
  auto cfg = small_config(1.0, -1.0, 3.0, 0.01);
  cfg.initial.amplitude = 0.4;
  cfg.initial.chirp = 0.1;
  Trajectory fwd = run(cfg);

  auto back = cfg;
  back.coef.beta = 1.0;
  back.initial.family = InitialFamily::samples;
  back.initial.samples = reflect_conj(fwd.final_state.field()).values;
  Trajectory rev = run(back);

  Field recovered = reflect_conj(rev.final_state.field());
  EXPECT_LT(oracle::max_abs_diff(recovered, fwd.initial), 1e-8);

  // Using the same beta instead does not return: the symmetry really flips beta.
  back.coef.beta = -1.0;
  Field wrong = reflect_conj(run(back).final_state.field());
  EXPECT_GT(oracle::max_abs_diff(wrong, fwd.initial), 1e-4);
}

TEST(Run, GuardBandStaysEmpty) {
  auto cfg = small_config(1.0, -1.0, 5.0, 0.05);
  cfg.initial.target_epsilon = 0.1;
  Trajectory tr = run(cfg);
  const Spectrum& f = tr.final_state.f_hat;
  double guard = 0.0, total = 0.0;
  for (std::size_t i = 0; i < f.size(); ++i) {
    total += std::norm(f[i]);
    if (std::labs(f.grid.wavenumber(i)) > static_cast<long>(f.grid.n() / 3)) guard += std::norm(f[i]);
  }
  EXPECT_LT(guard / total, 1e-10);
}

TEST(Run, MeasuredEpsilonMatchesTarget) {
  auto cfg = small_config(1.0, -1.0, 0.0);
  cfg.initial.target_epsilon = 0.1;
  Trajectory tr = run(cfg);
  EXPECT_NEAR(tr.epsilon, 0.1, 1e-12);
}

TEST(Run, Deterministic) {
  auto cfg = small_config(1.0, -1.0, 2.0);
  Trajectory a = run(cfg), b = run(cfg);
  EXPECT_EQ(a.final_state.f_hat.coeffs, b.final_state.f_hat.coeffs);
}

TEST(Run, BoundaryContaminationAborts) {
  auto cfg = small_config(1.0, -1.0, 5.0);
  cfg.initial.center = 95.0;
  EXPECT_THROW(run(cfg), NumericalAbort);
}

TEST(Run, StabilityBudgetEnforced) {
  auto cfg = small_config(1.0, -1.0, 1.0, 1.0);
  EXPECT_THROW(run(cfg), ConfigError);
  cfg.dt = -0.1;
  EXPECT_THROW(run(cfg), ConfigError);
}

TEST(Run, BlowUpGuard) {
  auto cfg = small_config(0.1, 0.0, 1.0, 0.05);
  cfg.grid = Grid(256, 40.0);
  cfg.initial.amplitude = 1.0;
  cfg.blowup_factor = 1.05;
  cfg.monitor_every = 1;
  // A focusing chirp makes sup|u| grow by ~19% near t = 0.25; the guard must trip.
  cfg.initial.chirp = -0.5;
  EXPECT_THROW(run(cfg), NumericalAbort);
}
