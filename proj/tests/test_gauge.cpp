#include <gtest/gtest.h>

#include <cmath>

#include "kdnls/gauge.hpp"
#include "oracles.hpp"

using namespace kdnls;

namespace {

Field small_random(const Grid& g, unsigned seed, double scale) {
  return scale * oracle::random_localized(g, seed, 2.0);
}

// Brute-force G± written from the formula with plain pointwise products.
Field g_pm_bruteforce(const Field& u, double s, Coefficients c) {
  const std::size_t n = u.size();
  Field w(u.grid), Hw, out(u.grid);
  for (std::size_t j = 0; j < n; ++j) w[j] = std::norm(u[j]);
  Hw = hilbert(w);
  Field wx = d_dx(w);
  Field inner(u.grid), quart(u.grid);
  for (std::size_t j = 0; j < n; ++j) {
    inner[j] = Hw[j].real() * wx[j].real();
    quart[j] = 1.5 * c.alpha * w[j].real() * w[j].real() + 2.0 * c.beta * Hw[j].real() * w[j].real();
  }
  Field Hq = hilbert(quart);
  // running trapezoid
  cplx acc = 0.0;
  for (std::size_t j = 0; j < n; ++j) {
    if (j > 0) acc += 0.5 * u.grid.dx() * (inner[j] + inner[j - 1]);
    const cplx pq = (-I * c.alpha - s * c.beta / 2) * quart[j] - I * (c.beta / 2) * Hq[j].real();
    const cplx pw = (-I * c.alpha - s * c.beta / 2) * w[j] - I * (c.beta / 2) * Hw[j].real();
    out[j] = pq - I * pw * pw + c.beta * (I * c.alpha + s * c.beta / 2) * acc;
  }
  return out;
}

SolverConfig probe_config(double alpha, double beta, double t0, const std::vector<double>& hs) {
  SolverConfig cfg;
  cfg.coef = {alpha, beta};
  cfg.grid = Grid(2048, 200.0);
  cfg.dt = 0.02;
  cfg.t_end = t0 + hs.front();
  cfg.initial.target_epsilon = 0.1;
  for (double h : hs) {
    cfg.snapshot_times.push_back(t0 - h);
    cfg.snapshot_times.push_back(t0 + h);
  }
  cfg.snapshot_times.push_back(t0);
  std::sort(cfg.snapshot_times.begin(), cfg.snapshot_times.end());
  return cfg;
}

}  // namespace

TEST(PAlphaBeta, Specializations) {
  Grid g(256, 40.0);
  EXPECT_EQ(sup_norm(p_ab(Field(g), Sign::plus, {1, 1})), 0.0);

  Field w = real_part(oracle::random_band_limited(g, 40, 3, true));
  Field a = p_ab(w, Sign::minus, {1.0, 0.0});
  EXPECT_LT(oracle::max_abs_diff(a, (-I) * w), 1e-15);

  const double om = g.freq(5);
  Field c = Field::sample(g, [&](double x) { return std::cos(om * x); });
  Field expect = Field::sample(g, [&](double x) { return -std::cos(om * x) - I * std::sin(om * x); });
  EXPECT_LT(oracle::max_abs_diff(p_ab(c, Sign::plus, {0.0, 2.0}), expect), 1e-13);

  // Re P± = ∓(beta/2) w
  Field p = p_ab(w, Sign::plus, {0.3, 1.4});
  for (std::size_t j = 0; j < g.n(); ++j) EXPECT_NEAR(p[j].real(), -0.7 * w[j].real(), 1e-13);

  EXPECT_THROW(p_ab(Field::sample(g, [](double) { return I; }), Sign::plus, {1, 1}),
               std::invalid_argument);
}

TEST(Rho, ZeroAndUnimodularWithoutBeta) {
  Grid g(1024, 100.0);
  PsiBump psi = PsiBump::standard(g);
  EXPECT_EQ(sup_norm(rho(Field(g), Sign::plus, psi, {1, 1})), 0.0);

  Field u = small_random(g, 7, 0.3);
  for (Sign s : {Sign::plus, Sign::minus}) {
    Field r = rho(u, s, psi, {1.3, 0.0});
    double dev = 0.0;
    for (auto& v : r.values) {
      EXPECT_EQ(v.real(), 0.0);
      dev = std::max(dev, std::abs(std::abs(std::exp(v)) - 1.0));
    }
    EXPECT_LT(dev, 1e-12);
  }
}

TEST(Rho, ModulusBound) {
  Grid g(1024, 100.0);
  PsiBump psi = PsiBump::standard(g);
  for (unsigned seed = 1; seed <= 5; ++seed) {
    Field u = small_random(g, seed, 0.5);
    const double beta = -1.7;
    const double bound = std::exp(0.5 * std::abs(beta) * std::pow(l2_norm(u), 2));
    for (Sign s : {Sign::plus, Sign::minus}) {
      Field r = rho(u, s, psi, {1.0, beta});
      for (auto& v : r.values) EXPECT_LE(std::abs(std::exp(v)), bound * (1 + 1e-14));
    }
  }
}

// rho is not periodic (it climbs by the total mass across the box), so its
// derivative is taken by centered differences rather than spectrally.
TEST(Rho, DerivativeIsPAlphaBeta) {
  double errs[2];
  int k = 0;
  for (std::size_t n : {1024u, 2048u}) {
    Grid g(n, 100.0);
    PsiBump psi = PsiBump::standard(g);
    Field u = Field::sample(g, [](double x) { return 0.4 * std::exp(-0.5 * x * x) * std::polar(1.0, 0.3 * x); });
    Coefficients c{0.8, -1.2};
    Field w = real_part(product(u, conj(u)));
    Field r = rho(u, Sign::plus, psi, c);
    Field p = p_ab(w, Sign::plus, c);
    double err = 0.0;
    for (std::size_t j = 1; j + 1 < n; ++j) {
      if (std::abs(g.node(j)) > 30.0) continue;
      const cplx fd = (r[j + 1] - r[j - 1]) / (2.0 * g.dx());
      err = std::max(err, std::abs(fd - p[j]));
    }
    errs[k++] = err;
  }
  EXPECT_LT(errs[1], 1e-3);
  EXPECT_NEAR(errs[0] / errs[1], 4.0, 0.3);
}

TEST(GaugeTransform, BasicProperties) {
  Grid g(1024, 100.0);
  PsiBump psi = PsiBump::standard(g);
  GaugeFields z = gauge_transform(Field(g), psi, {1, 1});
  EXPECT_EQ(sup_norm(z.v_plus), 0.0);
  EXPECT_EQ(sup_norm(z.v_minus), 0.0);

  Field u = small_random(g, 9, 0.4);
  GaugeFields free = gauge_transform(u, psi, {0.0, 0.0});
  EXPECT_EQ(oracle::max_abs_diff(free.v_plus, project(u, Projection::q_plus)), 0.0);
  EXPECT_EQ(oracle::max_abs_diff(free.v_minus, project(u, Projection::q_minus)), 0.0);

  Coefficients c{1.0, -1.5};
  GaugeFields gf = gauge_transform(u, psi, c);
  EXPECT_FALSE(gf.boundary_warning);
  // Undo the gauge.
  Field back = gf.v_plus;
  for (std::size_t j = 0; j < g.n(); ++j) back[j] *= std::exp(-gf.rho_plus[j]);
  EXPECT_LT(oracle::max_abs_diff(back, project(u, Projection::q_plus)), 1e-12);
  // |e^rho| = e^{Re rho}, Re rho± = ∓(beta/2) d^{-1}|u|^2
  Field left = antiderivative_left(real_part(product(u, conj(u)))).value;
  for (std::size_t j = 0; j < g.n(); ++j) {
    EXPECT_NEAR(gf.rho0_plus[j].real(), 0.75 * left[j].real(), 1e-13);
    EXPECT_NEAR(gf.rho0_minus[j].real(), -0.75 * left[j].real(), 1e-13);
    EXPECT_NEAR(std::abs(std::exp(gf.rho_plus[j])), std::exp(gf.rho0_plus[j].real()), 1e-13);
  }
  const double bound = std::exp(0.75 * std::pow(l2_norm(u), 2));
  EXPECT_LE(l2_norm(gf.v_plus), bound * l2_norm(project(u, Projection::q_plus)));
  EXPECT_LE(l2_norm(gf.v_minus), bound * l2_norm(project(u, Projection::q_minus)));
}

TEST(R5, ZeroInZeroOut) {
  Grid g(256, 40.0);
  EXPECT_EQ(sup_norm(r5(Field(g), Sign::plus, {1, 1})), 0.0);
}

// High-frequency carrier with a slowly varying envelope: the commutator
// [Q, 2 alpha |u|^2 + beta H|u|^2] d_x u is small next to the naive product
// g Q d_x u, and shrinks as the carrier moves up.
TEST(R5, CommutatorSmallUnderFrequencySeparation) {
  Grid g(4096, 200.0);
  Coefficients c{1.0, -1.0};
  double prev = 1e300;
  for (double K : {6.0, 8.0}) {
    Field u = Field::sample(g, [&](double x) { return 0.3 * std::exp(-0.5 * x * x) * std::polar(1.0, K * x); });
    Field w = real_part(product(u, conj(u)));
    Field gw = 2.0 * c.alpha * w + c.beta * real_part(hilbert(w));
    Field ux = d_dx(u);
    Field qux = project(ux, Projection::q_plus);
    Field comm = project(product(gw, ux), Projection::q_plus) - product(gw, qux);
    const double ratio = l2_norm(comm) / l2_norm(product(gw, qux));
    EXPECT_LT(ratio, 0.1) << K;
    EXPECT_LT(ratio, prev);
    prev = ratio;
  }
}

TEST(GPm, ZeroHomogeneityAndAlphaOnlyClosedForm) {
  Grid g(1024, 100.0);
  EXPECT_EQ(sup_norm(g_pm(Field(g), Sign::plus, {1, 1})), 0.0);

  Field u = Field::sample(g, [](double x) { return 0.5 * std::exp(-0.5 * x * x); });
  // beta = 0: G = -(3i/2) alpha^2 w^2 + i alpha^2 w^2 = -(i/2) alpha^2 |u|^4.
  const double a = 1.7;
  Field G = g_pm(u, Sign::minus, {a, 0.0});
  Field expect = Field::sample(g, [&](double x) {
    const double w = 0.25 * std::exp(-x * x);
    return -0.5 * I * a * a * w * w;
  });
  EXPECT_LT(oracle::max_abs_diff(G, expect), 1e-13);

  Field v = small_random(g, 4, 0.3);
  for (Sign s : {Sign::plus, Sign::minus}) {
    Field g1 = g_pm(v, s, {0.9, -1.1});
    Field g2 = g_pm(2.0 * v, s, {0.9, -1.1});
    EXPECT_LT(oracle::max_abs_diff(g2, 16.0 * g1), 1e-12 * sup_norm(g2));
  }
}

TEST(GPm, MatchesBruteForce) {
  Grid g(1024, 100.0);
  Field u = small_random(g, 12, 0.4);
  for (Sign s : {Sign::plus, Sign::minus}) {
    Field a = g_pm(u, s, {0.7, 1.3});
    Field b = g_pm_bruteforce(u, value(s), {0.7, 1.3});
    EXPECT_LT(oracle::max_abs_diff(a, b), 1e-10 * sup_norm(b));
  }
}

TEST(GaugedResidual, ZeroData) {
  Grid g(256, 40.0);
  PsiBump psi = PsiBump::standard(g);
  Field z(g);
  EXPECT_EQ(l2_norm(gauged_residual_field(z, z, z, 0.1, Sign::plus, psi, {1, 1})), 0.0);
}

TEST(GaugedResidual, FreeFlowIsPureDifferencingError) {
  const std::vector<double> hs{0.05, 0.025};
  SolverConfig cfg = probe_config(0.0, 0.0, 1.0, hs);
  Trajectory tr = run(cfg);
  PsiBump psi = PsiBump::standard(cfg.grid);
  const double r1 = gauged_residual(tr, 1.0, 0.05, Sign::plus, psi);
  const double r2 = gauged_residual(tr, 1.0, 0.025, Sign::plus, psi);
  EXPECT_NEAR(r1 / r2, 4.0, 0.05);
  EXPECT_LT(gauged_residual_extrapolated(tr, 1.0, 0.05, Sign::plus, psi), 0.05 * r2);
}

TEST(GaugedResidual, SecondOrderOnKdnlsRun) {
  const std::vector<double> hs{0.08, 0.04, 0.02};
  SolverConfig cfg = probe_config(1.0, -1.0, 2.0, hs);
  Trajectory tr = run(cfg);
  PsiBump psi = PsiBump::standard(cfg.grid);
  for (Sign s : {Sign::plus, Sign::minus}) {
    const double r1 = gauged_residual(tr, 2.0, 0.08, s, psi);
    const double r2 = gauged_residual(tr, 2.0, 0.04, s, psi);
    const double r3 = gauged_residual(tr, 2.0, 0.02, s, psi);
    EXPECT_NEAR(std::log2(r1 / r2), 2.0, 0.2);
    EXPECT_NEAR(std::log2(r2 / r3), 2.0, 0.2);
    const Field v = gauge_v(tr.at(2.0).field(), s, psi, cfg.coef);
    EXPECT_LT(gauged_residual_extrapolated(tr, 2.0, 0.04, s, psi), 1e-3 * sobolev_norm(v, 1.0));
  }
  EXPECT_THROW(gauged_residual(tr, 2.0, 0.3, Sign::plus, psi), std::out_of_range);
}
