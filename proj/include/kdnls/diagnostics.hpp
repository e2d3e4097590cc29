#pragma once

// Norms, identities and decay monitors.
//
// Two brackets appear: H^s norms use the Japanese bracket (1 + xi^2)^{1/2}; the
// weighted Fourier sups use the short bracket (1 + |xi|)^{1/2} from the small-data
// theory's notation. Every quantity below says which one it uses.

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "solver.hpp"
#include "spectral.hpp"

namespace kdnls {

inline double japanese_bracket(double xi) { return std::sqrt(1.0 + xi * xi); }
inline double short_bracket(double xi) { return std::sqrt(1.0 + std::abs(xi)); }

using Series = std::vector<std::pair<double, double>>;

// ---------------------------------------------------------------------------
// J = x + 2it d_x.

inline Field multiply_by_x(Field f) {
  for (std::size_t j = 0; j < f.size(); ++j) f[j] *= f.grid.node(j);
  return f;
}

/// x u + 2it u_x.
inline Field j_apply(const Field& u, double t) {
  return multiply_by_x(u) + (2.0 * I * t) * d_dx(u);
}

/// e^{it d^2} x e^{-it d^2} u, the same operator computed through the profile.
inline Field j_apply_conjugated(const Field& u, double t) {
  Field f = inverse(to_profile(u, t));
  return from_profile(forward(multiply_by_x(f)), t);
}

/// ||x f||_{H^1} (Japanese bracket) computed as ||J u||_{H^1}.
inline double xf_h1_via_j(const Field& u, double t) { return sobolev_norm(j_apply(u, t), 1.0); }

/// ||x f||_{H^1} computed directly from the profile.
inline double xf_h1_direct(const Spectrum& f_hat) {
  return sobolev_norm(multiply_by_x(inverse(f_hat)), 1.0);
}

// ---------------------------------------------------------------------------
// Null-form identity: d_x(u v̄) = (v̄ J u - u conj(J v)) / (2it).

inline double null_identity_residual(const Field& u, const Field& v, double t) {
  if (t == 0.0) throw std::invalid_argument("null identity needs t != 0");
  require_same_grid(u.grid, v.grid);
  Field lhs = d_dx(pointwise(u, conj(v)));
  Field ju = j_apply_conjugated(u, t), jv = j_apply_conjugated(v, t);
  Field rhs = (1.0 / (2.0 * I * t)) * (pointwise(conj(v), ju) - pointwise(u, conj(jv)));
  return sup_norm(lhs - rhs);
}

// ---------------------------------------------------------------------------
// Dissipation: d/dt ||u||^2 = beta ||D^{1/2}(|u|^2)||^2.

inline double dissipation_rate(const Field& u, double beta) {
  Field w = real_part(product(u, conj(u)));
  const double d = l2_norm(d_abs_pow(w, 0.5));
  return beta * d * d;
}

inline double mass(const SolverState& s) {
  const double m = l2_norm(s.f_hat);
  return m * m;
}

/// Second-order difference of ||u||^2 at t: centered when t ± h are stored,
/// one-sided (three points) at the ends of the run.
inline double mass_derivative(const Trajectory& tr, double t, double h) {
  auto m = [&](double s) -> std::optional<double> {
    const SolverState* st = tr.find(s);
    if (!st) return std::nullopt;
    return mass(*st);
  };
  auto m0 = m(t), mp = m(t + h), mm = m(t - h);
  if (!m0) throw std::out_of_range("no snapshot at t=" + std::to_string(t));
  if (mp && mm) return (*mp - *mm) / (2.0 * h);
  if (mp) {
    auto mpp = m(t + 2.0 * h);
    if (mpp) return (-3.0 * *m0 + 4.0 * *mp - *mpp) / (2.0 * h);
  }
  if (mm) {
    auto mmm = m(t - 2.0 * h);
    if (mmm) return (3.0 * *m0 - 4.0 * *mm + *mmm) / (2.0 * h);
  }
  throw std::out_of_range("dissipation residual needs snapshots bracketing t=" + std::to_string(t));
}

struct DissipationResidual {
  double absolute = 0.0;
  double relative = 0.0;  // absolute / max(|beta ||D^{1/2}|u|^2||^2|, 1e-30)
  double rate = 0.0;
  double measured = 0.0;
};

inline DissipationResidual dissipation_residual(const Trajectory& tr, double t, double h) {
  DissipationResidual r;
  r.measured = mass_derivative(tr, t, h);
  r.rate = dissipation_rate(tr.at(t).field(), tr.config.coef.beta);
  r.absolute = std::abs(r.measured - r.rate);
  r.relative = r.absolute / std::max(std::abs(r.rate), 1e-30);
  return r;
}

// ---------------------------------------------------------------------------
// Log-log fits.

struct Fit {
  double slope = 0.0;
  double stderr_slope = 0.0;
  double intercept = 0.0;
  double residual_rms = 0.0;
  std::size_t count = 0;
};

/// Least-squares slope of log(value) against log(t) over t in [lo, hi].
inline Fit decay_fit(const Series& series, double lo, double hi) {
  std::vector<double> X, Y;
  for (const auto& [t, v] : series) {
    if (t < lo - 1e-12 || t > hi + 1e-12) continue;
    if (!(t > 0.0) || !(v > 0.0))
      throw std::invalid_argument("decay_fit needs positive times and values");
    X.push_back(std::log(t));
    Y.push_back(std::log(v));
  }
  Fit f;
  f.count = X.size();
  if (f.count < 2) throw std::invalid_argument("decay_fit: fewer than two points in window");
  const double n = static_cast<double>(f.count);
  double mx = 0.0, my = 0.0;
  for (std::size_t k = 0; k < X.size(); ++k) {
    mx += X[k];
    my += Y[k];
  }
  mx /= n;
  my /= n;
  double sxx = 0.0, sxy = 0.0;
  for (std::size_t k = 0; k < X.size(); ++k) {
    sxx += (X[k] - mx) * (X[k] - mx);
    sxy += (X[k] - mx) * (Y[k] - my);
  }
  if (!(sxx > 0.0)) throw std::invalid_argument("decay_fit: degenerate window");
  f.slope = sxy / sxx;
  f.intercept = my - f.slope * mx;
  double ss = 0.0;
  for (std::size_t k = 0; k < X.size(); ++k) {
    const double r = Y[k] - (f.intercept + f.slope * X[k]);
    ss += r * r;
  }
  f.residual_rms = std::sqrt(ss / n);
  f.stderr_slope = f.count > 2 ? std::sqrt(ss / (n - 2.0) / sxx) : 0.0;
  return f;
}

inline Fit decay_fit(const Series& series) {
  if (series.empty()) throw std::invalid_argument("decay_fit: empty series");
  const auto [lo, hi] = std::minmax_element(series.begin(), series.end());
  return decay_fit(series, lo->first, hi->first);
}

// ---------------------------------------------------------------------------
// Per-snapshot quantities.

/// ||u||_inf + ||u_x||_inf (grid maxima).
inline double w1inf_norm(const Field& u) { return sup_norm(u) + sup_norm(d_dx(u)); }

inline double hilbert_sup(const Field& u) {
  return sup_norm(real_part(hilbert(real_part(product(u, conj(u))))));
}

inline Series hilbert_sup_series(const Trajectory& tr) {
  Series out;
  for (const auto& s : tr.snapshots) out.emplace_back(s.t, hilbert_sup(s.field()));
  return out;
}

/// L2 mass (not fraction) in the outer 10% of the box on either side.
inline double boundary_mass(const Field& u) {
  const double edge = 0.4 * u.grid.length();
  double acc = 0.0;
  for (std::size_t j = 0; j < u.size(); ++j)
    if (std::abs(u.grid.node(j)) > edge) acc += std::norm(u[j]);
  return acc * u.grid.dx();
}

/// max_xi (1+|xi|)^{1/2} |f^(xi)| over |xi| in [lo, hi).
inline double weighted_fourier_sup(const Spectrum& f_hat, double lo = 0.0,
                                   double hi = std::numeric_limits<double>::infinity()) {
  double m = 0.0;
  for (std::size_t i = 0; i < f_hat.size(); ++i) {
    const double a = std::abs(f_hat.grid.freq(i));
    if (a < lo || a >= hi) continue;
    m = std::max(m, short_bracket(a) * std::abs(f_hat[i]));
  }
  return m;
}

struct DyadicEnvelope {
  std::vector<double> N;         // block lower edges 1, 2, 4, ...
  std::vector<double> band_sup;  // weighted sup over N <= |xi| < 2N
  std::vector<double> envelope;  // max over blocks at or above N (monotone in N)
  Fit fit;                       // log envelope vs log N over blocks above the floor
  double kappa = 0.0;            // -fit.slope
  bool monotone = true;
};

/// Band-restricted weighted sups on dyadic shells; the envelope is fitted
/// only over shells whose value sits above `floor` times the first shell.
inline DyadicEnvelope dyadic_envelope(const Spectrum& f_hat, double floor = 1e-12) {
  DyadicEnvelope d;
  for (double N = 1.0; N < f_hat.grid.max_freq(); N *= 2.0) {
    d.N.push_back(N);
    d.band_sup.push_back(weighted_fourier_sup(f_hat, N, 2.0 * N));
  }
  d.envelope = d.band_sup;
  for (std::size_t k = d.envelope.size(); k-- > 1;)
    d.envelope[k - 1] = std::max(d.envelope[k - 1], d.envelope[k]);
  for (std::size_t k = 1; k < d.envelope.size(); ++k)
    if (d.envelope[k] > d.envelope[k - 1]) d.monotone = false;
  Series pts;
  const double ref = d.envelope.empty() ? 0.0 : d.envelope.front();
  for (std::size_t k = 0; k < d.N.size(); ++k)
    if (d.envelope[k] > floor * ref) pts.emplace_back(d.N[k], d.envelope[k]);
  if (pts.size() >= 2) {
    d.fit = decay_fit(pts);
    d.kappa = -d.fit.slope;
  }
  return d;
}

// ---------------------------------------------------------------------------
// A priori quantity sup_t (<t>^{-delta} ||u||_{H^2} + <t>^{-2 delta} ||xf||_{H^1}).

struct AprioriReport {
  double delta = 0.0;
  double sup_value = 0.0;
  Series h2;     // (t, ||u||_{H^2})
  Series xf_h1;  // (t, ||xf||_{H^1})
  Fit h2_growth;
  Fit xf_growth;
};

/// The bracket <t> here is the Japanese one, (1 + t^2)^{1/2}.
inline AprioriReport apriori_report(const Trajectory& tr, double delta, double lo, double hi) {
  if (!(delta > 0.0)) throw std::invalid_argument("apriori_report needs delta > 0");
  AprioriReport r;
  r.delta = delta;
  for (const auto& s : tr.snapshots) {
    const double h2 = sobolev_norm(s.f_hat, 2.0);  // |f^| = |u^|
    const double xf = xf_h1_direct(s.f_hat);
    r.h2.emplace_back(s.t, h2);
    r.xf_h1.emplace_back(s.t, xf);
    const double tb = japanese_bracket(s.t);
    r.sup_value = std::max(r.sup_value, std::pow(tb, -delta) * h2 + std::pow(tb, -2.0 * delta) * xf);
  }
  r.h2_growth = decay_fit(r.h2, lo, hi);
  r.xf_growth = decay_fit(r.xf_h1, lo, hi);
  return r;
}

// ---------------------------------------------------------------------------
// Row of the diagnostics table.

struct DiagnosticsRecord {
  double t = 0.0;
  double l2 = 0.0, h1 = 0.0, h2 = 0.0;
  double w1inf = 0.0;
  double xf_h1 = 0.0;
  double hilbert_sup = 0.0;
  double null_residual = 0.0;          // relative to sup |d_x |u|^2|; 0 at t = 0
  double dissipation_residual = 0.0;   // relative; absolute when beta = 0
  bool dissipation_probed = false;
  double boundary_mass = 0.0;
  double weighted_fourier_sup = 0.0;   // short bracket
};

/// Everything that needs only the snapshot itself; the dissipation residual is
/// filled in when the neighbouring probes exist.
inline DiagnosticsRecord make_record(const Trajectory& tr, const SolverState& s, double probe_h) {
  DiagnosticsRecord r;
  const Field u = s.field();
  r.t = s.t;
  r.l2 = l2_norm(s.f_hat);
  r.h1 = sobolev_norm(s.f_hat, 1.0);
  r.h2 = sobolev_norm(s.f_hat, 2.0);
  r.w1inf = w1inf_norm(u);
  r.xf_h1 = xf_h1_via_j(u, s.t);
  r.hilbert_sup = hilbert_sup(u);
  if (s.t > 0.0) {
    const double scale = sup_norm(d_dx(pointwise(u, conj(u))));
    r.null_residual = null_identity_residual(u, u, s.t) / std::max(scale, 1e-300);
  }
  r.boundary_mass = boundary_mass(u);
  r.weighted_fourier_sup = weighted_fourier_sup(s.f_hat);
  if (probe_h > 0.0) {
    try {
      const auto d = dissipation_residual(tr, s.t, probe_h);
      r.dissipation_residual = tr.config.coef.beta == 0.0 ? d.absolute : d.relative;
      r.dissipation_probed = true;
    } catch (const std::out_of_range&) {
    }
  }
  return r;
}

}  // namespace kdnls
