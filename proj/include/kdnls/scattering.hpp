#pragma once

// Phase correction B = B1 + B2, profile extraction (W, Phi), the resonant /
// remainder split of d/dt f^, the asymptotic profile, and the L2 limit D_inf.

#include <algorithm>
#include <cmath>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "diagnostics.hpp"
#include "solver.hpp"
#include "spectral.hpp"

namespace kdnls {

/// Hilbert transform along the frequency axis of samples stored in FFT order.
/// FFT order is a cyclic shift of ascending-xi order and H commutes with shifts
/// and dilations, so the samples are transformed as they sit (periodic in xi).
inline std::vector<double> hilbert_xi(const std::vector<double>& a) {
  const std::size_t n = a.size();
  std::vector<cplx> z(a.begin(), a.end());
  fft::forward(z);
  const double inv_n = 1.0 / static_cast<double>(n);
  for (std::size_t k = 0; k < n; ++k) {
    double sgn = 0.0;
    if (k != 0 && k != n / 2) sgn = k < n / 2 ? 1.0 : -1.0;
    z[k] *= -I * sgn * inv_n;
  }
  fft::backward(z);
  std::vector<double> out(n);
  for (std::size_t k = 0; k < n; ++k) out[k] = z[k].real();
  return out;
}

inline std::vector<double> abs_squared(const std::vector<cplx>& v) {
  std::vector<double> out(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) out[i] = std::norm(v[i]);
  return out;
}

/// Fraction of sum |f^|^2 carried by |xi| > 0.8 xi_max: wraparound monitor for H_xi.
inline double frequency_tail_fraction(const Spectrum& f_hat) {
  double tail = 0.0, total = 0.0;
  const double cut = 0.8 * f_hat.grid.max_freq();
  for (std::size_t i = 0; i < f_hat.size(); ++i) {
    const double m = std::norm(f_hat[i]);
    total += m;
    if (std::abs(f_hat.grid.freq(i)) > cut) tail += m;
  }
  return total > 0.0 ? tail / total : 0.0;
}

// ---------------------------------------------------------------------------
// Phase.

struct PhaseIntegrands {
  std::vector<double> b1, b2;
};

/// (alpha/2s) xi |f^|^2 and (beta/2s) xi H_xi(|f^|^2) at time s.
inline PhaseIntegrands phase_integrands(const Spectrum& f_hat, double s, Coefficients c) {
  const std::size_t n = f_hat.size();
  PhaseIntegrands p{std::vector<double>(n), std::vector<double>(n)};
  const auto a = abs_squared(f_hat.coeffs);
  const auto h = c.beta != 0.0 ? hilbert_xi(a) : std::vector<double>(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    const double xi = f_hat.grid.freq(i);
    p.b1[i] = c.alpha / (2.0 * s) * xi * a[i];
    p.b2[i] = c.beta / (2.0 * s) * xi * h[i];
  }
  return p;
}

struct PhaseState {
  Coefficients coef;
  double t_last = 1.0;
  std::vector<double> B1, B2;
  PhaseIntegrands last;  // integrands at t_last, reused by the next trapezoid

  std::vector<double> B() const {
    std::vector<double> out(B1.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = B1[i] + B2[i];
    return out;
  }
};

/// B(t0, .) = 0 with t0 >= 1 the lower limit of the phase integrals.
inline PhaseState start_phase(const Spectrum& f_hat, Coefficients c, double t0 = 1.0) {
  if (t0 < 1.0) throw std::invalid_argument("phase accumulation starts at t >= 1");
  PhaseState ps;
  ps.coef = c;
  ps.t_last = t0;
  ps.B1.assign(f_hat.size(), 0.0);
  ps.B2.assign(f_hat.size(), 0.0);
  ps.last = phase_integrands(f_hat, t0, c);
  return ps;
}

inline PhaseState accumulate_phase(PhaseState ps, const Spectrum& f_hat, double t_new) {
  if (!(t_new > ps.t_last))
    throw std::invalid_argument("accumulate_phase: times must increase (t_new=" +
                                std::to_string(t_new) + ", t_last=" + std::to_string(ps.t_last) + ")");
  PhaseIntegrands next = phase_integrands(f_hat, t_new, ps.coef);
  const double h = 0.5 * (t_new - ps.t_last);
  for (std::size_t i = 0; i < ps.B1.size(); ++i) {
    ps.B1[i] += h * (ps.last.b1[i] + next.b1[i]);
    ps.B2[i] += h * (ps.last.b2[i] + next.b2[i]);
  }
  ps.last = std::move(next);
  ps.t_last = t_new;
  return ps;
}

/// Accumulates B at every solver step from t = 1 on and keeps a copy of
/// (B1, B2) at each snapshot time >= 1.
class PhaseTracker : public StepObserver {
 public:
  explicit PhaseTracker(Coefficients c) : coef_(c) {}

  void on_step(const SolverState& s) override {
    if (!state_) {
      if (std::abs(s.t - 1.0) <= 1e-12) state_ = start_phase(s.f_hat, coef_, 1.0);
      return;
    }
    state_ = accumulate_phase(std::move(*state_), s.f_hat, s.t);
  }

  void on_snapshot(const SolverState& s) override {
    if (state_ && std::abs(state_->t_last - s.t) <= 1e-12) stored_[s.t] = *state_;
  }

  const std::optional<PhaseState>& current() const { return state_; }
  const std::map<double, PhaseState>& stored() const { return stored_; }

  const PhaseState& at(double t) const {
    for (const auto& [tt, ps] : stored_)
      if (std::abs(tt - t) <= 1e-9 * std::max(1.0, t)) return ps;
    throw std::out_of_range("no phase stored at t=" + std::to_string(t));
  }

 private:
  Coefficients coef_;
  std::optional<PhaseState> state_;
  std::map<double, PhaseState> stored_;
};

// ---------------------------------------------------------------------------
// Extraction.

struct ProfileExtraction {
  double T = 0.0;
  std::vector<cplx> W;      // e^{-iB(T)} f^(T), FFT order
  std::vector<double> Phi;  // B(T) - [(alpha/2) xi |W|^2 + (beta/2) xi H|W|^2] log T
  std::vector<bool> mask;   // |W| > 1e-4 max|W|; Phi is meaningful only here
};

inline ProfileExtraction extract_profile(const Spectrum& f_hat, const PhaseState& ps) {
  if (ps.t_last < 1.0) throw std::invalid_argument("extract_profile needs T >= 1");
  const std::size_t n = f_hat.size();
  ProfileExtraction e;
  e.T = ps.t_last;
  e.W.resize(n);
  e.Phi.resize(n);
  e.mask.resize(n);
  const auto B = ps.B();
  for (std::size_t i = 0; i < n; ++i) e.W[i] = f_hat[i] * std::polar(1.0, -B[i]);
  const auto a = abs_squared(e.W);
  const auto h = hilbert_xi(a);
  const double logT = std::log(e.T);
  double wmax = 0.0;
  for (const auto& w : e.W) wmax = std::max(wmax, std::abs(w));
  for (std::size_t i = 0; i < n; ++i) {
    const double xi = f_hat.grid.freq(i);
    e.Phi[i] = B[i] - (0.5 * ps.coef.alpha * xi * a[i] + 0.5 * ps.coef.beta * xi * h[i]) * logT;
    e.mask[i] = std::abs(e.W[i]) > 1e-4 * wmax;
  }
  return e;
}

/// sup over xi of (1+|xi|)^{1/2} |a - b|.
inline double weighted_sup_difference(const Grid& g, const std::vector<cplx>& a,
                                      const std::vector<cplx>& b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i)
    m = std::max(m, short_bracket(g.freq(i)) * std::abs(a[i] - b[i]));
  return m;
}

inline std::vector<cplx> phase_corrected(const Spectrum& f_hat, const PhaseState& ps) {
  const auto B = ps.B();
  std::vector<cplx> out(f_hat.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = f_hat[i] * std::polar(1.0, -B[i]);
  return out;
}

// ---------------------------------------------------------------------------
// Resonant part and remainder.

struct RemainderResult {
  std::vector<cplx> R;  // R1 + R2, FFT order
  double weighted_sup = 0.0;
};

/// R1 + R2 = d/dt f^ - i [(alpha/2t) xi |f^|^2 + (beta/2t) xi H_xi|f^|^2] f^, with the
/// weighted sup (short bracket) taken over |xi| <= band.
inline RemainderResult resonant_remainder(double t, const Spectrum& f_hat, const Spectrum& f_hat_dot,
                                          Coefficients c, double band) {
  if (t < 1.0) throw std::invalid_argument("resonant_remainder needs t >= 1");
  require_same_grid(f_hat.grid, f_hat_dot.grid);
  PhaseIntegrands p = phase_integrands(f_hat, t, c);
  RemainderResult r;
  r.R.resize(f_hat.size());
  for (std::size_t i = 0; i < f_hat.size(); ++i) {
    r.R[i] = f_hat_dot[i] - I * (p.b1[i] + p.b2[i]) * f_hat[i];
    const double xi = f_hat.grid.freq(i);
    if (std::abs(xi) <= band) r.weighted_sup = std::max(r.weighted_sup, short_bracket(xi) * std::abs(r.R[i]));
  }
  return r;
}

// ---------------------------------------------------------------------------
// Asymptotic profile.

namespace detail {

// FFT-ordered samples -> ascending-xi order.
template <class T>
std::vector<T> ascending(const std::vector<T>& v) {
  const std::size_t n = v.size();
  std::vector<T> out(n);
  for (std::size_t k = 0; k < n; ++k) out[k] = v[(k + n / 2) % n];
  return out;
}

// Four-point (cubic) Lagrange interpolation on a uniform grid x_k = x0 + k h.
template <class T>
T cubic_at(const std::vector<T>& y, double x0, double h, double x) {
  const double s = (x - x0) / h;
  long k = static_cast<long>(std::floor(s)) - 1;
  k = std::clamp<long>(k, 0, static_cast<long>(y.size()) - 4);
  const double u = s - static_cast<double>(k);  // position relative to y[k], in [1, 2] inside
  const double l0 = -(u - 1) * (u - 2) * (u - 3) / 6.0;
  const double l1 = u * (u - 2) * (u - 3) / 2.0;
  const double l2 = -u * (u - 1) * (u - 3) / 2.0;
  const double l3 = u * (u - 1) * (u - 2) / 6.0;
  return l0 * y[k] + l1 * y[k + 1] + l2 * y[k + 2] + l3 * y[k + 3];
}

}  // namespace detail

struct AsymptoticPrediction {
  Field u;
  std::vector<bool> included;  // node has x/2t inside the sampled xi range
  std::size_t excluded = 0;
};

/// u(t,x) ~ (2it)^{-1/2} e^{ix^2/4t} W(xi) exp(i[(alpha xi/2)|W|^2 + (beta xi/2) H|W|^2] log t + i Phi(xi)),
/// xi = x/2t, with W and Phi given on the frequency grid of `xi_grid` (FFT order).
inline AsymptoticPrediction asymptotic_profile(double t, const std::vector<cplx>& W,
                                               const std::vector<double>& Phi, const Grid& xi_grid,
                                               const Grid& x_grid, Coefficients c) {
  if (t < 1.0) throw std::invalid_argument("asymptotic_profile needs t >= 1");
  if (W.size() != xi_grid.n() || Phi.size() != xi_grid.n())
    throw GridMismatch("W / Phi length does not match the frequency grid");
  const auto a = abs_squared(W);
  const auto h = hilbert_xi(a);
  const auto Wa = detail::ascending(W);
  const auto Aa = detail::ascending(a);
  const auto Ha = detail::ascending(h);
  const auto Pa = detail::ascending(Phi);
  const double dxi = xi_grid.dxi();
  const double xi0 = -static_cast<double>(xi_grid.n() / 2) * dxi;
  const double lo = xi0 + dxi, hi = xi0 + static_cast<double>(xi_grid.n() - 3) * dxi;
  const cplx pref = 1.0 / std::sqrt(2.0 * I * t);
  const double logt = std::log(t);

  AsymptoticPrediction p{Field(x_grid), std::vector<bool>(x_grid.n(), false), 0};
  for (std::size_t j = 0; j < x_grid.n(); ++j) {
    const double x = x_grid.node(j);
    const double xi = x / (2.0 * t);
    if (xi < lo || xi > hi) {
      ++p.excluded;
      continue;
    }
    p.included[j] = true;
    const cplx w = detail::cubic_at(Wa, xi0, dxi, xi);
    const double aw = detail::cubic_at(Aa, xi0, dxi, xi);
    const double hw = detail::cubic_at(Ha, xi0, dxi, xi);
    const double phi = detail::cubic_at(Pa, xi0, dxi, xi);
    const double phase = x * x / (4.0 * t) + (0.5 * c.alpha * xi * aw + 0.5 * c.beta * xi * hw) * logt + phi;
    p.u[j] = pref * w * std::polar(1.0, phase);
  }
  return p;
}

struct AsymptoticComparison {
  double t = 0.0;
  double scaled_sup = 0.0;  // t^{1/2} sup |u_sim - u_pred| over included nodes
  double relative = 0.0;    // sup |u_sim - u_pred| / sup |u_sim|
  std::size_t excluded = 0;
};

inline AsymptoticComparison compare_asymptotic(const Field& u_sim, const AsymptoticPrediction& p, double t) {
  require_same_grid(u_sim.grid, p.u.grid);
  AsymptoticComparison c;
  c.t = t;
  c.excluded = p.excluded;
  double diff = 0.0, ref = 0.0;
  for (std::size_t j = 0; j < u_sim.size(); ++j) {
    if (!p.included[j]) continue;
    diff = std::max(diff, std::abs(u_sim[j] - p.u[j]));
    ref = std::max(ref, std::abs(u_sim[j]));
  }
  c.scaled_sup = std::sqrt(t) * diff;
  c.relative = ref > 0.0 ? diff / ref : 0.0;
  return c;
}

// ---------------------------------------------------------------------------
// L2 limit.

struct MassLimit {
  double D_infty = 0.0;
  double initial = 0.0;       // ||phi||
  std::optional<Fit> rate;    // |‖u(t)‖ - D_inf| vs t; empty when degenerate
  bool degenerate = false;    // mass conserved to roundoff
  bool monotone = true;       // sign of consecutive changes matches sgn(beta)
  bool approach_side = true;  // beta<0: from above; beta>0: from below
  double worst_violation = 0.0;
};

/// Aitken extrapolation on the geometric triple (T/4, T/2, T) of stored
/// snapshots, followed by a log-log fit of the approach over [fit_lo, fit_hi].
inline MassLimit mass_limit(const Trajectory& tr, double fit_lo = 10.0, double fit_hi = -1.0,
                            double tolerance = 1e-9) {
  const double T = tr.snapshots.empty() ? 0.0 : tr.snapshots.back().t;
  if (T < 100.0) throw std::invalid_argument("mass_limit needs a run reaching t >= 100");
  if (fit_hi < 0.0) fit_hi = 0.5 * T;
  auto norm_at = [&](double t) { return l2_norm(tr.at(t).f_hat); };
  const double m1 = norm_at(0.25 * T), m2 = norm_at(0.5 * T), m3 = norm_at(T);
  MassLimit r;
  r.initial = l2_norm(tr.snapshots.front().f_hat);
  const double d1 = m2 - m1, d2 = m3 - m2;
  const double scale = std::max(m3, 1e-300);
  if (std::abs(d1) <= 1e-13 * scale || std::abs(d2) <= 1e-13 * scale || std::abs(d2 - d1) <= 1e-15 * scale) {
    r.degenerate = true;
    r.D_infty = m3;
  } else {
    r.D_infty = m3 - d2 * d2 / (d2 - d1);
  }
  const double beta = tr.config.coef.beta;
  const double sgn = beta > 0 ? 1.0 : (beta < 0 ? -1.0 : 0.0);
  Series gap;
  double prev = -1.0;
  for (const auto& s : tr.snapshots) {
    const double m = l2_norm(s.f_hat);
    if (prev >= 0.0 && sgn != 0.0) {
      const double v = -sgn * (m - prev) / scale;
      if (v > tolerance) r.monotone = false;
      r.worst_violation = std::max(r.worst_violation, v);
    }
    prev = m;
    if (sgn != 0.0 && sgn * (r.D_infty - m) < -tolerance * scale) r.approach_side = false;
    if (s.t > 0.0) gap.emplace_back(s.t, std::abs(m - r.D_infty));
  }
  if (!r.degenerate) {
    Series window;
    for (const auto& p : gap)
      if (p.first >= fit_lo && p.first <= fit_hi && p.second > 0.0) window.push_back(p);
    if (window.size() >= 2) r.rate = decay_fit(window);
  }
  return r;
}

}  // namespace kdnls
