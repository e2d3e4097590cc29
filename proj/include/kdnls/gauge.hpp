#pragma once

// Gauge transformations v± = e^{rho±} Q± u and the pieces of the equation they solve.

#include <cmath>
#include <stdexcept>
#include <string>

#include "solver.hpp"
#include "spectral.hpp"

namespace kdnls {

enum class Sign : int { plus = 1, minus = -1 };

inline double value(Sign s) { return s == Sign::plus ? 1.0 : -1.0; }
inline Projection q_projection(Sign s) { return s == Sign::plus ? Projection::q_plus : Projection::q_minus; }
inline const char* to_string(Sign s) { return s == Sign::plus ? "+" : "-"; }

namespace detail {

inline Field modulus_squared(const Field& u) { return real_part(product(u, conj(u))); }

inline void require_real(const Field& w, const char* what) {
  double re = 0.0, im = 0.0;
  for (const auto& v : w.values) {
    re = std::max(re, std::abs(v.real()));
    im = std::max(im, std::abs(v.imag()));
  }
  if (im > 1e-12 * std::max(re, 1e-300))
    throw std::invalid_argument(std::string(what) + " must be real");
}

}  // namespace detail

/// P±_{alpha beta}(w) = (-i alpha ∓ beta/2) w - i (beta/2) H(w), w real.
inline Field p_ab(const Field& w, Sign s, Coefficients c) {
  detail::require_real(w, "p_ab argument");
  const cplx a = -I * c.alpha - value(s) * c.beta / 2.0;
  return a * w + (-I * c.beta / 2.0) * hilbert(w);
}

/// rho± = (-i alpha ∓ beta/2) d^{-1}|u|^2 - i (beta/2) d~^{-1} H(|u|^2).
inline Field rho(const Field& u, Sign s, const PsiBump& psi, Coefficients c,
                 bool* boundary_warning = nullptr) {
  Field w = detail::modulus_squared(u);
  auto left = antiderivative_left(w);
  if (boundary_warning) *boundary_warning = *boundary_warning || left.boundary_warning;
  const cplx a = -I * c.alpha - value(s) * c.beta / 2.0;
  return a * left.value + (-I * c.beta / 2.0) * real_part(antiderivative_psi(hilbert(w), psi));
}

struct GaugeFields {
  Field rho_plus, rho_minus;
  Field rho0_plus, rho0_minus;  // real parts
  Field v_plus, v_minus;
  bool boundary_warning = false;
};

inline Field gauge_v(const Field& u, Sign s, const PsiBump& psi, Coefficients c,
                     bool* boundary_warning = nullptr) {
  Field r = rho(u, s, psi, c, boundary_warning);
  Field q = project(u, q_projection(s));
  for (std::size_t j = 0; j < q.size(); ++j) q[j] *= std::exp(r[j]);
  return q;
}

inline GaugeFields gauge_transform(const Field& u, const PsiBump& psi, Coefficients c) {
  GaugeFields g;
  g.rho_plus = rho(u, Sign::plus, psi, c, &g.boundary_warning);
  g.rho_minus = rho(u, Sign::minus, psi, c, &g.boundary_warning);
  g.rho0_plus = real_part(g.rho_plus);
  g.rho0_minus = real_part(g.rho_minus);
  g.v_plus = project(u, Projection::q_plus);
  g.v_minus = project(u, Projection::q_minus);
  for (std::size_t j = 0; j < u.size(); ++j) {
    g.v_plus[j] *= std::exp(g.rho_plus[j]);
    g.v_minus[j] *= std::exp(g.rho_minus[j]);
  }
  return g;
}

/// Four-line remainder R5±; commutators as difference of both orderings.
inline Field r5(const Field& u, Sign s, Coefficients c) {
  const Projection Q = q_projection(s);
  auto q = [&](const Field& f) { return project(f, Q); };
  auto mul = [](const Field& a, const Field& b) { return product(a, b); };

  const Field ub = conj(u);
  const Field ux = d_dx(u);
  const Field ubx = conj(ux);
  const Field w = detail::modulus_squared(u);
  const Field Hw = real_part(hilbert(w));
  const Field Qu = q(u);

  Field t1 = q(mul(mul(u, u), ubx)) - 2.0 * mul(mul(u, ubx), Qu);

  const Field H_u_ubx = hilbert(mul(u, ubx));
  Field t2 = q(mul(H_u_ubx, u)) - mul(mul(q(hilbert(u)), ubx), u) - mul(H_u_ubx, Qu);

  Field t3 = q(mul(u, hilbert(mul(ub, ux)))) - mul(w, q(hilbert(ux)));

  const Field g = 2.0 * c.alpha * w + c.beta * Hw;
  Field t4 = q(mul(g, ux)) - mul(g, q(ux));

  return c.alpha * t1 + c.beta * t2 + c.beta * t3 + t4;
}

/// G± = P±[(3/2) alpha w^2 + 2 beta H(w) w] - i [P±(w)]^2 + beta (i alpha ± beta/2) d^{-1}[H(w) w_x].
inline Field g_pm(const Field& u, Sign s, Coefficients c, bool* boundary_warning = nullptr) {
  const Field w = detail::modulus_squared(u);
  const Field Hw = real_part(hilbert(w));
  Field quartic = real_part(1.5 * c.alpha * product(w, w) + 2.0 * c.beta * product(Hw, w));
  const Field pw = p_ab(w, s, c);
  auto left = antiderivative_left(product(Hw, d_dx(w)));
  if (boundary_warning) *boundary_warning = *boundary_warning || left.boundary_warning;
  return p_ab(quartic, s, c) + (-I) * product(pw, pw) +
         (c.beta * (I * c.alpha + value(s) * c.beta / 2.0)) * left.value;
}

/// int psi H[2 Re(i ū u_x) + (3/2) alpha w^2 + 2 beta H(w) w] dz, a real scalar.
inline double psi_scalar_term(const Field& u, const PsiBump& psi, Coefficients c) {
  const Field w = detail::modulus_squared(u);
  const Field Hw = real_part(hilbert(w));
  Field a = real_part(2.0 * real_part(I * product(conj(u), d_dx(u))) +
                      1.5 * c.alpha * product(w, w) + 2.0 * c.beta * product(Hw, w));
  return psi.integrate(hilbert(a)).real();
}

/// Everything on the right of (d_t - i d_x^2) v± = ..., evaluated at a single time.
inline Field gauged_rhs(const Field& u, Sign s, const PsiBump& psi, Coefficients c) {
  const Field v = gauge_v(u, s, psi, c);
  const Field r = rho(u, s, psi, c);
  Field out = r5(u, s, c);
  for (std::size_t j = 0; j < out.size(); ++j) out[j] *= std::exp(r[j]);

  const Field w = detail::modulus_squared(u);
  const Field Hw = real_part(hilbert(w));
  Field extra = (I * c.beta * c.beta / 2.0) *
                real_part(antiderivative_psi(hilbert(product(Hw, d_dx(w))), psi));
  const cplx scalar = I * (c.beta / 2.0) * psi_scalar_term(u, psi, c);
  const Field G = g_pm(u, s, c);
  for (std::size_t j = 0; j < out.size(); ++j) out[j] += (G[j] + extra[j] + scalar) * v[j];
  return out;
}

/// (d_t - i d_x^2) v± - rhs, with d_t from the centered difference of the two
/// neighbouring fields at t ± h.
inline Field gauged_residual_field(const Field& u_minus, const Field& u_center, const Field& u_plus,
                                   double h, Sign s, const PsiBump& psi, Coefficients c) {
  if (!(h > 0.0)) throw std::invalid_argument("probe step must be positive");
  const Field vm = gauge_v(u_minus, s, psi, c);
  const Field vp = gauge_v(u_plus, s, psi, c);
  const Field vc = gauge_v(u_center, s, psi, c);
  Field dv = (1.0 / (2.0 * h)) * (vp - vm);
  return dv - I * d_dx2(vc) - gauged_rhs(u_center, s, psi, c);
}

namespace detail {
inline const SolverState& probe_snapshot(const Trajectory& tr, double t) {
  const SolverState* st = tr.find(t);
  if (!st)
    throw std::out_of_range("gauged residual needs a snapshot at t=" + std::to_string(t));
  return *st;
}
}  // namespace detail

inline Field gauged_residual_field(const Trajectory& tr, double t, double h, Sign s,
                                   const PsiBump& psi) {
  return gauged_residual_field(detail::probe_snapshot(tr, t - h).field(),
                               detail::probe_snapshot(tr, t).field(),
                               detail::probe_snapshot(tr, t + h).field(), h, s, psi,
                               tr.config.coef);
}

/// L2 norm of the residual of the v± equation, probed at t with step h.
inline double gauged_residual(const Trajectory& tr, double t, double h, Sign s, const PsiBump& psi) {
  return l2_norm(gauged_residual_field(tr, t, h, s, psi));
}

/// Residual with the O(h^2) differencing error removed: (4 r(h/2) - r(h)) / 3.
inline double gauged_residual_extrapolated(const Trajectory& tr, double t, double h, Sign s,
                                           const PsiBump& psi) {
  Field coarse = gauged_residual_field(tr, t, h, s, psi);
  Field fine = gauged_residual_field(tr, t, 0.5 * h, s, psi);
  return l2_norm((4.0 / 3.0) * fine - (1.0 / 3.0) * coarse);
}

}  // namespace kdnls
