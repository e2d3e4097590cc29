#pragma once

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

#include "fft.hpp"
#include "grid.hpp"

namespace kdnls {

// ---------------------------------------------------------------------------
// Transforms.
//
// coeffs[i] = dx/sqrt(2 pi) * sum_j f(x_j) e^{-i x_j xi_i}. With x_j = -L/2 + j dx
// the shift by -L/2 contributes (-1)^k, and (-1)^k = (-1)^i since n is even.

namespace detail {
inline double parity(std::size_t i) { return (i & 1u) ? -1.0 : 1.0; }
}  // namespace detail

inline Spectrum forward(const Field& f) {
  Spectrum s(f.grid, f.values);
  fft::forward(s.coeffs);
  const double scale = f.grid.dx() / std::sqrt(2.0 * pi);
  for (std::size_t i = 0; i < s.size(); ++i) s[i] *= scale * detail::parity(i);
  return s;
}

inline Field inverse(const Spectrum& s) {
  Field f(s.grid, s.coeffs);
  const double scale = std::sqrt(2.0 * pi) / s.grid.dx() / static_cast<double>(s.grid.n());
  for (std::size_t i = 0; i < f.size(); ++i) f[i] *= scale * detail::parity(i);
  fft::backward(f.values);
  return f;
}

/// coeffs[i] *= m(xi_i), every mode including Nyquist.
template <class M>
Spectrum apply_multiplier(Spectrum s, M&& m) {
  for (std::size_t i = 0; i < s.size(); ++i) s[i] *= cplx(m(s.grid.freq(i)));
  return s;
}

namespace detail {

// Applies a diagonal multiplier given per FFT index directly in the raw DFT
// domain; the normalization and (-1)^k factors commute with it.
template <class M>
Field apply_indexed(const Field& f, M&& m_of_index) {
  Field out = f;
  fft::forward(out.values);
  const double inv_n = 1.0 / static_cast<double>(f.grid.n());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] *= cplx(m_of_index(i)) * inv_n;
  fft::backward(out.values);
  return out;
}

inline double sgn_symbol(const Grid& g, std::size_t i) {
  if (i == g.nyquist_index() || i == 0) return 0.0;
  return g.wavenumber(i) > 0 ? 1.0 : -1.0;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Multipliers. Odd symbols (sgn, i xi) vanish on the Nyquist mode.

inline Field hilbert(const Field& f) {
  const Grid& g = f.grid;
  return detail::apply_indexed(f, [&](std::size_t i) { return -I * detail::sgn_symbol(g, i); });
}

inline Field d_dx(const Field& f) {
  const Grid& g = f.grid;
  return detail::apply_indexed(f, [&](std::size_t i) {
    return i == g.nyquist_index() ? cplx{} : I * g.freq(i);
  });
}

inline Field d_dx2(const Field& f) {
  const Grid& g = f.grid;
  return detail::apply_indexed(f, [&](std::size_t i) {
    const double xi = g.freq(i);
    return cplx{-xi * xi, 0.0};
  });
}

/// |D|^s with the Nyquist mode removed, so d_abs_pow(f, 1) == hilbert(d_dx(f)).
inline Field d_abs_pow(const Field& f, double s) {
  const Grid& g = f.grid;
  return detail::apply_indexed(f, [&](std::size_t i) {
    if (i == g.nyquist_index() || i == 0) return cplx{};
    return cplx{std::pow(std::abs(g.freq(i)), s), 0.0};
  });
}

inline Field d_abs(const Field& f) { return d_abs_pow(f, 1.0); }

// ---------------------------------------------------------------------------
// Littlewood-Paley bump: rho(xi) = 1 for |xi| <= 1, 0 for |xi| >= 2, C-infinity
// in between via the standard exp(-1/s) smooth step.

inline double smooth_step(double r) {
  if (r <= 0.0) return 0.0;
  if (r >= 1.0) return 1.0;
  const double a = std::exp(-1.0 / r);
  const double b = std::exp(-1.0 / (1.0 - r));
  return a / (a + b);
}

inline double lp_bump(double xi) { return smooth_step(2.0 - std::abs(xi)); }

inline const char* lp_bump_description() {
  return "rho(xi)=S(2-|xi|), S(r)=h(r)/(h(r)+h(1-r)), h(s)=exp(-1/s)";
}

enum class Projection { p_plus, p_minus, q_plus, q_minus, lp_block, lp_low, lp_high };

inline bool is_dyadic(double N) {
  if (!(N > 0.0) || !std::isfinite(N)) return false;
  const double e = std::log2(N);
  return std::abs(e - std::round(e)) < 1e-12;
}

/// Symbol of the projection at FFT index i.
inline double projection_symbol(const Grid& g, std::size_t i, Projection which, double N = 1.0) {
  const double xi = g.freq(i);
  const bool nyq = (i == g.nyquist_index());
  const double chi_plus = (!nyq && xi > 0.0) ? 1.0 : 0.0;
  const double chi_minus = (!nyq && xi < 0.0) ? 1.0 : 0.0;
  switch (which) {
    case Projection::p_plus: return chi_plus;
    case Projection::p_minus: return chi_minus;
    case Projection::q_plus: return chi_plus * (1.0 - lp_bump(xi));
    case Projection::q_minus: return chi_minus * (1.0 - lp_bump(xi));
    case Projection::lp_block: return lp_bump(xi / N) - lp_bump(2.0 * xi / N);
    case Projection::lp_low: return lp_bump(xi / N);
    case Projection::lp_high: return 1.0 - lp_bump(xi / N);
  }
  return 0.0;
}

inline Field project(const Field& f, Projection which, double N = 1.0) {
  const bool lp = which == Projection::lp_block || which == Projection::lp_low ||
                  which == Projection::lp_high;
  if (lp && !is_dyadic(N))
    throw std::invalid_argument("Littlewood-Paley cutoff must be a dyadic number, got " +
                                std::to_string(N));
  const Grid& g = f.grid;
  return detail::apply_indexed(f, [&](std::size_t i) { return projection_symbol(g, i, which, N); });
}

/// Dyadic N = 2, 4, ... up to the first N >= the largest grid frequency, so that
/// P_{<=1} + sum P_N is the identity on the grid.
inline std::vector<double> dyadic_blocks(const Grid& g) {
  std::vector<double> out;
  for (double N = 2.0;; N *= 2.0) {
    out.push_back(N);
    if (N >= g.max_freq()) break;
  }
  return out;
}

// ---------------------------------------------------------------------------
// Free flow. e^{it d^2} acts as e^{-it xi^2}; the profile is f^ = e^{it xi^2} u^.

inline Spectrum free_propagate(Spectrum s, double t) {
  for (std::size_t i = 0; i < s.size(); ++i) {
    const double xi = s.grid.freq(i);
    s[i] *= std::polar(1.0, -t * xi * xi);
  }
  return s;
}

inline Spectrum to_profile(const Field& u, double t) { return free_propagate(forward(u), -t); }

inline Field from_profile(const Spectrum& f_hat, double t) {
  return inverse(free_propagate(f_hat, t));
}

// ---------------------------------------------------------------------------
// Anti-derivatives (physical space, trapezoid).

inline std::vector<cplx> cumulative_trapezoid(const Field& f) {
  const double dx = f.grid.dx();
  std::vector<cplx> g(f.size());
  g[0] = 0.0;
  for (std::size_t j = 1; j < f.size(); ++j) g[j] = g[j - 1] + 0.5 * dx * (f[j] + f[j - 1]);
  return g;
}

/// L2 norm of f over the leftmost 5% of nodes.
inline double left_tail_norm(const Field& f) {
  const std::size_t m = std::max<std::size_t>(1, f.size() / 20);
  double acc = 0.0;
  for (std::size_t j = 0; j < m; ++j) acc += std::norm(f[j]);
  return std::sqrt(acc * f.grid.dx());
}

struct Antiderivative {
  Field value;
  bool boundary_warning = false;
};

/// (d_x^{-1} f)(x) = integral of f from the left end of the box to x.
inline Antiderivative antiderivative_left(const Field& f, double tail_tolerance = 1e-8) {
  Antiderivative out{Field(f.grid, cumulative_trapezoid(f)), false};
  out.boundary_warning = left_tail_norm(f) > tail_tolerance;
  return out;
}

/// Raised-cosine psi(x) = (1 + cos(pi (x-c)/h)) / (2h) on |x-c| < h, normalized so the
/// grid quadrature of psi is exactly one.
class PsiBump {
 public:
  PsiBump(double center, double halfwidth) : center_(center), halfwidth_(halfwidth) {
    if (!(halfwidth > 0.0) || !std::isfinite(center) || !std::isfinite(halfwidth))
      throw std::invalid_argument("psi bump needs finite center and positive halfwidth");
  }

  static PsiBump standard(const Grid& g) { return PsiBump(0.0, g.length() / 20.0); }

  double center() const { return center_; }
  double halfwidth() const { return halfwidth_; }

  double evaluate(double x) const {
    const double r = (x - center_) / halfwidth_;
    if (std::abs(r) >= 1.0) return 0.0;
    return (1.0 + std::cos(pi * r)) / (2.0 * halfwidth_);
  }

  void validate(const Grid& g) const {
    const double lo = g.node(0), hi = g.node(g.n() - 1);
    if (center_ - halfwidth_ <= lo || center_ + halfwidth_ >= hi)
      throw std::invalid_argument("psi support leaves the grid");
    if (2.0 * halfwidth_ < 8.0 * g.dx())
      throw std::invalid_argument("psi support is under-resolved (fewer than 8 nodes)");
  }

  /// Grid samples rescaled so that sum psi_j dx = 1.
  std::vector<double> weights(const Grid& g) const {
    validate(g);
    std::vector<double> w(g.n());
    double total = 0.0;
    for (std::size_t j = 0; j < g.n(); ++j) {
      w[j] = evaluate(g.node(j));
      total += w[j];
    }
    total *= g.dx();
    for (auto& v : w) v /= total;
    return w;
  }

  /// sum psi_j f_j dx
  cplx integrate(const Field& f) const {
    const auto w = weights(f.grid);
    cplx acc = 0.0;
    for (std::size_t j = 0; j < f.size(); ++j) acc += w[j] * f[j];
    return acc * f.grid.dx();
  }

  double first_moment(const Grid& g) const {
    const auto w = weights(g);
    double acc = 0.0;
    for (std::size_t j = 0; j < g.n(); ++j) acc += w[j] * g.node(j);
    return acc * g.dx();
  }

 private:
  double center_;
  double halfwidth_;
};

/// (d~_x^{-1} g)(x) = int psi(z) int_z^x g(y) dy dz = G(x) - int psi G, G the left antiderivative.
inline Field antiderivative_psi(const Field& f, const PsiBump& psi) {
  Field G(f.grid, cumulative_trapezoid(f));
  const cplx mean = psi.integrate(G);
  for (auto& v : G.values) v -= mean;
  return G;
}

// ---------------------------------------------------------------------------
// Dealiased products.

enum class Dealias { padding, two_thirds };

inline const char* to_string(Dealias d) { return d == Dealias::padding ? "padding" : "two_thirds"; }

namespace detail {

// Raw DFT (length n) -> samples on the 2n grid of the band-limited interpolant.
inline void pad_raw(const std::vector<cplx>& raw, std::vector<cplx>& out) {
  const std::size_t n = raw.size();
  out.assign(2 * n, cplx{});
  for (std::size_t i = 0; i < n / 2; ++i) out[i] = raw[i];
  for (std::size_t i = n / 2; i < n; ++i) out[i + n] = raw[i];
  fft::backward(out);
  const double inv_n = 1.0 / static_cast<double>(n);
  for (auto& v : out) v *= inv_n;
}

// Samples on the 2n grid -> raw DFT (length n) of the truncated product.
inline void truncate_raw(std::vector<cplx>& padded, std::vector<cplx>& raw) {
  const std::size_t n = padded.size() / 2;
  fft::forward(padded);
  raw.resize(n);
  for (std::size_t i = 0; i < n / 2; ++i) raw[i] = 0.5 * padded[i];
  for (std::size_t i = n / 2; i < n; ++i) raw[i] = 0.5 * padded[i + n];
}

inline void two_thirds_filter(std::vector<cplx>& raw, const Grid& g) {
  const long cut = static_cast<long>(g.n()) / 3;
  for (std::size_t i = 0; i < raw.size(); ++i)
    if (std::labs(g.wavenumber(i)) > cut) raw[i] = 0.0;
}

}  // namespace detail

/// Product a*b with the aliased modes removed. `padding` evaluates on a 2n grid
/// (exact for the quadratic product of band-limited inputs); `two_thirds` truncates
/// inputs and output to |k| <= n/3.
inline Field product(const Field& a, const Field& b, Dealias policy = Dealias::padding) {
  require_same_grid(a.grid, b.grid);
  const Grid& g = a.grid;
  const std::size_t n = g.n();
  std::vector<cplx> ra = a.values, rb = b.values;
  fft::forward(ra);
  fft::forward(rb);
  std::vector<cplx> raw;
  if (policy == Dealias::padding) {
    std::vector<cplx> pa, pb;
    detail::pad_raw(ra, pa);
    detail::pad_raw(rb, pb);
    for (std::size_t j = 0; j < 2 * n; ++j) pa[j] *= pb[j];
    detail::truncate_raw(pa, raw);
  } else {
    detail::two_thirds_filter(ra, g);
    detail::two_thirds_filter(rb, g);
    const double inv_n = 1.0 / static_cast<double>(n);
    for (std::size_t i = 0; i < n; ++i) {
      ra[i] *= inv_n;
      rb[i] *= inv_n;
    }
    fft::backward(ra);
    fft::backward(rb);
    raw.resize(n);
    for (std::size_t j = 0; j < n; ++j) raw[j] = ra[j] * rb[j];
    fft::forward(raw);
    detail::two_thirds_filter(raw, g);
  }
  Field out(g, std::move(raw));
  fft::backward(out.values);
  const double inv_n = 1.0 / static_cast<double>(n);
  for (auto& v : out.values) v *= inv_n;
  return out;
}

// ---------------------------------------------------------------------------
// Norms on the grid.

inline double l2_norm(const Field& f) {
  double acc = 0.0;
  for (const auto& v : f.values) acc += std::norm(v);
  return std::sqrt(acc * f.grid.dx());
}

inline double l2_norm(const Spectrum& s) {
  double acc = 0.0;
  for (const auto& v : s.coeffs) acc += std::norm(v);
  return std::sqrt(acc * s.grid.dxi());
}

inline double sup_norm(const Field& f) { return sup_abs(f.values); }

/// H^s norm with the Japanese bracket (1 + xi^2)^{1/2}.
inline double sobolev_norm(const Spectrum& s, double order) {
  double acc = 0.0;
  for (std::size_t i = 0; i < s.size(); ++i) {
    const double xi = s.grid.freq(i);
    acc += std::pow(1.0 + xi * xi, order) * std::norm(s[i]);
  }
  return std::sqrt(acc * s.grid.dxi());
}
inline double sobolev_norm(const Field& f, double order) { return sobolev_norm(forward(f), order); }

}  // namespace kdnls
