#pragma once

#include <cmath>
#include <complex>
#include <cstddef>
#include <numbers>
#include <stdexcept>
#include <string>
#include <vector>

namespace kdnls {

using cplx = std::complex<double>;
inline constexpr double pi = std::numbers::pi;
inline constexpr cplx I{0.0, 1.0};

// Raised when two fields/spectra on different grids are combined.
struct GridMismatch : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

// Invalid experiment or solver configuration; `field` names the offending key.
struct ConfigError : std::invalid_argument {
  std::string field;
  ConfigError(const std::string& key, const std::string& what)
      : std::invalid_argument(key.empty() ? what : key + ": " + what), field(key) {}
};

// Raised when a run has to stop: NaN, blow-up or boundary contamination.
struct NumericalAbort : std::runtime_error {
  double t;
  NumericalAbort(const std::string& what, double time)
      : std::runtime_error(what), t(time) {}
};

/// Uniform periodic grid on [-L/2, L/2) with its dual frequency grid.
///
/// Frequencies are kept in FFT order: index i carries wavenumber k = i for
/// i < n/2 and k = i - n otherwise, so index n/2 is the Nyquist mode k = -n/2.
class Grid {
 public:
  Grid() = default;
  Grid(std::size_t n, double length) : n_(n), length_(length) {
    if (n < 16 || (n & (n - 1)) != 0)
      throw std::invalid_argument("grid size must be a power of two >= 16, got " +
                                  std::to_string(n));
    if (!(length > 0.0) || !std::isfinite(length))
      throw std::invalid_argument("grid length must be positive and finite");
  }

  std::size_t n() const { return n_; }
  double length() const { return length_; }
  double dx() const { return length_ / static_cast<double>(n_); }
  double dxi() const { return 2.0 * pi / length_; }
  std::size_t nyquist_index() const { return n_ / 2; }

  double node(std::size_t j) const { return -0.5 * length_ + static_cast<double>(j) * dx(); }

  long wavenumber(std::size_t i) const {
    return i < n_ / 2 ? static_cast<long>(i) : static_cast<long>(i) - static_cast<long>(n_);
  }
  double freq(std::size_t i) const { return dxi() * static_cast<double>(wavenumber(i)); }
  double max_freq() const { return dxi() * static_cast<double>(n_ / 2); }

  std::vector<double> nodes() const {
    std::vector<double> x(n_);
    for (std::size_t j = 0; j < n_; ++j) x[j] = node(j);
    return x;
  }
  std::vector<double> freqs() const {
    std::vector<double> xi(n_);
    for (std::size_t i = 0; i < n_; ++i) xi[i] = freq(i);
    return xi;
  }

  friend bool operator==(const Grid& a, const Grid& b) {
    return a.n_ == b.n_ && a.length_ == b.length_;
  }

 private:
  std::size_t n_ = 16;
  double length_ = 1.0;
};

inline void require_same_grid(const Grid& a, const Grid& b) {
  if (!(a == b)) throw GridMismatch("operands live on different grids");
}

/// Physical-space samples u(x_j).
struct Field {
  Grid grid;
  std::vector<cplx> values;

  Field() = default;
  explicit Field(const Grid& g) : grid(g), values(g.n(), cplx{}) {}
  Field(const Grid& g, std::vector<cplx> v) : grid(g), values(std::move(v)) {
    if (values.size() != grid.n()) throw GridMismatch("field length does not match grid");
  }
  template <class F>
  static Field sample(const Grid& g, F&& f) {
    Field out(g);
    for (std::size_t j = 0; j < g.n(); ++j) out.values[j] = f(g.node(j));
    return out;
  }

  std::size_t size() const { return values.size(); }
  cplx& operator[](std::size_t j) { return values[j]; }
  const cplx& operator[](std::size_t j) const { return values[j]; }
};

/// Fourier-side coefficients, coeffs[i] ~ u^(xi_i) with the unitary continuum normalization.
struct Spectrum {
  Grid grid;
  std::vector<cplx> coeffs;

  Spectrum() = default;
  explicit Spectrum(const Grid& g) : grid(g), coeffs(g.n(), cplx{}) {}
  Spectrum(const Grid& g, std::vector<cplx> c) : grid(g), coeffs(std::move(c)) {
    if (coeffs.size() != grid.n()) throw GridMismatch("spectrum length does not match grid");
  }

  std::size_t size() const { return coeffs.size(); }
  cplx& operator[](std::size_t i) { return coeffs[i]; }
  const cplx& operator[](std::size_t i) const { return coeffs[i]; }
};

// Elementwise helpers. Kept minimal; the operators below only need these.

inline Field operator+(Field a, const Field& b) {
  require_same_grid(a.grid, b.grid);
  for (std::size_t j = 0; j < a.size(); ++j) a[j] += b[j];
  return a;
}
inline Field operator-(Field a, const Field& b) {
  require_same_grid(a.grid, b.grid);
  for (std::size_t j = 0; j < a.size(); ++j) a[j] -= b[j];
  return a;
}
inline Field operator*(cplx s, Field a) {
  for (auto& v : a.values) v *= s;
  return a;
}
inline Field operator*(double s, Field a) { return cplx{s, 0.0} * std::move(a); }

// Pointwise product on the grid, no dealiasing.
inline Field pointwise(const Field& a, const Field& b) {
  require_same_grid(a.grid, b.grid);
  Field out(a.grid);
  for (std::size_t j = 0; j < a.size(); ++j) out[j] = a[j] * b[j];
  return out;
}
inline Field conj(Field a) {
  for (auto& v : a.values) v = std::conj(v);
  return a;
}
inline Field real_part(Field a) {
  for (auto& v : a.values) v = cplx{v.real(), 0.0};
  return a;
}
template <class F>
Field map(Field a, F&& f) {
  for (auto& v : a.values) v = f(v);
  return a;
}

inline Spectrum operator+(Spectrum a, const Spectrum& b) {
  require_same_grid(a.grid, b.grid);
  for (std::size_t i = 0; i < a.size(); ++i) a[i] += b[i];
  return a;
}
inline Spectrum operator-(Spectrum a, const Spectrum& b) {
  require_same_grid(a.grid, b.grid);
  for (std::size_t i = 0; i < a.size(); ++i) a[i] -= b[i];
  return a;
}
inline Spectrum operator*(cplx s, Spectrum a) {
  for (auto& v : a.coeffs) v *= s;
  return a;
}
inline Spectrum operator*(double s, Spectrum a) { return cplx{s, 0.0} * std::move(a); }

inline bool all_finite(const std::vector<cplx>& v) {
  for (const auto& z : v)
    if (!std::isfinite(z.real()) || !std::isfinite(z.imag())) return false;
  return true;
}

inline double sup_abs(const std::vector<cplx>& v) {
  double m = 0.0;
  for (const auto& z : v) m = std::max(m, std::abs(z));
  return m;
}

}  // namespace kdnls
