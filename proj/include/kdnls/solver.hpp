#pragma once

#include <algorithm>
#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include "spectral.hpp"

namespace kdnls {

/// alpha, beta in  i u_t + u_xx = i alpha (|u|^2 u)_x + i beta (H(|u|^2) u)_x.
struct Coefficients {
  double alpha = 0.0;
  double beta = 0.0;
};

// ---------------------------------------------------------------------------
// Initial data.

enum class InitialFamily { gaussian, sech, samples };

struct InitialData {
  InitialFamily family = InitialFamily::gaussian;
  double amplitude = 0.1;
  double width = 1.0;
  double chirp = 0.0;   // multiplies e^{i chirp x^2}
  double center = 0.0;
  std::optional<double> target_epsilon;  // rescale so the measured size equals this
  std::vector<cplx> samples;             // for InitialFamily::samples
};

/// ||phi||_{H^2} + ||x phi||_{H^1}, the size of the data as used in the small-data theory.
inline double measure_epsilon(const Field& phi) {
  Field xphi = phi;
  for (std::size_t j = 0; j < xphi.size(); ++j) xphi[j] *= phi.grid.node(j);
  return sobolev_norm(phi, 2.0) + sobolev_norm(xphi, 1.0);
}

inline Field make_initial(const Grid& g, const InitialData& d) {
  Field phi(g);
  switch (d.family) {
    case InitialFamily::gaussian:
    case InitialFamily::sech:
      if (!(d.width > 0.0)) throw ConfigError("width", "must be positive");
      phi = Field::sample(g, [&](double x) {
        const double y = (x - d.center) / d.width;
        const double env =
            d.family == InitialFamily::gaussian ? std::exp(-0.5 * y * y) : 1.0 / std::cosh(y);
        return d.amplitude * env * std::polar(1.0, d.chirp * (x - d.center) * (x - d.center));
      });
      break;
    case InitialFamily::samples:
      if (d.samples.size() != g.n())
        throw ConfigError("samples", "sample count does not match grid size");
      phi = Field(g, d.samples);
      break;
  }
  if (!all_finite(phi.values)) throw ConfigError("initial", "initial data is not finite");
  if (d.target_epsilon) {
    const double eps = measure_epsilon(phi);
    if (!(eps > 0.0)) throw ConfigError("epsilon", "cannot rescale zero data");
    phi = (*d.target_epsilon / eps) * phi;
  }
  return phi;
}

// ---------------------------------------------------------------------------
// Nonlinearity and the profile right-hand side.

/// Workspace-holding evaluator of N(u) = alpha (w u)_x + beta (H(w) u)_x, w = |u|^2,
/// working on raw (unnormalized) DFT coefficients of u.
class NonlinearityKernel {
 public:
  NonlinearityKernel(const Grid& g, Coefficients c, Dealias policy)
      : grid_(g), coef_(c), policy_(policy) {}

  /// In: raw DFT of u (length n). Out: raw DFT of N(u), written over the input.
  void apply_raw(std::vector<cplx>& raw) {
    const std::size_t n = grid_.n();
    const double inv_n = 1.0 / static_cast<double>(n);
    if (policy_ == Dealias::padding) {
      detail::pad_raw(raw, u2_);
      w2_.resize(2 * n);
      for (std::size_t j = 0; j < 2 * n; ++j) w2_[j] = std::norm(u2_[j]);
      detail::truncate_raw(w2_, w_);
      mix_hilbert(w_);
      detail::pad_raw(w_, w2_);
      for (std::size_t j = 0; j < 2 * n; ++j) w2_[j] *= u2_[j];
      detail::truncate_raw(w2_, raw);
    } else {
      detail::two_thirds_filter(raw, grid_);
      u2_.assign(raw.begin(), raw.end());
      for (auto& v : u2_) v *= inv_n;
      fft::backward(u2_);
      w_.resize(n);
      for (std::size_t j = 0; j < n; ++j) w_[j] = std::norm(u2_[j]);
      fft::forward(w_);
      detail::two_thirds_filter(w_, grid_);
      mix_hilbert(w_);
      for (auto& v : w_) v *= inv_n;
      fft::backward(w_);
      for (std::size_t j = 0; j < n; ++j) raw[j] = w_[j] * u2_[j];
      fft::forward(raw);
      detail::two_thirds_filter(raw, grid_);
    }
    const std::size_t nyq = grid_.nyquist_index();
    for (std::size_t i = 0; i < n; ++i) raw[i] *= (i == nyq) ? cplx{} : I * grid_.freq(i);
  }

  const Grid& grid() const { return grid_; }
  Coefficients coefficients() const { return coef_; }
  Dealias policy() const { return policy_; }

 private:
  // w -> alpha w + beta H(w), on raw coefficients.
  void mix_hilbert(std::vector<cplx>& w) const {
    for (std::size_t i = 0; i < w.size(); ++i)
      w[i] *= coef_.alpha - I * coef_.beta * detail::sgn_symbol(grid_, i);
  }

  Grid grid_;
  Coefficients coef_;
  Dealias policy_;
  std::vector<cplx> u2_, w2_, w_;
};

inline Field nonlinearity(const Field& u, Coefficients c, Dealias policy = Dealias::padding) {
  NonlinearityKernel k(u.grid, c, policy);
  std::vector<cplx> raw = u.values;
  fft::forward(raw);
  k.apply_raw(raw);
  Field out(u.grid, std::move(raw));
  fft::backward(out.values);
  const double inv_n = 1.0 / static_cast<double>(u.grid.n());
  for (auto& v : out.values) v *= inv_n;
  if (!all_finite(out.values)) throw NumericalAbort("nonlinearity overflow", 0.0);
  return out;
}

/// d/dt f^ = e^{it xi^2} F[N(u)],  u^ = e^{-it xi^2} f^.
class ProfileRhs {
 public:
  ProfileRhs(const Grid& g, Coefficients c, Dealias policy = Dealias::padding)
      : kernel_(g, c, policy) {}

  void evaluate(double t, const std::vector<cplx>& f_hat, std::vector<cplx>& out) {
    const Grid& g = kernel_.grid();
    const std::size_t n = g.n();
    const double s = g.dx() / std::sqrt(2.0 * pi);
    out.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
      const double xi = g.freq(i);
      out[i] = f_hat[i] * std::polar(detail::parity(i) / s, -t * xi * xi);
    }
    kernel_.apply_raw(out);
    for (std::size_t i = 0; i < n; ++i) {
      const double xi = g.freq(i);
      out[i] *= std::polar(detail::parity(i) * s, t * xi * xi);
    }
  }

  Spectrum operator()(double t, const Spectrum& f_hat) {
    Spectrum out(f_hat.grid);
    evaluate(t, f_hat.coeffs, out.coeffs);
    return out;
  }

  const Grid& grid() const { return kernel_.grid(); }
  Coefficients coefficients() const { return kernel_.coefficients(); }

 private:
  NonlinearityKernel kernel_;
};

inline Spectrum rhs_profile(double t, const Spectrum& f_hat, Coefficients c,
                            Dealias policy = Dealias::padding) {
  ProfileRhs rhs(f_hat.grid, c, policy);
  return rhs(t, f_hat);
}

// ---------------------------------------------------------------------------
// Time stepping.

struct SolverState {
  double t = 0.0;
  Spectrum f_hat;

  Field field() const { return from_profile(f_hat, t); }
};

/// Classical RK4 on the profile equation. Workspace lives in the stepper.
class Rk4Stepper {
 public:
  Rk4Stepper(const Grid& g, Coefficients c, Dealias policy = Dealias::padding)
      : rhs_(g, c, policy) {}

  void step(SolverState& s, double dt) {
    auto& f = s.f_hat.coeffs;
    const std::size_t n = f.size();
    tmp_.resize(n);
    rhs_.evaluate(s.t, f, k1_);
    for (std::size_t i = 0; i < n; ++i) tmp_[i] = f[i] + 0.5 * dt * k1_[i];
    rhs_.evaluate(s.t + 0.5 * dt, tmp_, k2_);
    for (std::size_t i = 0; i < n; ++i) tmp_[i] = f[i] + 0.5 * dt * k2_[i];
    rhs_.evaluate(s.t + 0.5 * dt, tmp_, k3_);
    for (std::size_t i = 0; i < n; ++i) tmp_[i] = f[i] + dt * k3_[i];
    rhs_.evaluate(s.t + dt, tmp_, k4_);
    const double c = dt / 6.0;
    for (std::size_t i = 0; i < n; ++i) f[i] += c * (k1_[i] + 2.0 * k2_[i] + 2.0 * k3_[i] + k4_[i]);
    s.t += dt;
    if (!all_finite(f)) throw NumericalAbort("non-finite profile after step", s.t);
  }

  ProfileRhs& rhs() { return rhs_; }

 private:
  ProfileRhs rhs_;
  std::vector<cplx> k1_, k2_, k3_, k4_, tmp_;
};

inline SolverState step_rk4(const SolverState& state, double dt, Coefficients c,
                            Dealias policy = Dealias::padding) {
  Rk4Stepper stepper(state.f_hat.grid, c, policy);
  SolverState out = state;
  stepper.step(out, dt);
  return out;
}

// ---------------------------------------------------------------------------
// Runs.

struct SolverConfig {
  Coefficients coef;
  Grid grid{4096, 400.0};
  double dt = 0.05;
  double t_end = 1.0;
  Dealias dealias = Dealias::padding;
  std::vector<double> snapshot_times;
  InitialData initial;
  double cfl = 0.5;
  double boundary_tolerance = 1e-8;  // mass fraction allowed in the outer 10% on each side
  double blowup_factor = 1e3;
  int monitor_every = 50;            // steps between boundary / blow-up checks

  void validate() const {
    if (!(dt > 0.0) || !std::isfinite(dt)) throw ConfigError("dt", "must be positive");
    if (!(t_end >= 0.0) || !std::isfinite(t_end)) throw ConfigError("t_end", "must be >= 0");
    if (!std::is_sorted(snapshot_times.begin(), snapshot_times.end()))
      throw ConfigError("snapshot_times", "must be sorted");
    for (double t : snapshot_times)
      if (t < 0.0 || t > t_end) throw ConfigError("snapshot_times", "must lie in [0, t_end]");
    if (!(cfl > 0.0)) throw ConfigError("cfl", "must be positive");
  }
};

/// Fraction of the L2 mass sitting within 10% of either end of the box.
inline double boundary_mass_fraction(const Field& u) {
  const double edge = 0.4 * u.grid.length();
  double outer = 0.0, total = 0.0;
  for (std::size_t j = 0; j < u.size(); ++j) {
    const double m = std::norm(u[j]);
    total += m;
    if (std::abs(u.grid.node(j)) > edge) outer += m;
  }
  return total > 0.0 ? outer / total : 0.0;
}

/// Hooks called by run(). on_step sees every accepted step, on_snapshot every
/// requested snapshot (t = 0 and t_end included).
struct StepObserver {
  virtual ~StepObserver() = default;
  virtual void on_start(const SolverState&) {}
  virtual void on_step(const SolverState&) {}
  virtual void on_snapshot(const SolverState&) {}
};

struct Trajectory {
  SolverConfig config;
  Field initial;
  double epsilon = 0.0;
  double initial_sup = 0.0;
  std::vector<SolverState> snapshots;
  SolverState final_state;
  long steps = 0;

  const SolverState* find(double t, double tol = 1e-9) const {
    for (const auto& s : snapshots)
      if (std::abs(s.t - t) <= tol * std::max(1.0, std::abs(t))) return &s;
    return nullptr;
  }
  const SolverState& at(double t) const {
    const SolverState* s = find(t);
    if (!s) throw std::out_of_range("no snapshot at t=" + std::to_string(t));
    return *s;
  }
  std::vector<double> times() const {
    std::vector<double> out;
    for (const auto& s : snapshots) out.push_back(s.t);
    return out;
  }
};

/// Step times used by run(): requested snapshots, t_end, and t = 1 where phase
/// accumulation starts. Values closer than 1e-12 are merged.
inline std::vector<double> landing_times(const SolverConfig& cfg) {
  std::vector<double> t = cfg.snapshot_times;
  t.push_back(cfg.t_end);
  if (cfg.t_end > 1.0) t.push_back(1.0);
  std::sort(t.begin(), t.end());
  std::vector<double> out;
  for (double v : t) {
    if (v <= 0.0) continue;
    if (out.empty() || v - out.back() > 1e-12) out.push_back(v);
  }
  return out;
}

/// Integrates from t = 0 to t_end, filling `traj` as it goes so a caller catching
/// NumericalAbort still has everything up to the abort.
inline void run_into(const SolverConfig& cfg, Trajectory& traj, StepObserver* obs = nullptr) {
  cfg.validate();
  traj = Trajectory{};
  traj.config = cfg;
  traj.initial = make_initial(cfg.grid, cfg.initial);
  traj.epsilon = measure_epsilon(traj.initial);
  traj.initial_sup = sup_norm(traj.initial);

  const double budget = cfg.cfl * cfg.grid.dx() / std::max(1.0, traj.initial_sup * traj.initial_sup);
  if (cfg.dt > budget)
    throw ConfigError("dt", "exceeds stability budget " + std::to_string(budget));

  SolverState state{0.0, forward(traj.initial)};
  auto is_snapshot = [&](double t) {
    for (double s : cfg.snapshot_times)
      if (std::abs(s - t) <= 1e-12) return true;
    return std::abs(t - cfg.t_end) <= 1e-12;
  };
  auto record = [&](const SolverState& s) {
    traj.snapshots.push_back(s);
    if (obs) obs->on_snapshot(traj.snapshots.back());
  };
  auto monitor = [&](const SolverState& s) {
    Field u = s.field();
    const double sup = sup_norm(u);
    if (!(sup <= cfg.blowup_factor * traj.initial_sup))
      throw NumericalAbort("blow-up guard: sup|u| = " + std::to_string(sup), s.t);
    const double frac = boundary_mass_fraction(u);
    if (frac > cfg.boundary_tolerance)
      throw NumericalAbort("boundary contamination: mass fraction " + std::to_string(frac) +
                               " near the box edge",
                           s.t);
  };

  if (obs) obs->on_start(state);
  record(state);

  Rk4Stepper stepper(cfg.grid, cfg.coef, cfg.dealias);
  for (double target : landing_times(cfg)) {
    const double span = target - state.t;
    const long nsteps = std::max(1L, static_cast<long>(std::ceil(span / cfg.dt - 1e-9)));
    const double h = span / static_cast<double>(nsteps);
    const double t0 = state.t;
    for (long k = 1; k <= nsteps; ++k) {
      stepper.step(state, h);
      state.t = (k == nsteps) ? target : t0 + static_cast<double>(k) * h;
      ++traj.steps;
      if (obs) obs->on_step(state);
      if (cfg.monitor_every > 0 && traj.steps % cfg.monitor_every == 0) monitor(state);
    }
    monitor(state);
    if (is_snapshot(target)) record(state);
    traj.final_state = state;
  }
  if (traj.snapshots.size() == 1) traj.final_state = traj.snapshots.front();
}

inline Trajectory run(const SolverConfig& cfg, StepObserver* obs = nullptr) {
  Trajectory traj;
  run_into(cfg, traj, obs);
  return traj;
}

}  // namespace kdnls
