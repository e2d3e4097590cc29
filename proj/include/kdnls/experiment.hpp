#pragma once

// Experiment runner: typed config, run orchestration, diagnostics.csv,
// summary.json and snapshot dumps.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <random>
#include <set>

#include <json.hpp>

#include "diagnostics.hpp"
#include "gauge.hpp"
#include "io.hpp"
#include "scattering.hpp"
#include "solver.hpp"

#ifndef KDNLS_GIT_DESCRIBE
#define KDNLS_GIT_DESCRIBE "unknown"
#endif

namespace kdnls {

using json = nlohmann::json;

enum class KeyType { real, integer, boolean, list, text, choice };

struct KeySpec {
  const char* name;
  KeyType type;
  bool required;
  const char* fallback;  // default value as written in a config file; "auto"/"none" where allowed
  const char* doc;
  const char* choices = "";
};

inline const std::vector<KeySpec>& config_schema() {
  static const std::vector<KeySpec> s{
      {"alpha", KeyType::real, true, "", "coefficient of d_x(|u|^2 u)"},
      {"beta", KeyType::real, true, "", "coefficient of d_x(H(|u|^2) u); beta < 0 is dissipative"},
      {"t_end", KeyType::real, true, "", "final time (0 gives a single snapshot)"},
      {"n", KeyType::integer, false, "4096", "grid points, power of two"},
      {"L", KeyType::real, false, "400", "box length, grid covers [-L/2, L/2)"},
      {"dt", KeyType::real, false, "0.05", "RK4 step"},
      {"dealias", KeyType::choice, false, "padding", "product dealiasing", "padding|two_thirds"},
      {"cfl", KeyType::real, false, "0.5", "dt must satisfy dt <= cfl dx / max(1, sup|phi|^2)"},
      {"boundary_tolerance", KeyType::real, false, "1e-8", "abort when the mass fraction in |x| > 0.4 L exceeds this"},
      {"blowup_factor", KeyType::real, false, "1000", "abort when sup|u| exceeds this multiple of sup|phi|"},
      {"monitor_every", KeyType::integer, false, "50", "steps between boundary and blow-up checks"},
      {"initial", KeyType::choice, false, "gaussian", "initial profile family", "gaussian|sech|random"},
      {"amplitude", KeyType::real, false, "0.1", "peak amplitude before any rescaling"},
      {"width", KeyType::real, false, "1", "envelope width"},
      {"chirp", KeyType::real, false, "0", "phase factor exp(i chirp (x - center)^2)"},
      {"center", KeyType::real, false, "0", "envelope center"},
      {"epsilon", KeyType::real, false, "none", "rescale phi so ||phi||_{H^2} + ||x phi||_{H^1} equals this"},
      {"seed", KeyType::integer, false, "0", "seed for initial = random"},
      {"cadence", KeyType::real, false, "10", "spacing of diagnostics rows and snapshot files"},
      {"probe_h", KeyType::real, false, "auto", "probe step for d/dt ||u||^2 (auto = dt)"},
      {"phase_accumulation", KeyType::boolean, false, "true", "accumulate B(t, xi) from t = 1"},
      {"extraction_times", KeyType::list, false, "50,100,200", "times where W and Phi are extracted (kept if in (1, t_end])"},
      {"gauge_checks", KeyType::boolean, false, "false", "evaluate the gauged residual at gauge_times"},
      {"gauge_times", KeyType::list, false, "2", "centers of the gauge residual probes"},
      {"gauge_probe_h", KeyType::real, false, "0.05", "coarse probe step for the gauge residual"},
      {"fit_lo", KeyType::real, false, "10", "lower end of the log-log fit window"},
      {"fit_hi", KeyType::real, false, "auto", "upper end of the fit window (auto = t_end / 2)"},
      {"delta", KeyType::real, false, "0.05", "delta of the a priori quantity"},
      {"remainder_band", KeyType::real, false, "2", "|xi| band for the resonant remainder sup"},
      {"necessity_t1", KeyType::real, false, "20", "t1 of the corrected/uncorrected comparison against t_end"},
      {"write_snapshots", KeyType::boolean, false, "true", "write snapshots/*.bin at cadence and extraction times"},
      {"output", KeyType::text, false, "run", "run directory, relative to the output root"},
      {"format", KeyType::integer, false, "1", "config format version, must be 1"},
  };
  return s;
}

struct ExperimentConfig {
  SolverConfig solver;
  bool phase_accumulation = true;
  bool gauge_checks = false;
  std::vector<double> gauge_times{2.0};
  double gauge_probe_h = 0.05;
  std::vector<double> extraction_times{50.0, 100.0, 200.0};
  double cadence = 10.0;
  double probe_h = 0.05;
  double fit_lo = 10.0;
  double fit_hi = -1.0;  // < 0: t_end / 2
  double delta = 0.05;
  double remainder_band = 2.0;
  double necessity_t1 = 20.0;
  bool write_snapshots = true;
  std::string output = "run";
  unsigned long seed = 0;
  int format_version = 1;

  std::map<std::string, std::string> echo;  // resolved key -> value text
  std::string hash;                         // FNV-1a of the echo

  double window_hi() const { return fit_hi > 0.0 ? fit_hi : 0.5 * solver.t_end; }
};

namespace detail {

// Smooth localized random data: Gaussian envelope times a random cubic.
inline std::vector<cplx> random_initial(const Grid& g, unsigned long seed, double amp, double width,
                                        double center) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> nd;
  cplx c[4];
  for (auto& z : c) z = cplx{nd(rng), nd(rng)};
  std::vector<cplx> v(g.n());
  for (std::size_t j = 0; j < g.n(); ++j) {
    const double y = (g.node(j) - center) / width;
    v[j] = amp * (c[0] + c[1] * y + c[2] * y * y + c[3] * y * y * y) * std::exp(-0.5 * y * y);
  }
  return v;
}

inline std::string canonical_echo(const std::map<std::string, std::string>& echo) {
  std::string s;
  for (const auto& [k, v] : echo) s += k + "=" + v + "\n";
  return s;
}

}  // namespace detail

/// Applies the schema: rejects unknown keys, reports missing required ones, fills defaults.
inline ExperimentConfig build_config(const io::Entries& given) {
  const auto& schema = config_schema();
  for (const auto& [key, e] : given) {
    bool known = false;
    for (const auto& k : schema) known = known || key == k.name;
    if (!known) throw ConfigError(key, "line " + std::to_string(e.line) + ": unknown key");
  }
  io::Entries all;
  for (const auto& k : schema) {
    auto it = given.find(k.name);
    if (it != given.end()) {
      all[k.name] = it->second;
    } else if (k.required) {
      throw ConfigError(k.name, "required key is missing");
    } else {
      all[k.name] = {k.fallback, 0};
    }
  }

  ExperimentConfig c;
  auto real = [&](const char* key) { return io::parse_double(key, all[key]); };
  auto integer = [&](const char* key) { return io::parse_int(key, all[key]); };
  auto flag = [&](const char* key) { return io::parse_bool(key, all[key]); };
  auto is = [&](const char* key, const char* word) { return all[key].value == word; };
  auto choice = [&](const char* key) {
    for (const auto& k : schema)
      if (std::string(k.name) == key) {
        std::string opts = k.choices;
        std::stringstream ss(opts);
        std::string o;
        while (std::getline(ss, o, '|'))
          if (o == all[key].value) return o;
        throw ConfigError(key, "line " + std::to_string(all[key].line) + ": expected one of " + opts +
                                   ", got '" + all[key].value + "'");
      }
    throw std::logic_error("no such key");
  };

  if (integer("format") != 1) throw ConfigError("format", "unsupported config format version");
  const long n = integer("n");
  if (n < 16 || (n & (n - 1)) != 0) throw ConfigError("n", "must be a power of two >= 16");
  const double L = real("L");
  if (!(L > 0.0)) throw ConfigError("L", "must be positive");

  SolverConfig& s = c.solver;
  s.coef = {real("alpha"), real("beta")};
  s.t_end = real("t_end");
  s.grid = Grid(static_cast<std::size_t>(n), L);
  s.dt = real("dt");
  s.dealias = choice("dealias") == "padding" ? Dealias::padding : Dealias::two_thirds;
  s.cfl = real("cfl");
  s.boundary_tolerance = real("boundary_tolerance");
  s.blowup_factor = real("blowup_factor");
  s.monitor_every = static_cast<int>(integer("monitor_every"));

  const std::string fam = choice("initial");
  s.initial.amplitude = real("amplitude");
  s.initial.width = real("width");
  s.initial.chirp = real("chirp");
  s.initial.center = real("center");
  if (!(s.initial.width > 0.0)) throw ConfigError("width", "must be positive");
  if (!is("epsilon", "none")) {
    const double eps = real("epsilon");
    if (!(eps > 0.0)) throw ConfigError("epsilon", "must be positive");
    s.initial.target_epsilon = eps;
  }
  const long seed = integer("seed");
  if (seed < 0) throw ConfigError("seed", "must be >= 0");
  c.seed = static_cast<unsigned long>(seed);
  if (fam == "gaussian") {
    s.initial.family = InitialFamily::gaussian;
  } else if (fam == "sech") {
    s.initial.family = InitialFamily::sech;
  } else {
    s.initial.family = InitialFamily::samples;
    s.initial.samples = detail::random_initial(s.grid, c.seed, s.initial.amplitude, s.initial.width,
                                               s.initial.center);
  }

  c.cadence = real("cadence");
  if (!(c.cadence > 0.0)) throw ConfigError("cadence", "must be positive");
  c.probe_h = is("probe_h", "auto") ? s.dt : real("probe_h");
  if (!(c.probe_h > 0.0)) throw ConfigError("probe_h", "must be positive");
  c.phase_accumulation = flag("phase_accumulation");
  c.extraction_times = io::parse_list("extraction_times", all["extraction_times"]);
  c.gauge_checks = flag("gauge_checks");
  c.gauge_times = io::parse_list("gauge_times", all["gauge_times"]);
  c.gauge_probe_h = real("gauge_probe_h");
  if (!(c.gauge_probe_h > 0.0)) throw ConfigError("gauge_probe_h", "must be positive");
  c.fit_lo = real("fit_lo");
  c.fit_hi = is("fit_hi", "auto") ? -1.0 : real("fit_hi");
  c.delta = real("delta");
  if (!(c.delta > 0.0)) throw ConfigError("delta", "must be positive");
  c.remainder_band = real("remainder_band");
  c.necessity_t1 = real("necessity_t1");
  c.write_snapshots = flag("write_snapshots");
  c.output = all["output"].value;
  if (c.output.find("..") != std::string::npos) throw ConfigError("output", "must not contain '..'");

  if (!(s.t_end >= 0.0)) throw ConfigError("t_end", "must be >= 0");
  if (!(s.dt > 0.0)) throw ConfigError("dt", "must be positive");

  for (const auto& [k, e] : all) c.echo[k] = e.value;
  c.hash = io::fnv1a(detail::canonical_echo(c.echo));
  return c;
}

inline ExperimentConfig load_config(const std::string& path) { return build_config(io::parse_entries_file(path)); }

inline ExperimentConfig parse_config(const std::string& text) {
  std::istringstream in(text);
  return build_config(io::parse_entries(in));
}

// ---------------------------------------------------------------------------
// Schedule.

struct Schedule {
  std::vector<double> ticks;        // diagnostics rows
  std::vector<double> extraction;   // W / Phi extraction
  std::vector<double> gauge;        // gauge residual centers
  std::vector<double> all;          // everything the solver has to store
};

namespace detail {
inline void add_unique(std::vector<double>& v, double t) {
  for (double s : v)
    if (std::abs(s - t) <= 1e-9 * std::max(1.0, t)) return;
  v.push_back(t);
}
}  // namespace detail

/// Snapshot times: cadence ticks (plus t_end), their dissipation probes
/// t ± h (one-sided t + h, t + 2h or t - h, t - 2h at the ends), extraction
/// times, and t ± h, t ± h/2 around each gauge center.
inline Schedule make_schedule(const ExperimentConfig& c) {
  Schedule s;
  const double T = c.solver.t_end;
  for (long k = 0;; ++k) {
    const double t = static_cast<double>(k) * c.cadence;
    if (t > T + 1e-9) break;
    detail::add_unique(s.ticks, std::min(t, T));
  }
  detail::add_unique(s.ticks, T);
  for (double t : c.extraction_times)
    if (t > 1.0 && t <= T + 1e-9) detail::add_unique(s.extraction, t);
  std::sort(s.extraction.begin(), s.extraction.end());
  if (c.gauge_checks)
    for (double t : c.gauge_times)
      if (t - c.gauge_probe_h >= 0.0 && t + c.gauge_probe_h <= T) detail::add_unique(s.gauge, t);

  const double h = c.probe_h;
  for (double t : s.ticks) {
    detail::add_unique(s.all, t);
    if (T <= 0.0) continue;
    if (t - h >= -1e-12 && t + h <= T + 1e-12) {
      detail::add_unique(s.all, std::max(0.0, t - h));
      detail::add_unique(s.all, std::min(T, t + h));
    } else if (t - h < 0.0 && t + 2 * h <= T) {
      detail::add_unique(s.all, t + h);
      detail::add_unique(s.all, t + 2 * h);
    } else if (t - 2 * h >= 0.0) {
      detail::add_unique(s.all, t - h);
      detail::add_unique(s.all, t - 2 * h);
    }
  }
  for (double t : s.extraction) detail::add_unique(s.all, t);
  for (double t : s.gauge)
    for (double d : {-1.0, -0.5, 0.5, 1.0}) detail::add_unique(s.all, t + d * c.gauge_probe_h);
  if (c.phase_accumulation && T > 1.0) detail::add_unique(s.all, 1.0);
  std::sort(s.all.begin(), s.all.end());
  return s;
}

// ---------------------------------------------------------------------------
// JSON helpers.

inline json to_json(const Fit& f) {
  return {{"slope", f.slope},
          {"stderr", f.stderr_slope},
          {"ci95", {f.slope - 1.96 * f.stderr_slope, f.slope + 1.96 * f.stderr_slope}},
          {"intercept", f.intercept},
          {"residual_rms", f.residual_rms},
          {"points", f.count}};
}

inline json to_json(const Series& s) {
  json a = json::array();
  for (const auto& [t, v] : s) a.push_back({t, v});
  return a;
}

/// Fit over the window, or null when it cannot be formed.
inline json fit_or_null(const Series& s, double lo, double hi) {
  try {
    return to_json(decay_fit(s, lo, hi));
  } catch (const std::exception&) {
    return nullptr;
  }
}

// ---------------------------------------------------------------------------
// Analysis of a finished (or aborted) trajectory.

struct Analysis {
  json summary = json::object();
  std::vector<DiagnosticsRecord> rows;
};

namespace detail {

inline json profile_json(const ProfileExtraction& e, const Grid& g) {
  json xi = json::array(), re = json::array(), im = json::array(), phi = json::array();
  const std::size_t n = g.n();
  for (std::size_t k = 0; k < n; ++k) {
    const std::size_t i = (k + n / 2) % n;
    if (!e.mask[i]) continue;
    xi.push_back(g.freq(i));
    re.push_back(e.W[i].real());
    im.push_back(e.W[i].imag());
    phi.push_back(e.Phi[i]);
  }
  return {{"T", e.T}, {"xi", xi}, {"W_re", re}, {"W_im", im}, {"Phi", phi},
          {"note", "ascending xi, restricted to |W| > 1e-4 max|W|"}};
}

inline double masked_phi_difference(const ProfileExtraction& a, const ProfileExtraction& b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.Phi.size(); ++i)
    if (a.mask[i] && b.mask[i]) m = std::max(m, std::abs(a.Phi[i] - b.Phi[i]));
  return m;
}

}  // namespace detail

inline Analysis analyse(const ExperimentConfig& c, const Schedule& sched, const Trajectory& tr,
                        const PhaseTracker* phase) {
  Analysis a;
  json& S = a.summary;
  const Coefficients coef = tr.config.coef;
  const double lo = c.fit_lo, hi = c.window_hi();
  const double T = tr.snapshots.empty() ? 0.0 : tr.snapshots.back().t;

  std::vector<const SolverState*> ticks;
  for (double t : sched.ticks)
    if (const SolverState* s = tr.find(t)) ticks.push_back(s);
  for (const SolverState* s : ticks) a.rows.push_back(make_record(tr, *s, c.probe_h));

  Series w1, hsup, mass_series, fsup;
  for (const auto& r : a.rows) {
    w1.emplace_back(r.t, r.w1inf);
    hsup.emplace_back(r.t, r.hilbert_sup);
    mass_series.emplace_back(r.t, r.l2);
    fsup.emplace_back(r.t, r.weighted_fourier_sup);
  }

  S["initial"] = {{"epsilon", tr.epsilon}, {"sup", tr.initial_sup}, {"l2", l2_norm(tr.initial)}};
  S["steps"] = tr.steps;
  S["reached_t"] = T;

  json fits = json::object();
  fits["window"] = {lo, hi};
  fits["w1inf"] = fit_or_null(w1, lo, hi);
  fits["hilbert_sup"] = fit_or_null(hsup, lo, hi);
  S["series"] = {{"w1inf", to_json(w1)}, {"hilbert_sup", to_json(hsup)}, {"l2", to_json(mass_series)},
                 {"weighted_fourier_sup", to_json(fsup)}};

  // Dissipation residuals where probes exist.
  {
    json d = json::array();
    for (const auto& r : a.rows)
      if (r.dissipation_probed) d.push_back({r.t, r.dissipation_residual});
    S["dissipation_residual"] = {{"probe_h", c.probe_h},
                                 {"kind", coef.beta == 0.0 ? "absolute" : "relative"},
                                 {"values", d}};
    if (!mass_series.empty()) {
      double drift = 0.0;
      for (const auto& [t, m] : mass_series) drift = std::max(drift, std::abs(m - mass_series.front().second));
      S["mass_drift_relative"] = drift / std::max(mass_series.front().second, 1e-300);
    }
  }

  // A priori quantity.
  try {
    Trajectory at_ticks;
    at_ticks.config = tr.config;
    for (const SolverState* s : ticks) at_ticks.snapshots.push_back(*s);
    AprioriReport ap = apriori_report(at_ticks, c.delta, lo, hi);
    S["apriori"] = {{"delta", ap.delta},
                    {"sup_value", ap.sup_value},
                    {"bracket", "japanese (1 + t^2)^{1/2}"},
                    {"h2_growth", to_json(ap.h2_growth)},
                    {"xf_growth", to_json(ap.xf_growth)},
                    {"h2", to_json(ap.h2)},
                    {"xf_h1", to_json(ap.xf_h1)}};
  } catch (const std::exception& e) {
    S["apriori"] = {{"error", e.what()}};
  }

  // Weighted Fourier sup and dyadic envelope at the last snapshot.
  if (!fsup.empty()) {
    double mx = 0.0;
    for (const auto& [t, v] : fsup) mx = std::max(mx, v);
    const DyadicEnvelope d = dyadic_envelope(tr.snapshots.back().f_hat);
    S["weighted_fourier_sup"] = {{"bracket", "short (1 + |xi|)^{1/2}"},
                                 {"initial", fsup.front().second},
                                 {"max", mx},
                                 {"ratio", mx / std::max(fsup.front().second, 1e-300)},
                                 {"dyadic_N", d.N},
                                 {"dyadic_band_sup", d.band_sup},
                                 {"dyadic_envelope", d.envelope},
                                 {"kappa", d.kappa},
                                 {"monotone", d.monotone}};
  }

  // Phase-corrected quantities.
  json scat = json::object();
  if (phase && !phase->stored().empty()) {
    std::vector<ProfileExtraction> ex;
    for (double t : sched.extraction)
      if (const SolverState* s = tr.find(t)) ex.push_back(extract_profile(s->f_hat, phase->at(t)));
    json stab = json::array();
    for (std::size_t k = 1; k < ex.size(); ++k)
      stab.push_back({{"T1", ex[k - 1].T},
                      {"T2", ex[k].T},
                      {"W_weighted_sup_diff", weighted_sup_difference(tr.config.grid, ex[k].W, ex[k - 1].W)},
                      {"Phi_sup_diff_masked", detail::masked_phi_difference(ex[k], ex[k - 1])}});
    scat["extraction_stability"] = stab;
    if (!ex.empty()) {
      const ProfileExtraction& last = ex.back();
      scat["profile"] = detail::profile_json(last, tr.config.grid);
      json cmp = json::array();
      for (double t : sched.extraction) {
        const SolverState* s = tr.find(t);
        if (!s) continue;
        auto p = asymptotic_profile(t, last.W, last.Phi, tr.config.grid, tr.config.grid, coef);
        auto r = compare_asymptotic(s->field(), p, t);
        cmp.push_back({{"t", t}, {"scaled_sup", r.scaled_sup}, {"relative", r.relative}, {"excluded", r.excluded}});
      }
      scat["asymptotic"] = {{"profile_from_T", last.T}, {"checkpoints", cmp}};
    }

    // Corrected vs uncorrected differences over (t1, 2 t1).
    Series corrected, uncorrected;
    for (const SolverState* s1 : ticks) {
      if (s1->t < 1.0) continue;
      const SolverState* s2 = tr.find(2.0 * s1->t);
      if (!s2 || !phase->stored().count(s1->t)) continue;
      const auto& p1 = phase->at(s1->t);
      const auto& p2 = phase->at(s2->t);
      corrected.emplace_back(s1->t, weighted_sup_difference(tr.config.grid, phase_corrected(s2->f_hat, p2),
                                                            phase_corrected(s1->f_hat, p1)));
      uncorrected.emplace_back(s1->t, weighted_sup_difference(tr.config.grid, s2->f_hat.coeffs, s1->f_hat.coeffs));
    }
    scat["corrected_differences"] = {{"pairs", "(t1, 2 t1)"},
                                     {"corrected", to_json(corrected)},
                                     {"uncorrected", to_json(uncorrected)},
                                     {"fit", fit_or_null(corrected, lo, T)}};
    const SolverState* n1 = tr.find(c.necessity_t1);
    if (n1 && T > c.necessity_t1) {
      const auto& p1 = phase->at(c.necessity_t1);
      const auto& p2 = phase->at(T);
      const double cor = weighted_sup_difference(tr.config.grid, phase_corrected(tr.snapshots.back().f_hat, p2),
                                                 phase_corrected(n1->f_hat, p1));
      const double unc = weighted_sup_difference(tr.config.grid, tr.snapshots.back().f_hat.coeffs, n1->f_hat.coeffs);
      scat["necessity"] = {{"t1", c.necessity_t1}, {"t2", T}, {"corrected", cor}, {"uncorrected", unc},
                           {"factor", unc / std::max(cor, 1e-300)}};
    }
    scat["frequency_tail_fraction"] = frequency_tail_fraction(tr.snapshots.back().f_hat);
  }

  // Resonant remainder.
  {
    Series rem;
    ProfileRhs rhs(tr.config.grid, coef, tr.config.dealias);
    for (const SolverState* s : ticks) {
      if (s->t < 1.0) continue;
      rem.emplace_back(s->t, resonant_remainder(s->t, s->f_hat, rhs(s->t, s->f_hat), coef, c.remainder_band).weighted_sup);
    }
    scat["remainder"] = {{"band", c.remainder_band}, {"series", to_json(rem)}, {"fit", fit_or_null(rem, lo, hi)}};
  }

  // L2 limit.
  try {
    MassLimit m = mass_limit(tr, lo);  // approach fitted over [lo, T/2]
    scat["mass_limit"] = {{"D_infty", m.D_infty},
                          {"initial", m.initial},
                          {"relative_change", (m.D_infty - m.initial) / std::max(m.initial, 1e-300)},
                          {"degenerate", m.degenerate},
                          {"monotone", m.monotone},
                          {"approach_side_ok", m.approach_side},
                          {"worst_violation", m.worst_violation},
                          {"rate", m.rate ? to_json(*m.rate) : json(nullptr)}};
  } catch (const std::exception& e) {
    scat["mass_limit"] = {{"error", e.what()}};
  }
  S["scattering"] = scat;
  S["fits"] = fits;

  // Gauge residuals.
  if (!sched.gauge.empty()) {
    json g = json::array();
    const PsiBump psi = PsiBump::standard(tr.config.grid);
    for (double t : sched.gauge) {
      for (Sign s : {Sign::plus, Sign::minus}) {
        try {
          const double h = c.gauge_probe_h;
          const double r1 = gauged_residual(tr, t, h, s, psi);
          const double r2 = gauged_residual(tr, t, 0.5 * h, s, psi);
          const double rx = gauged_residual_extrapolated(tr, t, h, s, psi);
          const double vn = sobolev_norm(gauge_v(tr.at(t).field(), s, psi, coef), 1.0);
          g.push_back({{"t", t}, {"sign", to_string(s)}, {"h", h}, {"r_h", r1}, {"r_half", r2},
                       {"order", std::log2(r1 / r2)}, {"extrapolated", rx}, {"v_h1", vn},
                       {"relative", rx / std::max(vn, 1e-300)}});
        } catch (const std::exception& e) {
          g.push_back({{"t", t}, {"sign", to_string(s)}, {"error", e.what()}});
        }
      }
    }
    S["gauge"] = g;
  }
  return a;
}

// ---------------------------------------------------------------------------
// Running and writing.

inline std::filesystem::path output_root(const std::string& fallback = ".") {
  if (const char* env = std::getenv("KDNLS_OUTPUT_ROOT"); env && *env) return env;
  return fallback;
}

inline std::string snapshot_name(double t) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "t%013.6f.bin", t);
  return buf;
}

struct ExperimentOutcome {
  int exit_code = 0;  // 0 ok, 2 config error, 3 numerical abort
  std::string message;
  std::filesystem::path directory;
};

inline void write_csv(const std::filesystem::path& path, const std::vector<DiagnosticsRecord>& rows,
                      const std::string& hash) {
  std::ofstream out(path);
  io::CsvWriter w(out, hash);
  for (const auto& r : rows)
    w.row({r.t, r.l2, r.h1, r.h2, r.w1inf, r.xf_h1, r.hilbert_sup, r.null_residual,
           r.dissipation_probed ? r.dissipation_residual : std::nan(""), r.boundary_mass,
           r.weighted_fourier_sup});
}

inline json config_json(const ExperimentConfig& c) {
  json e = json::object();
  for (const auto& [k, v] : c.echo) e[k] = v;
  return e;
}

/// Runs one experiment into <root>/<output>. Config errors surface as ConfigError
/// (exit 2 at the CLI); numerical aborts still write diagnostics and a partial summary.
inline ExperimentOutcome run_experiment(const ExperimentConfig& c, const std::filesystem::path& root) {
  namespace fs = std::filesystem;
  ExperimentOutcome out;
  out.directory = root / c.output;
  fs::create_directories(out.directory);

  const Schedule sched = make_schedule(c);
  SolverConfig sc = c.solver;
  sc.snapshot_times = sched.all;
  sc.validate();

  std::optional<PhaseTracker> phase;
  if (c.phase_accumulation && sc.t_end > 1.0) phase.emplace(sc.coef);
  Trajectory tr;
  std::string status = "ok";
  json abort_info = nullptr;
  try {
    run_into(sc, tr, phase ? &*phase : nullptr);
  } catch (const NumericalAbort& e) {
    status = "aborted";
    abort_info = {{"t", e.t}, {"message", e.what()}};
    out.exit_code = 3;
    out.message = std::string("numerical abort at t=") + io::fmt(e.t) + ": " + e.what();
  }

  Analysis a;
  try {
    a = analyse(c, sched, tr, phase ? &*phase : nullptr);
  } catch (const std::exception& e) {
    if (status == "ok") throw;
    a.summary["analysis_error"] = e.what();
  }

  write_csv(out.directory / "diagnostics.csv", a.rows, c.hash);
  if (c.write_snapshots) {
    fs::create_directories(out.directory / "snapshots");
    std::vector<double> keep = sched.ticks;
    keep.insert(keep.end(), sched.extraction.begin(), sched.extraction.end());
    for (double t : keep)
      if (const SolverState* s = tr.find(t)) io::write_snapshot((out.directory / "snapshots" / snapshot_name(s->t)).string(), *s);
  }

  json& S = a.summary;
  S["format"] = "kdnls-summary-v1";
  S["status"] = status;
  S["abort"] = abort_info;
  S["config"] = config_json(c);
  S["config_hash"] = c.hash;
  S["git_describe"] = KDNLS_GIT_DESCRIBE;
  S["lp_bump"] = lp_bump_description();
  S["dealias"] = to_string(sc.dealias);
  S["schedule"] = {{"ticks", sched.ticks}, {"extraction", sched.extraction}, {"gauge", sched.gauge}};
  std::ofstream js(out.directory / "summary.json");
  js << S.dump(2) << '\n';
  return out;
}

}  // namespace kdnls
