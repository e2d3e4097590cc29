// kdnls: run experiments, run verification suites, export snapshots, describe summaries.
//
// Exit codes: 0 ok, 1 verification failure, 2 config or input error, 3 numerical abort.

#include <CLI11.hpp>

#include <fstream>
#include <iomanip>
#include <iostream>

#include "kdnls/acceptance.hpp"

namespace {

using kdnls::json;

int cmd_run(const std::string& config_path, const std::string& root_flag) {
  const auto cfg = kdnls::load_config(config_path);
  const std::filesystem::path root = root_flag.empty() ? kdnls::output_root() : std::filesystem::path(root_flag);
  std::cerr << "kdnls run: " << config_path << " -> " << (root / cfg.output).string() << " (config " << cfg.hash
            << ")\n";
  const auto out = kdnls::run_experiment(cfg, root);
  if (out.exit_code != 0) std::cerr << "kdnls run: " << out.message << "\n";
  return out.exit_code;
}

int cmd_verify(const std::string& suite, const std::string& json_path) {
  using namespace kdnls::acceptance;
  Lab lab;
  lab.log = [](const std::string& s) { std::cerr << "  [lab] " << s << std::endl; };
  std::vector<std::string> suites;
  if (suite == "all") suites = suite_names();
  else suites = {suite};
  json report = json::array();
  bool ok = true;
  for (const auto& s : suites) {
    for (const auto& c : run_suite(s, lab, [&](const Criterion& c) {
           json line = to_json(c);
           line["suite"] = s;
           std::cout << line.dump() << std::endl;
         })) {
      ok = ok && c.pass;
      json j = to_json(c);
      j["suite"] = s;
      report.push_back(j);
    }
  }
  if (!json_path.empty()) std::ofstream(json_path) << report.dump(2) << '\n';
  std::cerr << (ok ? "verify: all checks passed" : "verify: FAILED") << "\n";
  return ok ? 0 : 1;
}

int cmd_export(const std::string& path, const std::string& as, const std::string& out_path) {
  const auto snap = kdnls::io::read_snapshot(path);
  if (out_path.empty()) {
    kdnls::io::export_spectrum(std::cout, snap, as == "csv");
  } else {
    std::ofstream out(out_path);
    if (!out) throw kdnls::ConfigError("", "cannot write " + out_path);
    kdnls::io::export_spectrum(out, snap, as == "csv");
  }
  return 0;
}

std::string num(const json& j) {
  if (j.is_number()) return kdnls::io::fmt(j.get<double>());
  if (j.is_string()) return j.get<std::string>();
  return j.dump();
}

const json* find(const json& j, std::initializer_list<const char*> path) {
  const json* p = &j;
  for (const char* k : path) {
    if (!p->is_object() || !p->contains(k)) return nullptr;
    p = &(*p)[k];
  }
  return p;
}

int cmd_describe(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw kdnls::ConfigError("", "cannot open " + path);
  json s = json::parse(in);
  auto line = [&](const char* label, std::initializer_list<const char*> keys) {
    if (const json* v = find(s, keys)) std::cout << "  " << std::left << std::setw(34) << label << num(*v) << "\n";
  };
  std::cout << "summary " << path << "\n";
  line("status", {"status"});
  line("config hash", {"config_hash"});
  line("binary", {"git_describe"});
  line("alpha", {"config", "alpha"});
  line("beta", {"config", "beta"});
  line("grid points", {"config", "n"});
  line("box length", {"config", "L"});
  line("dt", {"config", "dt"});
  line("reached t", {"reached_t"});
  line("steps", {"steps"});
  line("epsilon (measured)", {"initial", "epsilon"});
  if (const json* a = find(s, {"abort"}); a && !a->is_null()) std::cout << "  abort: " << a->dump() << "\n";
  line("W1inf decay slope", {"fits", "w1inf", "slope"});
  line("H(|u|^2) sup slope", {"fits", "hilbert_sup", "slope"});
  line("remainder exponent", {"scattering", "remainder", "fit", "slope"});
  line("corrected difference exponent", {"scattering", "corrected_differences", "fit", "slope"});
  line("correction factor", {"scattering", "necessity", "factor"});
  line("D_infty", {"scattering", "mass_limit", "D_infty"});
  line("||phi||", {"scattering", "mass_limit", "initial"});
  line("mass approach exponent", {"scattering", "mass_limit", "rate", "slope"});
  line("H2 growth exponent", {"apriori", "h2_growth", "slope"});
  line("xf H1 growth exponent", {"apriori", "xf_growth", "slope"});
  line("weighted Fourier sup ratio", {"weighted_fourier_sup", "ratio"});
  line("dyadic kappa", {"weighted_fourier_sup", "kappa"});
  if (const json* cp = find(s, {"scattering", "asymptotic", "checkpoints"}))
    for (const auto& e : *cp)
      std::cout << "  asymptotic mismatch t=" << num(e["t"]) << ": scaled " << num(e["scaled_sup"]) << ", relative "
                << num(e["relative"]) << "\n";
  if (const json* g = find(s, {"gauge"}))
    for (const auto& e : *g)
      if (e.contains("order"))
        std::cout << "  gauge " << e["sign"].get<std::string>() << " t=" << num(e["t"]) << ": order " << num(e["order"])
                  << ", extrapolated/||v||_H1 " << num(e["relative"]) << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"KDNLS pseudospectral simulation and verification lab"};
  app.set_version_flag("--version", std::string("kdnls ") + KDNLS_GIT_DESCRIBE);
  app.require_subcommand(1);

  std::string config, root, suite, json_path, snapshot, as = "text", out_path, summary;

  auto* run = app.add_subcommand("run", "run an experiment from a config file");
  run->add_option("config", config, "config file")->required()->check(CLI::ExistingFile);
  run->add_option("--output-root", root, "output root (default: $KDNLS_OUTPUT_ROOT, else the current directory)");

  auto* verify = app.add_subcommand("verify", "run a verification suite");
  verify->add_option("suite", suite, "operators | solver-order | identities | scattering | dissipation | all")
      ->required()
      ->check(CLI::IsMember({"operators", "solver-order", "identities", "scattering", "dissipation", "all"}));
  verify->add_option("--json", json_path, "also write the report to this file");

  auto* exp = app.add_subcommand("export", "dump a snapshot spectrum as text");
  exp->add_option("snapshot", snapshot, "snapshot .bin file")->required()->check(CLI::ExistingFile);
  exp->add_option("--as", as, "csv or text")->check(CLI::IsMember({"csv", "text"}));
  exp->add_option("-o,--output", out_path, "write here instead of stdout");

  auto* desc = app.add_subcommand("describe", "print the headline numbers of a summary.json");
  desc->add_option("summary", summary, "summary.json")->required()->check(CLI::ExistingFile);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }

  try {
    if (*run) return cmd_run(config, root);
    if (*verify) return cmd_verify(suite, json_path);
    if (*exp) return cmd_export(snapshot, as, out_path);
    if (*desc) return cmd_describe(summary);
  } catch (const kdnls::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const kdnls::NumericalAbort& e) {
    std::cerr << "numerical abort at t=" << e.t << ": " << e.what() << "\n";
    return 3;
  } catch (const json::exception& e) {
    std::cerr << "input error: " << e.what() << "\n";
    return 2;
  } catch (const std::runtime_error& e) {
    std::cerr << "input error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
