#pragma once

// Plain-text config reader, binary snapshot files and the diagnostics CSV.

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "grid.hpp"
#include "solver.hpp"

namespace kdnls::io {

// ---------------------------------------------------------------------------
// key = value files. '#' starts a comment, blank lines are ignored, keys are
// [A-Za-z0-9_.]+ and may appear once. Values are typed later by the schema.

struct Entry {
  std::string value;
  int line = 0;
};

using Entries = std::map<std::string, Entry>;

inline std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

inline Entries parse_entries(std::istream& in) {
  Entries out;
  std::string raw;
  int line = 0;
  while (std::getline(in, raw)) {
    ++line;
    if (auto h = raw.find('#'); h != std::string::npos) raw.erase(h);
    const std::string s = trim(raw);
    if (s.empty()) continue;
    const auto eq = s.find('=');
    if (eq == std::string::npos)
      throw ConfigError("", "line " + std::to_string(line) + ": expected key = value");
    const std::string key = trim(s.substr(0, eq));
    const std::string value = trim(s.substr(eq + 1));
    if (key.empty() || key.find_first_not_of("abcdefghijklmnopqrstuvwxyzABCDEFGHIJKLMNOPQRSTUVWXYZ0123456789_.") !=
                           std::string::npos)
      throw ConfigError(key, "line " + std::to_string(line) + ": malformed key");
    if (value.empty()) throw ConfigError(key, "line " + std::to_string(line) + ": empty value");
    if (out.count(key))
      throw ConfigError(key, "line " + std::to_string(line) + ": duplicate key (first on line " +
                                 std::to_string(out[key].line) + ")");
    out[key] = {value, line};
  }
  return out;
}

inline Entries parse_entries_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("", "cannot open config file " + path);
  return parse_entries(in);
}

inline double parse_double(const std::string& key, const Entry& e) {
  std::size_t pos = 0;
  double v = 0.0;
  try {
    v = std::stod(e.value, &pos);
  } catch (const std::exception&) {
    pos = 0;
  }
  if (pos != e.value.size() || !std::isfinite(v))
    throw ConfigError(key, "line " + std::to_string(e.line) + ": expected a number, got '" + e.value + "'");
  return v;
}

inline long parse_int(const std::string& key, const Entry& e) {
  std::size_t pos = 0;
  long v = 0;
  try {
    v = std::stol(e.value, &pos);
  } catch (const std::exception&) {
    pos = 0;
  }
  if (pos != e.value.size())
    throw ConfigError(key, "line " + std::to_string(e.line) + ": expected an integer, got '" + e.value + "'");
  return v;
}

inline bool parse_bool(const std::string& key, const Entry& e) {
  if (e.value == "true" || e.value == "on" || e.value == "1") return true;
  if (e.value == "false" || e.value == "off" || e.value == "0") return false;
  throw ConfigError(key, "line " + std::to_string(e.line) + ": expected true/false, got '" + e.value + "'");
}

inline std::vector<double> parse_list(const std::string& key, const Entry& e) {
  std::vector<double> out;
  std::stringstream ss(e.value);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(parse_double(key, {trim(item), e.line}));
  return out;
}

// ---------------------------------------------------------------------------
// Snapshot files (all little-endian):
//   0  12  magic "KDNLS-SNAP\0\0"
//   12  4  uint32 format version (1)
//   16  8  uint64 n
//   24  8  float64 L
//   32  8  float64 t
//   40 16n (re, im) float64 pairs of f^ in FFT order

inline constexpr char snapshot_magic[12] = {'K', 'D', 'N', 'L', 'S', '-', 'S', 'N', 'A', 'P', 0, 0};
inline constexpr std::uint32_t snapshot_version = 1;

static_assert(std::endian::native == std::endian::little, "snapshot I/O assumes a little-endian host");

struct Snapshot {
  double t = 0.0;
  Spectrum f_hat;
};

inline void write_snapshot(const std::string& path, const SolverState& s) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path);
  const std::uint64_t n = s.f_hat.size();
  const double L = s.f_hat.grid.length();
  out.write(snapshot_magic, sizeof snapshot_magic);
  out.write(reinterpret_cast<const char*>(&snapshot_version), 4);
  out.write(reinterpret_cast<const char*>(&n), 8);
  out.write(reinterpret_cast<const char*>(&L), 8);
  out.write(reinterpret_cast<const char*>(&s.t), 8);
  out.write(reinterpret_cast<const char*>(s.f_hat.coeffs.data()), static_cast<std::streamsize>(16 * n));
  if (!out) throw std::runtime_error("short write on " + path);
}

inline Snapshot read_snapshot(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path);
  char magic[12];
  std::uint32_t version = 0;
  std::uint64_t n = 0;
  double L = 0.0, t = 0.0;
  in.read(magic, 12);
  if (!in || std::memcmp(magic, snapshot_magic, 12) != 0) throw std::runtime_error(path + ": not a snapshot file");
  in.read(reinterpret_cast<char*>(&version), 4);
  if (version != snapshot_version)
    throw std::runtime_error(path + ": unsupported snapshot version " + std::to_string(version));
  in.read(reinterpret_cast<char*>(&n), 8);
  in.read(reinterpret_cast<char*>(&L), 8);
  in.read(reinterpret_cast<char*>(&t), 8);
  if (!in) throw std::runtime_error(path + ": truncated header");
  Snapshot s{t, Spectrum(Grid(n, L))};
  in.read(reinterpret_cast<char*>(s.f_hat.coeffs.data()), static_cast<std::streamsize>(16 * n));
  if (!in) throw std::runtime_error(path + ": truncated data");
  return s;
}

// ---------------------------------------------------------------------------
// Text output.

/// 17 significant digits, enough to round-trip a double.
inline std::string fmt(double v) {
  std::ostringstream os;
  os << std::setprecision(17) << v;
  return os.str();
}

/// 64-bit FNV-1a, hex encoded.
inline std::string fnv1a(const std::string& s) {
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ull;
  }
  std::ostringstream os;
  os << std::hex << std::setw(16) << std::setfill('0') << h;
  return os.str();
}

inline constexpr const char* csv_version_line = "# kdnls diagnostics v1";

inline const std::vector<std::string>& csv_columns() {
  static const std::vector<std::string> cols{
      "t",           "l2",           "h1",          "h2",
      "w1inf",       "xf_h1",        "hilbert_sup", "null_residual",
      "dissipation_residual", "boundary_mass", "weighted_fourier_sup", "config_hash"};
  return cols;
}

class CsvWriter {
 public:
  CsvWriter(std::ostream& out, std::string config_hash) : out_(out), hash_(std::move(config_hash)) {
    out_ << csv_version_line << '\n';
    for (std::size_t i = 0; i < csv_columns().size(); ++i) out_ << (i ? "," : "") << csv_columns()[i];
    out_ << '\n';
  }

  void row(const std::vector<double>& values) {
    if (values.size() + 1 != csv_columns().size()) throw std::logic_error("csv row has the wrong width");
    for (double v : values) out_ << fmt(v) << ',';
    out_ << hash_ << '\n';
  }

 private:
  std::ostream& out_;
  std::string hash_;
};

/// Spectrum dump: one line per mode in ascending xi, "xi,re,im" or space separated.
inline void export_spectrum(std::ostream& out, const Snapshot& s, bool csv) {
  const char sep = csv ? ',' : ' ';
  const Grid& g = s.f_hat.grid;
  const std::size_t n = g.n();
  if (csv) out << "# t=" << fmt(s.t) << " n=" << n << " L=" << fmt(g.length()) << "\nxi,re,im\n";
  else out << "# t " << fmt(s.t) << " n " << n << " L " << fmt(g.length()) << "\n# xi re im\n";
  for (std::size_t k = 0; k < n; ++k) {
    const std::size_t i = (k + n / 2) % n;
    out << fmt(g.freq(i)) << sep << fmt(s.f_hat[i].real()) << sep << fmt(s.f_hat[i].imag()) << '\n';
  }
}

}  // namespace kdnls::io
