#ifndef HARTREE_IO_HPP
#define HARTREE_IO_HPP

#include <cstring>
#include <fstream>
#include <map>
#include <random>
#include <sstream>

#include "json.hpp"

#include "hartree/evolution.hpp"

extern "C" char** environ;

namespace hartree {

/// Flat key = value configuration with dotted keys ("grid.n = 512").
/// Environment variables HARTREE_<KEY> override file values; the
/// variable name is matched against keys with '.' and '_' identified
/// (HARTREE_GRID_N -> grid.n), falling back to splitting at the first
/// underscore for keys not present yet.
class RunConfig {
 public:
  RunConfig() = default;

  static RunConfig parse(const std::string& text) {
    RunConfig cfg;
    std::istringstream is(text);
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(is, line)) {
      ++lineno;
      const std::size_t hash = line.find('#');
      if (hash != std::string::npos) line.erase(hash);
      const std::string trimmed = trim(line);
      if (trimmed.empty()) continue;
      const std::size_t eq = trimmed.find('=');
      if (eq == std::string::npos || eq == 0)
        throw error("config-parse",
                    "expected 'key = value' on line " + std::to_string(lineno));
      const std::string key = trim(trimmed.substr(0, eq));
      const std::string val = trim(trimmed.substr(eq + 1));
      if (key.empty() || val.empty())
        throw error("config-parse", "empty key or value on line " + std::to_string(lineno));
      cfg.kv_[key] = val;
    }
    return cfg;
  }

  static RunConfig load(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw error("io-failure", "cannot open config file " + path);
    std::ostringstream os;
    os << f.rdbuf();
    return parse(os.str());
  }

  /// Sorted, normalized round-trip form: parse(serialize(c)) == c.
  std::string serialize() const {
    std::ostringstream os;
    for (const auto& [k, v] : kv_) os << k << " = " << v << "\n";
    return os.str();
  }

  void apply_env_overrides() {
    for (char** e = environ; e && *e; ++e) {
      const std::string entry(*e);
      if (entry.rfind("HARTREE_", 0) != 0) continue;
      const std::size_t eq = entry.find('=');
      if (eq == std::string::npos) continue;
      std::string name = entry.substr(8, eq - 8);
      const std::string val = entry.substr(eq + 1);
      for (char& c : name) c = char(std::tolower(static_cast<unsigned char>(c)));
      std::string matched;
      for (const auto& [k, v] : kv_)
        if (normalized(k) == normalized(name)) matched = k;
      if (matched.empty()) {
        matched = name;
        const std::size_t us = matched.find('_');
        if (us != std::string::npos) matched[us] = '.';
      }
      kv_[matched] = val;
    }
  }

  bool has(const std::string& key) const { return kv_.count(key) != 0; }
  void set(const std::string& key, const std::string& val) { kv_[key] = val; }

  std::string get_string(const std::string& key, const std::string& dflt) const {
    const auto it = kv_.find(key);
    return it == kv_.end() ? dflt : it->second;
  }
  double get_double(const std::string& key, double dflt) const {
    const auto it = kv_.find(key);
    if (it == kv_.end()) return dflt;
    return parse_double(key, it->second);
  }
  long long get_int(const std::string& key, long long dflt) const {
    const auto it = kv_.find(key);
    if (it == kv_.end()) return dflt;
    try {
      std::size_t pos = 0;
      const long long v = std::stoll(it->second, &pos);
      if (pos != it->second.size()) throw std::invalid_argument("trailing");
      return v;
    } catch (const std::exception&) {
      throw error("config-parse", "key " + key + " is not an integer: " + it->second);
    }
  }
  bool get_bool(const std::string& key, bool dflt) const {
    const auto it = kv_.find(key);
    if (it == kv_.end()) return dflt;
    if (it->second == "true" || it->second == "1") return true;
    if (it->second == "false" || it->second == "0") return false;
    throw error("config-parse", "key " + key + " is not a boolean: " + it->second);
  }
  std::vector<double> get_double_list(const std::string& key,
                                      const std::vector<double>& dflt) const {
    const auto it = kv_.find(key);
    if (it == kv_.end()) return dflt;
    std::vector<double> out;
    std::istringstream is(it->second);
    std::string tok;
    while (std::getline(is, tok, ',')) out.push_back(parse_double(key, trim(tok)));
    if (out.empty())
      throw error("config-parse", "key " + key + " holds an empty list");
    return out;
  }

  const std::map<std::string, std::string>& entries() const { return kv_; }

  bool operator==(const RunConfig& o) const { return kv_ == o.kv_; }

 private:
  static std::string trim(const std::string& s) {
    const std::size_t a = s.find_first_not_of(" \t\r\n");
    if (a == std::string::npos) return "";
    const std::size_t b = s.find_last_not_of(" \t\r\n");
    return s.substr(a, b - a + 1);
  }
  static std::string normalized(const std::string& s) {
    std::string t = s;
    for (char& c : t)
      if (c == '.') c = '_';
    return t;
  }
  static double parse_double(const std::string& key, const std::string& v) {
    try {
      std::size_t pos = 0;
      const double x = std::stod(v, &pos);
      if (pos != v.size()) throw std::invalid_argument("trailing");
      return x;
    } catch (const std::exception&) {
      throw error("config-parse", "key " + key + " is not a number: " + v);
    }
  }

  std::map<std::string, std::string> kv_;
};

/// FNV-1a 64-bit checksum, reported as a 16-digit hex string.
inline std::uint64_t fnv1a64(const void* data, std::size_t n) {
  const auto* p = static_cast<const unsigned char*>(data);
  std::uint64_t h = 1469598103934665603ull;
  for (std::size_t i = 0; i < n; ++i) {
    h ^= p[i];
    h *= 1099511628211ull;
  }
  return h;
}

inline std::string fnv1a64_hex(const std::string& bytes) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx",
                static_cast<unsigned long long>(fnv1a64(bytes.data(), bytes.size())));
  return buf;
}

namespace detail {

inline void put_u64(std::ostream& os, std::uint64_t v) {
  os.write(reinterpret_cast<const char*>(&v), 8);
}
inline void put_f64(std::ostream& os, double v) {
  os.write(reinterpret_cast<const char*>(&v), 8);
}
inline std::uint64_t get_u64(std::istream& is) {
  std::uint64_t v = 0;
  is.read(reinterpret_cast<char*>(&v), 8);
  return v;
}
inline double get_f64(std::istream& is) {
  double v = 0;
  is.read(reinterpret_cast<char*>(&v), 8);
  return v;
}

}  // namespace detail

/// Binary complex-field snapshot (little-endian):
///   magic "HRFD0001", then u64 d, u64 N, u64 grading (0 uniform,
///   1 geometric), f64 r_min, f64 r_max, N node radii, then N
///   interleaved (re, im) samples. The grid is stored by its build
///   parameters plus the nodes themselves so a reader can reconstruct it
///   and verify the reconstruction bit-for-bit (to rounding).
inline void write_field(const std::string& path, const RadialField& u) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw error("io-failure", "cannot open " + path + " for writing");
  const RadialGrid& g = u.grid();
  os.write("HRFD0001", 8);
  detail::put_u64(os, std::uint64_t(g.d));
  detail::put_u64(os, g.size());
  detail::put_u64(os, g.grading == Grading::geometric ? 1 : 0);
  detail::put_f64(os, g.r_min());
  detail::put_f64(os, g.r_max());
  for (double r : g.nodes) detail::put_f64(os, r);
  for (std::size_t i = 0; i < u.size(); ++i) {
    detail::put_f64(os, u[i].real());
    detail::put_f64(os, u[i].imag());
  }
  if (!os) throw error("io-failure", "write failed for " + path);
}

inline RadialField read_field(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw error("io-failure", "cannot open " + path);
  char magic[8];
  is.read(magic, 8);
  if (!is || std::memcmp(magic, "HRFD0001", 8) != 0)
    throw error("io-failure", "bad magic in " + path);
  const int d = int(detail::get_u64(is));
  const std::size_t n = detail::get_u64(is);
  const std::uint64_t grading = detail::get_u64(is);
  const double r_min = detail::get_f64(is);
  const double r_max = detail::get_f64(is);
  if (!is || n < 16 || n > (std::size_t(1) << 24) || grading > 1)
    throw error("io-failure", "corrupt header in " + path);
  auto grid = std::make_shared<RadialGrid>(build_grid(
      d, r_min, r_max, n, grading == 1 ? Grading::geometric : Grading::uniform));
  for (std::size_t i = 0; i < n; ++i) {
    const double r = detail::get_f64(is);
    if (std::abs(r - grid->nodes[i]) > 1e-12 * std::max(1.0, std::abs(r)))
      throw error("grid-mismatch", "stored nodes disagree with rebuilt grid in " + path);
  }
  VectorXcd v(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double re = detail::get_f64(is);
    const double im = detail::get_f64(is);
    v[i] = complexd(re, im);
  }
  if (!is) throw error("io-failure", "truncated payload in " + path);
  return RadialField(std::move(grid), std::move(v));
}

/// Run manifest: configuration echo, seed, and per-artifact checksums,
/// serialized as JSON. Deterministic for fixed config + seed (no
/// timestamps), so manifests can be diffed byte-for-byte.
struct RunManifest {
  std::string command;
  std::uint64_t seed = 0;
  RunConfig config;
  std::vector<std::pair<std::string, std::string>> artifacts;  // path, checksum

  void add_artifact(const std::string& path, const std::string& bytes) {
    artifacts.emplace_back(path, fnv1a64_hex(bytes));
  }

  std::string to_json() const {
    nlohmann::json j;
    j["command"] = command;
    j["seed"] = seed;
    nlohmann::json jc = nlohmann::json::object();
    for (const auto& [k, v] : config.entries()) jc[k] = v;
    j["config"] = jc;
    nlohmann::json ja = nlohmann::json::array();
    for (const auto& [p, c] : artifacts) ja.push_back({{"path", p}, {"checksum", c}});
    j["artifacts"] = ja;
    return j.dump(2) + "\n";
  }
};

inline void write_text(const std::string& path, const std::string& bytes) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw error("io-failure", "cannot open " + path + " for writing");
  os.write(bytes.data(), std::streamsize(bytes.size()));
  if (!os) throw error("io-failure", "write failed for " + path);
}

/// Trajectory diagnostics as CSV, one row per sample. Virial columns are
/// repeated per radius (V_R5, dtV_R5, ... for R = 5). Modulation and
/// projection columns print nan where the fit was unavailable. Output is
/// deterministic: fixed precision, no locale, no timestamps.
inline std::string trajectory_csv(const TrajectoryRecord& rec) {
  std::ostringstream os;
  os << "t,E,mass,grad_norm_sq,delta,theta,mu,alpha";
  for (double R : rec.virial_radii) {
    std::ostringstream rs;
    rs << R;
    os << ",V_R" << rs.str() << ",dtV_R" << rs.str() << ",d2tV_R" << rs.str()
       << ",A_R" << rs.str();
  }
  os << ",alpha_plus,alpha_minus,beta,gamma,flag\n";
  char buf[32];
  auto num = [&](double v) {
    std::snprintf(buf, sizeof buf, "%.17g", v);
    os << ',' << buf;
  };
  const double nan = std::numeric_limits<double>::quiet_NaN();
  for (const auto& s : rec.samples) {
    std::snprintf(buf, sizeof buf, "%.17g", s.t);
    os << buf;
    num(s.energy);
    num(s.mass);
    num(s.grad_sq);
    num(s.delta);
    num(s.has_fit ? s.theta : nan);
    num(s.has_fit ? s.mu : nan);
    num(s.has_fit ? s.alpha : nan);
    for (std::size_t j = 0; j < rec.virial_radii.size(); ++j) {
      num(s.V[j]);
      num(s.dtV[j]);
      num(s.d2tV[j]);
      num(s.A_R[j]);
    }
    num(s.has_projection ? s.alpha_plus : nan);
    num(s.has_projection ? s.alpha_minus : nan);
    num(s.has_projection ? s.beta : nan);
    num(s.has_projection ? s.gamma : nan);
    os << ',' << s.flag << '\n';
  }
  return os.str();
}

/// Seeded random trial field: a handful of radial Gaussian bumps with
/// complex amplitudes, symmetrized through r = 0 so the profile is even
/// (hence a genuine smooth radial function). Deterministic per seed.
inline RadialField random_trial_field(std::shared_ptr<const RadialGrid> grid,
                                      std::uint64_t seed, int bumps = 5) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::uniform_real_distribution<double> center(0.0, 0.25 * grid->r_max());
  std::uniform_real_distribution<double> width(0.3, 3.0);
  const std::size_t n = grid->size();
  VectorXcd v = VectorXcd::Zero(n);
  for (int b = 0; b < bumps; ++b) {
    const complexd amp(gauss(rng), gauss(rng));
    const double mu = center(rng);
    const double s = width(rng);
    for (std::size_t i = 0; i < n; ++i) {
      const double r = grid->nodes[i];
      const double e1 = std::exp(-0.5 * ((r - mu) / s) * ((r - mu) / s));
      const double e2 = std::exp(-0.5 * ((r + mu) / s) * ((r + mu) / s));
      v[i] += amp * (e1 + e2);
    }
  }
  return RadialField(std::move(grid), std::move(v));
}

}  // namespace hartree

#endif
