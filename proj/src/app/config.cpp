#include "app/config.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <map>
#include <set>
#include <sstream>

#include "g2/snapshot.hpp"

namespace g2::app {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> words(const std::string& v) {
  std::istringstream in(v);
  std::vector<std::string> out;
  for (std::string w; in >> w;) out.push_back(w);
  return out;
}

[[noreturn]] void bad(int line, const std::string& key, const std::string& why) {
  throw ConfigError(ErrorCode::ParseError, line, key + ": " + why);
}

double to_real(const std::string& w, int line, const std::string& key) {
  if (w == "inf") return std::numeric_limits<double>::infinity();
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(w, &used);
  } catch (const std::exception&) {
    bad(line, key, "expected a number, got '" + w + "'");
  }
  if (used != w.size() || std::isnan(v)) bad(line, key, "expected a number, got '" + w + "'");
  return v;
}

long to_int(const std::string& w, int line, const std::string& key) {
  std::size_t used = 0;
  long v = 0;
  try {
    v = std::stol(w, &used);
  } catch (const std::exception&) {
    bad(line, key, "expected an integer, got '" + w + "'");
  }
  if (used != w.size()) bad(line, key, "expected an integer, got '" + w + "'");
  return v;
}

double one_real(const std::string& v, int line, const std::string& key) {
  const auto w = words(v);
  if (w.size() != 1) bad(line, key, "expected one value");
  return to_real(w[0], line, key);
}

long one_int(const std::string& v, int line, const std::string& key) {
  const auto w = words(v);
  if (w.size() != 1) bad(line, key, "expected one value");
  return to_int(w[0], line, key);
}

bool to_bool(const std::string& v, int line, const std::string& key) {
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  bad(line, key, "expected true or false");
}

std::string show(double v) {
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  if (std::isnan(v)) return "auto";
  return format_double(v);
}

template <class T>
std::string show_list(const std::vector<T>& v) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) out += ' ';
    if constexpr (std::is_floating_point_v<T>) out += show(v[i]);
    else out += std::to_string(v[i]);
  }
  return out;
}

struct Key {
  const char* name;
  std::function<void(RunConfig&, const std::string&, int)> set;
  std::function<std::string(const RunConfig&)> get;
};

const std::vector<Key>& keys() {
  static const std::vector<Key> table = {
      {"flow",
       [](RunConfig& c, const std::string& v, int l) {
         if (v == "laplacian") c.flow = FlowKind::laplacian;
         else if (v == "coflow" || v == "modified_coflow") c.flow = FlowKind::modified_coflow;
         else if (v == "generic") c.flow = FlowKind::generic;
         else bad(l, "flow", "expected laplacian, coflow or generic");
       },
       [](const RunConfig& c) { return std::string(flow_kind_name(c.flow)); }},
      {"A", [](RunConfig& c, const std::string& v, int l) { c.A = one_real(v, l, "A"); },
       [](const RunConfig& c) { return show(c.A); }},
      {"driver",
       [](RunConfig& c, const std::string& v, int l) {
         if (v != "ricci") bad(l, "driver", "only ricci is available");
         c.driver = v;
       },
       [](const RunConfig& c) { return c.driver; }},
      {"axes",
       [](RunConfig& c, const std::string& v, int l) {
         c.axes.clear();
         for (const auto& w : words(v)) c.axes.push_back(static_cast<int>(to_int(w, l, "axes")));
         if (c.axes.empty() || c.axes.size() > 3) bad(l, "axes", "expected one to three axes");
         for (std::size_t i = 0; i < c.axes.size(); ++i) {
           if (c.axes[i] < 1 || c.axes[i] > 7) bad(l, "axes", "axis ids run from 1 to 7");
           if (i && c.axes[i] <= c.axes[i - 1]) bad(l, "axes", "axis ids must increase");
         }
       },
       [](const RunConfig& c) { return show_list(c.axes); }},
      {"N",
       [](RunConfig& c, const std::string& v, int l) {
         c.n.clear();
         for (const auto& w : words(v)) {
           const long x = to_int(w, l, "N");
           if (x < 5 || x > 4096) bad(l, "N", "points per axis must lie in [5, 4096]");
           c.n.push_back(static_cast<int>(x));
         }
         if (c.n.empty()) bad(l, "N", "missing value");
       },
       [](const RunConfig& c) { return show_list(c.n); }},
      {"L",
       [](RunConfig& c, const std::string& v, int l) {
         c.length.clear();
         for (const auto& w : words(v)) {
           const double x = to_real(w, l, "L");
           if (!(x > 0.0) || std::isinf(x)) bad(l, "L", "periods must be positive");
           c.length.push_back(x);
         }
         if (c.length.empty()) bad(l, "L", "missing value");
       },
       [](const RunConfig& c) { return show_list(c.length); }},
      {"inactive_period",
       [](RunConfig& c, const std::string& v, int l) {
         c.inactive_period = one_real(v, l, "inactive_period");
         if (!(c.inactive_period > 0.0) || std::isinf(c.inactive_period))
           bad(l, "inactive_period", "must be positive");
       },
       [](const RunConfig& c) { return show(c.inactive_period); }},
      {"init",
       [](RunConfig& c, const std::string& v, int l) {
         static const std::set<std::string> ok = {"flat", "conformal", "closed", "coclosed", "snapshot"};
         if (!ok.count(v)) bad(l, "init", "expected flat, conformal, closed, coclosed or snapshot");
         c.init = v;
       },
       [](const RunConfig& c) { return c.init; }},
      {"epsilon",
       [](RunConfig& c, const std::string& v, int l) {
         c.epsilon = one_real(v, l, "epsilon");
         if (!(c.epsilon >= 0.0) || std::isinf(c.epsilon)) bad(l, "epsilon", "must be finite and >= 0");
       },
       [](const RunConfig& c) { return show(c.epsilon); }},
      {"modes",
       [](RunConfig& c, const std::string& v, int l) {
         c.modes.clear();
         for (const auto& w : words(v)) c.modes.push_back(static_cast<int>(to_int(w, l, "modes")));
         if (c.modes.empty() || c.modes.size() > 3) bad(l, "modes", "expected one to three mode numbers");
       },
       [](const RunConfig& c) { return show_list(c.modes); }},
      {"snapshot", [](RunConfig& c, const std::string& v, int) { c.snapshot = v; },
       [](const RunConfig& c) { return c.snapshot; }},
      {"t_max",
       [](RunConfig& c, const std::string& v, int l) {
         c.t_max = one_real(v, l, "t_max");
         if (!(c.t_max > 0.0)) bad(l, "t_max", "must be positive");
       },
       [](const RunConfig& c) { return show(c.t_max); }},
      {"lambda_max",
       [](RunConfig& c, const std::string& v, int l) {
         c.lambda_max = one_real(v, l, "lambda_max");
         if (!(c.lambda_max > 0.0)) bad(l, "lambda_max", "must be positive");
       },
       [](const RunConfig& c) { return show(c.lambda_max); }},
      {"max_steps",
       [](RunConfig& c, const std::string& v, int l) {
         c.max_steps = one_int(v, l, "max_steps");
         if (c.max_steps < 0) bad(l, "max_steps", "must be >= 0");
       },
       [](const RunConfig& c) { return std::to_string(c.max_steps); }},
      {"diag_every",
       [](RunConfig& c, const std::string& v, int l) {
         c.diag_every = static_cast<int>(one_int(v, l, "diag_every"));
         if (c.diag_every < 1) bad(l, "diag_every", "must be >= 1");
       },
       [](const RunConfig& c) { return std::to_string(c.diag_every); }},
      {"cfl",
       [](RunConfig& c, const std::string& v, int l) {
         c.cfl = one_real(v, l, "cfl");
         if (!(c.cfl > 0.0 && c.cfl <= 1.0)) bad(l, "cfl", "must lie in (0, 1]");
       },
       [](const RunConfig& c) { return show(c.cfl); }},
      {"dt",
       [](RunConfig& c, const std::string& v, int l) {
         c.dt = one_real(v, l, "dt");
         if (!(c.dt >= 0.0) || std::isinf(c.dt)) bad(l, "dt", "must be finite and >= 0");
       },
       [](const RunConfig& c) { return show(c.dt); }},
      {"trajectory_every",
       [](RunConfig& c, const std::string& v, int l) {
         c.trajectory_every = static_cast<int>(one_int(v, l, "trajectory_every"));
         if (c.trajectory_every < 1) bad(l, "trajectory_every", "must be >= 1");
       },
       [](const RunConfig& c) { return std::to_string(c.trajectory_every); }},
      {"rescaled_snapshots",
       [](RunConfig& c, const std::string& v, int l) { c.rescaled_snapshots = to_bool(v, l, "rescaled_snapshots"); },
       [](const RunConfig& c) { return std::string(c.rescaled_snapshots ? "true" : "false"); }},
      {"tau",
       [](RunConfig& c, const std::string& v, int l) {
         c.tau.clear();
         if (v == "auto") return;
         for (const auto& w : words(v)) {
           const double x = to_real(w, l, "tau");
           if (!(x > 0.0) || std::isinf(x)) bad(l, "tau", "values must be positive");
           if (!c.tau.empty() && x <= c.tau.back()) bad(l, "tau", "values must increase");
           c.tau.push_back(x);
         }
       },
       [](const RunConfig& c) { return c.tau.empty() ? std::string("auto") : show_list(c.tau); }},
      {"reference_time",
       [](RunConfig& c, const std::string& v, int l) {
         c.reference_time = v == "auto" ? std::numeric_limits<double>::quiet_NaN() : one_real(v, l, "reference_time");
       },
       [](const RunConfig& c) { return show(c.reference_time); }},
      {"mu_tol",
       [](RunConfig& c, const std::string& v, int l) {
         c.mu_tol = one_real(v, l, "mu_tol");
         if (!(c.mu_tol > 0.0)) bad(l, "mu_tol", "must be positive");
       },
       [](const RunConfig& c) { return show(c.mu_tol); }},
      {"mu_max_iter",
       [](RunConfig& c, const std::string& v, int l) {
         c.mu_max_iter = one_int(v, l, "mu_max_iter");
         if (c.mu_max_iter < 1) bad(l, "mu_max_iter", "must be >= 1");
       },
       [](const RunConfig& c) { return std::to_string(c.mu_max_iter); }},
      {"mu_starts",
       [](RunConfig& c, const std::string& v, int l) {
         c.mu_starts = static_cast<int>(one_int(v, l, "mu_starts"));
         if (c.mu_starts < 1) bad(l, "mu_starts", "must be >= 1");
       },
       [](const RunConfig& c) { return std::to_string(c.mu_starts); }},
      {"dwdt", [](RunConfig& c, const std::string& v, int l) { c.dwdt = to_bool(v, l, "dwdt"); },
       [](const RunConfig& c) { return std::string(c.dwdt ? "true" : "false"); }},
      {"trajectory", [](RunConfig& c, const std::string& v, int) { c.trajectory = v; },
       [](const RunConfig& c) { return c.trajectory_dir(); }},
      {"rho",
       [](RunConfig& c, const std::string& v, int l) {
         c.rho = v == "auto" ? std::numeric_limits<double>::quiet_NaN() : one_real(v, l, "rho");
         if (!std::isnan(c.rho) && !(c.rho > 0.0)) bad(l, "rho", "must be positive");
       },
       [](const RunConfig& c) { return show(c.rho); }},
      {"center_stride",
       [](RunConfig& c, const std::string& v, int l) {
         c.center_stride = static_cast<int>(one_int(v, l, "center_stride"));
         if (c.center_stride < 1) bad(l, "center_stride", "must be >= 1");
       },
       [](const RunConfig& c) { return std::to_string(c.center_stride); }},
      {"collapse_every",
       [](RunConfig& c, const std::string& v, int l) {
         c.collapse_every = static_cast<int>(one_int(v, l, "collapse_every"));
         if (c.collapse_every < 1) bad(l, "collapse_every", "must be >= 1");
       },
       [](const RunConfig& c) { return std::to_string(c.collapse_every); }},
      {"diagnostics", [](RunConfig& c, const std::string& v, int) { c.diagnostics = v; },
       [](const RunConfig& c) { return c.diagnostics_path(); }},
      {"fit_t_min", [](RunConfig& c, const std::string& v, int l) { c.fit_t_min = one_real(v, l, "fit_t_min"); },
       [](const RunConfig& c) { return show(c.fit_t_min); }},
      {"output",
       [](RunConfig& c, const std::string& v, int l) {
         if (v.empty()) bad(l, "output", "missing value");
         c.output = v;
       },
       [](const RunConfig& c) { return c.output; }},
      {"seed",
       [](RunConfig& c, const std::string& v, int l) {
         const long s = one_int(v, l, "seed");
         if (s < 0) bad(l, "seed", "must be >= 0");
         c.seed = static_cast<std::uint64_t>(s);
       },
       [](const RunConfig& c) { return std::to_string(c.seed); }},
  };
  return table;
}

template <class T>
std::vector<T> broadcast(const std::vector<T>& v, std::size_t k, const char* key) {
  if (v.size() == k) return v;
  if (v.size() == 1) return std::vector<T>(k, v[0]);
  throw ConfigError(ErrorCode::ParseError, 0, std::string(key) + ": expected one value or one per axis");
}

}  // namespace

RunConfig parse_config(const std::string& text) {
  RunConfig cfg;
  cfg.text = text;
  std::map<std::string, int> seen;
  std::istringstream in(text);
  std::string raw;
  int line = 0;
  while (std::getline(in, raw)) {
    ++line;
    const auto hash = raw.find('#');
    const std::string body = trim(hash == std::string::npos ? raw : raw.substr(0, hash));
    if (body.empty()) continue;
    const auto eq = body.find('=');
    if (eq == std::string::npos) throw ConfigError(ErrorCode::ParseError, line, "expected 'key = value'");
    const std::string key = trim(body.substr(0, eq));
    const std::string value = trim(body.substr(eq + 1));
    if (key.empty()) throw ConfigError(ErrorCode::ParseError, line, "missing key");
    const auto it = std::find_if(keys().begin(), keys().end(), [&](const Key& k) { return key == k.name; });
    if (it == keys().end()) throw ConfigError(ErrorCode::UnknownKey, line, "unknown key '" + key + "'");
    if (const auto prev = seen.find(key); prev != seen.end())
      throw ConfigError(ErrorCode::DuplicateKey, line,
                        "duplicate key '" + key + "' (first set on line " + std::to_string(prev->second) + ")");
    seen[key] = line;
    it->set(cfg, value, line);
  }
  const std::size_t k = cfg.axes.size();
  cfg.n = broadcast(cfg.n, k, "N");
  cfg.length = broadcast(cfg.length, k, "L");
  cfg.modes = broadcast(cfg.modes, k, "modes");
  if (cfg.init == "snapshot" && cfg.snapshot.empty())
    throw ConfigError(ErrorCode::ParseError, seen.count("init") ? seen["init"] : 0, "init = snapshot needs a snapshot path");
  return cfg;
}

RunConfig load_config(const std::string& path) {
  if (!file_exists(path)) throw UsageError("config file not found: " + path);
  return parse_config(read_file(path));
}

Grid RunConfig::grid() const {
  std::vector<int> coords;
  for (int a : axes) coords.push_back(a - 1);
  return Grid(coords, n, length, inactive_periods());
}

std::array<double, kDim> RunConfig::inactive_periods() const {
  std::array<double, kDim> p;
  p.fill(inactive_period);
  return p;
}

std::array<int, 3> RunConfig::mode_array() const {
  std::array<int, 3> m{0, 0, 0};
  for (std::size_t i = 0; i < modes.size() && i < 3; ++i) m[i] = modes[i];
  return m;
}

std::string RunConfig::trajectory_dir() const { return trajectory.empty() ? output + "/trajectory" : trajectory; }

std::string RunConfig::diagnostics_path() const {
  return diagnostics.empty() ? output + "/diagnostics.csv" : diagnostics;
}

std::string resolved_dump(const RunConfig& cfg) {
  std::string out;
  for (const auto& k : keys()) out += std::string(k.name) + " = " + k.get(cfg) + "\n";
  return out;
}

}  // namespace g2::app
