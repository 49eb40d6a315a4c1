#pragma once

// Flat key=value configuration files for simlab runs.
//
//   # comment
//   replications = 100
//   settings = 1.8:0:sigma1, 0.8:0:sigma1
//
// Every key can be overridden from the environment as PFP_<KEY> (upper case),
// e.g. PFP_REPLICATIONS=10. Precedence: file < environment < --seed flag.

#include <algorithm>
#include <cctype>
#include <cstdlib>
#include <functional>
#include <map>
#include <sstream>
#include <string>

#include "pfp/io.hpp"
#include "pfp/simlab.hpp"

namespace pfp {

inline constexpr const char* kEnvPrefix = "PFP_";

using KeyValues = std::map<std::string, std::string>;

inline KeyValues parse_key_values(std::istream& in, const std::string& source = "config") {
  KeyValues kv;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = detail::trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw InvalidArgument(source + ":" + std::to_string(lineno) + ": expected key = value");
    std::string k = detail::trim(line.substr(0, eq));
    if (k.empty()) throw InvalidArgument(source + ":" + std::to_string(lineno) + ": empty key");
    kv[k] = detail::trim(line.substr(eq + 1));
  }
  return kv;
}

inline KeyValues read_key_values(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config " + path);
  return parse_key_values(in, path);
}

namespace detail {

inline Index to_index(const std::string& k, const std::string& v) {
  try {
    std::size_t pos = 0;
    const long long x = std::stoll(v, &pos);
    if (pos == v.size()) return static_cast<Index>(x);
  } catch (const std::exception&) {
  }
  throw InvalidArgument("key " + k + ": not an integer: '" + v + "'");
}

inline double to_double(const std::string& k, const std::string& v) { return require_double(v, "key " + k); }

inline bool to_bool(const std::string& k, const std::string& v) {
  std::string s = v;
  std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return std::tolower(c); });
  if (s == "1" || s == "true" || s == "yes" || s == "on") return true;
  if (s == "0" || s == "false" || s == "no" || s == "off") return false;
  throw InvalidArgument("key " + k + ": not a boolean: '" + v + "'");
}

inline std::uint64_t to_seed(const std::string& k, const std::string& v) {
  try {
    std::size_t pos = 0;
    const unsigned long long x = std::stoull(v, &pos);
    if (pos == v.size() && v.find('-') == std::string::npos) return x;
  } catch (const std::exception&) {
  }
  throw InvalidArgument("key " + k + ": not a seed: '" + v + "'");
}

/// "k1:k2:profile, ..."
inline std::vector<SimSetting> to_settings(const std::string& v) {
  std::vector<SimSetting> out;
  for (const auto& item : split(v, ',')) {
    if (item.empty()) continue;
    const auto parts = split(item, ':');
    if (parts.size() != 3) throw InvalidArgument("setting '" + item + "' is not kappa1:kappa2:profile");
    SimSetting s;
    s.kappa1 = to_double("settings", parts[0]);
    s.kappa2 = to_double("settings", parts[1]);
    try {
      s.profile = parse_profile(parts[2]);
    } catch (const Error&) {
      throw InvalidArgument("unknown sigma profile '" + parts[2] + "'");
    }
    out.push_back(s);
  }
  if (out.empty()) throw InvalidArgument("settings list is empty");
  return out;
}

using Setter = std::function<void(SimConfig&, const std::string&, const std::string&)>;

inline const std::map<std::string, Setter>& sim_setters() {
  static const std::map<std::string, Setter> s = {
      {"D", [](SimConfig& c, auto& k, auto& v) { c.D = to_index(k, v); }},
      {"J", [](SimConfig& c, auto& k, auto& v) { c.J = to_index(k, v); }},
      {"n", [](SimConfig& c, auto& k, auto& v) { c.n = to_index(k, v); }},
      {"burn_in", [](SimConfig& c, auto& k, auto& v) { c.burn_in = to_index(k, v); }},
      {"tau", [](SimConfig& c, auto& k, auto& v) { c.tau = to_double(k, v); }},
      {"window", [](SimConfig& c, auto& k, auto& v) { c.window = to_index(k, v); }},
      {"n_train", [](SimConfig& c, auto& k, auto& v) { c.n_train = to_index(k, v); }},
      {"n_test", [](SimConfig& c, auto& k, auto& v) { c.n_test = to_index(k, v); }},
      {"replications", [](SimConfig& c, auto& k, auto& v) { c.replications = to_index(k, v); }},
      {"seed", [](SimConfig& c, auto& k, auto& v) { c.seed = to_seed(k, v); }},
      {"threads", [](SimConfig& c, auto& k, auto& v) { c.threads = static_cast<unsigned>(std::max<Index>(0, to_index(k, v))); }},
      {"settings", [](SimConfig& c, auto&, auto& v) { c.settings = to_settings(v); }},
      {"operator_norm", [](SimConfig& c, auto&, auto& v) { c.operator_norm = parse_operator_norm(v); }},
      {"stationarity", [](SimConfig& c, auto&, auto& v) { c.stationarity = parse_stationarity_policy(v); }},
      {"max_redraws", [](SimConfig& c, auto& k, auto& v) { c.max_redraws = to_index(k, v); }},
      {"mode", [](SimConfig& c, auto&, auto& v) { c.mode = parse_selection_mode(v); }},
      {"p", [](SimConfig& c, auto& k, auto& v) { c.p = to_index(k, v); }},
      {"d", [](SimConfig& c, auto& k, auto& v) { c.d = to_index(k, v); }},
      {"dx", [](SimConfig& c, auto& k, auto& v) { c.dx = to_index(k, v); }},
      {"dy", [](SimConfig& c, auto& k, auto& v) { c.dy = to_index(k, v); }},
      {"p_min", [](SimConfig& c, auto& k, auto& v) { c.ranges.p_min = to_index(k, v); }},
      {"p_max", [](SimConfig& c, auto& k, auto& v) { c.ranges.p_max = to_index(k, v); }},
      {"d_min", [](SimConfig& c, auto& k, auto& v) { c.ranges.d_min = to_index(k, v); }},
      {"d_max", [](SimConfig& c, auto& k, auto& v) { c.ranges.d_max = to_index(k, v); }},
      {"dx_max", [](SimConfig& c, auto& k, auto& v) { c.ranges.dx_max = to_index(k, v); }},
      {"dy_max", [](SimConfig& c, auto& k, auto& v) { c.ranges.dy_max = to_index(k, v); }},
      {"moving_block", [](SimConfig& c, auto& k, auto& v) { c.moving_block = to_bool(k, v); }},
      {"bootstrap_replicates", [](SimConfig& c, auto& k, auto& v) { c.bootstrap_replicates = to_index(k, v); }},
      {"alpha", [](SimConfig& c, auto& k, auto& v) { c.alpha = to_double(k, v); }},
      {"var_threshold", [](SimConfig& c, auto& k, auto& v) { c.var_threshold = to_double(k, v); }},
      {"noise", [](SimConfig& c, auto& k, auto& v) { c.noise = to_bool(k, v); }},
      {"noise_phi", [](SimConfig& c, auto& k, auto& v) { c.noise_phi = to_double(k, v); }},
      {"noise_sigma", [](SimConfig& c, auto& k, auto& v) { c.noise_sigma = to_double(k, v); }},
      {"horizons", [](SimConfig& c, auto& k, auto& v) { c.horizons = to_index(k, v); }},
      {"ar_max_order", [](SimConfig& c, auto& k, auto& v) { c.ar_max_order = static_cast<int>(to_index(k, v)); }},
      {"arima_max_order", [](SimConfig& c, auto& k, auto& v) { c.arima_max_order = static_cast<int>(to_index(k, v)); }},
  };
  return s;
}

inline std::string env_name(const std::string& key) {
  std::string s = kEnvPrefix;
  for (unsigned char c : key) s.push_back(static_cast<char>(std::toupper(c)));
  return s;
}

}  // namespace detail

using EnvLookup = std::function<const char*(const char*)>;

/// Overlays PFP_<KEY> environment variables for every known simlab key.
inline void apply_env_overrides(KeyValues& kv, const EnvLookup& env = [](const char* n) { return std::getenv(n); }) {
  for (const auto& [k, _] : detail::sim_setters())
    if (const char* v = env(detail::env_name(k).c_str())) kv[k] = detail::trim(v);
}

/// Builds and validates a SimConfig; unknown keys are rejected.
inline SimConfig sim_config_from(const KeyValues& kv) {
  SimConfig c;
  const auto& setters = detail::sim_setters();
  for (const auto& [k, v] : kv) {
    const auto it = setters.find(k);
    if (it == setters.end()) throw InvalidArgument("unknown config key '" + k + "'");
    try {
      it->second(c, k, v);
    } catch (const InvalidArgument&) {
      throw;
    } catch (const Error& e) {
      throw InvalidArgument("key " + k + ": " + e.what());
    }
  }
  c.validate();
  return c;
}

/// Canonical key=value rendering, readable back by sim_config_from.
inline std::string to_key_values(const SimConfig& c) {
  std::ostringstream o;
  o << "D = " << c.D << "\nJ = " << c.J << "\nn = " << c.n << "\nburn_in = " << c.burn_in << "\ntau = " << fmt6(c.tau)
    << "\nwindow = " << c.window << "\nn_train = " << c.n_train << "\nn_test = " << c.n_test
    << "\nreplications = " << c.replications << "\nseed = " << c.seed << "\nsettings = ";
  for (std::size_t i = 0; i < c.settings.size(); ++i)
    o << (i ? ", " : "") << fmt6(c.settings[i].kappa1) << ':' << fmt6(c.settings[i].kappa2) << ':'
      << to_string(c.settings[i].profile);
  o << "\noperator_norm = " << to_string(c.operator_norm) << "\nstationarity = " << to_string(c.stationarity)
    << "\nmax_redraws = " << c.max_redraws << "\nmode = " << to_string(c.mode) << "\np = " << c.p << "\nd = " << c.d
    << "\ndx = " << c.dx << "\ndy = " << c.dy << "\np_min = " << c.ranges.p_min << "\np_max = " << c.ranges.p_max
    << "\nd_min = " << c.ranges.d_min << "\nd_max = " << c.ranges.d_max << "\ndx_max = " << c.ranges.dx_max
    << "\ndy_max = " << c.ranges.dy_max << "\nmoving_block = " << (c.moving_block ? "true" : "false")
    << "\nbootstrap_replicates = " << c.bootstrap_replicates << "\nalpha = " << fmt6(c.alpha)
    << "\nvar_threshold = " << fmt6(c.var_threshold) << "\nnoise = " << (c.noise ? "true" : "false")
    << "\nnoise_phi = " << fmt6(c.noise_phi) << "\nnoise_sigma = " << fmt6(c.noise_sigma)
    << "\nhorizons = " << c.horizons << "\nar_max_order = " << c.ar_max_order
    << "\narima_max_order = " << c.arima_max_order << '\n';
  return o.str();
}

}  // namespace pfp
