// stencilforge - run configuration files for the cavity solver and benchmarks
// Copyright (c) 2026 the stencilforge authors
// Distributed under the MIT license; see the LICENSE file.

#ifndef SFORGE_CONFIG_HPP
#define SFORGE_CONFIG_HPP

#include <array>
#include <cctype>
#include <fstream>
#include <istream>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>

#include "stencilforge/cfd.hpp"
#include "stencilforge/executor.hpp"

namespace sforge::cli {

class config_error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// One flat `key = value` document.  Every key has a default, so an empty file
// is a complete configuration:
//
//   nx = 33   ny = 33   nz = 3        grid cells of the unit cavity
//   re = 100                          Reynolds number (viscosity = lid/re)
//   sigma = 0.5                       time-step safety factor, in (0,1)
//   omega = 1.7                       over-relaxation, in [1,2)
//   tolerance = 1e-6                  pressure residual bound max|div u|
//   max_sweeps = 500                  relaxation sweeps per step
//   alpha = 0                         upwind blend, 0 = pure central
//   density = 1                       fluid density (diagnostics only)
//   lid_speed = 1                     lid velocity, the U in Re = U L / nu
//   symmetry_z = true                 mirror walls in z (quasi-2D runs)
//   steady_tol = 1e-6                 stop when max|du|/dt <= steady_tol * U
//   max_steps = 200000                give up after this many steps
//   output_cadence = 0                progress print interval, 0 = quiet
//   workers = 1                       worker threads
//   mode = plain                      plain | overlap execution
//   tile = 0,0,0                      tile override, 0,0,0 = kernel default
//   ghost = 1                         ghost layers (the solver needs 1)
//   profiles_out = profiles.csv      centerline profile output
//   residuals_out = residuals.csv    per-step residual log
//   fields_out =                      directory for final field dumps, empty = none
struct run_config {
  long nx = 33, ny = 33, nz = 3;
  double re = 100.0;
  double sigma = 0.5;
  double omega = 1.7;
  double tolerance = 1e-6;
  long max_sweeps = 500;
  double alpha = 0.0;
  double density = 1.0;
  double lid_speed = 1.0;
  bool symmetry_z = true;
  double steady_tol = 1e-6;
  long max_steps = 200000;
  long output_cadence = 0;
  int workers = 1;
  exec::run_mode mode = exec::run_mode::plain;
  std::array<int, 3> tile{0, 0, 0};
  int ghost = 1;
  std::string profiles_out = "profiles.csv";
  std::string residuals_out = "residuals.csv";
  std::string fields_out;

  cfd::solver_config solver() const {
    cfd::solver_config s;
    s.dom = cfd::unit_box(nx, ny, nz);
    s.reynolds = re;
    s.sigma = sigma;
    s.omega = omega;
    s.tolerance = tolerance;
    s.max_sweeps = static_cast<int>(max_sweeps);
    s.symmetry_z = symmetry_z;
    s.output_cadence = static_cast<int>(output_cadence);
    return s;
  }

  cfd::fluid_params fluid() const {
    cfd::fluid_params p;
    p.lid_speed = lid_speed;
    p.viscosity = lid_speed * 1.0 / re;  // unit box edge
    p.blend = alpha;
    p.density = density;
    return p;
  }
};

namespace detail {

inline std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}

[[noreturn]] inline void bad_value(int line, const std::string& key, const std::string& why) {
  throw config_error("line " + std::to_string(line) + ": bad value for '" + key + "': " + why);
}

inline double to_double(int line, const std::string& key, std::string_view v) {
  std::size_t used = 0;
  double out = 0.0;
  try {
    out = std::stod(std::string(v), &used);
  } catch (const std::exception&) {
    bad_value(line, key, "expected a number, got '" + std::string(v) + "'");
  }
  if (used != v.size()) bad_value(line, key, "trailing characters in '" + std::string(v) + "'");
  return out;
}

inline long to_long(int line, const std::string& key, std::string_view v) {
  std::size_t used = 0;
  long out = 0;
  try {
    out = std::stol(std::string(v), &used);
  } catch (const std::exception&) {
    bad_value(line, key, "expected an integer, got '" + std::string(v) + "'");
  }
  if (used != v.size()) bad_value(line, key, "trailing characters in '" + std::string(v) + "'");
  return out;
}

inline bool to_bool(int line, const std::string& key, std::string_view v) {
  if (v == "true" || v == "yes" || v == "on" || v == "1") return true;
  if (v == "false" || v == "no" || v == "off" || v == "0") return false;
  bad_value(line, key, "expected true/false, got '" + std::string(v) + "'");
}

inline exec::run_mode to_mode(int line, const std::string& key, std::string_view v) {
  if (v == "plain") return exec::run_mode::plain;
  if (v == "overlap") return exec::run_mode::overlap;
  bad_value(line, key, "expected plain or overlap, got '" + std::string(v) + "'");
}

inline std::array<int, 3> to_tile(int line, const std::string& key, std::string_view v) {
  std::array<int, 3> out{};
  std::string text(v);
  std::istringstream in(text);
  std::string part;
  int got = 0;
  while (std::getline(in, part, ',')) {
    if (got == 3) bad_value(line, key, "expected three comma-separated integers");
    out[static_cast<std::size_t>(got++)] =
        static_cast<int>(to_long(line, key, trim(part)));
  }
  if (got != 3) bad_value(line, key, "expected three comma-separated integers");
  return out;
}

}  // namespace detail

// Parses a run configuration.  Lines are `key = value`; `#` starts a comment
// anywhere; blank lines are skipped.  Unknown or repeated keys and malformed
// values are reported with their line number.
inline run_config parse_run_config(std::istream& in) {
  using detail::bad_value;
  run_config rc;
  std::set<std::string> seen;
  std::string raw;
  int line = 0;
  while (std::getline(in, raw)) {
    ++line;
    if (auto hash = raw.find('#'); hash != std::string::npos) raw.erase(hash);
    std::string_view text = detail::trim(raw);
    if (text.empty()) continue;
    auto eq = text.find('=');
    if (eq == std::string_view::npos)
      throw config_error("line " + std::to_string(line) + ": expected 'key = value', got '" +
                         std::string(text) + "'");
    std::string key(detail::trim(text.substr(0, eq)));
    std::string_view value = detail::trim(text.substr(eq + 1));
    if (key.empty())
      throw config_error("line " + std::to_string(line) + ": missing key before '='");
    if (!seen.insert(key).second)
      throw config_error("line " + std::to_string(line) + ": duplicate key '" + key + "'");

    if (key == "nx" || key == "ny" || key == "nz") {
      const long n = detail::to_long(line, key, value);
      if (n < 1) bad_value(line, key, "grid extent must be at least 1");
      (key == "nx" ? rc.nx : key == "ny" ? rc.ny : rc.nz) = n;
    } else if (key == "re") {
      rc.re = detail::to_double(line, key, value);
      if (!(rc.re > 0.0)) bad_value(line, key, "Reynolds number must be positive");
    } else if (key == "sigma") {
      rc.sigma = detail::to_double(line, key, value);
      if (!(rc.sigma > 0.0 && rc.sigma < 1.0)) bad_value(line, key, "must lie in (0,1)");
    } else if (key == "omega") {
      rc.omega = detail::to_double(line, key, value);
      if (!(rc.omega >= 1.0 && rc.omega < 2.0)) bad_value(line, key, "must lie in [1,2)");
    } else if (key == "tolerance") {
      rc.tolerance = detail::to_double(line, key, value);
      if (!(rc.tolerance > 0.0)) bad_value(line, key, "must be positive");
    } else if (key == "max_sweeps") {
      rc.max_sweeps = detail::to_long(line, key, value);
      if (rc.max_sweeps < 1) bad_value(line, key, "must be at least 1");
    } else if (key == "alpha") {
      rc.alpha = detail::to_double(line, key, value);
      if (!(rc.alpha >= 0.0 && rc.alpha <= 1.0)) bad_value(line, key, "must lie in [0,1]");
    } else if (key == "density") {
      rc.density = detail::to_double(line, key, value);
      if (!(rc.density > 0.0)) bad_value(line, key, "must be positive");
    } else if (key == "lid_speed") {
      rc.lid_speed = detail::to_double(line, key, value);
      if (!(rc.lid_speed > 0.0)) bad_value(line, key, "must be positive");
    } else if (key == "symmetry_z") {
      rc.symmetry_z = detail::to_bool(line, key, value);
    } else if (key == "steady_tol") {
      rc.steady_tol = detail::to_double(line, key, value);
      if (!(rc.steady_tol > 0.0)) bad_value(line, key, "must be positive");
    } else if (key == "max_steps") {
      rc.max_steps = detail::to_long(line, key, value);
      if (rc.max_steps < 1) bad_value(line, key, "must be at least 1");
    } else if (key == "output_cadence") {
      rc.output_cadence = detail::to_long(line, key, value);
      if (rc.output_cadence < 0) bad_value(line, key, "must be non-negative");
    } else if (key == "workers") {
      rc.workers = static_cast<int>(detail::to_long(line, key, value));
      if (rc.workers < 1) bad_value(line, key, "must be at least 1");
    } else if (key == "mode") {
      rc.mode = detail::to_mode(line, key, value);
    } else if (key == "tile") {
      rc.tile = detail::to_tile(line, key, value);
      for (int t : rc.tile)
        if (t < 0) bad_value(line, key, "tile extents must be non-negative");
    } else if (key == "ghost") {
      rc.ghost = static_cast<int>(detail::to_long(line, key, value));
      if (rc.ghost < 1) bad_value(line, key, "must be at least 1");
    } else if (key == "profiles_out") {
      rc.profiles_out = std::string(value);
    } else if (key == "residuals_out") {
      rc.residuals_out = std::string(value);
    } else if (key == "fields_out") {
      rc.fields_out = std::string(value);
    } else {
      throw config_error("line " + std::to_string(line) + ": unknown key '" + key + "'");
    }
  }
  rc.solver().validate();  // cross-field invariants; per-key checks above give line numbers
  return rc;
}

inline run_config load_run_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw config_error("cannot open config file '" + path + "'");
  try {
    return parse_run_config(in);
  } catch (const config_error& e) {
    throw config_error(path + ": " + e.what());
  }
}

}  // namespace sforge::cli

#endif  // SFORGE_CONFIG_HPP
