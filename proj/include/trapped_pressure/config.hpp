#pragma once

// Run configuration: flat dotted keys (spacetime.spin = 0.9) read from a
// text file, overridden by command-line flags, and resolved against
// per-system defaults before use.

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "trapped_pressure/flow.hpp"
#include "trapped_pressure/pressure.hpp"
#include "trapped_pressure/trapped.hpp"

namespace tp {

struct RunConfig {
  std::string system = "kerr";  // toy | schwarzschild | kerr | cat

  double mass = 1.0;
  double spin = 0.0;
  double lambda = 0.0;

  double toy_nu = 0.5;
  double toy_omega1 = 1.0;
  double toy_omega2 = 1.4142135623730951;

  double rel_tol = 1e-10;
  double abs_tol = 1e-10;
  std::optional<double> max_step;  // 0.1, or 1 for the suspension
  double renorm_interval = 1.0;
  bool project = true;

  double horizon_margin = 0.1;
  double outer_radius = 50.0;

  std::optional<std::size_t> samples;
  std::uint64_t seed = 1;
  double axis_sin_min = 0.05;
  int phi_phases = 4;

  std::optional<std::vector<double>> eps;
  std::optional<std::vector<double>> T;
  std::vector<double> s{0.0, 0.25, 0.5, 1.0};
  std::optional<double> h_sep;
  double distance_scale = 1.0;
  std::optional<double> align_time;

  std::optional<double> nh_T;
  int r_cap = 10;
  std::optional<std::size_t> nh_samples;

  double orbit_T = 200.0;
  double orbit_output_step = 0.5;
  std::size_t orbit_sample = 0;

  // Not part of the provenance record: neither changes any result.
  std::string out_dir = ".";
  std::size_t workers = 0;
};

/// (key, value) pairs from "key = value" lines; '#' starts a comment.
/// Throws InvalidParameters naming the offending line.
std::vector<std::pair<std::string, std::string>> parse_config_text(const std::string& text);

/// Throws InvalidParameters for unknown keys or malformed values.
void apply_setting(RunConfig& config, const std::string& key, const std::string& value);

RunConfig load_config_file(const std::string& path, RunConfig base = {});

/// Fills system-dependent defaults and checks every field.
RunConfig resolve(const RunConfig& config);

/// Every provenance key of a resolved config, one "key = value" per line in
/// a fixed order; parse_config_text reads it back.
std::string to_text(const RunConfig& resolved);

/// 16 hex digits hashing to_text; names output files.
std::string run_stamp(const RunConfig& resolved);

FlowSystem make_system(const RunConfig& resolved);
IntegratorConfig integrator_config(const RunConfig& resolved);
PressureConfig pressure_config(const RunConfig& resolved);
SpacetimeParams spacetime_params(const RunConfig& resolved);
bool is_geodesic(const RunConfig& resolved);

struct SampleSet {
  std::vector<Vec> states;
  std::vector<double> r_sphere;  // geodesic systems only
};

SampleSet make_samples(const RunConfig& resolved, const FlowSystem& system, std::size_t count);

}  // namespace tp
