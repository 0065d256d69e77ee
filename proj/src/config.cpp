#include "trapped_pressure/config.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cstdio>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

#include "format.hpp"
#include "trapped_pressure/errors.hpp"
#include "trapped_pressure/fixtures.hpp"

namespace tp {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

double to_double(const std::string& key, const std::string& v) {
  const std::string t = trim(v);
  if (t == "inf") return std::numeric_limits<double>::infinity();
  double out = 0.0;
  auto res = std::from_chars(t.data(), t.data() + t.size(), out);
  if (res.ec != std::errc() || res.ptr != t.data() + t.size() || t.empty())
    throw InvalidParameters(key + ": not a number: '" + v + "'");
  return out;
}

std::uint64_t to_uint(const std::string& key, const std::string& v) {
  const std::string t = trim(v);
  std::uint64_t out = 0;
  auto res = std::from_chars(t.data(), t.data() + t.size(), out);
  if (res.ec != std::errc() || res.ptr != t.data() + t.size() || t.empty())
    throw InvalidParameters(key + ": not a nonnegative integer: '" + v + "'");
  return out;
}

bool to_bool(const std::string& key, const std::string& v) {
  const std::string t = trim(v);
  if (t == "true" || t == "1") return true;
  if (t == "false" || t == "0") return false;
  throw InvalidParameters(key + ": expected true or false, got '" + v + "'");
}

std::vector<double> to_list(const std::string& key, const std::string& v) {
  std::vector<double> out;
  std::stringstream ss(v);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(to_double(key, item));
  if (out.empty()) throw InvalidParameters(key + ": empty list");
  return out;
}

std::string list_text(const std::vector<double>& v) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) out += (i ? "," : "") + detail::fmt_double(v[i]);
  return out;
}

using Setter = std::function<void(RunConfig&, const std::string&, const std::string&)>;

const std::map<std::string, Setter>& setters() {
  static const std::map<std::string, Setter> table = {
      {"run.system", [](RunConfig& c, const std::string&, const std::string& v) { c.system = trim(v); }},
      {"run.out_dir", [](RunConfig& c, const std::string&, const std::string& v) { c.out_dir = trim(v); }},
      {"run.workers", [](RunConfig& c, const std::string& k, const std::string& v) { c.workers = to_uint(k, v); }},
      {"spacetime.mass", [](RunConfig& c, const std::string& k, const std::string& v) { c.mass = to_double(k, v); }},
      {"spacetime.spin", [](RunConfig& c, const std::string& k, const std::string& v) { c.spin = to_double(k, v); }},
      {"spacetime.lambda",
       [](RunConfig& c, const std::string& k, const std::string& v) { c.lambda = to_double(k, v); }},
      {"toy.nu", [](RunConfig& c, const std::string& k, const std::string& v) { c.toy_nu = to_double(k, v); }},
      {"toy.omega1",
       [](RunConfig& c, const std::string& k, const std::string& v) { c.toy_omega1 = to_double(k, v); }},
      {"toy.omega2",
       [](RunConfig& c, const std::string& k, const std::string& v) { c.toy_omega2 = to_double(k, v); }},
      {"integrator.rtol",
       [](RunConfig& c, const std::string& k, const std::string& v) { c.rel_tol = to_double(k, v); }},
      {"integrator.atol",
       [](RunConfig& c, const std::string& k, const std::string& v) { c.abs_tol = to_double(k, v); }},
      {"integrator.max_step",
       [](RunConfig& c, const std::string& k, const std::string& v) { c.max_step = to_double(k, v); }},
      {"integrator.renorm_interval",
       [](RunConfig& c, const std::string& k, const std::string& v) { c.renorm_interval = to_double(k, v); }},
      {"integrator.project",
       [](RunConfig& c, const std::string& k, const std::string& v) { c.project = to_bool(k, v); }},
      {"escape.horizon_margin",
       [](RunConfig& c, const std::string& k, const std::string& v) { c.horizon_margin = to_double(k, v); }},
      {"escape.outer_radius",
       [](RunConfig& c, const std::string& k, const std::string& v) { c.outer_radius = to_double(k, v); }},
      {"sampling.count",
       [](RunConfig& c, const std::string& k, const std::string& v) { c.samples = to_uint(k, v); }},
      {"sampling.seed", [](RunConfig& c, const std::string& k, const std::string& v) { c.seed = to_uint(k, v); }},
      {"sampling.axis_sin_min",
       [](RunConfig& c, const std::string& k, const std::string& v) { c.axis_sin_min = to_double(k, v); }},
      {"sampling.phi_phases",
       [](RunConfig& c, const std::string& k, const std::string& v) {
         c.phi_phases = static_cast<int>(to_uint(k, v));
       }},
      {"pressure.eps", [](RunConfig& c, const std::string& k, const std::string& v) { c.eps = to_list(k, v); }},
      {"pressure.T", [](RunConfig& c, const std::string& k, const std::string& v) { c.T = to_list(k, v); }},
      {"pressure.s", [](RunConfig& c, const std::string& k, const std::string& v) { c.s = to_list(k, v); }},
      {"pressure.h_sep",
       [](RunConfig& c, const std::string& k, const std::string& v) { c.h_sep = to_double(k, v); }},
      {"pressure.distance_scale",
       [](RunConfig& c, const std::string& k, const std::string& v) { c.distance_scale = to_double(k, v); }},
      {"pressure.align_time",
       [](RunConfig& c, const std::string& k, const std::string& v) { c.align_time = to_double(k, v); }},
      {"nh.T", [](RunConfig& c, const std::string& k, const std::string& v) { c.nh_T = to_double(k, v); }},
      {"nh.r_cap",
       [](RunConfig& c, const std::string& k, const std::string& v) { c.r_cap = static_cast<int>(to_uint(k, v)); }},
      {"nh.samples",
       [](RunConfig& c, const std::string& k, const std::string& v) { c.nh_samples = to_uint(k, v); }},
      {"orbit.T", [](RunConfig& c, const std::string& k, const std::string& v) { c.orbit_T = to_double(k, v); }},
      {"orbit.output_step",
       [](RunConfig& c, const std::string& k, const std::string& v) { c.orbit_output_step = to_double(k, v); }},
      {"orbit.sample",
       [](RunConfig& c, const std::string& k, const std::string& v) { c.orbit_sample = to_uint(k, v); }},
  };
  return table;
}

struct SystemDefaults {
  std::size_t samples;
  std::vector<double> eps, T;
  double h_sep, align_time, max_step, nh_T;
  std::size_t nh_samples;
};

SystemDefaults defaults_for(const std::string& system) {
  if (system == "toy") return {2500, {0.4, 0.2, 0.1}, {2, 4, 6, 8}, 0.5, 20.0, 0.1, 20.0, 9};
  // The suspension has unit return time, so its orbits are sampled once per
  // gluing; its samples are cheap but many are needed to resolve entropy.
  if (system == "cat") return {400000, {0.3, 0.2, 0.15}, {1, 2, 3, 4, 5}, 1.0, 6.0, 1.0, 30.0, 3};
  return {2000, {0.2, 0.1, 0.05}, {20, 40, 60, 80, 100, 120}, 0.5, 20.0, 0.1, 200.0, 50};
}

}  // namespace

std::vector<std::pair<std::string, std::string>> parse_config_text(const std::string& text) {
  std::vector<std::pair<std::string, std::string>> out;
  std::stringstream ss(text);
  std::string line;
  int number = 0;
  while (std::getline(ss, line)) {
    ++number;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw InvalidParameters("config line " + std::to_string(number) + ": expected key = value");
    const std::string key = trim(line.substr(0, eq)), value = trim(line.substr(eq + 1));
    if (key.empty() || value.empty())
      throw InvalidParameters("config line " + std::to_string(number) + ": empty key or value");
    out.emplace_back(key, value);
  }
  return out;
}

void apply_setting(RunConfig& config, const std::string& key, const std::string& value) {
  const auto& table = setters();
  const auto it = table.find(key);
  if (it == table.end()) throw InvalidParameters("unknown config key '" + key + "'");
  it->second(config, key, value);
}

RunConfig load_config_file(const std::string& path, RunConfig base) {
  std::ifstream in(path);
  if (!in) throw InvalidParameters("cannot read config file '" + path + "'");
  std::stringstream buf;
  buf << in.rdbuf();
  for (const auto& [k, v] : parse_config_text(buf.str())) apply_setting(base, k, v);
  return base;
}

RunConfig resolve(const RunConfig& config) {
  RunConfig c = config;
  static const std::vector<std::string> systems = {"toy", "schwarzschild", "kerr", "cat"};
  if (std::find(systems.begin(), systems.end(), c.system) == systems.end())
    throw InvalidParameters("unknown system '" + c.system + "' (toy, schwarzschild, kerr, cat)");
  if (c.system == "schwarzschild" && c.spin != 0.0)
    throw InvalidParameters("schwarzschild requires spin = 0 (use --system kerr)");

  const auto d = defaults_for(c.system);
  if (!c.samples) c.samples = d.samples;
  if (!c.eps) c.eps = d.eps;
  if (!c.T) c.T = d.T;
  if (!c.h_sep) c.h_sep = d.h_sep;
  if (!c.align_time) c.align_time = d.align_time;
  if (!c.max_step) c.max_step = d.max_step;
  if (!c.nh_T) c.nh_T = d.nh_T;
  if (!c.nh_samples) c.nh_samples = d.nh_samples;

  if (*c.samples == 0) throw InvalidParameters("sampling.count must be positive");
  if (*c.nh_samples == 0) throw InvalidParameters("nh.samples must be positive");
  if (c.r_cap < 1) throw InvalidParameters("nh.r_cap must be at least 1");
  if (!(*c.nh_T > 0.0)) throw InvalidParameters("nh.T must be positive");
  if (!(c.orbit_T >= 0.0)) throw InvalidParameters("orbit.T must be nonnegative");
  if (!(c.orbit_output_step >= 0.0)) throw InvalidParameters("orbit.output_step must be nonnegative");
  if (c.phi_phases < 1) throw InvalidParameters("sampling.phi_phases must be at least 1");
  if (!(c.axis_sin_min > 0.0 && c.axis_sin_min < 1.0))
    throw InvalidParameters("sampling.axis_sin_min must lie in (0, 1)");
  integrator_config(c).validate();
  pressure_config(c).validate();
  if (is_geodesic(c)) {
    (void)spacetime_params(c);
  } else if (c.system == "toy" && !(c.toy_nu > 0.0)) {
    throw InvalidParameters("toy.nu must be positive");
  }
  return c;
}

std::string to_text(const RunConfig& c) {
  std::ostringstream os;
  auto put = [&](const char* k, const std::string& v) { os << k << " = " << v << '\n'; };
  auto num = [](double v) { return detail::fmt_double(v); };
  put("run.system", c.system);
  put("spacetime.mass", num(c.mass));
  put("spacetime.spin", num(c.spin));
  put("spacetime.lambda", num(c.lambda));
  put("toy.nu", num(c.toy_nu));
  put("toy.omega1", num(c.toy_omega1));
  put("toy.omega2", num(c.toy_omega2));
  put("integrator.rtol", num(c.rel_tol));
  put("integrator.atol", num(c.abs_tol));
  put("integrator.max_step", num(c.max_step.value_or(0.1)));
  put("integrator.renorm_interval", num(c.renorm_interval));
  put("integrator.project", c.project ? "true" : "false");
  put("escape.horizon_margin", num(c.horizon_margin));
  put("escape.outer_radius", num(c.outer_radius));
  put("sampling.count", std::to_string(c.samples.value_or(0)));
  put("sampling.seed", std::to_string(c.seed));
  put("sampling.axis_sin_min", num(c.axis_sin_min));
  put("sampling.phi_phases", std::to_string(c.phi_phases));
  put("pressure.eps", list_text(c.eps.value_or(std::vector<double>{})));
  put("pressure.T", list_text(c.T.value_or(std::vector<double>{})));
  put("pressure.s", list_text(c.s));
  put("pressure.h_sep", num(c.h_sep.value_or(0.0)));
  put("pressure.distance_scale", num(c.distance_scale));
  put("pressure.align_time", num(c.align_time.value_or(0.0)));
  put("nh.T", num(c.nh_T.value_or(0.0)));
  put("nh.r_cap", std::to_string(c.r_cap));
  put("nh.samples", std::to_string(c.nh_samples.value_or(0)));
  put("orbit.T", num(c.orbit_T));
  put("orbit.output_step", num(c.orbit_output_step));
  put("orbit.sample", std::to_string(c.orbit_sample));
  return os.str();
}

std::string run_stamp(const RunConfig& resolved) {
  // 64-bit FNV-1a
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char ch : to_text(resolved)) {
    h ^= ch;
    h *= 1099511628211ull;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

bool is_geodesic(const RunConfig& c) { return c.system == "schwarzschild" || c.system == "kerr"; }

SpacetimeParams spacetime_params(const RunConfig& c) { return SpacetimeParams(c.mass, c.spin, c.lambda); }

IntegratorConfig integrator_config(const RunConfig& c) {
  IntegratorConfig ic;
  ic.rel_tol = c.rel_tol;
  ic.abs_tol = c.abs_tol;
  ic.max_step = c.max_step.value_or(0.1);
  ic.renorm_interval = c.renorm_interval;
  ic.project = c.project;
  return ic;
}

PressureConfig pressure_config(const RunConfig& c) {
  PressureConfig pc;
  pc.eps_grid = c.eps.value_or(pc.eps_grid);
  pc.T_grid = c.T.value_or(pc.T_grid);
  pc.s_values = c.s;
  pc.h_sep = c.h_sep.value_or(pc.h_sep);
  pc.distance_scale = c.distance_scale;
  pc.integrator = integrator_config(c);
  pc.jacobian.align_time = c.align_time.value_or(pc.jacobian.align_time);
  pc.jacobian.seed = c.seed;
  pc.workers = c.workers;
  return pc;
}

FlowSystem make_system(const RunConfig& c) {
  if (c.system == "toy") return make_toy(c.toy_nu, c.toy_omega1, c.toy_omega2);
  if (c.system == "cat") return make_cat_suspension();
  KerrFlowOptions opt;
  opt.horizon_margin = c.horizon_margin;
  opt.outer_radius = c.outer_radius;
  opt.sampling.axis_sin_min = c.axis_sin_min;
  opt.sampling.phi_phases = c.phi_phases;
  return make_kerr_system(spacetime_params(c), opt);
}

SampleSet make_samples(const RunConfig& c, const FlowSystem& system, std::size_t count) {
  SampleSet out;
  if (is_geodesic(c)) {
    SamplingOptions opt;
    opt.axis_sin_min = c.axis_sin_min;
    opt.phi_phases = c.phi_phases;
    for (const auto& s : sample_trapped_set(spacetime_params(c), count, c.seed, opt)) {
      out.states.push_back(s.point.to_state());
      out.r_sphere.push_back(s.r_sphere);
    }
  } else {
    out.states = system.trapped_sampler(count, c.seed);
  }
  return out;
}

}  // namespace tp
