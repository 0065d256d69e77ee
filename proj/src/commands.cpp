#include "trapped_pressure/commands.hpp"

#include <cmath>
#include <sstream>

#include "format.hpp"
#include "trapped_pressure/errors.hpp"
#include "trapped_pressure/parallel.hpp"

namespace tp {

namespace {

Json number_list(const std::vector<double>& v) {
  Json out = Json::array();
  for (double x : v) out.push_back(json_number(x));
  return out;
}

std::vector<Vec> first_samples(const RunConfig& c, const FlowSystem& sys, std::size_t n, std::vector<double>* radii) {
  // grid samplers may round the count down, so ask for more until n arrive
  std::size_t ask = n;
  for (;;) {
    auto set = make_samples(c, sys, ask);
    if (set.states.size() >= n) {
      set.states.resize(n);
      if (radii) {
        set.r_sphere.resize(std::min(set.r_sphere.size(), n));
        *radii = set.r_sphere;
      }
      return set.states;
    }
    ask = 2 * ask + 4;
  }
}

}  // namespace

Json json_number(double v) {
  if (std::isfinite(v)) return v;
  return detail::fmt_double(v);
}

Json provenance(const RunConfig& resolved) {
  Json cfg = Json::object();
  for (const auto& [k, v] : parse_config_text(to_text(resolved))) cfg[k] = v;
  Json out;
  out["run_stamp"] = run_stamp(resolved);
  out["config"] = cfg;
  return out;
}

Json horizons_document(const RunConfig& c) {
  const auto roots = spacetime_params(c).horizons();
  Json out;
  out["mass"] = c.mass;
  out["spin"] = c.spin;
  out["lambda"] = c.lambda;
  out["r_minus"] = json_number(roots.r_minus);
  out["r_cauchy"] = json_number(roots.r_cauchy);
  out["r_event"] = json_number(roots.r_event);
  out["r_cosmo"] = json_number(roots.r_cosmo);
  return out;
}

Json photon_region_document(const RunConfig& c, int rows, const std::vector<double>& extra_radii) {
  if (rows < 1) throw InvalidParameters("rows must be at least 1");
  const auto params = spacetime_params(c);
  const auto region = photon_region_bounds(params);
  std::vector<double> radii;
  if (region.r2 - region.r1 < 1e-12 * region.r2) {
    radii.push_back(region.r1);
  } else {
    for (int i = 0; i < rows; ++i)
      radii.push_back(rows == 1 ? 0.5 * (region.r1 + region.r2)
                                : region.r1 + (region.r2 - region.r1) * i / (rows - 1.0));
  }
  radii.insert(radii.end(), extra_radii.begin(), extra_radii.end());
  Json table = Json::array();
  for (double r : radii) {
    const auto orbit = spherical_orbit_constants(params, r);
    Json row;
    row["r"] = r;
    row["Phi"] = orbit.phi_impact;
    row["eta"] = orbit.eta;
    table.push_back(row);
  }
  Json out;
  out["r1"] = region.r1;
  out["r2"] = region.r2;
  out["rows"] = table;
  return out;
}

std::string orbit_csv(const RunConfig& c) {
  const auto sys = make_system(c);
  const auto states = first_samples(c, sys, c.orbit_sample + 1, nullptr);
  const auto traj = integrate(sys, states.back(), c.orbit_T, integrator_config(c), c.orbit_output_step);
  std::ostringstream os;
  write_trajectory_csv(os, sys, traj);
  return os.str();
}

std::string lyapunov_csv(const RunConfig& c) {
  const auto sys = make_system(c);
  std::vector<double> radii;
  const auto states = first_samples(c, sys, *c.nh_samples, &radii);
  const auto ic = integrator_config(c);
  std::vector<Spectrum> spectra(states.size());
  parallel_for(states.size(), c.workers,
               [&](std::size_t i) { spectra[i] = tangent_spectrum(sys, states[i], *c.nh_T, ic); });

  std::ostringstream os;
  os << "sample";
  if (!radii.empty()) os << ",r_sphere";
  for (int i = 0; i < sys.dimension; ++i) os << ",exponent_" << i;
  for (int i = 0; i < sys.dimension; ++i) os << ",half_width_" << i;
  os << ",unstable_rate,stable_rate,mu_max\n";
  for (std::size_t k = 0; k < spectra.size(); ++k) {
    const auto& sp = spectra[k];
    os << k;
    if (!radii.empty()) os << ',' << detail::fmt_double(radii[k]);
    for (double e : sp.exponents) os << ',' << detail::fmt_double(e);
    for (double h : sp.half_width) os << ',' << detail::fmt_double(h);
    os << ',' << detail::fmt_double(sp.unstable_rate) << ',' << detail::fmt_double(sp.stable_rate) << ','
       << detail::fmt_double(sp.mu_max) << '\n';
  }
  return os.str();
}

Json nh_report_json(const NHReport& r) {
  Json out;
  out["system"] = r.system;
  out["samples"] = r.samples;
  out["T"] = r.T;
  out["nu_min"] = json_number(r.nu_min);
  out["nu_s"] = json_number(r.nu_s);
  out["mu_max"] = json_number(r.mu_max);
  out["mu_max_half_width"] = json_number(r.mu_max_half_width);
  out["r_cap"] = r.r_cap;
  out["r_star"] = r.r_star;
  out["degenerate"] = r.degenerate;
  out["splitting_ambiguous"] = r.splitting_ambiguous;
  out["unstable_rates"] = number_list(r.unstable_rates);
  out["tangent_max"] = number_list(r.tangent_max);
  return out;
}

namespace {

NHReport run_nh(const RunConfig& c, const FlowSystem& sys) {
  const auto states = first_samples(c, sys, *c.nh_samples, nullptr);
  return nh_check(sys, states, *c.nh_T, c.r_cap, integrator_config(c), c.workers);
}

}  // namespace

Json nh_document(const RunConfig& c) {
  const auto sys = make_system(c);
  Json out = provenance(c);
  out["nh"] = nh_report_json(run_nh(c, sys));
  return out;
}

PressureRun run_pressure(const RunConfig& c, bool variational) {
  const auto sys = make_system(c);
  const auto pc = pressure_config(c);
  const auto samples = make_samples(c, sys, *c.samples).states;
  const auto prepared = prepare_samples(sys, samples, pc);
  const auto estimates = pressure_separated(sys, prepared, pc);

  PressureRun run;
  Json doc = provenance(c);
  doc["samples_requested"] = *c.samples;
  doc["samples_generated"] = samples.size();
  Json list = Json::array();
  for (const auto& e : estimates) {
    Json j;
    j["s"] = e.s;
    j["P_hat"] = json_number(e.P_hat);
    j["fit_residual"] = json_number(e.fit_residual);
    j["eps_fit_rms"] = json_number(e.eps_fit_rms);
    j["eps_grid"] = number_list(e.eps_grid);
    j["T_grid"] = number_list(e.T_grid);
    j["slopes"] = number_list(e.slopes);
    j["slope_stderr"] = number_list(e.slope_stderr);
    Json counts = Json::array(), logz = Json::array();
    for (Eigen::Index a = 0; a < e.counts.rows(); ++a) {
      Json crow = Json::array(), zrow = Json::array();
      for (Eigen::Index b = 0; b < e.counts.cols(); ++b) {
        crow.push_back(e.counts(a, b));
        zrow.push_back(json_number(std::log(e.Z(a, b))));
      }
      counts.push_back(crow);
      logz.push_back(zrow);
    }
    j["counts"] = counts;
    j["log_Z"] = logz;
    j["samples_used"] = e.samples_used;
    j["samples_dropped"] = e.samples_dropped;
    j["warnings"] = e.warnings;
    for (const auto& w : e.warnings) run.warnings.push_back("s=" + detail::fmt_double(e.s) + ": " + w);
    list.push_back(j);
  }
  doc["separated"] = list;

  std::vector<VariationalEstimate> var;
  if (variational) {
    const auto nh = run_nh(c, sys);
    doc["nh"] = nh_report_json(nh);
    Json vlist = Json::array();
    for (double s : c.s) {
      var.push_back(pressure_variational(nh, s, prepared, pc.T_grid));
      const auto& v = var.back();
      Json j;
      j["s"] = v.s;
      j["P"] = json_number(v.P);
      j["min_rate"] = json_number(v.min_rate);
      j["argmin_sample"] = v.argmin_sample;
      j["T"] = v.T;
      vlist.push_back(j);
    }
    doc["variational"] = vlist;
  }
  run.document = doc;

  std::ostringstream csv;
  csv << "s,P_hat,fit_residual,eps_fit_rms,samples_used,samples_dropped,warnings";
  if (variational) csv << ",P_variational";
  csv << '\n';
  for (std::size_t k = 0; k < estimates.size(); ++k) {
    const auto& e = estimates[k];
    csv << detail::fmt_double(e.s) << ',' << detail::fmt_double(e.P_hat) << ',' << detail::fmt_double(e.fit_residual)
        << ',' << detail::fmt_double(e.eps_fit_rms) << ',' << e.samples_used << ',' << e.samples_dropped << ','
        << e.warnings.size();
    if (variational) csv << ',' << detail::fmt_double(var[k].P);
    csv << '\n';
  }
  run.csv = csv.str();
  return run;
}

}  // namespace tp
