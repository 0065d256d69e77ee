// trapped-pressure: command-line front end.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "format.hpp"
#include "trapped_pressure/acceptance.hpp"
#include "trapped_pressure/commands.hpp"
#include "trapped_pressure/config.hpp"
#include "trapped_pressure/errors.hpp"

namespace {

using namespace tp;

enum Exit { ok = 0, invalid = 2, gate = 3, numerical = 4 };

struct Common {
  std::string config_file;
  std::map<std::string, std::string> values;  // by config key
  std::vector<std::pair<std::string, CLI::Option*>> flags;
  std::vector<std::string> sets;
  std::vector<std::string> s_list, eps_list, T_list;
};

void add_common(CLI::App* sub, Common& c) {
  sub->add_option("--config", c.config_file, "Config file of key = value lines")->check(CLI::ExistingFile);
  const std::vector<std::pair<std::string, std::string>> scalar = {
      {"--system", "run.system"},       {"--mass", "spacetime.mass"},    {"--spin", "spacetime.spin"},
      {"--lambda", "spacetime.lambda"}, {"--nu", "toy.nu"},              {"--samples", "sampling.count"},
      {"--seed", "sampling.seed"},      {"--rtol", "integrator.rtol"},   {"--atol", "integrator.atol"},
      {"--out-dir", "run.out_dir"},     {"--workers", "run.workers"},
  };
  for (const auto& [name, key] : scalar) c.flags.emplace_back(key, sub->add_option(name, c.values[key], key));
  sub->add_option("--s", c.s_list, "Exponents s (pressure.s)")->delimiter(',');
  sub->add_option("--eps", c.eps_list, "Separation scales (pressure.eps)")->delimiter(',');
  sub->add_option("--T", c.T_list, "Time horizons (pressure.T)")->delimiter(',');
  sub->add_option("--set", c.sets, "Any config key, as key=value (repeatable)");
}

std::string join(const std::vector<std::string>& v) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) out += (i ? "," : "") + v[i];
  return out;
}

RunConfig build_config(const Common& c) {
  RunConfig cfg;
  if (!c.config_file.empty()) cfg = load_config_file(c.config_file);
  for (const auto& [key, option] : c.flags)
    if (option->count() > 0) apply_setting(cfg, key, c.values.at(key));
  if (!c.s_list.empty()) apply_setting(cfg, "pressure.s", join(c.s_list));
  if (!c.eps_list.empty()) apply_setting(cfg, "pressure.eps", join(c.eps_list));
  if (!c.T_list.empty()) apply_setting(cfg, "pressure.T", join(c.T_list));
  for (const auto& kv : c.sets) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) throw InvalidParameters("--set expects key=value, got '" + kv + "'");
    apply_setting(cfg, kv.substr(0, eq), kv.substr(eq + 1));
  }
  return resolve(cfg);
}

std::filesystem::path output_path(const RunConfig& cfg, const std::string& stem, const std::string& ext) {
  std::filesystem::create_directories(cfg.out_dir);
  return std::filesystem::path(cfg.out_dir) / (stem + "-" + run_stamp(cfg) + ext);
}

void write_file(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InvalidParameters("cannot write '" + path.string() + "'");
  out << text;
}

// CSV with the resolved config as leading '#' lines
std::string with_provenance(const RunConfig& cfg, const std::string& csv) {
  std::string out = "# run_stamp = " + run_stamp(cfg) + "\n";
  std::istringstream in(to_text(cfg));
  for (std::string line; std::getline(in, line);) out += "# " + line + "\n";
  return out + csv;
}

int run(int argc, char** argv) {
  CLI::App app{"Topological pressure and Lyapunov exponents of trapped sets"};
  app.require_subcommand(1);
  Common common;

  auto* horizons = app.add_subcommand("horizons", "Roots of Delta(r) as JSON");
  auto* photon = app.add_subcommand("photon-region", "Photon region bounds and (r, Phi, eta) table as JSON");
  auto* orbit = app.add_subcommand("orbit", "Trajectory CSV of one trapped sample");
  auto* lyapunov = app.add_subcommand("lyapunov", "Lyapunov exponent table (CSV)");
  auto* nh = app.add_subcommand("nh-check", "Normal hyperbolicity report (JSON)");
  auto* pressure = app.add_subcommand("pressure", "Pressure estimates (JSON and CSV summary)");
  auto* validate = app.add_subcommand("validate", "Run the acceptance suite");
  for (auto* sub : {horizons, photon, orbit, lyapunov, nh, pressure, validate}) add_common(sub, common);

  int rows = 9;
  std::vector<double> extra_r;
  photon->add_option("--rows", rows, "Evenly spaced radii across the region")->check(CLI::PositiveNumber);
  photon->add_option("--r", extra_r, "Extra radii")->delimiter(',');
  bool strict = false, variational = false;
  pressure->add_flag("--strict", strict, "Exit 3 when any coverage warning is raised");
  pressure->add_flag("--variational", variational, "Also certify normal hyperbolicity and report the variational estimate");
  bool nh_strict = false;
  nh->add_flag("--strict", nh_strict, "Exit 3 unless r_star = r_cap");
  std::vector<int> only;
  validate->add_option("--only", only, "Criterion numbers to run")->delimiter(',');

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? ok : invalid;
  }

  const RunConfig cfg = build_config(common);

  if (horizons->parsed()) {
    std::cout << horizons_document(cfg).dump(2) << '\n';
  } else if (photon->parsed()) {
    std::cout << photon_region_document(cfg, rows, extra_r).dump(2) << '\n';
  } else if (orbit->parsed()) {
    const auto path = output_path(cfg, "orbit", ".csv");
    write_file(path, with_provenance(cfg, orbit_csv(cfg)));
    std::cout << path.string() << '\n';
  } else if (lyapunov->parsed()) {
    const std::string csv = lyapunov_csv(cfg);
    const auto path = output_path(cfg, "lyapunov", ".csv");
    write_file(path, with_provenance(cfg, csv));
    std::cout << csv << path.string() << '\n';
  } else if (nh->parsed()) {
    const auto doc = nh_document(cfg);
    const auto path = output_path(cfg, "nh", ".json");
    write_file(path, doc.dump(2) + "\n");
    std::cout << doc["nh"].dump(2) << '\n' << path.string() << '\n';
    if (nh_strict && doc["nh"]["r_star"] != doc["nh"]["r_cap"]) {
      std::cerr << "nh-check: r_star below r_cap\n";
      return gate;
    }
  } else if (pressure->parsed()) {
    const auto result = run_pressure(cfg, variational);
    const auto json_path = output_path(cfg, "pressure", ".json");
    const auto csv_path = output_path(cfg, "pressure", ".csv");
    write_file(json_path, result.document.dump(2) + "\n");
    write_file(csv_path, with_provenance(cfg, result.csv));
    std::cout << result.csv << json_path.string() << '\n' << csv_path.string() << '\n';
    for (const auto& w : result.warnings) std::cerr << "warning: " << w << '\n';
    if (strict && !result.warnings.empty()) return gate;
  } else if (validate->parsed()) {
    AcceptanceOptions opt;
    opt.workers = cfg.workers;
    opt.only = only;
    opt.on_result = [](const CriterionResult& r) { std::cout << format_result(r) << std::endl; };
    const auto results = run_acceptance(opt);
    bool all = true;
    for (const auto& r : results) all = all && r.pass;
    std::cout << (all ? "all criteria passed" : "some criteria FAILED") << '\n';
    return all ? ok : gate;
  }
  return ok;
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return run(argc, argv);
  } catch (const tp::InvalidParameters& e) {
    std::cerr << "invalid input: " << e.what() << '\n';
    return invalid;
  } catch (const tp::QualityGateFailure& e) {
    std::cerr << "quality gate: " << e.what() << '\n';
    return gate;
  } catch (const tp::NumericalFailure& e) {
    std::cerr << "numerical failure: " << e.what() << '\n';
    return numerical;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return numerical;
  }
}
