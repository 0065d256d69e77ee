#pragma once

// The work behind each CLI subcommand, returning documents instead of
// writing them so the acceptance suite can drive the same code.

#include <string>
#include <vector>

#include <json.hpp>

#include "trapped_pressure/config.hpp"

namespace tp {

using Json = nlohmann::ordered_json;

/// Finite values as numbers; inf, -inf and nan as strings.
Json json_number(double v);

/// The resolved config as {key: value-text} plus its run stamp.
Json provenance(const RunConfig& resolved);

Json horizons_document(const RunConfig& resolved);

/// Bounds of the photon region and (r, Phi, eta) rows at `rows` evenly spaced
/// radii across it plus any extra radii. Spin 0 gives the single row r = 3m.
Json photon_region_document(const RunConfig& resolved, int rows, const std::vector<double>& extra_radii);

/// Trajectory of sample orbit_sample, as CSV.
std::string orbit_csv(const RunConfig& resolved);

/// Lyapunov spectrum of the first nh_samples samples at horizon nh_T, as CSV.
std::string lyapunov_csv(const RunConfig& resolved);

Json nh_report_json(const NHReport& report);
Json nh_document(const RunConfig& resolved);

struct PressureRun {
  Json document;
  std::string csv;  // one summary row per s
  std::vector<std::string> warnings;
};

/// Sampling, integration, Jacobians, packing and fits for every s. With
/// `variational` it also certifies normal hyperbolicity and adds the
/// variational estimate, throwing NotNormallyHyperbolic if the check fails.
PressureRun run_pressure(const RunConfig& resolved, bool variational);

}  // namespace tp
