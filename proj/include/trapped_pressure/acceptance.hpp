#pragma once

// End-to-end acceptance checks: fixtures with exact answers, closed-form
// oracles and property checks, one pass/fail line each.

#include <functional>
#include <string>
#include <vector>

#include "trapped_pressure/flow.hpp"

namespace tp {

struct CriterionResult {
  int id = 0;
  std::string name;
  bool pass = false;
  std::string detail;
  double seconds = 0.0;
  double budget_seconds = 0.0;
};

struct AcceptanceOptions {
  std::size_t workers = 0;
  std::vector<int> only;  // empty runs every criterion
  std::function<void(const CriterionResult&)> on_result;
};

/// Integrator settings for the checks: the defaults, overridden by
/// TRAPPED_PRESSURE_RTOL and TRAPPED_PRESSURE_ATOL when set.
IntegratorConfig acceptance_integrator();

/// "PASS  3  unstable rate oracle  ...  (1.2 s)"
std::string format_result(const CriterionResult& r);

std::vector<CriterionResult> run_acceptance(const AcceptanceOptions& options);

}  // namespace tp
