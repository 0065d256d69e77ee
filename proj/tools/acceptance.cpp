// Runs every acceptance criterion and prints one PASS/FAIL line each.
// Usage: acceptance [criterion ...]

#include <cstdlib>
#include <iostream>
#include <string>

#include "trapped_pressure/acceptance.hpp"

int main(int argc, char** argv) {
  tp::AcceptanceOptions opt;
  for (int i = 1; i < argc; ++i) {
    try {
      opt.only.push_back(std::stoi(argv[i]));
    } catch (const std::exception&) {
      std::cerr << "usage: acceptance [criterion ...]\n";
      return 2;
    }
  }
  opt.on_result = [](const tp::CriterionResult& r) { std::cout << tp::format_result(r) << std::endl; };
  const auto results = tp::run_acceptance(opt);
  int failed = 0;
  for (const auto& r : results) failed += r.pass ? 0 : 1;
  std::cout << results.size() - failed << " of " << results.size() << " criteria passed\n";
  return failed == 0 ? 0 : 1;
}
