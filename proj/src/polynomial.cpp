#include "trapped_pressure/polynomial.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace tp {

double poly_eval(std::span<const double> coeffs, double x) {
  double acc = 0.0;
  for (auto it = coeffs.rbegin(); it != coeffs.rend(); ++it) acc = acc * x + *it;
  return acc;
}

std::vector<double> poly_derivative(std::span<const double> coeffs) {
  std::vector<double> out;
  for (std::size_t i = 1; i < coeffs.size(); ++i) out.push_back(static_cast<double>(i) * coeffs[i]);
  return out;
}

namespace {

std::vector<double> trimmed(std::span<const double> coeffs) {
  std::vector<double> c(coeffs.begin(), coeffs.end());
  while (!c.empty() && c.back() == 0.0) c.pop_back();
  return c;
}

// Cauchy bound on root magnitudes.
double root_bound(const std::vector<double>& c) {
  const double lead = std::abs(c.back());
  double m = 0.0;
  for (std::size_t i = 0; i + 1 < c.size(); ++i) m = std::max(m, std::abs(c[i]) / lead);
  return 1.0 + m;
}

}  // namespace

std::vector<double> real_roots(std::span<const double> coeffs, double touch_tol) {
  const auto c = trimmed(coeffs);
  if (c.size() < 2) return {};
  if (c.size() == 2) return {-c[0] / c[1]};

  const auto dc = poly_derivative(c);
  const auto crit = real_roots(dc, 0.0);
  const double bound = root_bound(c);

  std::vector<double> knots;
  knots.push_back(-bound);
  for (double x : crit)
    if (x > -bound && x < bound) knots.push_back(x);
  knots.push_back(bound);

  auto f = [&](double x) { return poly_eval(c, x); };
  auto df = [&](double x) { return poly_eval(dc, x); };

  std::vector<double> roots;
  for (std::size_t i = 0; i + 1 < knots.size(); ++i) {
    const double a = knots[i];
    const double b = knots[i + 1];
    const double fa = f(a);
    const double fb = f(b);
    if (fa == 0.0) {
      roots.push_back(a);
      continue;
    }
    if ((fa < 0.0) != (fb < 0.0) && fb != 0.0) roots.push_back(bracketed_newton(f, df, a, b));
  }
  if (f(knots.back()) == 0.0) roots.push_back(knots.back());
  if (touch_tol > 0.0)
    for (double x : crit)
      if (std::abs(f(x)) <= touch_tol) roots.push_back(x);

  std::sort(roots.begin(), roots.end());
  roots.erase(std::unique(roots.begin(), roots.end(),
                          [](double x, double y) { return std::abs(x - y) <= 1e-14 * (1.0 + std::abs(x)); }),
              roots.end());
  return roots;
}

}  // namespace tp
