#pragma once

#include <cmath>
#include <limits>
#include <span>
#include <utility>
#include <vector>

namespace tp {

/// Coefficients in ascending order: c[0] + c[1] x + c[2] x^2 + ...
double poly_eval(std::span<const double> coeffs, double x);
std::vector<double> poly_derivative(std::span<const double> coeffs);

/// All distinct real roots, sorted ascending.
///
/// Roots of the derivative split the line into monotone pieces; each piece
/// holding a sign change is refined by Newton steps safeguarded with
/// bisection. Recursion bottoms out at degree one. Double roots (touching
/// zeros) are reported once when the value at the critical point is within
/// `touch_tol` of zero.
std::vector<double> real_roots(std::span<const double> coeffs, double touch_tol = 0.0);

/// Safeguarded Newton/bisection on a bracket with f(lo) and f(hi) of
/// opposite signs (or one of them zero).
template <class F, class DF>
double bracketed_newton(F&& f, DF&& df, double lo, double hi, int max_iter = 200) {
  double flo = f(lo);
  double fhi = f(hi);
  if (flo == 0.0) return lo;
  if (fhi == 0.0) return hi;
  if (flo > 0.0) {
    std::swap(lo, hi);
    std::swap(flo, fhi);
  }
  // now f(lo) < 0 < f(hi); lo may exceed hi
  double x = 0.5 * (lo + hi);
  for (int i = 0; i < max_iter; ++i) {
    const double fx = f(x);
    if (fx == 0.0) return x;
    if (fx < 0.0)
      lo = x;
    else
      hi = x;
    const double d = df(x);
    double next = d != 0.0 ? x - fx / d : 0.5 * (lo + hi);
    const double a = lo < hi ? lo : hi;
    const double b = lo < hi ? hi : lo;
    if (!(next > a && next < b)) next = 0.5 * (lo + hi);
    if (next == x || (b - a) <= 4.0 * std::numeric_limits<double>::epsilon() * (1.0 + std::abs(x)))
      return next;
    x = next;
  }
  return x;
}

}  // namespace tp
