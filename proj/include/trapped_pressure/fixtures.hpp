#pragma once

// Flows with exactly known pressure.

#include "trapped_pressure/flow.hpp"

namespace tp {

/// dx/ds = nu x, dy/ds = -nu y, dtheta_i/ds = omega_i on R^2 x T^2.
/// Gamma = {x = y = 0} x T^2. Escapes when |x| + |y| > 1.
FlowSystem make_toy(double nu, double omega1 = 1.0, double omega2 = 1.4142135623730951);

/// Suspension of the cat map A = [[2, 1], [1, 1]] under the unit roof, on
/// T^2 x [0, 1) with (z, 1) ~ (A z, 0). State (x, y, u). The whole space is
/// trapped; it is hyperbolic but declares no normal splitting.
FlowSystem make_cat_suspension();

/// log((3 + sqrt 5) / 2)
inline constexpr double cat_entropy = 0.9624236501192069;

/// -s nu for the toy flow, (1 - s) log((3 + sqrt 5)/2) for the suspension.
/// Throws InvalidParameters for any other system.
double analytic_pressure(const FlowSystem& fixture, double s);

}  // namespace tp
