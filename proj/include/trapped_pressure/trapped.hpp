#pragma once

// The trapped set of the Kerr(-de Sitter) null geodesic flow: spherical
// photon orbits, the photon region, sampling on the section {G = 0, E = 1},
// and the finite-horizon trappedness test.

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <vector>

#include "trapped_pressure/flow.hpp"
#include "trapped_pressure/spacetime.hpp"

namespace tp {

/// Constants of the spherical photon orbit at radius r_sphere, for E = 1.
/// phi_impact = L_z / E, eta = Q / E^2, polar = the separation constant K
/// (K = eta + Phi^2 in Schwarzschild).
struct PhotonOrbitParams {
  double r_sphere;
  double phi_impact;
  double eta;
  double polar;
};

struct PhotonRegion {
  double r1;
  double r2;
};

struct TrappedSample {
  PhasePoint point;
  double r_sphere;
  double theta_phase;  // position across the latitude band, in [0, 1]
  int p_theta_sign;
  double phi;
  double t;
};

struct SamplingOptions {
  /// Orbits whose turning latitude comes closer to the axis than
  /// sin(theta) = axis_sin_min are skipped.
  double axis_sin_min = 0.05;
  int phi_phases = 4;
};

struct KerrFlowOptions {
  double horizon_margin = 0.1;
  /// Outer escape radius in units of the mass (used when it is inside the
  /// cosmological horizon).
  double outer_radius = 50.0;
  /// States within this distance of a spherical orbit (in r and p_r) are
  /// snapped back onto it.
  double projection_tol = 1e-6;
  SamplingOptions sampling;
};

/// Closed forms from R(r) = R'(r) = 0 with E = 1:
///   W = 4 r Delta / Delta',  L = (r^2 + a^2 - W) / a,
///   K = 16 r^2 Delta Delta_0^2 / Delta'^2,  eta = K - Delta_0^2 (L - a)^2.
/// For a = 0 only r = 3m is admissible and Phi is free; the returned Phi is 0.
/// Throws InvalidParameters outside the photon region.
PhotonOrbitParams spherical_orbit_constants(const SpacetimeParams& params, double r);

/// Radii where eta(r) = 0 (equatorial circular photon orbits).
PhotonRegion photon_region_bounds(const SpacetimeParams& params);

/// sin of the turning latitude of the orbit with the given constants
/// (1 for equatorial orbits, 0 if the orbit crosses the axis).
double turning_sin_theta(const SpacetimeParams& params, const PhotonOrbitParams& orbit);

/// Deterministic low-discrepancy sample of the trapped set on {G = 0, E = 1}.
/// Orbits too close to the axis are skipped; the sequence continues until n
/// samples are accepted.
std::vector<TrappedSample> sample_trapped_set(const SpacetimeParams& params, std::size_t n, std::uint64_t seed,
                                              const SamplingOptions& options = {});

void write_samples_csv(std::ostream& os, const std::vector<TrappedSample>& samples);

/// The geodesic flow as a FlowSystem: Euclidean distance in
/// (r, theta, phi mod 2 pi, p_r, p_theta, p_phi), escape outside
/// (r_event + delta, min(r_cosmo - delta, outer_radius m)), projection onto
/// spherical orbits, and the unstable norm |(dr, dp_r)|.
FlowSystem make_kerr_system(const SpacetimeParams& params, const KerrFlowOptions& options = {});

/// Membership in Gamma_- (no forward escape), Gamma_+ (no backward escape)
/// and Gamma, decided on |s| <= T_max.
struct TrappedResult {
  bool gamma_minus;
  bool gamma_plus;
  bool gamma;
  std::optional<double> forward_escape_time;
  std::optional<double> backward_escape_time;
  bool indeterminate = false;  // an integration stopped on step-size underflow
};

TrappedResult is_trapped(const FlowSystem& system, const Vec& state, double T_max, const IntegratorConfig& config);

/// Same, with the Kerr escape region built from the margin delta.
TrappedResult is_trapped(const SpacetimeParams& params, const Vec& state, double T_max, double delta,
                         const IntegratorConfig& config);

}  // namespace tp
