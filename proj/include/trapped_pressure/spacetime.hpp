#pragma once

// Kerr(-de Sitter) geometry in Boyer-Lindquist coordinates: horizon
// structure, the dual metric function G(z, zeta) = |zeta|^2_{g^-1}, and the
// Hamiltonian vector field that generates the null geodesic flow.
//
// Geometric units (G = c = 1). Phase-space ordering throughout is
// (t, r, theta, phi, p_t, p_r, p_theta, p_phi).

#include <Eigen/Dense>

namespace tp {

using Vector8d = Eigen::Matrix<double, 8, 1>;
using Matrix8d = Eigen::Matrix<double, 8, 8>;

namespace idx {
inline constexpr int t = 0, r = 1, theta = 2, phi = 3;
inline constexpr int p_t = 4, p_r = 5, p_theta = 6, p_phi = 7;
}  // namespace idx

/// Roots of Delta(r), sorted. When Lambda = 0 the outer pair sits at -inf and
/// +inf (the cosmological horizon is at infinity).
struct HorizonRoots {
  double r_minus;
  double r_cauchy;
  double r_event;
  double r_cosmo;
};

/// Black-hole parameters. Construction enforces |spin| < mass, Lambda >= 0,
/// and (for Lambda > 0) four distinct real roots of Delta.
class SpacetimeParams {
 public:
  SpacetimeParams(double mass, double spin, double lambda);

  double mass() const { return mass_; }
  double spin() const { return spin_; }
  double lambda() const { return lambda_; }
  /// 1 + Lambda a^2 / 3
  double delta0() const { return 1.0 + lambda_ * spin_ * spin_ / 3.0; }
  const HorizonRoots& horizons() const { return roots_; }

 private:
  double mass_;
  double spin_;
  double lambda_;
  HorizonRoots roots_;
};

struct PhasePoint {
  double t = 0.0, r = 0.0, theta = 0.0, phi = 0.0;
  double p_t = 0.0, p_r = 0.0, p_theta = 0.0, p_phi = 0.0;

  Vector8d to_state() const;
  static PhasePoint from_state(const Eigen::Ref<const Eigen::VectorXd>& s);
};

/// E = -p_t, L_z = p_phi, Carter constant Q, and the value of G.
struct ConservedSet {
  double energy;
  double angular_momentum;
  double carter;
  double hamiltonian;
};

double delta(const SpacetimeParams& params, double r);
double delta_theta(const SpacetimeParams& params, double theta);

/// Computes the sorted real roots of Delta. Throws InvalidParameters when the
/// admissible root structure is absent.
HorizonRoots compute_horizon_roots(double mass, double spin, double lambda);
HorizonRoots horizon_roots(const SpacetimeParams& params);

/// Throws ChartError when sin(theta) = 0, Delta(r) <= 0, or r lies outside
/// (r_event, r_cosmo).
void check_chart(const SpacetimeParams& params, const PhasePoint& point);

/// Covariant metric components from the line element.
Eigen::Matrix4d metric(const SpacetimeParams& params, const PhasePoint& point);
/// Contravariant components g^{mu nu}, assembled in closed form.
Eigen::Matrix4d inverse_metric(const SpacetimeParams& params, const PhasePoint& point);

double dual_metric_G(const SpacetimeParams& params, const PhasePoint& point);

/// Hamilton vector field of H = G/2, i.e. (dx/ds, dp/ds) with s the affine
/// parameter for which p_mu = g_{mu nu} dx^nu/ds.
Vector8d hamiltonian_field(const SpacetimeParams& params, const PhasePoint& point);
/// Derivative of hamiltonian_field with respect to the phase-space state.
Matrix8d hamiltonian_jacobian(const SpacetimeParams& params, const PhasePoint& point);

/// Unchecked variants for inner loops; outside the chart they return
/// non-finite values instead of throwing.
Vector8d hamiltonian_field_unchecked(const SpacetimeParams& params, const Vector8d& state);
Matrix8d hamiltonian_jacobian_unchecked(const SpacetimeParams& params, const Vector8d& state);
double dual_metric_G_unchecked(const SpacetimeParams& params, const Vector8d& state);

ConservedSet conserved(const SpacetimeParams& params, const PhasePoint& point);
ConservedSet conserved_unchecked(const SpacetimeParams& params, const Vector8d& state);

/// Polar separation constant
///   K = Delta_theta p_theta^2 + Delta_0^2 (a sin^2 theta p_t + p_phi)^2 / (Delta_theta sin^2 theta),
/// so that rho^2 G = Delta p_r^2 - Delta_0^2 ((r^2+a^2) E - a L)^2 / Delta + K.
double polar_constant(const SpacetimeParams& params, double theta, double p_t, double p_theta,
                      double p_phi);

/// Radial potential R(r) = Delta_0^2 ((r^2+a^2) E - a L)^2 - Delta(r) K.
/// Null geodesics satisfy Delta^2 p_r^2 = R(r).
double radial_potential(const SpacetimeParams& params, double r, double E, double L, double K);
double radial_potential_dr(const SpacetimeParams& params, double r, double E, double L, double K);
double radial_potential_drr(const SpacetimeParams& params, double r, double E, double L, double K);

}  // namespace tp
