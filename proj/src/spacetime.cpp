#include "trapped_pressure/spacetime.hpp"

#include <cmath>
#include <limits>
#include <sstream>
#include <vector>

#include "trapped_pressure/errors.hpp"
#include "trapped_pressure/polynomial.hpp"

namespace tp {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// rho^2 g^{-1} = M(r, theta) splits into an r-part and a theta-part; the
// closed-form field and Jacobian only need M, dM and d^2M along r and theta.
struct MetricPieces {
  Eigen::Matrix4d M, M_r, M_th, M_rr, M_thth;
  double rho2, u, u_r, u_th, u_rr, u_thth, u_rth;
};

Eigen::Matrix4d sym_outer(const Eigen::Vector4d& x, const Eigen::Vector4d& y) {
  return x * y.transpose() + y * x.transpose();
}

MetricPieces metric_pieces(const SpacetimeParams& p, double r, double th, bool second) {
  const double a = p.spin();
  const double m = p.mass();
  const double lam = p.lambda();
  const double d0 = p.delta0();
  const double d02 = d0 * d0;

  const double sn = std::sin(th);
  const double cs = std::cos(th);
  const double s2 = sn * sn;
  const double sin2 = 2.0 * sn * cs;
  const double cos2 = cs * cs - sn * sn;

  // radial factors
  const double r2a2 = r * r + a * a;
  const double D = r2a2 * (1.0 - lam * r * r / 3.0) - 2.0 * m * r;
  const double Dp = 2.0 * r * (1.0 - lam * r * r / 3.0) - r2a2 * (2.0 * lam * r / 3.0) - 2.0 * m;
  const double Dpp = 2.0 - 4.0 * lam * r * r - 2.0 * lam * a * a / 3.0;
  const double B = -d02 / D;
  const double Bp = d02 * Dp / (D * D);
  const double Bpp = d02 * (Dpp / (D * D) - 2.0 * Dp * Dp / (D * D * D));

  // polar factors
  const double k = lam * a * a / 3.0;
  const double C = 1.0 + k * cs * cs;
  const double Cp = -k * sin2;
  const double Cpp = -2.0 * k * cos2;
  const double S = C * s2;
  const double Sp = Cp * s2 + C * sin2;
  const double Spp = Cpp * s2 + 2.0 * Cp * sin2 + 2.0 * C * cos2;
  const double Dth = d02 / S;
  const double Dthp = -d02 * Sp / (S * S);
  const double Dthpp = d02 * (2.0 * Sp * Sp / (S * S * S) - Spp / (S * S));

  const Eigen::Vector4d e_r(0, 1, 0, 0);
  const Eigen::Vector4d e_th(0, 0, 1, 0);
  const Eigen::Vector4d w(r2a2, 0, 0, a);
  const Eigen::Vector4d w1(2.0 * r, 0, 0, 0);
  const Eigen::Vector4d w2(2.0, 0, 0, 0);
  const Eigen::Vector4d v(a * s2, 0, 0, 1.0);
  const Eigen::Vector4d v1(a * sin2, 0, 0, 0);
  const Eigen::Vector4d v2(2.0 * a * cos2, 0, 0, 0);

  const Eigen::Matrix4d ee_r = e_r * e_r.transpose();
  const Eigen::Matrix4d ee_th = e_th * e_th.transpose();
  const Eigen::Matrix4d ww = w * w.transpose();
  const Eigen::Matrix4d vv = v * v.transpose();

  MetricPieces out;
  out.M = D * ee_r + B * ww + C * ee_th + Dth * vv;
  out.M_r = Dp * ee_r + Bp * ww + B * sym_outer(w1, w);
  out.M_th = Cp * ee_th + Dthp * vv + Dth * sym_outer(v1, v);
  if (second) {
    out.M_rr = Dpp * ee_r + Bpp * ww + 2.0 * Bp * sym_outer(w1, w) +
               B * (sym_outer(w2, w) + 2.0 * w1 * w1.transpose());
    out.M_thth = Cpp * ee_th + Dthpp * vv + 2.0 * Dthp * sym_outer(v1, v) +
                 Dth * (sym_outer(v2, v) + 2.0 * v1 * v1.transpose());
  }

  out.rho2 = r * r + a * a * cs * cs;
  const double rho2_r = 2.0 * r;
  const double rho2_th = -a * a * sin2;
  const double rho2_rr = 2.0;
  const double rho2_thth = -2.0 * a * a * cos2;
  const double u = 1.0 / out.rho2;
  out.u = u;
  out.u_r = -rho2_r * u * u;
  out.u_th = -rho2_th * u * u;
  out.u_rr = -rho2_rr * u * u + 2.0 * rho2_r * rho2_r * u * u * u;
  out.u_thth = -rho2_thth * u * u + 2.0 * rho2_th * rho2_th * u * u * u;
  out.u_rth = 2.0 * rho2_r * rho2_th * u * u * u;
  return out;
}

Eigen::Vector4d momenta(const Vector8d& s) { return s.segment<4>(4); }

Vector8d field_from_pieces(const MetricPieces& P, const Vector8d& s) {
  const Eigen::Vector4d p = momenta(s);
  const Eigen::Vector4d Mp = P.M * p;
  const double q = p.dot(Mp);
  const double q_r = p.dot(P.M_r * p);
  const double q_th = p.dot(P.M_th * p);
  Vector8d f;
  f.head<4>() = P.u * Mp;
  f[idx::p_t] = 0.0;
  f[idx::p_r] = -0.5 * (P.u_r * q + P.u * q_r);
  f[idx::p_theta] = -0.5 * (P.u_th * q + P.u * q_th);
  f[idx::p_phi] = 0.0;
  return f;
}

}  // namespace

// ---------------------------------------------------------------------------

Vector8d PhasePoint::to_state() const {
  Vector8d s;
  s << t, r, theta, phi, p_t, p_r, p_theta, p_phi;
  return s;
}

PhasePoint PhasePoint::from_state(const Eigen::Ref<const Eigen::VectorXd>& s) {
  if (s.size() != 8) throw InvalidParameters("phase point needs 8 components");
  return PhasePoint{s[0], s[1], s[2], s[3], s[4], s[5], s[6], s[7]};
}

double delta(const SpacetimeParams& params, double r) {
  const double a = params.spin();
  return (r * r + a * a) * (1.0 - params.lambda() * r * r / 3.0) - 2.0 * params.mass() * r;
}

double delta_theta(const SpacetimeParams& params, double theta) {
  const double c = std::cos(theta);
  return 1.0 + params.lambda() * params.spin() * params.spin() / 3.0 * c * c;
}

HorizonRoots compute_horizon_roots(double mass, double spin, double lambda) {
  if (!(std::isfinite(mass) && std::isfinite(spin) && std::isfinite(lambda)))
    throw InvalidParameters("spacetime parameters must be finite");
  if (!(mass > 0.0)) throw InvalidParameters("mass must be positive");
  if (lambda < 0.0) throw InvalidParameters("cosmological constant must be nonnegative (Lambda >= 0)");
  if (!(std::abs(spin) < mass))
    throw InvalidParameters("subextremality violated: require |spin| < mass");

  const double a2 = spin * spin;
  if (lambda == 0.0) {
    const double disc = std::sqrt(mass * mass - a2);
    return {-kInf, mass - disc, mass + disc, kInf};
  }

  // Delta(r) = a^2 - 2 m r + (1 - Lambda a^2/3) r^2 - (Lambda/3) r^4
  const std::vector<double> c{a2, -2.0 * mass, 1.0 - lambda * a2 / 3.0, 0.0, -lambda / 3.0};
  auto roots = real_roots(c);
  if (roots.size() != 4) {
    std::ostringstream msg;
    msg << "Delta(r) has " << roots.size()
        << " distinct real roots; four are required for Lambda > 0 (parameters outside the "
           "admissible Kerr-de Sitter family)";
    throw InvalidParameters(msg.str());
  }
  const auto dc = poly_derivative(c);
  for (double& x : roots) {
    // one polishing Newton step
    const double d = poly_eval(dc, x);
    if (d != 0.0) {
      const double nx = x - poly_eval(c, x) / d;
      if (std::abs(poly_eval(c, nx)) <= std::abs(poly_eval(c, x))) x = nx;
    }
  }
  return {roots[0], roots[1], roots[2], roots[3]};
}

SpacetimeParams::SpacetimeParams(double mass, double spin, double lambda)
    : mass_(mass), spin_(spin), lambda_(lambda), roots_(compute_horizon_roots(mass, spin, lambda)) {}

HorizonRoots horizon_roots(const SpacetimeParams& params) { return params.horizons(); }

void check_chart(const SpacetimeParams& params, const PhasePoint& point) {
  const double sn = std::sin(point.theta);
  if (!std::isfinite(point.r) || !std::isfinite(point.theta) || sn == 0.0)
    throw ChartError("phase point on the symmetry axis (sin theta = 0) or non-finite");
  if (!(delta(params, point.r) > 0.0))
    throw ChartError("phase point outside the domain of outer communication (Delta(r) <= 0)");
  const auto& h = params.horizons();
  if (!(point.r > h.r_event && point.r < h.r_cosmo))
    throw ChartError("phase point radius outside (r_event, r_cosmo)");
}

Eigen::Matrix4d metric(const SpacetimeParams& params, const PhasePoint& point) {
  check_chart(params, point);
  const double a = params.spin();
  const double r = point.r;
  const double sn = std::sin(point.theta);
  const double cs = std::cos(point.theta);
  const double s2 = sn * sn;
  const double rho2 = r * r + a * a * cs * cs;
  const double D = delta(params, r);
  const double Dth = delta_theta(params, point.theta);
  const double d02 = params.delta0() * params.delta0();
  const double r2a2 = r * r + a * a;

  // alpha (a dt - (r^2+a^2) dphi)^2 - beta (dt - a sin^2 dphi)^2
  const double alpha = Dth * s2 / (d02 * rho2);
  const double beta = D / (d02 * rho2);

  Eigen::Matrix4d g = Eigen::Matrix4d::Zero();
  g(0, 0) = alpha * a * a - beta;
  g(0, 3) = g(3, 0) = -alpha * a * r2a2 + beta * a * s2;
  g(3, 3) = alpha * r2a2 * r2a2 - beta * a * a * s2 * s2;
  g(1, 1) = rho2 / D;
  g(2, 2) = rho2 / Dth;
  return g;
}

Eigen::Matrix4d inverse_metric(const SpacetimeParams& params, const PhasePoint& point) {
  check_chart(params, point);
  const auto P = metric_pieces(params, point.r, point.theta, false);
  return P.u * P.M;
}

double dual_metric_G_unchecked(const SpacetimeParams& params, const Vector8d& s) {
  const auto P = metric_pieces(params, s[idx::r], s[idx::theta], false);
  const Eigen::Vector4d p = momenta(s);
  return P.u * p.dot(P.M * p);
}

double dual_metric_G(const SpacetimeParams& params, const PhasePoint& point) {
  check_chart(params, point);
  return dual_metric_G_unchecked(params, point.to_state());
}

Vector8d hamiltonian_field_unchecked(const SpacetimeParams& params, const Vector8d& s) {
  return field_from_pieces(metric_pieces(params, s[idx::r], s[idx::theta], false), s);
}

Vector8d hamiltonian_field(const SpacetimeParams& params, const PhasePoint& point) {
  check_chart(params, point);
  return hamiltonian_field_unchecked(params, point.to_state());
}

Matrix8d hamiltonian_jacobian_unchecked(const SpacetimeParams& params, const Vector8d& s) {
  const auto P = metric_pieces(params, s[idx::r], s[idx::theta], true);
  const Eigen::Vector4d p = momenta(s);
  const Eigen::Vector4d Mp = P.M * p;
  const Eigen::Vector4d Mrp = P.M_r * p;
  const Eigen::Vector4d Mthp = P.M_th * p;
  const double q = p.dot(Mp);
  const double q_r = p.dot(Mrp);
  const double q_th = p.dot(Mthp);
  const double q_rr = p.dot(P.M_rr * p);
  const double q_thth = p.dot(P.M_thth * p);

  Matrix8d J = Matrix8d::Zero();
  // dx/ds = u M p
  J.block<4, 4>(0, 4) = P.u * P.M;
  J.block<4, 1>(0, idx::r) = P.u_r * Mp + P.u * Mrp;
  J.block<4, 1>(0, idx::theta) = P.u_th * Mp + P.u * Mthp;
  // dp_j/ds = -(1/2) d_j (u q)
  J.block<1, 4>(idx::p_r, 4) = -(P.u_r * Mp + P.u * Mrp).transpose();
  J.block<1, 4>(idx::p_theta, 4) = -(P.u_th * Mp + P.u * Mthp).transpose();
  J(idx::p_r, idx::r) = -0.5 * (P.u_rr * q + 2.0 * P.u_r * q_r + P.u * q_rr);
  J(idx::p_theta, idx::theta) = -0.5 * (P.u_thth * q + 2.0 * P.u_th * q_th + P.u * q_thth);
  const double cross = -0.5 * (P.u_rth * q + P.u_r * q_th + P.u_th * q_r);
  J(idx::p_r, idx::theta) = cross;
  J(idx::p_theta, idx::r) = cross;
  return J;
}

Matrix8d hamiltonian_jacobian(const SpacetimeParams& params, const PhasePoint& point) {
  check_chart(params, point);
  return hamiltonian_jacobian_unchecked(params, point.to_state());
}

double polar_constant(const SpacetimeParams& params, double theta, double p_t, double p_theta,
                      double p_phi) {
  const double a = params.spin();
  const double sn = std::sin(theta);
  const double s2 = sn * sn;
  const double Dth = delta_theta(params, theta);
  const double d0 = params.delta0();
  const double wth = a * s2 * p_t + p_phi;
  return Dth * p_theta * p_theta + d0 * d0 * wth * wth / (Dth * s2);
}

ConservedSet conserved_unchecked(const SpacetimeParams& params, const Vector8d& s) {
  const double E = -s[idx::p_t];
  const double L = s[idx::p_phi];
  const double K = polar_constant(params, s[idx::theta], s[idx::p_t], s[idx::p_theta], s[idx::p_phi]);
  const double d0 = params.delta0();
  const double x = L - params.spin() * E;
  return {E, L, K - d0 * d0 * x * x, dual_metric_G_unchecked(params, s)};
}

ConservedSet conserved(const SpacetimeParams& params, const PhasePoint& point) {
  check_chart(params, point);
  return conserved_unchecked(params, point.to_state());
}

double radial_potential(const SpacetimeParams& params, double r, double E, double L, double K) {
  const double a = params.spin();
  const double d0 = params.delta0();
  const double W = (r * r + a * a) * E - a * L;
  return d0 * d0 * W * W - delta(params, r) * K;
}

double radial_potential_dr(const SpacetimeParams& params, double r, double E, double L, double K) {
  const double a = params.spin();
  const double lam = params.lambda();
  const double d0 = params.delta0();
  const double W = (r * r + a * a) * E - a * L;
  const double Dp =
      2.0 * r * (1.0 - lam * r * r / 3.0) - (r * r + a * a) * (2.0 * lam * r / 3.0) - 2.0 * params.mass();
  return d0 * d0 * 4.0 * r * E * W - Dp * K;
}

double radial_potential_drr(const SpacetimeParams& params, double r, double E, double L, double K) {
  const double a = params.spin();
  const double lam = params.lambda();
  const double d0 = params.delta0();
  const double W = (r * r + a * a) * E - a * L;
  const double Dpp = 2.0 - 4.0 * lam * r * r - 2.0 * lam * a * a / 3.0;
  return d0 * d0 * (8.0 * r * r * E * E + 4.0 * E * W) - Dpp * K;
}

}  // namespace tp
