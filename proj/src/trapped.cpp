#include "trapped_pressure/trapped.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <ostream>
#include <random>

#include "format.hpp"
#include "trapped_pressure/errors.hpp"
#include "trapped_pressure/polynomial.hpp"

namespace tp {

namespace {

double delta_dr(const SpacetimeParams& p, double r) {
  const double a2 = p.spin() * p.spin();
  const double lam = p.lambda();
  return 2.0 * r - 4.0 * lam * r * r * r / 3.0 - 2.0 * lam * a2 * r / 3.0 - 2.0 * p.mass();
}

// Orbit constants from the closed forms, without range checks.
PhotonOrbitParams orbit_raw(const SpacetimeParams& p, double r) {
  const double a = p.spin();
  const double d0 = p.delta0();
  const double D = delta(p, r);
  const double Dp = delta_dr(p, r);
  const double W = 4.0 * r * D / Dp;
  const double K = 16.0 * r * r * D * d0 * d0 / (Dp * Dp);
  if (a == 0.0) return {r, 0.0, K, K};
  const double L = (r * r + a * a - W) / a;
  return {r, L, K - d0 * d0 * (L - a) * (L - a), K};
}

// Where Delta' vanishes between the horizons (Lambda > 0); the closed forms
// have a pole there.
double delta_peak(const SpacetimeParams& p) {
  const auto& h = p.horizons();
  if (p.lambda() == 0.0) return std::numeric_limits<double>::infinity();
  return bracketed_newton([&](double r) { return delta_dr(p, r); },
                          [&](double r) {
                            const double lam = p.lambda();
                            return 2.0 - 4.0 * lam * r * r - 2.0 * lam * p.spin() * p.spin() / 3.0;
                          },
                          h.r_event, h.r_cosmo);
}

// K - Delta_0^2 (L - a s^2)^2 / (Delta_theta s^2), i.e. Delta_theta p_theta^2.
double polar_potential(const SpacetimeParams& p, const PhotonOrbitParams& o, double s) {
  const double a = p.spin();
  const double c2 = 1.0 - s * s;
  const double dth = 1.0 + p.lambda() * a * a / 3.0 * c2;
  const double d0 = p.delta0();
  const double w = o.phi_impact - a * s * s;
  return o.polar - d0 * d0 * w * w / (dth * s * s);
}

double photon_sphere_radius(const SpacetimeParams& p) { return 3.0 * p.mass(); }

double frac(double x) { return x - std::floor(x); }

}  // namespace

PhotonRegion photon_region_bounds(const SpacetimeParams& params) {
  if (params.spin() == 0.0) {
    const double r = photon_sphere_radius(params);
    return {r, r};
  }
  const auto& h = params.horizons();
  const double m = params.mass();
  const double lo = h.r_event * (1.0 + 1e-9);
  const double hi = std::min(8.0 * m, delta_peak(params) * (1.0 - 1e-9));
  // eta = (sqrt K - Delta_0 (L - a)) (sqrt K + Delta_0 (L - a)); each factor
  // crosses zero once and transversally, even when the band is very thin.
  auto factor = [&](double r, double sgn) {
    const auto o = orbit_raw(params, r);
    return std::sqrt(o.polar) - sgn * params.delta0() * (o.phi_impact - params.spin());
  };

  constexpr int kScan = 4000;
  std::vector<double> roots;
  for (double sgn : {1.0, -1.0}) {
    auto f = [&](double r) { return factor(r, sgn); };
    double x0 = lo, f0 = f(lo);
    for (int i = 1; i <= kScan; ++i) {
      const double x1 = lo + (hi - lo) * i / kScan;
      const double f1 = f(x1);
      if (std::isfinite(f0) && std::isfinite(f1) && ((f0 < 0.0) != (f1 < 0.0))) {
        double a = x0, b = x1, fa = f0;
        for (int it = 0; it < 200 && b - a > 1e-15 * b; ++it) {
          const double mid = 0.5 * (a + b);
          const double fm = f(mid);
          if ((fm < 0.0) == (fa < 0.0)) {
            a = mid;
            fa = fm;
          } else {
            b = mid;
          }
        }
        roots.push_back(0.5 * (a + b));
        break;
      }
      x0 = x1;
      f0 = f1;
    }
  }
  std::sort(roots.begin(), roots.end());
  if (roots.size() < 2) throw NumericalFailure("photon region bounds not bracketed");
  return {roots.front(), roots.back()};
}

PhotonOrbitParams spherical_orbit_constants(const SpacetimeParams& params, double r) {
  const auto& h = params.horizons();
  if (!(r > h.r_event && r < h.r_cosmo)) throw InvalidParameters("radius outside (r_event, r_cosmo)");
  if (params.spin() == 0.0) {
    const double rs = photon_sphere_radius(params);
    if (std::abs(r - rs) > 1e-9 * params.mass())
      throw InvalidParameters("no spherical photon orbit at this radius (a = 0 admits only r = 3m)");
    return orbit_raw(params, rs);
  }
  if (!(delta_dr(params, r) > 0.0)) throw InvalidParameters("no spherical photon orbit at this radius");
  const auto o = orbit_raw(params, r);
  if (!(o.eta >= -1e-9 * std::max(1.0, o.polar)))
    throw InvalidParameters("no spherical photon orbit at this radius (outside the photon region)");
  return o;
}

double turning_sin_theta(const SpacetimeParams& params, const PhotonOrbitParams& orbit) {
  if (polar_potential(params, orbit, 1.0) <= 0.0) return 1.0;
  double lo = 0.0, hi = 1.0;
  if (polar_potential(params, orbit, 1e-150) >= 0.0) return 0.0;
  for (int i = 0; i < 200 && hi - lo > 1e-16; ++i) {
    const double mid = 0.5 * (lo + hi);
    (polar_potential(params, orbit, mid) >= 0.0 ? hi : lo) = mid;
  }
  return hi;
}

std::vector<TrappedSample> sample_trapped_set(const SpacetimeParams& params, std::size_t n, std::uint64_t seed,
                                              const SamplingOptions& options) {
  if (n == 0) throw InvalidParameters("sample count must be at least 1");
  if (options.phi_phases < 1) throw InvalidParameters("phi_phases must be at least 1");
  const auto region = photon_region_bounds(params);
  const bool schwarzschild = params.spin() == 0.0;
  const PhotonOrbitParams sphere = schwarzschild ? orbit_raw(params, region.r1) : PhotonOrbitParams{};

  // Kronecker sequence with the generalized golden ratio for three
  // dimensions, shifted by a seed-derived offset.
  constexpr double g = 1.2207440846057596;
  const double alpha[3] = {1.0 / g, 1.0 / (g * g), 1.0 / (g * g * g)};
  std::mt19937_64 gen(seed);
  std::uniform_real_distribution<double> uni(0.0, 1.0);
  const double shift[3] = {uni(gen), uni(gen), uni(gen)};

  std::vector<TrappedSample> out;
  out.reserve(n);
  const std::size_t max_attempts = 100 * n + 1000;
  for (std::size_t i = 0; i < max_attempts && out.size() < n; ++i) {
    const double k = static_cast<double>(i + 1);
    const double u1 = frac(shift[0] + k * alpha[0]);
    const double u2 = frac(shift[1] + k * alpha[1]);
    const double u3 = frac(shift[2] + k * alpha[2]);

    PhotonOrbitParams o;
    if (schwarzschild) {
      o = sphere;
      o.phi_impact = std::sqrt(sphere.polar) * (2.0 * u1 - 1.0);
      o.eta = sphere.polar - params.delta0() * params.delta0() * o.phi_impact * o.phi_impact;
    } else {
      o = orbit_raw(params, region.r1 + u1 * (region.r2 - region.r1));
      if (o.eta < 0.0) o.eta = 0.0;
    }
    const double smin = turning_sin_theta(params, o);
    if (smin < options.axis_sin_min) continue;
    const double th_min = std::asin(std::min(1.0, smin));
    const double theta = th_min + u2 * (std::numbers::pi - 2.0 * th_min);
    const double s = std::sin(theta);
    const double pth2 = std::max(0.0, polar_potential(params, o, s)) / delta_theta(params, theta);
    const int sign = u3 < 0.5 ? 1 : -1;
    const std::size_t phase = i % static_cast<std::size_t>(options.phi_phases);
    const double phi = 2.0 * std::numbers::pi * static_cast<double>(phase) / options.phi_phases;

    TrappedSample ts;
    ts.point = PhasePoint{0.0, o.r_sphere, theta, phi, -1.0, 0.0, sign * std::sqrt(pth2), o.phi_impact};
    ts.r_sphere = o.r_sphere;
    ts.theta_phase = u2;
    ts.p_theta_sign = sign;
    ts.phi = phi;
    ts.t = 0.0;
    out.push_back(ts);
  }
  return out;
}

void write_samples_csv(std::ostream& os, const std::vector<TrappedSample>& samples) {
  os << "r_sphere,theta_phase,phi_phase,p_theta_sign,t,r,theta,phi,p_t,p_r,p_theta,p_phi\n";
  for (const auto& s : samples) {
    os << detail::fmt_double(s.r_sphere) << ',' << detail::fmt_double(s.theta_phase) << ','
       << detail::fmt_double(s.phi) << ',' << s.p_theta_sign;
    const Vector8d x = s.point.to_state();
    for (int i = 0; i < 8; ++i) os << ',' << detail::fmt_double(x[i]);
    os << '\n';
  }
}

FlowSystem make_kerr_system(const SpacetimeParams& params, const KerrFlowOptions& options) {
  const auto& h = params.horizons();
  const double r_in = h.r_event + options.horizon_margin;
  const double r_out = std::min(h.r_cosmo - options.horizon_margin, options.outer_radius * params.mass());
  if (!(r_in < r_out)) throw InvalidParameters("escape margins leave no room between the horizons");

  FlowSystem sys;
  sys.name = params.lambda() == 0.0 ? (params.spin() == 0.0 ? "schwarzschild" : "kerr") : "kerr-de-sitter";
  sys.dimension = 8;
  sys.parameters = {{"mass", params.mass()},
                    {"spin", params.spin()},
                    {"lambda", params.lambda()},
                    {"energy", 1.0},
                    {"horizon_margin", options.horizon_margin},
                    {"outer_radius", options.outer_radius}};
  sys.component_names = {"t", "r", "theta", "phi", "p_t", "p_r", "p_theta", "p_phi"};
  sys.unstable_dimension = 1;
  sys.stable_dimension = 1;
  sys.canonical = true;

  sys.vector_field = [params](const Vec& x) -> Vec {
    return hamiltonian_field_unchecked(params, Vector8d(x));
  };
  sys.jacobian = [params](const Vec& x) -> Mat { return hamiltonian_jacobian_unchecked(params, Vector8d(x)); };
  sys.distance = [](const VecRef& x, const VecRef& y) {
    double dphi = std::remainder(x[idx::phi] - y[idx::phi], 2.0 * std::numbers::pi);
    const double d[6] = {x[idx::r] - y[idx::r],           x[idx::theta] - y[idx::theta],
                         dphi,                            x[idx::p_r] - y[idx::p_r],
                         x[idx::p_theta] - y[idx::p_theta], x[idx::p_phi] - y[idx::p_phi]};
    double acc = 0.0;
    for (double v : d) acc += v * v;
    return std::sqrt(acc);
  };
  sys.escape_test = [r_in, r_out](const Vec& x) {
    const double r = x[idx::r];
    return !std::isfinite(r) || r <= r_in || r >= r_out;
  };
  sys.trapped_sampler = [params, opts = options.sampling](std::size_t count, std::uint64_t seed) {
    std::vector<Vec> v;
    for (const auto& s : sample_trapped_set(params, count, seed, opts)) v.emplace_back(s.point.to_state());
    return v;
  };
  auto inv = [params](int which) {
    return [params, which](const Vec& x) {
      const auto c = conserved_unchecked(params, Vector8d(x));
      switch (which) {
        case 0: return c.energy;
        case 1: return c.angular_momentum;
        case 2: return c.carter;
        default: return c.hamiltonian;
      }
    };
  };
  sys.invariants = {{"E", inv(0)}, {"L_z", inv(1)}, {"Q", inv(2)}, {"G", inv(3)}};

  const double kappa = options.projection_tol;
  // Snaps a state near a spherical orbit onto it: with E and L fixed, the
  // orbit radius solves A' Delta - Delta' A = 0 (R = R' = 0 with K = A / Delta,
  // A = Delta_0^2 W^2), then p_r = 0 and p_theta is rescaled to carry that K,
  // which restores G = 0 and Q. p_theta is left alone near the turning
  // latitudes, where the rescaling is ill-conditioned.
  sys.project = [params, kappa](Vec& x) {
    if (!(std::abs(x[idx::p_r]) < kappa)) return false;
    const double E = -x[idx::p_t];
    const double L = x[idx::p_phi];
    double r = x[idx::r];
    double A = 0.0, D = 0.0;
    for (int i = 0; i < 8; ++i) {
      A = radial_potential(params, r, E, L, 0.0);
      const double A1 = radial_potential_dr(params, r, E, L, 0.0);
      const double A2 = radial_potential_drr(params, r, E, L, 0.0);
      D = delta(params, r);
      const double D1 = A1 - radial_potential_dr(params, r, E, L, 1.0);
      const double D2 = A2 - radial_potential_drr(params, r, E, L, 1.0);
      const double g = A1 * D - D1 * A, dg = A2 * D - D2 * A;
      if (!(std::abs(dg) > 0.0)) return false;
      const double step = g / dg;
      r -= step;
      if (std::abs(step) <= 1e-15 * std::abs(r)) break;
    }
    if (!(std::abs(r - x[idx::r]) < kappa)) return false;
    A = radial_potential(params, r, E, L, 0.0);
    D = delta(params, r);
    if (!(D > 0.0)) return false;
    const double K = A / D;
    const double K_now = polar_constant(params, x[idx::theta], x[idx::p_t], x[idx::p_theta], x[idx::p_phi]);
    if (!(std::abs(K_now - K) <= 1e-6 * std::max(1.0, K))) return false;
    bool changed = x[idx::r] != r || x[idx::p_r] != 0.0;
    x[idx::r] = r;
    x[idx::p_r] = 0.0;
    const double pth = x[idx::p_theta];
    const double Dth = delta_theta(params, x[idx::theta]);
    const double rest = K_now - Dth * pth * pth;  // K without the p_theta term
    const double target = (K - rest) / Dth;
    if (target > 0.0) {
      const double p_new = std::copysign(std::sqrt(target), pth);
      if (std::abs(p_new - pth) < kappa && p_new != pth) {
        x[idx::p_theta] = p_new;
        changed = true;
      }
    }
    return changed;
  };
  sys.unstable_norm = [](const Vec&, const Vec& v) { return std::hypot(v[idx::r], v[idx::p_r]); };
  sys.packing = PackingKeys{[](const VecRef& x) {
                              return std::vector<double>{x[idx::theta], x[idx::phi], x[idx::p_theta]};
                            },
                            {0.0, 2.0 * std::numbers::pi, 0.0}};
  return sys;
}

TrappedResult is_trapped(const FlowSystem& system, const Vec& state, double T_max, const IntegratorConfig& config) {
  if (!(T_max > 0.0)) throw InvalidParameters("T_max must be positive");
  TrappedResult res{};
  const auto fwd = integrate(system, state, T_max, config);
  const auto bwd = integrate(system, state, -T_max, config);
  res.gamma_minus = fwd.status == TrajectoryStatus::completed;
  res.gamma_plus = bwd.status == TrajectoryStatus::completed;
  res.gamma = res.gamma_minus && res.gamma_plus;
  if (fwd.status != TrajectoryStatus::completed) res.forward_escape_time = fwd.stop_time;
  if (bwd.status != TrajectoryStatus::completed) res.backward_escape_time = bwd.stop_time;
  res.indeterminate =
      fwd.status == TrajectoryStatus::step_underflow || bwd.status == TrajectoryStatus::step_underflow;
  return res;
}

TrappedResult is_trapped(const SpacetimeParams& params, const Vec& state, double T_max, double delta,
                         const IntegratorConfig& config) {
  if (!(delta > 0.0)) throw InvalidParameters("margin delta must be positive");
  KerrFlowOptions opts;
  opts.horizon_margin = delta;
  return is_trapped(make_kerr_system(params, opts), state, T_max, config);
}

}  // namespace tp
