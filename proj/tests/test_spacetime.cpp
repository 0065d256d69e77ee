#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "trapped_pressure/errors.hpp"
#include "trapped_pressure/spacetime.hpp"

using namespace tp;

namespace {

// plain bisection on Delta, independent of the polynomial root finder
double bisect_delta(const SpacetimeParams& p, double lo, double hi) {
  double flo = delta(p, lo);
  for (int i = 0; i < 200; ++i) {
    const double mid = 0.5 * (lo + hi);
    const double fm = delta(p, mid);
    if ((fm < 0) == (flo < 0)) {
      lo = mid;
      flo = fm;
    } else {
      hi = mid;
    }
  }
  return 0.5 * (lo + hi);
}

PhasePoint random_point(const SpacetimeParams& p, std::mt19937_64& gen) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const auto& h = p.horizons();
  const double rmax = std::isfinite(h.r_cosmo) ? h.r_cosmo - 0.2 : 30.0;
  PhasePoint pt;
  pt.t = 10 * u(gen);
  pt.r = h.r_event + 0.2 + (rmax - h.r_event - 0.2) * u(gen);
  pt.theta = 0.1 + (std::numbers::pi - 0.2) * u(gen);
  pt.phi = 2 * std::numbers::pi * u(gen);
  pt.p_t = -0.5 - u(gen);
  pt.p_r = 4 * u(gen) - 2;
  pt.p_theta = 6 * u(gen) - 3;
  pt.p_phi = 8 * u(gen) - 4;
  return pt;
}

SpacetimeParams random_params(std::mt19937_64& gen) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const double a = 0.95 * (2 * u(gen) - 1);
  const double lam = u(gen) < 0.5 ? 0.0 : 0.02 * u(gen);
  return SpacetimeParams(1.0, a, lam);
}

Vector8d fd_field_of_G(const SpacetimeParams& p, const Vector8d& s) {
  // Hamilton vector field of H = G/2 by central differences
  Vector8d out;
  for (int i = 0; i < 8; ++i) {
    const double h = 1e-6 * std::max(1.0, std::abs(s[i]));
    Vector8d a = s, b = s;
    a[i] += h;
    b[i] -= h;
    const double d = 0.5 * (dual_metric_G_unchecked(p, a) - dual_metric_G_unchecked(p, b)) / (2 * h);
    if (i < 4)
      out[i + 4] = -d;
    else
      out[i - 4] = d;
  }
  return out;
}

}  // namespace

TEST_CASE("delta polynomial values") {
  CHECK(delta(SpacetimeParams(1, 0, 0), 3.0) == doctest::Approx(3.0).epsilon(1e-15));
  CHECK(delta(SpacetimeParams(1, 0, 0.03), 2.0) == doctest::Approx(-0.16).epsilon(1e-14));
  CHECK(std::abs(delta(SpacetimeParams(1, 0.9, 0), 1 + std::sqrt(0.19))) < 1e-12);
}

TEST_CASE("horizon roots") {
  SUBCASE("schwarzschild") {
    const auto h = horizon_roots(SpacetimeParams(1, 0, 0));
    CHECK(std::abs(h.r_event - 2.0) < 1e-12);
    CHECK(std::isinf(h.r_cosmo));
    CHECK(h.r_cosmo > 0);
  }
  SUBCASE("kerr quadratic") {
    const auto h = horizon_roots(SpacetimeParams(1, 0.9, 0));
    CHECK(h.r_event == doctest::Approx(1 + std::sqrt(0.19)).epsilon(1e-14));
    CHECK(h.r_cauchy == doctest::Approx(1 - std::sqrt(0.19)).epsilon(1e-14));
  }
  SUBCASE("schwarzschild-de sitter against bisection") {
    const SpacetimeParams p(1, 0, 0.03);
    const auto h = p.horizons();
    CHECK(h.r_event == doctest::Approx(bisect_delta(p, 1.5, 3.0)).epsilon(1e-12));
    CHECK(h.r_cosmo == doctest::Approx(bisect_delta(p, 5.0, 12.0)).epsilon(1e-12));
    CHECK(h.r_event == doctest::Approx(2.09).epsilon(5e-3));
    CHECK(h.r_cosmo == doctest::Approx(8.79).epsilon(5e-3));
  }
  SUBCASE("kerr-de sitter four roots in order") {
    const SpacetimeParams p(1, 0.5, 0.03);
    const auto h = p.horizons();
    CHECK(h.r_minus < h.r_cauchy);
    CHECK(h.r_cauchy < h.r_event);
    CHECK(h.r_event < h.r_cosmo);
    for (double r : {h.r_minus, h.r_cauchy, h.r_event, h.r_cosmo})
      CHECK(std::abs(delta(p, r)) < 1e-10 * std::max(1.0, std::pow(r, 4)));
    CHECK(h.r_event == doctest::Approx(bisect_delta(p, 1.2, 3.0)).epsilon(1e-12));
    CHECK(h.r_cosmo == doctest::Approx(bisect_delta(p, 5.0, 12.0)).epsilon(1e-12));
    CHECK(h.r_cauchy == doctest::Approx(bisect_delta(p, 0.01, 1.0)).epsilon(1e-12));
    CHECK(h.r_minus == doctest::Approx(bisect_delta(p, -20.0, -1.0)).epsilon(1e-12));
  }
  SUBCASE("rejections") {
    CHECK_THROWS_AS(SpacetimeParams(1, 1.1, 0), InvalidParameters);
    CHECK_THROWS_AS(SpacetimeParams(1, 1.0, 0), InvalidParameters);
    CHECK_THROWS_AS(SpacetimeParams(1, 0, -0.01), InvalidParameters);
    CHECK_THROWS_AS(SpacetimeParams(1, 0.5, 0.5), InvalidParameters);  // no cosmological pair
    try {
      SpacetimeParams(1, 1.1, 0);
    } catch (const InvalidParameters& e) {
      CHECK(std::string(e.what()).find("subextremal") != std::string::npos);
    }
  }
  SUBCASE("random admissible parameter sets") {
    std::mt19937_64 gen(11);
    for (int i = 0; i < 200; ++i) {
      const auto p = random_params(gen);
      const auto h = p.horizons();
      CHECK(std::abs(delta(p, h.r_event)) < 1e-10 * std::max(1.0, std::pow(h.r_event, 4)));
      if (p.lambda() > 0) {
        CHECK(h.r_minus < h.r_cauchy);
        CHECK(h.r_cauchy < h.r_event);
        CHECK(h.r_event < h.r_cosmo);
      }
    }
  }
}

TEST_CASE("inverse metric") {
  SUBCASE("schwarzschild at r = 4") {
    const SpacetimeParams p(1, 0, 0);
    const PhasePoint pt{0, 4, std::numbers::pi / 2, 0, 0, 0, 0, 0};
    const auto gi = inverse_metric(p, pt);
    CHECK(gi(0, 0) == doctest::Approx(-2.0).epsilon(1e-14));
    CHECK(gi(1, 1) == doctest::Approx(0.5).epsilon(1e-14));
    CHECK(gi(2, 2) == doctest::Approx(1.0 / 16).epsilon(1e-14));
  }
  SUBCASE("times metric is identity") {
    std::mt19937_64 gen(3);
    double worst = 0;
    for (int i = 0; i < 1000; ++i) {
      const auto p = random_params(gen);
      const auto pt = random_point(p, gen);
      const auto gi = inverse_metric(p, pt);
      const auto g = metric(p, pt);
      worst = std::max(worst, (gi * g - Eigen::Matrix4d::Identity()).cwiseAbs().maxCoeff());
      CHECK((gi - gi.transpose()).cwiseAbs().maxCoeff() == 0.0);
      const double rho2 = pt.r * pt.r + p.spin() * p.spin() * std::pow(std::cos(pt.theta), 2);
      CHECK(gi(1, 1) == doctest::Approx(delta(p, pt.r) / rho2).epsilon(1e-15));
    }
    CHECK(worst < 1e-12);
  }
  SUBCASE("frame dragging") {
    const SpacetimeParams p(1, 0.9, 0);
    const PhasePoint pt{0, 3, std::numbers::pi / 2, 0, 0, 0, 0, 0};
    CHECK(std::abs(inverse_metric(p, pt)(0, 3)) > 1e-3);
    CHECK(inverse_metric(SpacetimeParams(1, 0, 0), pt)(0, 3) == 0.0);
  }
  SUBCASE("chart errors") {
    const SpacetimeParams p(1, 0.9, 0);
    CHECK_THROWS_AS(inverse_metric(p, PhasePoint{0, 3, 0, 0, 0, 0, 0, 0}), ChartError);
    CHECK_THROWS_AS(inverse_metric(p, PhasePoint{0, 1.2, 1, 0, 0, 0, 0, 0}), ChartError);
  }
}

TEST_CASE("dual metric function") {
  const SpacetimeParams schw(1, 0, 0);
  CHECK(std::abs(dual_metric_G(schw, PhasePoint{0, 4, 1.0, 0, -1, 2, 0, 0})) < 1e-15);
  CHECK(dual_metric_G(schw, PhasePoint{0, 4, 1.0, 0, 0, 0, 0, 0}) == 0.0);
  std::mt19937_64 gen(5);
  for (int i = 0; i < 100; ++i) {
    const auto p = random_params(gen);
    auto pt = random_point(p, gen);
    const double g1 = dual_metric_G(p, pt);
    pt.p_t *= 3;
    pt.p_r *= 3;
    pt.p_theta *= 3;
    pt.p_phi *= 3;
    CHECK(dual_metric_G(p, pt) == doctest::Approx(9 * g1).epsilon(1e-12));
  }
}

TEST_CASE("hamiltonian field of H = G/2") {
  SUBCASE("matches finite differences of G") {
    std::mt19937_64 gen(7);
    for (int i = 0; i < 300; ++i) {
      const auto p = random_params(gen);
      const auto pt = random_point(p, gen);
      const Vector8d f = hamiltonian_field(p, pt);
      const Vector8d fd = fd_field_of_G(p, pt.to_state());
      CHECK((f - fd).norm() <= 1e-6 * std::max(1.0, f.norm()));
    }
  }
  SUBCASE("jacobian matches finite differences of the field") {
    std::mt19937_64 gen(8);
    for (int i = 0; i < 300; ++i) {
      const auto p = random_params(gen);
      const Vector8d s = random_point(p, gen).to_state();
      const Matrix8d J = hamiltonian_jacobian_unchecked(p, s);
      Matrix8d fd;
      for (int j = 0; j < 8; ++j) {
        const double h = 1e-6 * std::max(1.0, std::abs(s[j]));
        Vector8d a = s, b = s;
        a[j] += h;
        b[j] -= h;
        fd.col(j) = (hamiltonian_field_unchecked(p, a) - hamiltonian_field_unchecked(p, b)) / (2 * h);
      }
      CHECK((J - fd).norm() <= 1e-5 * std::max(1.0, J.norm()));
    }
  }
  SUBCASE("photon sphere is stationary in r") {
    const SpacetimeParams p(1, 0, 0);
    const Vector8d f = hamiltonian_field(p, PhasePoint{0, 3, std::numbers::pi / 2, 0, -1, 0, 0, std::sqrt(27.0)});
    CHECK(std::abs(f[idx::r]) < 1e-10);
    CHECK(std::abs(f[idx::p_r]) < 1e-10);
  }
  SUBCASE("equatorial motion stays equatorial") {
    const SpacetimeParams p(1, 0.9, 0);
    const Vector8d f = hamiltonian_field(p, PhasePoint{0, 5, std::numbers::pi / 2, 0, -1, 0.3, 0, 2.0});
    CHECK(std::abs(f[idx::theta]) < 1e-15);
    CHECK(std::abs(f[idx::p_theta]) < 1e-15);
  }
  SUBCASE("future directed momenta advance t") {
    std::mt19937_64 gen(9);
    for (int i = 0; i < 300; ++i) {
      const auto p = random_params(gen);
      auto pt = random_point(p, gen);
      pt.p_r = 0;
      pt.p_theta = 0;
      pt.p_phi = 0;
      CHECK(hamiltonian_field(p, pt)[idx::t] > 0);
    }
  }
}

TEST_CASE("conserved quantities") {
  const SpacetimeParams schw(1, 0, 0);
  const auto c = conserved(schw, PhasePoint{0, 3, std::numbers::pi / 2, 0, -1, 0, 0, std::sqrt(27.0)});
  CHECK(c.energy == 1.0);
  CHECK(c.angular_momentum == doctest::Approx(std::sqrt(27.0)));
  CHECK(std::abs(c.carter) < 1e-12);
  CHECK(std::abs(c.hamiltonian) < 1e-12);

  std::mt19937_64 gen(10);
  for (int i = 0; i < 100; ++i) {
    const auto pt = random_point(schw, gen);
    const double cot = std::cos(pt.theta) / std::sin(pt.theta);
    const auto q = conserved(schw, pt).carter;
    CHECK(q == doctest::Approx(pt.p_theta * pt.p_theta + cot * cot * pt.p_phi * pt.p_phi).epsilon(1e-12));
    CHECK(q >= 0);
  }
  const SpacetimeParams kerr(1, 0.9, 0);
  for (int i = 0; i < 100; ++i) {
    const auto pt = random_point(kerr, gen);
    const double c2 = std::pow(std::cos(pt.theta), 2), s2 = std::pow(std::sin(pt.theta), 2);
    const double E = -pt.p_t, L = pt.p_phi;
    const double Q = pt.p_theta * pt.p_theta + c2 * (L * L / s2 - 0.81 * E * E);
    CHECK(conserved(kerr, pt).carter == doctest::Approx(Q).epsilon(1e-11));
  }
}

TEST_CASE("small spin reduces to schwarzschild closed forms") {
  const SpacetimeParams p(1, 1e-12, 0);
  std::mt19937_64 gen(12);
  for (int i = 0; i < 200; ++i) {
    const auto pt = random_point(SpacetimeParams(1, 0, 0), gen);
    const double r = pt.r, f = 1 - 2 / r, s2 = std::pow(std::sin(pt.theta), 2);
    const auto gi = inverse_metric(p, pt);
    CHECK(gi(0, 0) == doctest::Approx(-1 / f).epsilon(1e-10));
    CHECK(gi(1, 1) == doctest::Approx(f).epsilon(1e-10));
    CHECK(gi(2, 2) == doctest::Approx(1 / (r * r)).epsilon(1e-10));
    CHECK(gi(3, 3) == doctest::Approx(1 / (r * r * s2)).epsilon(1e-10));
    const double G = -pt.p_t * pt.p_t / f + f * pt.p_r * pt.p_r + pt.p_theta * pt.p_theta / (r * r) +
                     pt.p_phi * pt.p_phi / (r * r * s2);
    CHECK(dual_metric_G(p, pt) == doctest::Approx(G).epsilon(1e-10));
    const Vector8d fld = hamiltonian_field(p, pt);
    CHECK(fld[idx::r] == doctest::Approx(f * pt.p_r).epsilon(1e-10));
    CHECK(fld[idx::t] == doctest::Approx(-pt.p_t / f).epsilon(1e-10));
  }
}
