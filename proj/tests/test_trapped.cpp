#include <doctest.h>

#include <cmath>
#include <numbers>
#include <sstream>

#include "trapped_pressure/errors.hpp"
#include "trapped_pressure/trapped.hpp"

using namespace tp;

namespace {

// equatorial circular photon orbits of Kerr (m = 1)
double equatorial_radius(double a, bool prograde) {
  return 2.0 * (1.0 + std::cos(2.0 / 3.0 * std::acos(prograde ? -a : a)));
}

}  // namespace

TEST_CASE("spherical orbit constants") {
  SUBCASE("kerr a = 0.9 at r = 3") {
    const SpacetimeParams p(1, 0.9, 0);
    const auto o = spherical_orbit_constants(p, 3.0);
    CHECK(o.phi_impact == doctest::Approx(-1.8).epsilon(1e-12));
    CHECK(o.eta == doctest::Approx(27.0).epsilon(1e-12));
    // the printed closed forms of the Lambda = 0 branch
    const double r = 3, a = 0.9;
    const double phi = -(r * r * r - 3 * r * r + a * a * r + a * a) / (a * (r - 1));
    const double eta = -r * r * r * (r * r * r - 6 * r * r + 9 * r - 4 * a * a) / (a * a * (r - 1) * (r - 1));
    CHECK(o.phi_impact == doctest::Approx(phi).epsilon(1e-12));
    CHECK(o.eta == doctest::Approx(eta).epsilon(1e-12));

    const auto sys = make_kerr_system(p);
    const Vec s = PhasePoint{0, 3, std::numbers::pi / 2, 0, -1, 0, std::sqrt(o.eta), o.phi_impact}.to_state();
    const auto tr = integrate(sys, s, 100.0, {});
    double dev = 0;
    for (const auto& x : tr.states) dev = std::max(dev, std::abs(x[idx::r] - 3.0));
    CHECK(dev < 1e-6);
  }
  SUBCASE("closed forms agree with the lambda = 0 formulas across the band") {
    const SpacetimeParams p(1, 0.7, 0);
    const auto b = photon_region_bounds(p);
    for (int i = 0; i <= 20; ++i) {
      const double r = b.r1 + (b.r2 - b.r1) * i / 20.0, a = 0.7;
      const auto o = spherical_orbit_constants(p, r);
      const double phi = -(r * r * r - 3 * r * r + a * a * r + a * a) / (a * (r - 1));
      const double eta = -r * r * r * (r * r * r - 6 * r * r + 9 * r - 4 * a * a) / (a * a * (r - 1) * (r - 1));
      CHECK(o.phi_impact == doctest::Approx(phi).epsilon(1e-10));
      CHECK(o.eta + 1.0 == doctest::Approx(eta + 1.0).epsilon(1e-10));
    }
  }
  SUBCASE("radial potential has a double root") {
    for (double lam : {0.0, 0.02}) {
      const SpacetimeParams p(1, 0.9, lam);
      const auto b = photon_region_bounds(p);
      for (int i = 0; i <= 10; ++i) {
        const double r = b.r1 + (b.r2 - b.r1) * i / 10.0;
        const auto o = spherical_orbit_constants(p, r);
        const double scale = o.polar * r * r;
        CHECK(std::abs(radial_potential(p, r, 1, o.phi_impact, o.polar)) < 1e-9 * scale);
        CHECK(std::abs(radial_potential_dr(p, r, 1, o.phi_impact, o.polar)) < 1e-9 * scale);
        CHECK(o.eta + std::pow(o.phi_impact - 0.9, 2) >= 0);
        CHECK(r > p.horizons().r_event);
        CHECK(r < p.horizons().r_cosmo);
      }
    }
  }
  SUBCASE("small spin limit") {
    const auto o = spherical_orbit_constants(SpacetimeParams(1, 1e-6, 0), 3.0);
    CHECK(o.eta + o.phi_impact * o.phi_impact == doctest::Approx(27.0).epsilon(1e-9));
    const auto o0 = spherical_orbit_constants(SpacetimeParams(1, 0, 0), 3.0);
    CHECK(o0.polar == doctest::Approx(27.0).epsilon(1e-14));
    CHECK_THROWS_AS(spherical_orbit_constants(SpacetimeParams(1, 0, 0), 3.1), InvalidParameters);
  }
  SUBCASE("outside the photon region") {
    CHECK_THROWS_AS(spherical_orbit_constants(SpacetimeParams(1, 0.9, 0), 5.0), InvalidParameters);
    CHECK_THROWS_AS(spherical_orbit_constants(SpacetimeParams(1, 0.9, 0), 1.0), InvalidParameters);
  }
}

TEST_CASE("photon region bounds") {
  SUBCASE("schwarzschild") {
    const auto b = photon_region_bounds(SpacetimeParams(1, 0, 0));
    CHECK(b.r1 == 3.0);
    CHECK(b.r2 == 3.0);
  }
  SUBCASE("kerr a = 0.9") {
    const auto b = photon_region_bounds(SpacetimeParams(1, 0.9, 0));
    CHECK(b.r1 == doctest::Approx(1.558).epsilon(1e-3));
    CHECK(b.r2 == doctest::Approx(3.910).epsilon(1e-3));
    CHECK(b.r1 == doctest::Approx(equatorial_radius(0.9, true)).epsilon(1e-10));
    CHECK(b.r2 == doctest::Approx(equatorial_radius(0.9, false)).epsilon(1e-10));
    const SpacetimeParams p(1, 0.9, 0);
    CHECK(std::abs(spherical_orbit_constants(p, b.r1).eta) < 1e-8);
    CHECK(std::abs(spherical_orbit_constants(p, b.r2).eta) < 1e-8);
  }
  SUBCASE("brackets the photon sphere") {
    for (double a = 0.05; a < 1.0; a += 0.05) {
      const auto b = photon_region_bounds(SpacetimeParams(1, a, 0));
      CHECK(b.r1 < 3.0);
      CHECK(b.r2 > 3.0);
    }
  }
  SUBCASE("shrinks linearly with the spin") {
    for (double a : {1e-2, 1e-3, 1e-4}) {
      const auto b = photon_region_bounds(SpacetimeParams(1, a, 0));
      const double exact = equatorial_radius(a, false) - equatorial_radius(a, true);
      CHECK(b.r2 - b.r1 == doctest::Approx(exact).epsilon(1e-6));
      CHECK(b.r2 - b.r1 == doctest::Approx(4 * a / std::sqrt(3.0)).epsilon(1e-2));
    }
  }
  SUBCASE("kerr-de sitter") {
    const SpacetimeParams p(1, 0.9, 0.02);
    const auto b = photon_region_bounds(p);
    CHECK(b.r1 > p.horizons().r_event);
    CHECK(b.r2 < p.horizons().r_cosmo);
    CHECK(b.r1 < b.r2);
    const auto b0 = photon_region_bounds(SpacetimeParams(1, 0.9, 0));
    CHECK(std::abs(b.r1 - b0.r1) < 0.2);
    CHECK(std::abs(b.r2 - b0.r2) < 0.5);
  }
}

TEST_CASE("trapped set sampling") {
  SUBCASE("schwarzschild samples sit on the photon sphere") {
    const SpacetimeParams p(1, 0, 0);
    for (const auto& s : sample_trapped_set(p, 200, 1)) {
      CHECK(s.point.r == 3.0);
      CHECK(s.point.p_r == 0.0);
      CHECK(s.point.p_t == -1.0);
      CHECK(std::abs(dual_metric_G(p, s.point)) < 1e-10);
    }
  }
  SUBCASE("kerr samples") {
    for (double lam : {0.0, 0.02}) {
      const SpacetimeParams p(1, 0.9, lam);
      const auto b = photon_region_bounds(p);
      const auto samples = sample_trapped_set(p, 500, 7);
      CHECK(samples.size() == 500);
      for (const auto& s : samples) {
        CHECK(std::abs(dual_metric_G(p, s.point)) < 1e-10);
        CHECK(conserved(p, s.point).energy == 1.0);
        CHECK(s.point.r >= b.r1);
        CHECK(s.point.r <= b.r2);
        CHECK(std::sin(s.point.theta) >= 0.05);
        const Vector8d f = hamiltonian_field(p, s.point);
        CHECK(std::abs(f[idx::r]) < 1e-10);
        CHECK(std::abs(f[idx::p_r]) < 1e-10);
      }
    }
  }
  SUBCASE("determinism") {
    const SpacetimeParams p(1, 0.9, 0);
    const auto a = sample_trapped_set(p, 50, 3), b = sample_trapped_set(p, 50, 3),
               c = sample_trapped_set(p, 50, 4);
    bool same = true, differs = false;
    for (std::size_t i = 0; i < 50; ++i) {
      same = same && a[i].point.to_state() == b[i].point.to_state();
      differs = differs || a[i].point.to_state() != c[i].point.to_state();
    }
    CHECK(same);
    CHECK(differs);
  }
  SUBCASE("csv export") {
    std::ostringstream os;
    write_samples_csv(os, sample_trapped_set(SpacetimeParams(1, 0.9, 0), 3, 1));
    std::istringstream is(os.str());
    std::string line;
    int n = 0;
    std::getline(is, line);
    CHECK(line == "r_sphere,theta_phase,phi_phase,p_theta_sign,t,r,theta,phi,p_t,p_r,p_theta,p_phi");
    while (std::getline(is, line)) ++n;
    CHECK(n == 3);
  }
}

TEST_CASE("trappedness") {
  const IntegratorConfig cfg;
  SUBCASE("photon sphere") {
    const SpacetimeParams p(1, 0, 0);
    const Vec s = PhasePoint{0, 3, std::numbers::pi / 2, 0, -1, 0, 0, std::sqrt(27.0)}.to_state();
    const auto res = is_trapped(p, s, 150.0, 0.1, cfg);
    CHECK(res.gamma_minus);
    CHECK(res.gamma_plus);
    CHECK(res.gamma);
  }
  SUBCASE("radially outgoing photon") {
    const SpacetimeParams p(1, 0, 0);
    const double f = 1 - 2.0 / 10.0;
    const Vec s = PhasePoint{0, 10, 1.0, 0, -1, 1.0 / f, 0, 0}.to_state();
    const auto res = is_trapped(p, s, 150.0, 0.1, cfg);
    CHECK_FALSE(res.gamma_minus);
    CHECK(res.gamma_plus == false);  // backwards it falls into the horizon
    CHECK_FALSE(res.gamma);
    REQUIRE(res.forward_escape_time.has_value());
    CHECK(*res.forward_escape_time > 0);
  }
  SUBCASE("samples are trapped and stay in the band") {
    for (double lam : {0.0, 0.02}) {
      const SpacetimeParams p(1, 0.9, lam);
      const auto b = photon_region_bounds(p);
      const auto sys = make_kerr_system(p);
      for (const auto& s : sample_trapped_set(p, 8, 5)) {
        const Vec x = s.point.to_state();
        CHECK(is_trapped(p, x, 150.0, 0.1, cfg).gamma);
        for (double T : {150.0, -150.0}) {
          const auto tr = integrate(sys, x, T, cfg);
          for (const auto& y : tr.states) {
            CHECK(y[idx::r] >= b.r1 - 1e-6);
            CHECK(y[idx::r] <= b.r2 + 1e-6);
          }
        }
      }
    }
  }
  SUBCASE("perturbed samples escape") {
    for (double a : {0.0, 0.9}) {
      const SpacetimeParams p(1, a, 0);
      for (const auto& s : sample_trapped_set(p, 5, 9)) {
        Vec x = s.point.to_state();
        x[idx::p_r] += 1e-3;
        CHECK_FALSE(is_trapped(p, x, 150.0, 0.1, cfg).gamma);
      }
    }
  }
}
