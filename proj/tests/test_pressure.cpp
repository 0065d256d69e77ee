#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

#include "trapped_pressure/errors.hpp"
#include "trapped_pressure/fixtures.hpp"
#include "trapped_pressure/pressure.hpp"
#include "trapped_pressure/trapped.hpp"

using namespace tp;

namespace {

// Spherical photon orbit of Kerr (Lambda = 0) crossing the equator.
Vec equator_state(const SpacetimeParams& p, double r) {
  const auto o = spherical_orbit_constants(p, r);
  return PhasePoint{0, r, std::numbers::pi / 2, 0, -1, 0, std::sqrt(std::max(0.0, o.eta)), o.phi_impact}.to_state();
}

// Unstable rate at the Schwarzschild photon sphere from the reduced radial
// Hamiltonian H(r, p) = (-1/f + f p^2 + 27/r^2) / 2, f = 1 - 2/r, linearized
// by finite differences at (3, 0): rate^2 = H_pp * (-H_rr).
double photon_sphere_rate() {
  auto H = [](double r, double p) {
    const double f = 1.0 - 2.0 / r;
    return 0.5 * (-1.0 / f + f * p * p + 27.0 / (r * r));
  };
  const double h = 1e-4;
  const double Hrr = (H(3 + h, 0) - 2 * H(3, 0) + H(3 - h, 0)) / (h * h);
  const double Hpp = (H(3, h) - 2 * H(3, 0) + H(3, -h)) / (h * h);
  return std::sqrt(Hpp * -Hrr);
}

std::vector<Vec> kerr_samples(const SpacetimeParams& p, std::size_t n) {
  std::vector<Vec> out;
  for (const auto& s : sample_trapped_set(p, n, 1)) out.push_back(s.point.to_state());
  return out;
}

PressureConfig toy_config() {
  PressureConfig cfg;
  cfg.eps_grid = {0.4, 0.2, 0.1};
  cfg.T_grid = {2, 4, 6, 8};
  cfg.h_sep = 0.5;
  cfg.s_values = {0.0, 0.5, 1.0, 2.0};
  return cfg;
}

}  // namespace

TEST_CASE("unstable jacobian") {
  SUBCASE("toy grows at exactly nu") {
    const auto toy = make_toy(0.5);
    const auto samples = toy.trapped_sampler(9, 3);
    for (std::size_t i = 0; i < samples.size(); ++i) {
      for (double T : {1.0, 7.0, 30.0}) {
        const auto rec = log_unstable_jacobian(toy, samples[i], T, {}, {}, i);
        CHECK(rec.lambda == doctest::Approx(0.5 * T).epsilon(1e-10));
        CHECK(rec.rate == doctest::Approx(0.5).epsilon(1e-10));
      }
    }
  }
  SUBCASE("schwarzschild photon sphere") {
    const double oracle = photon_sphere_rate();
    CHECK(oracle == doctest::Approx(1.0 / std::sqrt(3.0)).epsilon(1e-6));
    const SpacetimeParams p(1, 0, 0);
    const auto sys = make_kerr_system(p);
    const auto samples = kerr_samples(p, 3);
    for (std::size_t i = 0; i < samples.size(); ++i) {
      const auto rec = log_unstable_jacobian(sys, samples[i], 50.0, {}, {}, i);
      CHECK(std::abs(rec.lambda - 50.0 * oracle) < 0.05);
    }
  }
  SUBCASE("kerr rates differ across the photon region") {
    const SpacetimeParams p(1, 0.9, 0);
    const auto sys = make_kerr_system(p);
    const auto region = photon_region_bounds(p);
    const auto inner = log_unstable_jacobian(sys, equator_state(p, region.r1 + 0.02), 40.0, {});
    const auto outer = log_unstable_jacobian(sys, equator_state(p, region.r2 - 0.02), 40.0, {});
    CHECK(inner.rate > 0.0);
    CHECK(outer.rate > 0.0);
    CHECK(std::abs(inner.rate - outer.rate) > 0.05);
  }
  SUBCASE("grid horizons share the aligned start") {
    const SpacetimeParams p(1, 0.9, 0);
    const auto sys = make_kerr_system(p);
    const auto x = kerr_samples(p, 1)[0];
    const auto g = unstable_growth(sys, x, {10, 20}, {});
    const auto one = log_unstable_jacobian(sys, x, 20, {});
    CHECK(g.lambda[1] == doctest::Approx(one.lambda).epsilon(1e-8));
    CHECK(g.lambda[0] < g.lambda[1]);
  }
  SUBCASE("alignment check") {
    const SpacetimeParams p(1, 0.9, 0);
    const auto sys = make_kerr_system(p);
    JacobianOptions opt;
    opt.check_alignment = true;
    const auto rec = log_unstable_jacobian(sys, kerr_samples(p, 1)[0], 30.0, {}, opt);
    CHECK_FALSE(rec.alignment_flagged);
    CHECK(rec.alignment_gap < 1e-4);
  }
  SUBCASE("bad horizons") {
    const auto toy = make_toy(0.5);
    const Vec x = toy.trapped_sampler(1, 0)[0];
    CHECK_THROWS_AS(unstable_growth(toy, x, {}, {}), InvalidParameters);
    CHECK_THROWS_AS(unstable_growth(toy, x, {2, 1}, {}), InvalidParameters);
    CHECK_THROWS_AS(unstable_growth(toy, x, {0}, {}), InvalidParameters);
  }
}

TEST_CASE("telescoping") {
  const auto toy = make_toy(0.5);
  const Vec x = toy.trapped_sampler(4, 1)[2];
  CHECK(telescoping_check(toy, x, 1, {}) == 0.0);
  CHECK(telescoping_check(toy, x, 7, {}) < 1e-12);
  CHECK_THROWS_AS(telescoping_check(toy, x, 0, {}), InvalidParameters);

  const SpacetimeParams p(1, 0.9, 0);
  const auto sys = make_kerr_system(p);
  const auto samples = kerr_samples(p, 3);
  for (std::size_t i = 0; i < samples.size(); ++i) {
    CHECK(telescoping_check(sys, samples[i], 1, {}, {}, i) == 0.0);
    CHECK(telescoping_check(sys, samples[i], 10, {}, {}, i) < 1e-6);
  }
}

TEST_CASE("tangent spectrum") {
  SUBCASE("toy") {
    const auto toy = make_toy(0.5);
    const auto sp = tangent_spectrum(toy, toy.trapped_sampler(1, 0)[0], 20.0, {});
    REQUIRE(sp.exponents.size() == 4);
    CHECK(sp.exponents[0] == doctest::Approx(0.5).epsilon(1e-9));
    CHECK(std::abs(sp.exponents[1]) < 1e-9);
    CHECK(std::abs(sp.exponents[2]) < 1e-9);
    CHECK(sp.exponents[3] == doctest::Approx(-0.5).epsilon(1e-9));
    CHECK(sp.tangent == std::vector<int>{1, 2});
    CHECK(sp.mu_max < 1e-9);
    CHECK_FALSE(sp.splitting_ambiguous);
  }
  SUBCASE("cat suspension") {
    const auto cat = make_cat_suspension();
    IntegratorConfig cfg;
    cfg.max_step = 1.0;
    const auto sp = tangent_spectrum(cat, cat.trapped_sampler(1, 0)[0], 30.0, cfg);
    const double h = std::log((3.0 + std::sqrt(5.0)) / 2.0);
    CHECK(sp.exponents[0] == doctest::Approx(h).epsilon(1e-6));
    CHECK(sp.exponents[2] == doctest::Approx(-h).epsilon(1e-6));
    CHECK(sp.tangent.size() == 3);
    CHECK(sp.mu_max == doctest::Approx(h).epsilon(1e-6));
  }
  SUBCASE("schwarzschild photon sphere") {
    const SpacetimeParams p(1, 0, 0);
    const auto sys = make_kerr_system(p);
    const auto sp = tangent_spectrum(sys, kerr_samples(p, 1)[0], 200.0, {});
    const double nu = photon_sphere_rate();
    CHECK(std::abs(sp.exponents.front() - nu) < 1e-3);
    CHECK(std::abs(sp.exponents.back() + nu) < 1e-3);
    REQUIRE(sp.tangent.size() == 6);
    for (int i : sp.tangent) CHECK(std::abs(sp.exponents[i]) < 0.01);
  }
  SUBCASE("kerr tangent exponents vanish") {
    const SpacetimeParams p(1, 0.9, 0);
    const auto sys = make_kerr_system(p);
    for (const auto& x : kerr_samples(p, 3)) {
      const auto sp = tangent_spectrum(sys, x, 200.0, {});
      CHECK(sp.mu_max < 0.01);
      CHECK(sp.unstable_rate > 0.3);
      CHECK(sp.stable_rate == doctest::Approx(sp.unstable_rate).epsilon(1e-2));
    }
  }
}

TEST_CASE("normal hyperbolicity check") {
  SUBCASE("toy is infinitely normally hyperbolic") {
    const auto toy = make_toy(0.5);
    const auto rep = nh_check(toy, toy.trapped_sampler(4, 0), 20.0, 10, {});
    CHECK(rep.nu_min == doctest::Approx(0.5).epsilon(1e-9));
    CHECK(rep.nu_s == doctest::Approx(0.5).epsilon(1e-9));
    CHECK(rep.mu_max < 1e-9);
    CHECK(rep.r_star == 10);
    CHECK_FALSE(rep.degenerate);
  }
  SUBCASE("cat suspension is not") {
    const auto cat = make_cat_suspension();
    IntegratorConfig cfg;
    cfg.max_step = 1.0;
    const auto rep = nh_check(cat, cat.trapped_sampler(3, 0), 30.0, 10, cfg);
    CHECK(rep.mu_max == doctest::Approx(rep.nu_min).epsilon(1e-6));
    CHECK(rep.r_star == 0);
  }
  SUBCASE("r_star is the largest admissible r") {
    const auto toy = make_toy(0.5);
    const auto rep = nh_check(toy, toy.trapped_sampler(1, 0), 10.0, 3, {});
    for (int r = rep.r_star + 1; r <= rep.r_cap; ++r) CHECK_FALSE(rep.nu_min > r * (rep.mu_max + rep.mu_max_half_width));
    if (rep.r_star > 0) CHECK(rep.nu_min > rep.r_star * (rep.mu_max + rep.mu_max_half_width));
  }
  SUBCASE("bad input") {
    const auto toy = make_toy(0.5);
    CHECK_THROWS_AS(nh_check(toy, toy.trapped_sampler(1, 0), 10.0, 0, {}), InvalidParameters);
    CHECK_THROWS_AS(nh_check(toy, {}, 10.0, 3, {}), InvalidParameters);
  }
}

TEST_CASE("greedy separated sets") {
  const SpacetimeParams p(1, 0.9, 0);
  const auto sys = make_kerr_system(p);
  PressureConfig cfg;
  cfg.T_grid = {5, 10};
  cfg.h_sep = 0.5;
  const auto prep = prepare_samples(sys, kerr_samples(p, 300), cfg);
  REQUIRE(prep.paths.size() == 300);

  auto brute_blocked = [&](std::size_t a, std::size_t b, double eps, std::size_t steps) {
    for (std::size_t t = 0; t <= steps; ++t)
      if (sys.distance(prep.paths[a].col(t), prep.paths[b].col(t)) >= eps) return false;
    return true;
  };

  SUBCASE("separated and maximal") {
    for (double eps : {0.5, 1.0, 2.0}) {
      const std::size_t steps = 20;
      const auto sel = greedy_separated_set(sys, prep.paths, eps, steps);
      for (std::size_t i = 0; i < sel.size(); ++i)
        for (std::size_t j = i + 1; j < sel.size(); ++j) CHECK_FALSE(brute_blocked(sel[i], sel[j], eps, steps));
      for (std::size_t c = 0; c < prep.paths.size(); ++c) {
        if (std::find(sel.begin(), sel.end(), c) != sel.end()) continue;
        bool blocked = false;
        for (std::size_t s : sel)
          if (s < c && brute_blocked(c, s, eps, steps)) blocked = true;
        CHECK(blocked);
      }
    }
  }
  SUBCASE("grid index matches the plain scan") {
    auto plain = sys;
    plain.packing.reset();
    for (double eps : {0.3, 1.0, 3.0})
      for (std::size_t steps : {0u, 10u, 20u})
        CHECK(greedy_separated_set(sys, prep.paths, eps, steps) ==
              greedy_separated_set(plain, prep.paths, eps, steps));
  }
  SUBCASE("extremes") {
    CHECK(greedy_separated_set(sys, prep.paths, 1e3, 20).size() == 1);
    CHECK(greedy_separated_set(sys, prep.paths, 1e-9, 20).size() == prep.paths.size());
  }
  SUBCASE("distance scale") {
    CHECK(greedy_separated_set(sys, prep.paths, 1.0, 20, 2.0) == greedy_separated_set(sys, prep.paths, 0.5, 20));
    CHECK_THROWS_AS(greedy_separated_set(sys, prep.paths, 0.0, 20), InvalidParameters);
    CHECK_THROWS_AS(greedy_separated_set(sys, prep.paths, 1.0, 21), InvalidParameters);
  }
}

TEST_CASE("greedy packing on the toy torus scales as eps^-2") {
  const auto toy = make_toy(0.5);
  PressureConfig cfg;
  cfg.T_grid = {2};
  cfg.h_sep = 0.5;
  cfg.jacobian.align_time = 0.0;
  const auto prep = prepare_samples(toy, toy.trapped_sampler(250 * 250, 0), cfg);
  std::vector<double> counts;
  for (double eps : {0.2, 0.1, 0.05}) counts.push_back(greedy_separated_set(toy, prep.paths, eps, 4).size());
  for (std::size_t i = 0; i + 1 < counts.size(); ++i) {
    const double ratio = counts[i + 1] / counts[i];
    CHECK(ratio > 2.0);
    CHECK(ratio < 8.0);
  }
  // rotations are isometries: T does not matter
  CHECK(greedy_separated_set(toy, prep.paths, 0.1, 0).size() == counts[1]);
}

TEST_CASE("pressure config validation") {
  PressureConfig cfg;
  CHECK_NOTHROW(cfg.validate());
  auto bad = cfg;
  bad.eps_grid = {};
  CHECK_THROWS_AS(bad.validate(), InvalidParameters);
  bad = cfg;
  bad.eps_grid = {0.1, -0.1};
  CHECK_THROWS_AS(bad.validate(), InvalidParameters);
  bad = cfg;
  bad.T_grid = {10, 5};
  CHECK_THROWS_AS(bad.validate(), InvalidParameters);
  bad = cfg;
  bad.T_grid = {10, 10.25};
  CHECK_THROWS_AS(bad.validate(), InvalidParameters);
  bad = cfg;
  bad.h_sep = 0;
  CHECK_THROWS_AS(bad.validate(), InvalidParameters);
  bad = cfg;
  bad.s_values = {std::nan("")};
  CHECK_THROWS_AS(bad.validate(), InvalidParameters);
  bad = cfg;
  bad.distance_scale = -1;
  CHECK_THROWS_AS(bad.validate(), InvalidParameters);
}

TEST_CASE("separated-set pressure") {
  const auto toy = make_toy(0.5);
  const auto cfg = toy_config();
  const auto samples = toy.trapped_sampler(2500, 0);
  const auto prep = prepare_samples(toy, samples, cfg);
  const auto est = pressure_separated(toy, prep, cfg);
  REQUIRE(est.size() == cfg.s_values.size());

  SUBCASE("toy pressure is -nu s") {
    for (const auto& e : est) {
      const double want = analytic_pressure(toy, e.s);
      CHECK(std::abs(e.P_hat - want) <= std::max(0.05, 0.1 * std::abs(want)));
    }
    CHECK(std::abs(est[0].P_hat) < 0.05);
  }
  SUBCASE("weights are bounded below") {
    for (const auto& e : est)
      for (Eigen::Index a = 0; a < e.Z.rows(); ++a)
        for (Eigen::Index b = 0; b < e.Z.cols(); ++b) {
          double max_lambda = 0;
          for (const auto& l : prep.lambda) max_lambda = std::max(max_lambda, l[b]);
          CHECK(e.Z(a, b) >= std::exp(-e.s * max_lambda) * (1 - 1e-12));
          CHECK(e.Z(a, b) > 0.0);
        }
  }
  SUBCASE("affine in s for fixed selections") {
    // log Z is the log of a reweighted sum; with a constant lambda it is affine
    for (std::size_t k = 1; k < est.size(); ++k)
      for (Eigen::Index a = 0; a < est[k].Z.rows(); ++a)
        for (Eigen::Index b = 0; b < est[k].Z.cols(); ++b) {
          const double lz0 = std::log(est[0].Z(a, b));
          CHECK(std::log(est[k].Z(a, b)) ==
                doctest::Approx(lz0 - est[k].s * 0.5 * cfg.T_grid[b]).epsilon(1e-9));
        }
    for (std::size_t k = 1; k < est.size(); ++k) CHECK(est[k].counts == est[0].counts);
  }
  SUBCASE("monotone in s") {
    for (std::size_t k = 1; k < est.size(); ++k) CHECK(est[k].P_hat <= est[k - 1].P_hat);
  }
  SUBCASE("same input, same bits") {
    auto cfg2 = cfg;
    cfg2.workers = 3;
    const auto again = pressure_separated(toy, samples, cfg2);
    for (std::size_t k = 0; k < est.size(); ++k) {
      CHECK(again[k].Z == est[k].Z);
      CHECK(again[k].P_hat == est[k].P_hat);
    }
  }
  SUBCASE("reordering the samples") {
    auto shuffled = samples;
    std::mt19937_64 gen(7);
    std::shuffle(shuffled.begin(), shuffled.end(), gen);
    const auto other = pressure_separated(toy, shuffled, cfg);
    for (std::size_t k = 0; k < est.size(); ++k) CHECK(std::abs(other[k].P_hat - est[k].P_hat) < 0.05);
  }
  SUBCASE("metric robustness") {
    for (double c : {0.5, 2.0}) {
      auto scaled = cfg;
      scaled.distance_scale = c;
      const auto other = pressure_separated(toy, prep, scaled);
      for (std::size_t k = 0; k < est.size(); ++k)
        CHECK(std::abs(other[k].P_hat - est[k].P_hat) <= std::max(0.05, 3 * est[k].fit_residual));
    }
  }
  SUBCASE("single-s overload") {
    const auto one = pressure_separated(toy, 1.0, cfg.eps_grid, cfg.T_grid, samples, cfg);
    CHECK(one.P_hat == est[2].P_hat);
  }
}

TEST_CASE("pressure diagnostics") {
  const auto toy = make_toy(0.5);
  auto cfg = toy_config();
  cfg.eps_grid = {0.4, 0.3};
  const auto est = pressure_separated(toy, toy.trapped_sampler(400, 0), cfg);
  bool thin = false, few = false;
  for (const auto& w : est[0].warnings) {
    thin = thin || w.find("insufficient-sample") != std::string::npos;
    few = few || w.find("fewer than three") != std::string::npos;
  }
  CHECK(thin);
  CHECK(few);
  CHECK(est[0].samples_used == 400);
  CHECK(est[0].samples_dropped == 0);
}

TEST_CASE("escaping samples are dropped") {
  const auto toy = make_toy(0.5);
  auto samples = toy.trapped_sampler(4, 0);
  samples[1][0] = 0.1;  // off Gamma, leaves |x| + |y| <= 1 within a few units
  PressureConfig cfg = toy_config();
  const auto prep = prepare_samples(toy, samples, cfg);
  CHECK(prep.dropped == 1);
  CHECK(prep.source_index == std::vector<std::size_t>{0, 2, 3});
}

TEST_CASE("variational pressure") {
  SUBCASE("toy") {
    const auto toy = make_toy(0.5);
    const auto cfg = toy_config();
    const auto samples = toy.trapped_sampler(9, 0);
    const auto nh = nh_check(toy, samples, 20.0, 10, {});
    for (double s : {0.0, 0.5, 1.0, 2.0}) {
      const auto v = pressure_variational(toy, nh, s, samples, cfg);
      CHECK(std::abs(v.P - analytic_pressure(toy, s)) < 1e-6);
    }
    const auto prep = prepare_samples(toy, samples, cfg);
    const double p1 = pressure_variational(nh, 1.0, prep, cfg.T_grid).P;
    CHECK(pressure_variational(nh, 3.0, prep, cfg.T_grid).P == doctest::Approx(3 * p1).epsilon(1e-14));
  }
  SUBCASE("refuses without infinite normal hyperbolicity") {
    const auto cat = make_cat_suspension();
    IntegratorConfig ic;
    ic.max_step = 1.0;
    const auto samples = cat.trapped_sampler(3, 0);
    const auto nh = nh_check(cat, samples, 20.0, 10, ic);
    PressureConfig cfg;
    cfg.integrator = ic;
    CHECK_THROWS_AS(pressure_variational(cat, nh, 1.0, samples, cfg), NotNormallyHyperbolic);
  }
}
