#include <doctest.h>

#include <cmath>
#include <numbers>

#include "trapped_pressure/errors.hpp"
#include "trapped_pressure/fixtures.hpp"

using namespace tp;

TEST_CASE("toy flow") {
  const auto toy = make_toy(0.5);
  CHECK(toy.dimension == 4);
  CHECK_THROWS_AS(make_toy(0.0), InvalidParameters);
  CHECK_THROWS_AS(make_toy(-1.0), InvalidParameters);

  SUBCASE("exact solution") {
    Vec x(4);
    x << 0.01, 0.2, 0.3, 0.4;
    const auto tr = integrate(toy, x, 3.0, {});
    const Vec& y = tr.states.back();
    CHECK(y[0] == doctest::Approx(0.01 * std::exp(1.5)).epsilon(1e-9));
    CHECK(y[1] == doctest::Approx(0.2 * std::exp(-1.5)).epsilon(1e-9));
  }
  SUBCASE("top exponent on Gamma") {
    const auto samples = toy.trapped_sampler(4, 0);
    REQUIRE(samples.size() == 4);
    for (const auto& s : samples) {
      CHECK(s[0] == 0.0);
      CHECK(s[1] == 0.0);
      CHECK(top_lyapunov(toy, s, 100.0, {}) == doctest::Approx(0.5).epsilon(1e-9));
    }
  }
  SUBCASE("sampler is the largest square grid") {
    CHECK(toy.trapped_sampler(10, 0).size() == 9);
    CHECK(toy.trapped_sampler(1, 0).size() == 1);
  }
  SUBCASE("distance is periodic in the angles") {
    Vec a(4), b(4);
    a << 0, 0, 0.1, 0;
    b << 0, 0, 2 * std::numbers::pi - 0.1, 0;
    CHECK(toy.distance(a, b) == doctest::Approx(0.2).epsilon(1e-12));
  }
  SUBCASE("escape") {
    Vec x(4);
    x << 0.6, 0.5, 0, 0;
    CHECK(toy.escape_test(x));
    x << 0.5, 0.5, 0, 0;
    CHECK_FALSE(toy.escape_test(x));
  }
  SUBCASE("Gamma orbits equidistribute on the torus") {
    // occupancy of an 8 x 8 partition along one orbit, against uniform
    const auto s = toy.trapped_sampler(1, 0)[0];
    const auto tr = integrate(toy, s, 5000.0, {}, 0.25);
    const int bins = 8;
    std::vector<int> hist(bins * bins, 0);
    for (const auto& x : tr.states) {
      auto cell = [&](double th) {
        const double w = th - 2 * std::numbers::pi * std::floor(th / (2 * std::numbers::pi));
        return std::min(bins - 1, static_cast<int>(w / (2 * std::numbers::pi) * bins));
      };
      ++hist[cell(x[2]) * bins + cell(x[3])];
    }
    const double expected = static_cast<double>(tr.states.size()) / (bins * bins);
    double chi2 = 0.0;
    for (int c : hist) chi2 += (c - expected) * (c - expected) / expected;
    // 63 degrees of freedom; the 0.999 quantile is about 104
    CHECK(chi2 < 104.0);
    for (int c : hist) CHECK(std::abs(c - expected) < 0.1 * expected);
  }
}

TEST_CASE("cat-map suspension") {
  const auto cat = make_cat_suspension();
  CHECK(cat.unstable_dimension == 0);
  CHECK(cat.stable_dimension == 0);
  IntegratorConfig cfg;
  cfg.max_step = 1.0;

  SUBCASE("time-one tangent map") {
    auto c = cfg;
    c.renorm_interval = 2.0;
    Vec x(3);
    x << 0.3, 0.7, 0.5;
    const auto st = flow_with_tangent(cat, x, Mat::Identity(3, 3), 1.0, c);
    const Eigen::Matrix2d M = st.frame.topLeftCorner<2, 2>();
    // eigenvalues from trace and determinant
    const double tr = M.trace(), det = M.determinant();
    const double disc = std::sqrt(tr * tr - 4 * det);
    const double hi = (tr + disc) / 2, lo = (tr - disc) / 2;
    CHECK(hi == doctest::Approx((3 + std::sqrt(5.0)) / 2).epsilon(1e-12));
    CHECK(lo == doctest::Approx((3 - std::sqrt(5.0)) / 2).epsilon(1e-12));
    Eigen::EigenSolver<Eigen::Matrix2d> es(M);
    double big = std::max(std::abs(es.eigenvalues()[0]), std::abs(es.eigenvalues()[1]));
    CHECK(big == doctest::Approx(hi).epsilon(1e-12));
  }
  SUBCASE("return map") {
    Vec x(3);
    x << 0.3, 0.1, 0.5;
    const auto tr = integrate(cat, x, 1.0, cfg);
    const Vec& y = tr.states.back();
    CHECK(y[0] == doctest::Approx(0.7).epsilon(1e-12));  // 2 * 0.3 + 0.1
    CHECK(y[1] == doctest::Approx(0.4).epsilon(1e-12));  // 0.3 + 0.1
    CHECK(y[2] == doctest::Approx(0.5).epsilon(1e-12));
  }
  SUBCASE("top exponent") {
    const auto s = cat.trapped_sampler(1, 0)[0];
    CHECK(std::abs(top_lyapunov(cat, s, 40.0, cfg) - cat_entropy) < 1e-6);
    CHECK(cat_entropy == doctest::Approx(std::log((3 + std::sqrt(5.0)) / 2)).epsilon(1e-15));
  }
  SUBCASE("quotient metric is continuous across the gluing") {
    Vec a(3), b(3);
    a << 0.2, 0.3, 0.999;
    b << 0.7, 0.5, 0.001;  // A (0.2, 0.3) = (0.7, 0.5)
    CHECK(cat.distance(a, b) == doctest::Approx(0.002).epsilon(1e-9));
    CHECK(cat.distance(b, a) == doctest::Approx(0.002).epsilon(1e-9));
  }
  SUBCASE("compact: nothing escapes") {
    for (const auto& s : cat.trapped_sampler(50, 3)) CHECK_FALSE(cat.escape_test(s));
  }
}

TEST_CASE("analytic pressure") {
  const auto toy = make_toy(0.5);
  const auto cat = make_cat_suspension();
  CHECK(analytic_pressure(toy, 0.0) == 0.0);
  CHECK(analytic_pressure(toy, 1.0) == -0.5);
  CHECK(analytic_pressure(toy, 2.0) == -1.0);
  CHECK(analytic_pressure(cat, 0.0) == doctest::Approx(0.9624).epsilon(1e-4));
  CHECK(analytic_pressure(cat, 0.5) == doctest::Approx(0.4812).epsilon(1e-4));
  CHECK(analytic_pressure(cat, 1.0) == 0.0);
  FlowSystem other;
  other.name = "kerr";
  CHECK_THROWS_AS(analytic_pressure(other, 1.0), InvalidParameters);
}
