#include "trapped_pressure/fixtures.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

#include "trapped_pressure/errors.hpp"

namespace tp {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

double wrap_unit(double v) { return v - std::floor(v); }

double torus_gap(double d, double period) { return std::remainder(d, period); }

}  // namespace

FlowSystem make_toy(double nu, double omega1, double omega2) {
  if (!(nu > 0.0) || !std::isfinite(nu)) throw InvalidParameters("toy flow needs nu > 0");
  if (!std::isfinite(omega1) || !std::isfinite(omega2)) throw InvalidParameters("rotation frequencies must be finite");

  FlowSystem sys;
  sys.name = "toy";
  sys.dimension = 4;
  sys.component_names = {"x", "y", "theta1", "theta2"};
  sys.parameters = {{"nu", nu}, {"omega1", omega1}, {"omega2", omega2}};
  sys.unstable_dimension = 1;
  sys.stable_dimension = 1;
  sys.vector_field = [nu, omega1, omega2](const Vec& s) {
    Vec d(4);
    d << nu * s[0], -nu * s[1], omega1, omega2;
    return d;
  };
  sys.jacobian = [nu](const Vec&) {
    Mat J = Mat::Zero(4, 4);
    J(0, 0) = nu;
    J(1, 1) = -nu;
    return J;
  };
  sys.distance = [](const VecRef& a, const VecRef& b) {
    const double dx = a[0] - b[0], dy = a[1] - b[1];
    const double d1 = torus_gap(a[2] - b[2], kTwoPi), d2 = torus_gap(a[3] - b[3], kTwoPi);
    return std::sqrt(dx * dx + dy * dy + d1 * d1 + d2 * d2);
  };
  sys.escape_test = [](const Vec& s) { return !(std::abs(s[0]) + std::abs(s[1]) <= 1.0); };
  // largest square grid with at most `count` points, offset by the seed
  sys.trapped_sampler = [](std::size_t count, std::uint64_t seed) {
    std::mt19937_64 gen(seed);
    std::uniform_real_distribution<double> uni(0.0, 1.0);
    const double o1 = uni(gen), o2 = uni(gen);
    const auto m = std::max<std::size_t>(1, static_cast<std::size_t>(std::floor(std::sqrt(double(count)))));
    std::vector<Vec> out;
    out.reserve(m * m);
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t j = 0; j < m; ++j) {
        Vec s(4);
        s << 0.0, 0.0, kTwoPi * (i + o1) / m, kTwoPi * (j + o2) / m;
        out.push_back(s);
      }
    return out;
  };
  sys.unstable_norm = [](const Vec&, const Vec& v) { return std::abs(v[0]); };
  sys.packing = PackingKeys{[](const VecRef& s) { return std::vector<double>{s[2], s[3]}; }, {kTwoPi, kTwoPi}};
  return sys;
}

FlowSystem make_cat_suspension() {
  FlowSystem sys;
  sys.name = "cat-suspension";
  sys.dimension = 3;
  sys.component_names = {"x", "y", "u"};
  sys.parameters = {{"roof", 1.0}};
  // every exponent is tangent to Gamma: the whole space is trapped
  sys.unstable_dimension = 0;
  sys.stable_dimension = 0;
  sys.vector_field = [](const Vec&) {
    Vec d(3);
    d << 0.0, 0.0, 1.0;
    return d;
  };
  sys.jacobian = [](const Vec&) { return Mat(Mat::Zero(3, 3)); };
  sys.identify = [](Vec& s, Mat* frame) {
    static const Eigen::Matrix2d A = (Eigen::Matrix2d() << 2, 1, 1, 1).finished();
    static const Eigen::Matrix2d Ainv = (Eigen::Matrix2d() << 1, -1, -1, 2).finished();
    while (s[2] >= 1.0) {
      s[2] -= 1.0;
      s.head<2>() = A * s.head<2>();
      if (frame) frame->topRows<2>() = A * frame->topRows<2>();
    }
    while (s[2] < 0.0) {
      s[2] += 1.0;
      s.head<2>() = Ainv * s.head<2>();
      if (frame) frame->topRows<2>() = Ainv * frame->topRows<2>();
    }
    s[0] = wrap_unit(s[0]);
    s[1] = wrap_unit(s[1]);
  };
  sys.distance = [](const VecRef& a, const VecRef& b) {
    static const Eigen::Matrix2d A = (Eigen::Matrix2d() << 2, 1, 1, 1).finished();
    auto dz = [](const Eigen::Vector2d& p, const Eigen::Vector2d& q) {
      return std::hypot(torus_gap(p[0] - q[0], 1.0), torus_gap(p[1] - q[1], 1.0));
    };
    const Eigen::Vector2d za = a.head<2>(), zb = b.head<2>();
    double best = dz(za, zb) + std::abs(a[2] - b[2]);
    // the glued routes only matter when their u-gap alone does not exceed best
    const double gap_a = std::abs(a[2] - 1.0 - b[2]);
    if (gap_a < best) best = std::min(best, dz(A * za, zb) + gap_a);
    const double gap_b = std::abs(a[2] - (b[2] - 1.0));
    if (gap_b < best) best = std::min(best, dz(za, A * zb) + gap_b);
    return best;
  };
  sys.escape_test = [](const Vec&) { return false; };
  // Jittered-stratified points on the section u = 1/2: one uniform point in
  // each cell of the largest m x m grid, in shuffled order. Lattices and
  // Kronecker sequences resonate with the map and bias the packing counts;
  // plain uniform points clump and bias them the other way.
  sys.trapped_sampler = [](std::size_t count, std::uint64_t seed) {
    std::mt19937_64 gen(seed);
    std::uniform_real_distribution<double> uni(0.0, 1.0);
    const auto m = static_cast<std::size_t>(std::sqrt(static_cast<double>(count)));
    std::vector<Vec> out;
    out.reserve(m * m);
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t j = 0; j < m; ++j) {
        Vec s(3);
        s[0] = (static_cast<double>(i) + uni(gen)) / static_cast<double>(m);
        s[1] = (static_cast<double>(j) + uni(gen)) / static_cast<double>(m);
        s[2] = 0.5;
        out.push_back(s);
      }
    std::shuffle(out.begin(), out.end(), gen);
    return out;
  };
  sys.unstable_norm = [](const Vec&, const Vec& v) { return std::hypot(v[0], v[1]); };
  sys.packing = PackingKeys{[](const VecRef& s) { return std::vector<double>{s[0], s[1]}; }, {1.0, 1.0}};
  return sys;
}

double analytic_pressure(const FlowSystem& fixture, double s) {
  if (fixture.name == "toy") return -s * fixture.parameters.at("nu");
  if (fixture.name == "cat-suspension") return (1.0 - s) * cat_entropy;
  throw InvalidParameters("no analytic pressure for system '" + fixture.name + "'");
}

}  // namespace tp
