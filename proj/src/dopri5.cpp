#include "dopri5.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace tp::detail {

namespace {

constexpr double a21 = 1.0 / 5.0;
constexpr double a31 = 3.0 / 40.0, a32 = 9.0 / 40.0;
constexpr double a41 = 44.0 / 45.0, a42 = -56.0 / 15.0, a43 = 32.0 / 9.0;
constexpr double a51 = 19372.0 / 6561.0, a52 = -25360.0 / 2187.0, a53 = 64448.0 / 6561.0, a54 = -212.0 / 729.0;
constexpr double a61 = 9017.0 / 3168.0, a62 = -355.0 / 33.0, a63 = 46732.0 / 5247.0, a64 = 49.0 / 176.0,
                 a65 = -5103.0 / 18656.0;
constexpr double a71 = 35.0 / 384.0, a73 = 500.0 / 1113.0, a74 = 125.0 / 192.0, a75 = -2187.0 / 6784.0,
                 a76 = 11.0 / 84.0;
constexpr double e1 = 71.0 / 57600.0, e3 = -71.0 / 16695.0, e4 = 71.0 / 1920.0, e5 = -17253.0 / 339200.0,
                 e6 = 22.0 / 525.0, e7 = -1.0 / 40.0;
constexpr double d1 = -12715105075.0 / 11282082432.0, d3 = 87487479700.0 / 32700410799.0,
                 d4 = -10690763975.0 / 1880347072.0, d5 = 701980252875.0 / 199316789632.0,
                 d6 = -1453857185.0 / 822651844.0, d7 = 69997945.0 / 29380423.0;

constexpr double kSafety = 0.9;
constexpr double kFacMin = 0.2;
constexpr double kFacMax = 5.0;

}  // namespace

Dopri5::Dopri5(Rhs rhs, const IntegratorConfig& config) : rhs_(std::move(rhs)), cfg_(config) {}

void Dopri5::reset(double t, const Vec& y) {
  t_ = t;
  t_prev_ = t;
  y_ = y;
  have_k1_ = false;
  h_ = 0.0;
  const auto n = y.size();
  for (Vec* v : {&k1_, &k2_, &k3_, &k4_, &k5_, &k6_, &k7_, &ytmp_, &ynew_, &yerr_}) v->resize(n);
}

double Dopri5::error_norm(const Vec& y0, const Vec& y1, const Vec& err) const {
  double acc = 0.0;
  const auto n = y0.size();
  for (Eigen::Index i = 0; i < n; ++i) {
    const double sc = cfg_.abs_tol + cfg_.rel_tol * std::max(std::abs(y0[i]), std::abs(y1[i]));
    const double e = err[i] / sc;
    acc += e * e;
  }
  const double v = std::sqrt(acc / static_cast<double>(n));
  return std::isfinite(v) ? v : std::numeric_limits<double>::infinity();
}

bool Dopri5::step(double t_end) {
  const double span = t_end - t_;
  if (span == 0.0) return true;
  const double dir = span > 0.0 ? 1.0 : -1.0;

  if (!have_k1_) {
    rhs_(y_, k1_);
    have_k1_ = true;
  }
  if (h_ <= 0.0) {
    // Hairer's first-guess heuristic, capped by max_step
    double d0 = 0.0, d1n = 0.0;
    for (Eigen::Index i = 0; i < y_.size(); ++i) {
      const double sc = cfg_.abs_tol + cfg_.rel_tol * std::abs(y_[i]);
      d0 += (y_[i] / sc) * (y_[i] / sc);
      d1n += (k1_[i] / sc) * (k1_[i] / sc);
    }
    d0 = std::sqrt(d0 / y_.size());
    d1n = std::sqrt(d1n / y_.size());
    h_ = (d0 < 1e-5 || d1n < 1e-5) ? 1e-6 : 0.01 * d0 / d1n;
    h_ = std::min(h_, cfg_.max_step);
  }

  const double h_min = 16.0 * std::numeric_limits<double>::epsilon() * std::max(1.0, std::abs(t_));
  bool last_reject = false;
  for (;;) {
    double h = std::min(h_, cfg_.max_step);
    bool hits_end = false;
    if (h >= std::abs(span) * (1.0 - 1e-12)) {
      h = std::abs(span);
      hits_end = true;
    }
    const double hs = dir * h;

    ytmp_ = y_ + hs * (a21 * k1_);
    rhs_(ytmp_, k2_);
    ytmp_ = y_ + hs * (a31 * k1_ + a32 * k2_);
    rhs_(ytmp_, k3_);
    ytmp_ = y_ + hs * (a41 * k1_ + a42 * k2_ + a43 * k3_);
    rhs_(ytmp_, k4_);
    ytmp_ = y_ + hs * (a51 * k1_ + a52 * k2_ + a53 * k3_ + a54 * k4_);
    rhs_(ytmp_, k5_);
    ytmp_ = y_ + hs * (a61 * k1_ + a62 * k2_ + a63 * k3_ + a64 * k4_ + a65 * k5_);
    rhs_(ytmp_, k6_);
    ynew_ = y_ + hs * (a71 * k1_ + a73 * k3_ + a74 * k4_ + a75 * k5_ + a76 * k6_);
    rhs_(ynew_, k7_);
    yerr_ = hs * (e1 * k1_ + e3 * k3_ + e4 * k4_ + e5 * k5_ + e6 * k6_ + e7 * k7_);

    const double err = error_norm(y_, ynew_, yerr_);
    if (err <= 1.0) {
      rc1_ = y_;
      rc2_ = ynew_ - y_;
      rc3_ = hs * k1_ - rc2_;
      rc4_ = rc2_ - hs * k7_ - rc3_;
      rc5_ = hs * (d1 * k1_ + d3 * k3_ + d4 * k4_ + d5 * k5_ + d6 * k6_ + d7 * k7_);
      t_prev_ = t_;
      t_ = hits_end ? t_end : t_ + hs;
      h_used_ = hs;
      y_.swap(ynew_);
      k1_.swap(k7_);
      double fac = err > 0.0 ? kSafety * std::pow(err, -0.2) : kFacMax;
      fac = std::clamp(fac, kFacMin, last_reject ? 1.0 : kFacMax);
      // a truncated final step does not shrink the proposal
      h_ = hits_end ? std::max(h_, h * fac) : h * fac;
      return true;
    }
    const double fac = std::isfinite(err) ? std::max(kFacMin, kSafety * std::pow(err, -0.2)) : 0.1;
    h_ = h * fac;
    last_reject = true;
    if (h_ < h_min) return false;
  }
}

Vec Dopri5::dense(double t) const {
  if (h_used_ == 0.0) return y_;
  const double th = (t - t_prev_) / h_used_;
  const double th1 = 1.0 - th;
  return rc1_ + th * (rc2_ + th1 * (rc3_ + th * (rc4_ + th1 * rc5_)));
}

}  // namespace tp::detail
