#pragma once

// Dormand-Prince 5(4) stepper with FSAL and Hairer's 4th-order dense output.

#include <functional>

#include "trapped_pressure/flow.hpp"

namespace tp::detail {

class Dopri5 {
 public:
  using Rhs = std::function<void(const Vec& y, Vec& dy)>;

  Dopri5(Rhs rhs, const IntegratorConfig& config);

  void reset(double t, const Vec& y);

  /// One accepted step toward t_end; the step is truncated so t_end is hit
  /// exactly. Returns false on step-size underflow.
  bool step(double t_end);

  /// Interpolates inside the last accepted step, [t_prev, t].
  Vec dense(double t) const;

  double t() const { return t_; }
  double t_prev() const { return t_prev_; }
  const Vec& y() const { return y_; }
  /// Mutable access; callers that modify the state must call invalidate().
  Vec& y_mut() { return y_; }
  void invalidate() { have_k1_ = false; }

 private:
  double error_norm(const Vec& y0, const Vec& y1, const Vec& err) const;

  Rhs rhs_;
  IntegratorConfig cfg_;
  double t_ = 0.0;
  double t_prev_ = 0.0;
  double h_ = 0.0;  // proposed magnitude of the next step
  double h_used_ = 0.0;
  bool have_k1_ = false;
  Vec y_, k1_, k2_, k3_, k4_, k5_, k6_, k7_, ytmp_, ynew_, yerr_;
  Vec rc1_, rc2_, rc3_, rc4_, rc5_;
};

}  // namespace tp::detail
