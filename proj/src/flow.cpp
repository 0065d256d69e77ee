#include "trapped_pressure/flow.hpp"

#include <cmath>
#include <ostream>
#include <random>

#include "dopri5.hpp"
#include "format.hpp"
#include "trapped_pressure/errors.hpp"

namespace tp {

void IntegratorConfig::validate() const {
  auto tol_ok = [](double v) { return std::isfinite(v) && v > 0.0 && v <= 1e-2; };
  if (!tol_ok(rel_tol)) throw InvalidParameters("rel_tol must lie in (0, 1e-2]");
  if (!tol_ok(abs_tol)) throw InvalidParameters("abs_tol must lie in (0, 1e-2]");
  if (!(max_step > 0.0) || !std::isfinite(max_step)) throw InvalidParameters("max_step must be positive");
  if (!(renorm_interval > 0.0) || !std::isfinite(renorm_interval))
    throw InvalidParameters("renorm_interval must be positive");
}

IntegratorConfig IntegratorConfig::reference() {
  IntegratorConfig c;
  c.rel_tol = 1e-12;
  c.abs_tol = 1e-12;
  return c;
}

std::string to_string(TrajectoryStatus s) {
  switch (s) {
    case TrajectoryStatus::completed: return "completed";
    case TrajectoryStatus::escaped: return "escaped";
    case TrajectoryStatus::step_underflow: return "step_underflow";
  }
  return "unknown";
}

namespace {

// Applies identify/project; returns true if the state changed.
bool apply_hooks(const FlowSystem& sys, const IntegratorConfig& cfg, Vec& y, Mat* frame) {
  bool changed = false;
  if (sys.identify) {
    const Vec before = y;
    sys.identify(y, frame);
    changed = (y.array() != before.array()).any();
  }
  if (cfg.project && sys.project) changed = sys.project(y) || changed;
  return changed;
}

struct DriftTracker {
  const FlowSystem& sys;
  std::vector<double> initial;
  std::vector<double> drift;

  DriftTracker(const FlowSystem& s, const Vec& y0) : sys(s) {
    for (const auto& inv : sys.invariants) initial.push_back(inv.value(y0));
    drift.assign(initial.size(), 0.0);
  }
  void observe(const Vec& y) {
    for (std::size_t i = 0; i < initial.size(); ++i) {
      const double d = std::abs(sys.invariants[i].value(y) - initial[i]);
      if (!(d <= drift[i])) drift[i] = std::isnan(d) ? std::numeric_limits<double>::infinity() : std::max(d, drift[i]);
    }
  }
};

}  // namespace

Trajectory integrate(const FlowSystem& system, const Vec& state, double T, const IntegratorConfig& config,
                     double output_step) {
  config.validate();
  if (!std::isfinite(T)) throw InvalidParameters("integration horizon must be finite");
  if (state.size() != system.dimension) throw InvalidParameters("state dimension mismatch");

  Trajectory traj;
  for (const auto& inv : system.invariants) traj.invariant_names.push_back(inv.name);
  DriftTracker drift(system, state);

  traj.times.push_back(0.0);
  traj.states.push_back(state);
  traj.last_valid_state = state;
  if (T == 0.0) {
    traj.max_drift = drift.drift;
    return traj;
  }

  const double dir = T > 0.0 ? 1.0 : -1.0;
  detail::Dopri5 rk([&](const Vec& y, Vec& dy) { dy = dir * system.vector_field(y); }, config);
  // Integrate in |s| so that the stepper always moves forward.
  const double S = std::abs(T);
  rk.reset(0.0, state);

  std::size_t next_out = 1;
  const double out = output_step > 0.0 ? output_step : 0.0;

  auto record = [&](double s, Vec y) {
    if (system.identify) system.identify(y, nullptr);
    traj.times.push_back(dir * s);
    traj.states.push_back(std::move(y));
  };

  while (rk.t() < S) {
    if (!rk.step(S)) {
      traj.status = TrajectoryStatus::step_underflow;
      traj.stop_time = dir * rk.t();
      break;
    }
    const double t0 = rk.t_prev(), t1 = rk.t();

    if (system.escape_test && system.escape_test(rk.y())) {
      double lo = t0, hi = t1;
      while (hi - lo > 1e-8) {
        const double mid = 0.5 * (lo + hi);
        (system.escape_test(rk.dense(mid)) ? hi : lo) = mid;
      }
      if (out > 0.0) {
        for (; next_out * out <= lo; ++next_out) record(next_out * out, rk.dense(next_out * out));
      }
      Vec y = rk.dense(hi);
      drift.observe(y);
      record(hi, y);
      traj.status = TrajectoryStatus::escaped;
      traj.stop_time = dir * hi;
      traj.last_valid_state = traj.states.back();
      break;
    }

    if (out > 0.0) {
      for (; next_out * out <= t1 * (1.0 + 1e-14); ++next_out) {
        const double s = std::min(next_out * out, t1);
        record(s, s == t1 ? rk.y() : rk.dense(s));
      }
    }
    if (apply_hooks(system, config, rk.y_mut(), nullptr)) rk.invalidate();
    drift.observe(rk.y());
    if (out == 0.0) {
      traj.times.push_back(dir * t1);
      traj.states.push_back(rk.y());
    } else if (t1 == S && (traj.times.back() != dir * S)) {
      record(S, rk.y());
    }
    traj.last_valid_state = rk.y();
  }
  if (traj.status == TrajectoryStatus::completed && out > 0.0 && !traj.states.empty()) {
    // the final recorded state carries the hooks applied at the end
    if (traj.times.back() == dir * S) traj.states.back() = rk.y();
  }
  traj.max_drift = drift.drift;
  return traj;
}

void write_trajectory_csv(std::ostream& os, const FlowSystem& system, const Trajectory& traj) {
  os << "s";
  for (int i = 0; i < system.dimension; ++i) {
    os << ',';
    if (static_cast<std::size_t>(i) < system.component_names.size())
      os << system.component_names[i];
    else
      os << 'x' << i;
  }
  for (const auto& name : traj.invariant_names) os << ",drift_" << name;
  os << '\n';

  std::vector<double> initial;
  for (const auto& inv : system.invariants) initial.push_back(inv.value(traj.states.front()));
  for (std::size_t k = 0; k < traj.states.size(); ++k) {
    detail::put_number(os, traj.times[k]);
    for (Eigen::Index i = 0; i < traj.states[k].size(); ++i) {
      os << ',';
      detail::put_number(os, traj.states[k][i]);
    }
    for (std::size_t j = 0; j < initial.size(); ++j) {
      os << ',';
      detail::put_number(os, system.invariants[j].value(traj.states[k]) - initial[j]);
    }
    os << '\n';
  }
}

struct TangentFlow::Impl {
  const FlowSystem& sys;
  IntegratorConfig cfg;
  TangentBundleState st;
  int n;
  int k;
  double origin;
  Vec y;
  detail::Dopri5 fwd;
  detail::Dopri5 bwd;

  Impl(const FlowSystem& s, const Vec& state, const Mat& frame, const IntegratorConfig& c)
      : sys(s),
        cfg(c),
        n(s.dimension),
        k(static_cast<int>(frame.cols())),
        fwd(make_rhs(1.0), c),
        bwd(make_rhs(-1.0), c) {
    cfg.validate();
    if (state.size() != n || frame.rows() != n) throw InvalidParameters("tangent frame dimension mismatch");
    if (k < 1) throw InvalidParameters("tangent frame needs at least one direction");
    st.base = state;
    st.frame = frame;
    st.log_growth = Vec::Zero(k);
    st.time = 0.0;
    origin = 0.0;
    renormalize();
  }

  detail::Dopri5::Rhs make_rhs(double dir) {
    return [this, dir](const Vec& yy, Vec& dy) {
      const auto x = yy.head(n);
      dy.resize(yy.size());
      dy.head(n) = dir * sys.vector_field(x);
      const Mat J = sys.jacobian(x);
      Eigen::Map<const Mat> V(yy.data() + n, n, k);
      Eigen::Map<Mat> dV(dy.data() + n, n, k);
      dV = dir * (J * V);
    };
  }

  void pack() {
    y.resize(n + n * k);
    y.head(n) = st.base;
    y.tail(n * k) = Eigen::Map<const Vec>(st.frame.data(), n * k);
  }
  void unpack() {
    st.base = y.head(n);
    st.frame = Eigen::Map<const Mat>(y.data() + n, n, k);
  }

  void renormalize() {
    if (k == 1) {
      const double nrm = st.frame.col(0).norm();
      st.log_growth[0] += std::log(nrm);
      st.frame /= nrm;
      return;
    }
    if (!st.degenerate_frame) {
      Eigen::JacobiSVD<Mat> svd(st.frame);
      const auto& sv = svd.singularValues();
      if (sv[k - 1] <= 0.0 || sv[0] / sv[k - 1] > 1e12) st.degenerate_frame = true;
    }
    Eigen::HouseholderQR<Mat> qr(st.frame);
    Mat R = qr.matrixQR().topRows(k).triangularView<Eigen::Upper>();
    Mat Q = qr.householderQ() * Mat::Identity(n, k);
    for (int i = 0; i < k; ++i) {
      const double d = R(i, i);
      if (d < 0.0) Q.col(i) = -Q.col(i);
      st.log_growth[i] += std::log(std::abs(d));
    }
    st.frame = Q;
  }

  // Integrates |dt| in direction dir, stopping at absolute renormalization
  // times that are multiples of renorm_interval from the start.
  void advance(double dt) {
    if (dt == 0.0) return;
    const double dir = dt > 0.0 ? 1.0 : -1.0;
    detail::Dopri5& rk = dir > 0 ? fwd : bwd;
    const double t_end = st.time + dt;
    const double step = cfg.renorm_interval;
    pack();
    rk.reset(0.0, y);
    double local = 0.0;
    const double span = std::abs(dt);
    while (local < span) {
      // next renormalization boundary in the direction of travel
      const double rel = (st.time - origin) / step;
      const double boundary_rel = dir > 0 ? std::floor(rel + 1e-9) + 1.0 : std::ceil(rel - 1e-9) - 1.0;
      const double to_boundary = std::abs(origin + boundary_rel * step - st.time);
      const double target = std::min(span, local + to_boundary);
      const bool hit_boundary = target < span || std::abs(to_boundary - (span - local)) < 1e-12 * std::max(1.0, span);
      while (rk.t() < target) {
        if (!rk.step(target)) {
          unpack_from(rk);
          st.status = TrajectoryStatus::step_underflow;
          throw NumericalFailure("step-size underflow in tangent flow at s = " + std::to_string(st.time));
        }
        if (hook(rk)) rk.invalidate();
        st.time += dir * (rk.t() - rk.t_prev());
      }
      local = target;
      if (hit_boundary) {
        unpack_from(rk);
        if (target < span) st.time = origin + boundary_rel * step;
        renormalize();
        pack();
        rk.reset(local, y);
      }
    }
    unpack_from(rk);
    st.time = t_end;
  }

  void unpack_from(const detail::Dopri5& rk) {
    y = rk.y();
    unpack();
  }

  bool hook(detail::Dopri5& rk) {
    if (!sys.identify && !(cfg.project && sys.project)) return false;
    Vec& yy = rk.y_mut();
    bool changed = false;
    if (sys.identify) {
      Vec x = yy.head(n);
      Mat V = Eigen::Map<const Mat>(yy.data() + n, n, k);
      const Vec x0 = x;
      sys.identify(x, &V);
      if ((x.array() != x0.array()).any()) {
        yy.head(n) = x;
        yy.tail(n * k) = Eigen::Map<const Vec>(V.data(), n * k);
        changed = true;
      }
    }
    if (cfg.project && sys.project) {
      Vec x = yy.head(n);
      if (sys.project(x)) {
        yy.head(n) = x;
        changed = true;
      }
    }
    return changed;
  }
};

TangentFlow::TangentFlow(const FlowSystem& system, const Vec& state, const Mat& frame, const IntegratorConfig& config)
    : impl_(std::make_unique<Impl>(system, state, frame, config)) {}
TangentFlow::~TangentFlow() = default;
TangentFlow::TangentFlow(TangentFlow&&) noexcept = default;
TangentFlow& TangentFlow::operator=(TangentFlow&&) noexcept = default;

void TangentFlow::advance(double dt) { impl_->advance(dt); }
void TangentFlow::renormalize() { impl_->renormalize(); }
const TangentBundleState& TangentFlow::state() const { return impl_->st; }

TangentBundleState flow_with_tangent(const FlowSystem& system, const Vec& state, const Mat& directions, double T,
                                     const IntegratorConfig& config) {
  if (directions.cols() > 1) {
    Eigen::FullPivLU<Mat> lu(directions);
    if (lu.rank() < directions.cols()) throw InvalidParameters("tangent directions are linearly dependent");
  }
  TangentFlow tf(system, state, directions, config);
  tf.advance(T);
  return tf.state();
}

Vec total_log_growth(const TangentBundleState& s) {
  Vec out = s.log_growth;
  for (Eigen::Index i = 0; i < out.size(); ++i) out[i] += std::log(s.frame.col(i).norm());
  return out;
}

double top_lyapunov(const FlowSystem& system, const Vec& state, double T, const IntegratorConfig& config,
                    std::optional<double> align, std::uint64_t seed) {
  if (!(T > 0.0)) throw InvalidParameters("top_lyapunov needs T > 0");
  const double Ta = align.value_or(T / 5.0);
  TangentFlow tf(system, state, random_unit_vector(system.dimension, seed), config);
  tf.advance(Ta);
  tf.renormalize();
  const double g0 = tf.state().log_growth[0];
  tf.advance(T);
  return (total_log_growth(tf.state())[0] - g0) / T;
}

Vec random_unit_vector(int n, std::uint64_t seed, std::uint64_t stream) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(stream), static_cast<std::uint32_t>(stream >> 32), 0x7f4a7c15u};
  std::mt19937_64 gen(seq);
  std::normal_distribution<double> nd;
  Vec v(n);
  do {
    for (int i = 0; i < n; ++i) v[i] = nd(gen);
  } while (v.norm() == 0.0);
  return v.normalized();
}

}  // namespace tp
