#pragma once

// Generic flows, their tangent (variational) flows, and an adaptive
// Dormand-Prince 5(4) integrator with dense output.

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace tp {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;
using VecRef = Eigen::Ref<const Eigen::VectorXd>;

struct ConservedFunctional {
  std::string name;
  std::function<double(const Vec&)> value;
};

/// Keys used to prune the separated-set search. Contract: whenever
/// distance(a, b) < eps, every key differs by less than eps (circularly, for
/// keys with a positive period).
struct PackingKeys {
  std::function<std::vector<double>(const VecRef&)> keys;
  std::vector<double> periods;  // 0 for non-periodic keys
};

/// A flow phi^t on R^n (or a chart of a manifold) together with everything
/// the estimators need to know about it.
struct FlowSystem {
  std::string name;
  int dimension = 0;
  std::vector<std::string> component_names;  // optional, used for CSV headers
  /// Construction parameters, echoed into outputs.
  std::map<std::string, double> parameters;
  /// Ranks of E^u and E^s over the trapped set; 0/0 means no normal splitting
  /// is claimed and every Lyapunov exponent counts as tangent to Gamma.
  int unstable_dimension = 1;
  int stable_dimension = 1;
  /// The state is (q, p) in canonical coordinates with omega = dq ^ dp. The
  /// tangent spectrum then measures TGamma as the omega-complement of
  /// E^u + E^s instead of a quotient of the QR frame.
  bool canonical = false;

  std::function<Vec(const Vec&)> vector_field;
  std::function<Mat(const Vec&)> jacobian;
  std::function<double(const VecRef&, const VecRef&)> distance;
  std::function<bool(const Vec&)> escape_test;
  std::function<std::vector<Vec>(std::size_t count, std::uint64_t seed)> trapped_sampler;
  std::vector<ConservedFunctional> invariants;

  /// Optional chart identification applied after every step, e.g. the gluing
  /// map of a suspension. Tangent frames are transformed by its differential.
  std::function<void(Vec& state, Mat* frame)> identify;
  /// Optional projection back onto the trapped set for states that are within
  /// numerical resolution of it. Returns true when the state was moved.
  std::function<bool(Vec& state)> project;
  /// Optional norm used to measure growth along E^u (defaults to Euclidean).
  std::function<double(const Vec& state, const Vec& tangent)> unstable_norm;
  std::optional<PackingKeys> packing;
};

struct IntegratorConfig {
  double rel_tol = 1e-10;
  double abs_tol = 1e-10;
  double max_step = 0.1;
  double renorm_interval = 1.0;
  /// Apply FlowSystem::project after every accepted step.
  bool project = true;

  /// Throws InvalidParameters unless tolerances lie in (0, 1e-2] and the step
  /// and renormalization spacings are positive.
  void validate() const;

  /// Tight tolerances (1e-12) used for conservation checks.
  static IntegratorConfig reference();
};

enum class TrajectoryStatus { completed, escaped, step_underflow };

std::string to_string(TrajectoryStatus s);

struct Trajectory {
  std::vector<double> times;
  std::vector<Vec> states;
  std::vector<std::string> invariant_names;
  /// max_s |I(s) - I(0)| per conserved functional
  std::vector<double> max_drift;
  TrajectoryStatus status = TrajectoryStatus::completed;
  /// Escape-test crossing time (bisected to 1e-8) or the last valid time on
  /// step-size underflow.
  std::optional<double> stop_time;
  Vec last_valid_state;
};

/// Integrates the flow for affine time T (negative T integrates backwards).
/// With output_step > 0 states are recorded at multiples of output_step via
/// dense output; otherwise at every accepted step.
Trajectory integrate(const FlowSystem& system, const Vec& state, double T, const IntegratorConfig& config,
                     double output_step = 0.0);

/// Writes s, state components and per-invariant drift columns with a header
/// row; numbers use shortest round-trip formatting.
void write_trajectory_csv(std::ostream& os, const FlowSystem& system, const Trajectory& traj);

/// Base point, tangent frame (n x k), and the accumulated log growth of each
/// frame column. The frame columns carry whatever growth happened since the
/// last renormalization, so the total log growth of column i is
/// log_growth[i] + log |frame.col(i)| (exactly so for k = 1).
struct TangentBundleState {
  Vec base;
  Mat frame;
  Vec log_growth;
  double time = 0.0;
  bool degenerate_frame = false;  // condition number exceeded 1e12 between renormalizations
  TrajectoryStatus status = TrajectoryStatus::completed;
};

/// Stateful integrator of (x, V) with dx/ds = f(x), dV/ds = Df(x) V, with
/// QR renormalization every renorm_interval. Renormalization times are fixed
/// multiples of the interval measured from the start. The initial frame is
/// orthonormalized at construction (its column norms go into log_growth), so
/// rescaling the input frame only shifts log_growth.
class TangentFlow {
 public:
  TangentFlow(const FlowSystem& system, const Vec& state, const Mat& frame, const IntegratorConfig& config);
  ~TangentFlow();
  TangentFlow(TangentFlow&&) noexcept;
  TangentFlow& operator=(TangentFlow&&) noexcept;

  /// Integrates by dt (sign gives the direction). Throws NumericalFailure on
  /// step-size underflow.
  void advance(double dt);
  /// Orthonormalizes the frame now, folding the column norms into log_growth.
  void renormalize();
  const TangentBundleState& state() const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

TangentBundleState flow_with_tangent(const FlowSystem& system, const Vec& state, const Mat& directions, double T,
                                     const IntegratorConfig& config);

/// Total log growth per column (log_growth + log of the current column norm).
Vec total_log_growth(const TangentBundleState& s);

/// Benettin estimate: one tracked direction, an alignment transient of
/// length align (default T/5) discarded, then (log growth over a window of
/// length T) / T.
double top_lyapunov(const FlowSystem& system, const Vec& state, double T, const IntegratorConfig& config,
                    std::optional<double> align = std::nullopt, std::uint64_t seed = 0);

/// Deterministic unit vector drawn from (seed, stream).
Vec random_unit_vector(int n, std::uint64_t seed, std::uint64_t stream = 0);

}  // namespace tp
