#pragma once

// Logarithmic unstable Jacobians, tangent Lyapunov spectra, the r-normal
// hyperbolicity inequality, and two estimators of the topological pressure
// P(s): weighted (eps, T)-separated sets and the zero-entropy variational
// reduction P(s) = -s inf lambda^u.

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "trapped_pressure/flow.hpp"

namespace tp {

struct JacobianOptions {
  /// Forward transient that converges the tracked direction onto E^u; the
  /// measurement window starts at phi^{align_time}(p).
  double align_time = 20.0;
  /// Rerun with a second random direction and flag a rate gap above 1e-4.
  bool check_alignment = false;
  std::uint64_t seed = 0;
};

struct JacobianRecord {
  std::size_t sample = 0;
  double T = 0.0;
  double lambda = 0.0;  // lambda^u_T
  double rate = 0.0;    // lambda / T
  bool alignment_flagged = false;
  double alignment_gap = 0.0;
};

/// lambda^u along a grid of horizons, all measured from the same aligned
/// start point.
struct UnstableGrowth {
  Vec start;                  // phi^{align_time}(p)
  std::vector<double> T;      // increasing
  std::vector<double> lambda; // lambda^u_T for each T
  bool alignment_flagged = false;
  double alignment_gap = 0.0;
};

/// Growth of the tracked direction in the system's unstable norm (Euclidean
/// if none), with the direction drawn from (seed, stream = sample id).
UnstableGrowth unstable_growth(const FlowSystem& system, const Vec& sample, const std::vector<double>& T_grid,
                               const IntegratorConfig& config, const JacobianOptions& options = {},
                               std::size_t sample_id = 0);

JacobianRecord log_unstable_jacobian(const FlowSystem& system, const Vec& sample, double T,
                                     const IntegratorConfig& config, const JacobianOptions& options = {},
                                     std::size_t sample_id = 0);

/// |lambda^u_k(p') - sum_{j<k} lambda^u_1(phi^j p')| where each one-unit leg
/// restarts from the direction tracked by the long run.
double telescoping_check(const FlowSystem& system, const Vec& sample, int k, const IntegratorConfig& config,
                         const JacobianOptions& options = {}, std::size_t sample_id = 0);

struct Spectrum {
  std::vector<double> exponents;   // unstable, tangent, stable blocks
  std::vector<double> half_width;  // per exponent
  /// Indices into exponents of those tangent to Gamma: all but the top
  /// unstable_dimension and bottom stable_dimension.
  std::vector<int> tangent;
  double unstable_rate = 0.0;  // smallest unstable exponent (top if none)
  double stable_rate = 0.0;    // minus the largest stable exponent
  double mu_max = 0.0;         // max |tangent exponent|
  double mu_max_half_width = 0.0;
  /// Two exponents closer than 3x their combined half-widths, across the
  /// normal/tangent boundary.
  bool splitting_ambiguous = false;
};

/// Lyapunov spectrum from least-squares slopes of cumulative log growth over
/// a window of length T after a transient (default T); half-widths are half
/// the gap between the slopes of the two window halves. Canonical systems
/// measure TGamma directly as the omega-complement of E^u + E^s; others use
/// the full-frame QR (Benettin) spectrum. Exponents are descending within
/// the unstable, tangent and stable blocks.
Spectrum tangent_spectrum(const FlowSystem& system, const Vec& sample, double T, const IntegratorConfig& config,
                          double transient = -1.0);

struct NHReport {
  std::string system;
  std::size_t samples = 0;
  double T = 0.0;
  double nu_min = 0.0;
  double nu_s = 0.0;
  double mu_max = 0.0;
  double mu_max_half_width = 0.0;
  int r_cap = 0;
  int r_star = 0;
  bool degenerate = false;  // nu_min <= 0
  bool splitting_ambiguous = false;
  std::vector<double> unstable_rates;  // per sample
  std::vector<double> tangent_max;     // per sample, max |tangent exponent|
};

/// r_star = largest r <= r_cap with nu_min > r (mu_max + half-width).
NHReport nh_check(const FlowSystem& system, const std::vector<Vec>& samples, double T, int r_cap,
                  const IntegratorConfig& config, std::size_t workers = 0);

/// Greedy maximal (eps, T)-separated subset in fixed order. paths[i] holds
/// the states of trajectory i as columns at a common time step; the first
/// `steps` + 1 columns cover [0, T].
std::vector<std::size_t> greedy_separated_set(const FlowSystem& system, const std::vector<Mat>& paths, double eps,
                                              std::size_t steps, double distance_scale = 1.0);

struct PressureConfig {
  std::vector<double> eps_grid{0.2, 0.1, 0.05};
  std::vector<double> T_grid{10, 20, 30, 40, 60};
  std::vector<double> s_values{0.0};
  double h_sep = 0.5;
  /// Multiplies every distance; a robustness diagnostic.
  double distance_scale = 1.0;
  IntegratorConfig integrator;
  JacobianOptions jacobian;
  std::size_t workers = 0;

  void validate() const;
};

/// Per-sample data shared by all (eps, T, s): the orbit from the aligned
/// start sampled every h_sep, and lambda^u at each T of the grid.
struct PreparedSamples {
  std::vector<Mat> paths;
  std::vector<std::vector<double>> lambda;  // [sample][T index]
  std::vector<std::size_t> source_index;    // index into the input samples
  std::size_t dropped = 0;                  // escaped or failed
};

PreparedSamples prepare_samples(const FlowSystem& system, const std::vector<Vec>& samples,
                                const PressureConfig& config);

struct PressureEstimate {
  double s = 0.0;
  std::vector<double> eps_grid;
  std::vector<double> T_grid;
  Eigen::MatrixXd Z;                   // [eps][T]
  Eigen::MatrixXi counts;              // selected-set sizes [eps][T]
  std::vector<double> slopes;          // per eps
  std::vector<double> slope_stderr;    // per eps
  double P_hat = 0.0;
  double eps_fit_rms = 0.0;
  double fit_residual = 0.0;           // max(eps_fit_rms, max slope_stderr)
  std::vector<std::string> warnings;
  std::size_t samples_used = 0;
  std::size_t samples_dropped = 0;
};

/// One estimate per s in config.s_values, from the same selected sets.
std::vector<PressureEstimate> pressure_separated(const FlowSystem& system, const PreparedSamples& prepared,
                                                 const PressureConfig& config);
std::vector<PressureEstimate> pressure_separated(const FlowSystem& system, const std::vector<Vec>& samples,
                                                 const PressureConfig& config);
PressureEstimate pressure_separated(const FlowSystem& system, double s, const std::vector<double>& eps_grid,
                                    const std::vector<double>& T_grid, const std::vector<Vec>& samples,
                                    PressureConfig config);

struct VariationalEstimate {
  double s = 0.0;
  double P = 0.0;
  double min_rate = 0.0;
  std::size_t argmin_sample = 0;  // index into the input samples
  double T = 0.0;
};

/// -s min_p lambda^u_T(p) / T at the largest T of the prepared grid. Throws
/// NotNormallyHyperbolic unless nh.r_star == nh.r_cap.
VariationalEstimate pressure_variational(const NHReport& nh, double s, const PreparedSamples& prepared,
                                         const std::vector<double>& T_grid);
VariationalEstimate pressure_variational(const FlowSystem& system, const NHReport& nh, double s,
                                         const std::vector<Vec>& samples, const PressureConfig& config);

}  // namespace tp
