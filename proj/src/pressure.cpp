#include "trapped_pressure/pressure.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>
#include <unordered_map>

#include "trapped_pressure/errors.hpp"
#include "trapped_pressure/parallel.hpp"

namespace tp {

namespace {

double unstable_log_norm(const FlowSystem& sys, const Vec& x, const Vec& v) {
  return std::log(sys.unstable_norm ? sys.unstable_norm(x, v) : v.norm());
}

double total_unstable(const FlowSystem& sys, const TangentFlow& tf) {
  const auto& st = tf.state();
  return st.log_growth[0] + unstable_log_norm(sys, st.base, st.frame.col(0));
}

struct Aligned {
  Vec start;
  Vec direction;
};

Aligned align(const FlowSystem& sys, const Vec& sample, const IntegratorConfig& cfg, const JacobianOptions& opt,
              std::uint64_t stream) {
  TangentFlow tf(sys, sample, random_unit_vector(sys.dimension, opt.seed, stream), cfg);
  if (opt.align_time > 0.0) tf.advance(opt.align_time);
  const auto& st = tf.state();
  return {st.base, st.frame.col(0).normalized()};
}

void check_grid(const std::vector<double>& T_grid) {
  if (T_grid.empty()) throw InvalidParameters("horizon grid is empty");
  double prev = 0.0;
  for (double T : T_grid) {
    if (!(T > prev) || !std::isfinite(T)) throw InvalidParameters("horizon grid must be positive and increasing");
    prev = T;
  }
}

UnstableGrowth growth_from(const FlowSystem& sys, const Aligned& a, const std::vector<double>& T_grid,
                           const IntegratorConfig& cfg) {
  UnstableGrowth g;
  g.start = a.start;
  g.T = T_grid;
  TangentFlow tf(sys, a.start, a.direction, cfg);
  const double initial = total_unstable(sys, tf);
  double t = 0.0;
  for (double T : T_grid) {
    tf.advance(T - t);
    t = T;
    g.lambda.push_back(total_unstable(sys, tf) - initial);
  }
  return g;
}

// Least-squares line y = a + b x; returns {a, b, stderr(b), residual ss}.
struct LineFit {
  double intercept, slope, slope_stderr, ssr, intercept_stderr;
};

LineFit fit_line(const std::vector<double>& x, const std::vector<double>& y) {
  const auto n = static_cast<double>(x.size());
  const double mx = std::accumulate(x.begin(), x.end(), 0.0) / n;
  const double my = std::accumulate(y.begin(), y.end(), 0.0) / n;
  double sxx = 0, sxy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    sxy += (x[i] - mx) * (y[i] - my);
  }
  LineFit f{};
  f.slope = sxx > 0 ? sxy / sxx : 0.0;
  f.intercept = my - f.slope * mx;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double r = y[i] - f.intercept - f.slope * x[i];
    f.ssr += r * r;
  }
  if (x.size() > 2 && sxx > 0) {
    const double s2 = f.ssr / (n - 2);
    f.slope_stderr = std::sqrt(s2 / sxx);
    f.intercept_stderr = std::sqrt(s2 * (1.0 / n + mx * mx / sxx));
  }
  return f;
}

}  // namespace

UnstableGrowth unstable_growth(const FlowSystem& system, const Vec& sample, const std::vector<double>& T_grid,
                               const IntegratorConfig& config, const JacobianOptions& options,
                               std::size_t sample_id) {
  check_grid(T_grid);
  auto g = growth_from(system, align(system, sample, config, options, 2 * sample_id), T_grid, config);
  if (options.check_alignment) {
    const auto h = growth_from(system, align(system, sample, config, options, 2 * sample_id + 1), T_grid, config);
    const double T = T_grid.back();
    g.alignment_gap = std::abs(g.lambda.back() - h.lambda.back()) / T;
    g.alignment_flagged = g.alignment_gap > 1e-4;
  }
  return g;
}

JacobianRecord log_unstable_jacobian(const FlowSystem& system, const Vec& sample, double T,
                                     const IntegratorConfig& config, const JacobianOptions& options,
                                     std::size_t sample_id) {
  const auto g = unstable_growth(system, sample, {T}, config, options, sample_id);
  JacobianRecord rec;
  rec.sample = sample_id;
  rec.T = T;
  rec.lambda = g.lambda[0];
  rec.rate = g.lambda[0] / T;
  rec.alignment_flagged = g.alignment_flagged;
  rec.alignment_gap = g.alignment_gap;
  return rec;
}

double telescoping_check(const FlowSystem& system, const Vec& sample, int k, const IntegratorConfig& config,
                         const JacobianOptions& options, std::size_t sample_id) {
  if (k < 1) throw InvalidParameters("telescoping check needs k >= 1");
  const auto a = align(system, sample, config, options, 2 * sample_id);

  std::vector<std::pair<Vec, Vec>> legs{{a.start, a.direction}};
  TangentFlow main(system, a.start, a.direction, config);
  const double initial = total_unstable(system, main);
  for (int j = 0; j < k; ++j) {
    main.advance(1.0);
    if (j + 1 < k) legs.emplace_back(main.state().base, main.state().frame.col(0));
  }
  const double whole = total_unstable(system, main) - initial;

  double sum = 0.0;
  for (const auto& [x, v] : legs) {
    TangentFlow leg(system, x, v, config);
    const double i0 = total_unstable(system, leg);
    leg.advance(1.0);
    sum += total_unstable(system, leg) - i0;
  }
  return std::abs(whole - sum);
}

namespace {

// Cumulative log growth sampled at equal steps; returns per-component slopes
// and half-widths (half the gap between the two window-half slopes).
void window_rates(const std::vector<double>& times, const std::vector<Vec>& cum, std::vector<double>& rate,
                  std::vector<double>& hw) {
  const auto n = cum.front().size();
  const std::size_t half = times.size() / 2;
  rate.assign(n, 0.0);
  hw.assign(n, 0.0);
  for (Eigen::Index i = 0; i < n; ++i) {
    std::vector<double> y(times.size());
    for (std::size_t m = 0; m < times.size(); ++m) y[m] = cum[m][i];
    rate[i] = fit_line(times, y).slope;
    const std::vector<double> t1(times.begin(), times.begin() + half + 1), y1(y.begin(), y.begin() + half + 1);
    const std::vector<double> t2(times.begin() + half, times.end()), y2(y.begin() + half, y.end());
    hw[i] = 0.5 * std::abs(fit_line(t1, y1).slope - fit_line(t2, y2).slope);
  }
}

// Householder QR with a positive diagonal; adds log R_ii to *log_diag.
Mat orthonormalize(const Mat& A, Vec* log_diag) {
  Eigen::HouseholderQR<Mat> qr(A);
  Mat Q = qr.householderQ() * Mat::Identity(A.rows(), A.cols());
  for (Eigen::Index j = 0; j < A.cols(); ++j) {
    double d = qr.matrixQR()(j, j);
    if (d < 0) {
      Q.col(j) *= -1.0;
      d = -d;
    }
    if (log_diag) (*log_diag)[j] += std::log(d);
  }
  return Q;
}

// Projection onto the omega-complement of span(B) along span(B).
class SymplecticProjector {
 public:
  explicit SymplecticProjector(const Mat& B) : B_(B) {
    const Eigen::Index h = B.rows() / 2;
    JB_.resize(B.rows(), B.cols());
    JB_.topRows(h) = -B.bottomRows(h);
    JB_.bottomRows(h) = B.topRows(h);
    // omega(a, b) = a^T J b; JB_ holds J^T B so that omega(B, v) = JB_^T v
    lu_.compute(JB_.transpose() * B);
    if (lu_.rank() < B.cols()) throw NumericalFailure("normal directions are not symplectically paired");
  }
  Mat apply(const Mat& V) const { return V - B_ * lu_.solve(JB_.transpose() * V); }

 private:
  Mat B_, JB_;
  Eigen::FullPivLU<Mat> lu_;
};

constexpr double kAlignTime = 20.0;

Spectrum assemble(const std::vector<double>& rate, const std::vector<double>& hw, int nu, int ns) {
  Spectrum sp;
  sp.exponents = rate;
  sp.half_width = hw;
  const int n = static_cast<int>(rate.size());
  for (int i = nu; i < n - ns; ++i) sp.tangent.push_back(i);
  sp.unstable_rate = nu > 0 ? sp.exponents[nu - 1] : sp.exponents.front();
  sp.stable_rate = ns > 0 ? -sp.exponents[n - ns] : -sp.exponents.back();
  double best = -1.0;
  for (int i : sp.tangent) {
    const double v = std::abs(sp.exponents[i]) + sp.half_width[i];
    if (v > best) {
      best = v;
      sp.mu_max = std::abs(sp.exponents[i]);
      sp.mu_max_half_width = sp.half_width[i];
    }
  }
  auto close = [&](int i, int j) {
    return std::abs(sp.exponents[i] - sp.exponents[j]) < 3.0 * (sp.half_width[i] + sp.half_width[j]);
  };
  if (nu > 0 && nu < n) sp.splitting_ambiguous = sp.splitting_ambiguous || close(nu - 1, nu);
  if (ns > 0 && n - ns - 1 >= 0) sp.splitting_ambiguous = sp.splitting_ambiguous || close(n - ns - 1, n - ns);
  return sp;
}

// Sorts a block of rates (with their half-widths) in descending order.
void sort_block(std::vector<double>& rate, std::vector<double>& hw, std::size_t lo, std::size_t hi) {
  std::vector<std::size_t> idx(hi - lo);
  std::iota(idx.begin(), idx.end(), lo);
  std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return rate[a] > rate[b]; });
  std::vector<double> r, h;
  for (auto i : idx) {
    r.push_back(rate[i]);
    h.push_back(hw[i]);
  }
  std::copy(r.begin(), r.end(), rate.begin() + lo);
  std::copy(h.begin(), h.end(), hw.begin() + lo);
}

Spectrum qr_spectrum(const FlowSystem& system, const Vec& sample, double T, const IntegratorConfig& config,
                     double transient) {
  const int n = system.dimension;
  const double dt = config.renorm_interval;
  TangentFlow tf(system, sample, Mat::Identity(n, n), config);
  if (transient > 0.0) tf.advance(transient);
  tf.renormalize();
  const Vec g0 = tf.state().log_growth;

  const int M = std::max(2, static_cast<int>(std::ceil(T / dt - 1e-9)));
  std::vector<double> times{0.0};
  std::vector<Vec> cum{Vec::Zero(n)};
  for (int m = 1; m <= M; ++m) {
    tf.advance(dt);
    tf.renormalize();
    times.push_back(m * dt);
    cum.push_back(tf.state().log_growth - g0);
  }
  std::vector<double> rate, hw;
  window_rates(times, cum, rate, hw);
  sort_block(rate, hw, 0, rate.size());
  return assemble(rate, hw, system.unstable_dimension, system.stable_dimension);
}

// E^u is tracked forward, E^s by one-step backward legs from the recorded
// orbit, and TGamma as their omega-complement, reprojected every step so
// that round-off never picks up the normal growth.
Spectrum canonical_spectrum(const FlowSystem& system, const Vec& sample, double T, const IntegratorConfig& config,
                            double transient) {
  const int n = system.dimension, nu = system.unstable_dimension, ns = system.stable_dimension;
  const int m = n - nu - ns;
  const double dt = config.renorm_interval;
  const int kt = static_cast<int>(std::ceil(transient / dt - 1e-9));
  const int kw = std::max(2, static_cast<int>(std::ceil(T / dt - 1e-9)));
  const int ka = static_cast<int>(std::ceil(kAlignTime / dt - 1e-9));
  const int K = kt + kw, Kf = K + ka;

  auto random_frame = [&](int k, std::uint64_t stream) {
    Mat F(n, k);
    for (int j = 0; j < k; ++j) F.col(j) = random_unit_vector(n, 0, stream + j);
    return F;
  };

  std::vector<Vec> xs;
  std::vector<Mat> U, S(Kf + 1);
  std::vector<Vec> ucum;
  {
    TangentFlow f(system, sample, random_frame(nu, 0), config);
    const Vec g0 = f.state().log_growth;
    for (int k = 0;; ++k) {
      xs.push_back(f.state().base);
      U.push_back(f.state().frame);
      ucum.push_back(f.state().log_growth - g0);
      if (k == Kf) break;
      f.advance(dt);
      f.renormalize();
    }
  }
  std::vector<Vec> scum(Kf + 1, Vec::Zero(ns));
  S[Kf] = orthonormalize(random_frame(ns, 1000), nullptr);
  std::vector<Vec> sgrowth(Kf);
  for (int k = Kf - 1; k >= 0; --k) {
    TangentFlow b(system, xs[k + 1], S[k + 1], config);
    const Vec g0 = b.state().log_growth;
    b.advance(-dt);
    b.renormalize();
    S[k] = b.state().frame;
    sgrowth[k] = b.state().log_growth - g0;
  }
  for (int k = 0; k < Kf; ++k) scum[k + 1] = scum[k] - sgrowth[k];

  auto projector = [&](int k) {
    Mat B(n, nu + ns);
    B << U[k], S[k];
    return SymplecticProjector(B);
  };

  const int k0 = std::min(ka, kt);
  Mat W;
  {
    const Mat P = projector(k0).apply(Mat::Identity(n, n));
    Eigen::ColPivHouseholderQR<Mat> qr(P);
    W = (qr.householderQ() * Mat::Identity(n, n)).leftCols(m);
  }
  std::vector<Vec> tcum(K + 1, Vec::Zero(m));
  for (int k = k0; k < K; ++k) {
    TangentFlow t(system, xs[k], W, config);
    const Vec g0 = t.state().log_growth;
    t.advance(dt);
    t.renormalize();
    Vec inc = t.state().log_growth - g0;
    W = orthonormalize(projector(k + 1).apply(t.state().frame), &inc);
    tcum[k + 1] = tcum[k] + inc;
  }

  std::vector<double> times;
  std::vector<Vec> cum;
  for (int k = kt; k <= K; ++k) {
    times.push_back((k - kt) * dt);
    Vec c(n);
    c << ucum[k] - ucum[kt], tcum[k] - tcum[kt], scum[k] - scum[kt];
    cum.push_back(c);
  }
  std::vector<double> rate, hw;
  window_rates(times, cum, rate, hw);
  sort_block(rate, hw, 0, nu);
  sort_block(rate, hw, nu, nu + m);
  sort_block(rate, hw, nu + m, n);
  return assemble(rate, hw, nu, ns);
}

}  // namespace

Spectrum tangent_spectrum(const FlowSystem& system, const Vec& sample, double T, const IntegratorConfig& config,
                          double transient) {
  if (!(T > 0.0)) throw InvalidParameters("spectrum horizon must be positive");
  if (transient < 0.0) transient = T;
  const int nu = system.unstable_dimension, ns = system.stable_dimension;
  if (system.canonical && nu > 0 && ns > 0 && system.dimension % 2 == 0)
    return canonical_spectrum(system, sample, T, config, transient);
  return qr_spectrum(system, sample, T, config, transient);
}

NHReport nh_check(const FlowSystem& system, const std::vector<Vec>& samples, double T, int r_cap,
                  const IntegratorConfig& config, std::size_t workers) {
  if (r_cap < 1) throw InvalidParameters("r_cap must be at least 1");
  if (samples.empty()) throw InvalidParameters("nh_check needs samples");
  std::vector<Spectrum> spectra(samples.size());
  parallel_for(samples.size(), workers, [&](std::size_t i) {
    spectra[i] = tangent_spectrum(system, samples[i], T, config);
  });

  NHReport rep;
  rep.system = system.name;
  rep.samples = samples.size();
  rep.T = T;
  rep.r_cap = r_cap;
  rep.nu_min = std::numeric_limits<double>::infinity();
  rep.nu_s = std::numeric_limits<double>::infinity();
  double worst = -1.0;
  for (const auto& sp : spectra) {
    rep.unstable_rates.push_back(sp.unstable_rate);
    rep.tangent_max.push_back(sp.mu_max);
    rep.nu_min = std::min(rep.nu_min, sp.unstable_rate);
    rep.nu_s = std::min(rep.nu_s, sp.stable_rate);
    rep.splitting_ambiguous = rep.splitting_ambiguous || sp.splitting_ambiguous;
    if (sp.mu_max + sp.mu_max_half_width > worst) {
      worst = sp.mu_max + sp.mu_max_half_width;
      rep.mu_max = sp.mu_max;
      rep.mu_max_half_width = sp.mu_max_half_width;
    }
  }
  rep.degenerate = !(rep.nu_min > 0.0);
  const double bound = rep.mu_max + rep.mu_max_half_width;
  rep.r_star = 0;
  if (!rep.degenerate) {
    for (int r = r_cap; r >= 1; --r) {
      if (rep.nu_min > r * bound) {
        rep.r_star = r;
        break;
      }
    }
  }
  return rep;
}

namespace {

// Uniform cell grid over packing keys (periodic keys wrap).
class CellGrid {
 public:
  CellGrid(const std::vector<double>& periods, const std::vector<double>& lo, const std::vector<double>& hi,
           double cell) {
    const std::size_t d = periods.size();
    ncell_.resize(d);
    size_.resize(d);
    origin_.resize(d);
    periodic_.resize(d);
    double total = 1.0;
    for (std::size_t i = 0; i < d; ++i) {
      periodic_[i] = periods[i] > 0.0;
      if (periodic_[i]) {
        ncell_[i] = std::max<long>(1, static_cast<long>(std::floor(periods[i] / cell)));
        size_[i] = periods[i] / ncell_[i];
        origin_[i] = 0.0;
        period_.push_back(periods[i]);
      } else {
        ncell_[i] = std::max<long>(1, static_cast<long>(std::floor((hi[i] - lo[i]) / cell)) + 1);
        size_[i] = cell;
        origin_[i] = lo[i];
        period_.push_back(0.0);
      }
      total *= static_cast<double>(ncell_[i]);
    }
    dense_ = total <= static_cast<double>(1u << 22);
    if (dense_) cells_.resize(static_cast<std::size_t>(total));
  }

  std::vector<long> coords(const std::vector<double>& key) const {
    std::vector<long> c(key.size());
    for (std::size_t i = 0; i < key.size(); ++i) {
      double k = key[i];
      if (periodic_[i]) k -= period_[i] * std::floor(k / period_[i]);
      long v = static_cast<long>(std::floor((k - origin_[i]) / size_[i]));
      c[i] = std::clamp(v, 0L, ncell_[i] - 1);
    }
    return c;
  }

  void insert(const std::vector<long>& c, std::uint32_t id) { bucket(id_of(c)).push_back(id); }

  /// Calls f(id) for members of all neighbouring cells until f returns true.
  template <class F>
  bool any_neighbor(const std::vector<long>& c, F&& f) const {
    const std::size_t d = c.size();
    std::vector<long> off(d, -1), cur(d);
    for (;;) {
      bool valid = true;
      for (std::size_t i = 0; i < d && valid; ++i) {
        long v = c[i] + off[i];
        if (periodic_[i]) {
          // skip duplicate visits when a periodic axis has fewer than 3 cells
          if (ncell_[i] < 3 && off[i] != 0 && (ncell_[i] == 1 || off[i] == 1)) valid = false;
          v = ((v % ncell_[i]) + ncell_[i]) % ncell_[i];
        } else if (v < 0 || v >= ncell_[i]) {
          valid = false;
        }
        cur[i] = v;
      }
      if (valid) {
        if (const auto* b = find(id_of(cur)))
          for (std::uint32_t id : *b)
            if (f(id)) return true;
      }
      std::size_t i = 0;
      for (; i < d; ++i) {
        if (++off[i] <= 1) break;
        off[i] = -1;
      }
      if (i == d) return false;
    }
  }

 private:
  std::uint64_t id_of(const std::vector<long>& c) const {
    std::uint64_t id = 0;
    for (std::size_t i = c.size(); i-- > 0;) id = id * static_cast<std::uint64_t>(ncell_[i]) + c[i];
    return id;
  }
  std::vector<std::uint32_t>& bucket(std::uint64_t id) { return dense_ ? cells_[id] : sparse_[id]; }
  const std::vector<std::uint32_t>* find(std::uint64_t id) const {
    if (dense_) return cells_[id].empty() ? nullptr : &cells_[id];
    auto it = sparse_.find(id);
    return it == sparse_.end() ? nullptr : &it->second;
  }

  std::vector<long> ncell_;
  std::vector<double> size_, origin_, period_;
  std::vector<bool> periodic_;
  bool dense_ = true;
  std::vector<std::vector<std::uint32_t>> cells_;
  std::unordered_map<std::uint64_t, std::vector<std::uint32_t>> sparse_;
};

}  // namespace

std::vector<std::size_t> greedy_separated_set(const FlowSystem& system, const std::vector<Mat>& paths, double eps,
                                              std::size_t steps, double distance_scale) {
  if (!(eps > 0.0)) throw InvalidParameters("eps must be positive");
  if (!(distance_scale > 0.0)) throw InvalidParameters("distance scale must be positive");
  const double e = eps / distance_scale;  // threshold on the unscaled distance
  for (const auto& p : paths)
    if (p.cols() <= static_cast<Eigen::Index>(steps)) throw InvalidParameters("path shorter than the horizon");

  // b blocks a when they stay within e at every sampled time
  auto blocks = [&](std::size_t a, std::size_t b) {
    const Mat& pa = paths[a];
    const Mat& pb = paths[b];
    if (!(system.distance(pa.col(steps), pb.col(steps)) < e)) return false;
    for (std::size_t t = 0; t < steps; ++t)
      if (!(system.distance(pa.col(t), pb.col(t)) < e)) return false;
    return true;
  };

  std::vector<std::size_t> selected;
  if (!system.packing) {
    for (std::size_t i = 0; i < paths.size(); ++i) {
      bool blocked = false;
      for (std::size_t j : selected)
        if (blocks(i, j)) {
          blocked = true;
          break;
        }
      if (!blocked) selected.push_back(i);
    }
    return selected;
  }

  // Blockers are within e at times 0 and T, so their keys at both times lie
  // in neighbouring cells of a grid with cells of side >= e.
  const auto& pk = *system.packing;
  std::vector<std::vector<double>> keys(paths.size());
  for (std::size_t i = 0; i < paths.size(); ++i) {
    auto k0 = pk.keys(paths[i].col(0));
    auto k1 = pk.keys(paths[i].col(steps));
    k0.insert(k0.end(), k1.begin(), k1.end());
    keys[i] = std::move(k0);
  }
  std::vector<double> periods = pk.periods;
  periods.insert(periods.end(), pk.periods.begin(), pk.periods.end());
  const std::size_t d = periods.size();
  std::vector<double> lo(d, std::numeric_limits<double>::infinity()), hi(d, -std::numeric_limits<double>::infinity());
  for (const auto& k : keys)
    for (std::size_t i = 0; i < d; ++i) {
      lo[i] = std::min(lo[i], k[i]);
      hi[i] = std::max(hi[i], k[i]);
    }
  if (paths.empty()) return selected;
  CellGrid grid(periods, lo, hi, e);
  for (std::size_t i = 0; i < paths.size(); ++i) {
    const auto c = grid.coords(keys[i]);
    const bool blocked = grid.any_neighbor(c, [&](std::uint32_t j) { return blocks(i, j); });
    if (!blocked) {
      selected.push_back(i);
      grid.insert(c, static_cast<std::uint32_t>(i));
    }
  }
  return selected;
}

void PressureConfig::validate() const {
  integrator.validate();
  if (eps_grid.empty()) throw InvalidParameters("eps grid is empty");
  for (double e : eps_grid)
    if (!(e > 0.0)) throw InvalidParameters("eps values must be positive");
  check_grid(T_grid);
  if (s_values.empty()) throw InvalidParameters("no s values");
  for (double s : s_values)
    if (!std::isfinite(s)) throw InvalidParameters("s values must be finite");
  if (!(h_sep > 0.0)) throw InvalidParameters("h_sep must be positive");
  if (!(distance_scale > 0.0)) throw InvalidParameters("distance_scale must be positive");
  for (double T : T_grid) {
    const double k = T / h_sep;
    if (std::abs(k - std::round(k)) > 1e-9 * std::max(1.0, k))
      throw InvalidParameters("every horizon must be a multiple of h_sep");
  }
  if (jacobian.align_time < 0.0) throw InvalidParameters("align_time must be nonnegative");
}

PreparedSamples prepare_samples(const FlowSystem& system, const std::vector<Vec>& samples,
                                const PressureConfig& config) {
  config.validate();
  const auto K = static_cast<std::size_t>(std::llround(config.T_grid.back() / config.h_sep));
  std::vector<std::size_t> t_index;
  for (double T : config.T_grid) t_index.push_back(static_cast<std::size_t>(std::llround(T / config.h_sep)));

  struct Slot {
    Mat path;
    std::vector<double> lambda;
    bool ok = false;
  };
  std::vector<Slot> slots(samples.size());
  parallel_for(samples.size(), config.workers, [&](std::size_t i) {
    Slot& s = slots[i];
    try {
      const auto a = align(system, samples[i], config.integrator, config.jacobian, 2 * i);
      TangentFlow tf(system, a.start, a.direction, config.integrator);
      const double initial = total_unstable(system, tf);
      s.path.resize(system.dimension, static_cast<Eigen::Index>(K + 1));
      s.path.col(0) = a.start;
      std::size_t q = 0;
      for (std::size_t j = 1; j <= K; ++j) {
        tf.advance(config.h_sep);
        const Vec& x = tf.state().base;
        if (system.escape_test && system.escape_test(x)) return;
        s.path.col(static_cast<Eigen::Index>(j)) = x;
        while (q < t_index.size() && t_index[q] == j) {
          s.lambda.push_back(total_unstable(system, tf) - initial);
          ++q;
        }
      }
      s.ok = true;
    } catch (const NumericalFailure&) {
      s.ok = false;
    }
  });

  PreparedSamples out;
  for (std::size_t i = 0; i < slots.size(); ++i) {
    if (!slots[i].ok) {
      ++out.dropped;
      continue;
    }
    out.paths.push_back(std::move(slots[i].path));
    out.lambda.push_back(std::move(slots[i].lambda));
    out.source_index.push_back(i);
  }
  return out;
}

std::vector<PressureEstimate> pressure_separated(const FlowSystem& system, const PreparedSamples& prepared,
                                                 const PressureConfig& config) {
  config.validate();
  if (prepared.paths.empty()) throw NumericalFailure("no usable samples for the pressure estimate");
  const std::size_t ne = config.eps_grid.size(), nT = config.T_grid.size(), ns = config.s_values.size();

  std::vector<PressureEstimate> est(ns);
  for (std::size_t k = 0; k < ns; ++k) {
    est[k].s = config.s_values[k];
    est[k].eps_grid = config.eps_grid;
    est[k].T_grid = config.T_grid;
    est[k].Z = Eigen::MatrixXd::Zero(ne, nT);
    est[k].counts = Eigen::MatrixXi::Zero(ne, nT);
    est[k].samples_used = prepared.paths.size();
    est[k].samples_dropped = prepared.dropped;
  }

  // (eps, T) cells are independent; each is a single-threaded greedy pass
  std::vector<std::vector<std::size_t>> chosen(ne * nT);
  parallel_for(ne * nT, config.workers, [&](std::size_t c) {
    const std::size_t a = c / nT, b = c % nT;
    const auto steps = static_cast<std::size_t>(std::llround(config.T_grid[b] / config.h_sep));
    chosen[c] = greedy_separated_set(system, prepared.paths, config.eps_grid[a], steps, config.distance_scale);
  });

  for (std::size_t a = 0; a < ne; ++a)
    for (std::size_t b = 0; b < nT; ++b) {
      const auto& sel = chosen[a * nT + b];
      for (std::size_t k = 0; k < ns; ++k) {
        double z = 0.0;
        for (std::size_t i : sel) z += std::exp(-config.s_values[k] * prepared.lambda[i][b]);
        est[k].Z(a, b) = z;
        est[k].counts(a, b) = static_cast<int>(sel.size());
      }
    }

  const std::size_t window = (nT + 1) / 2;
  for (auto& e : est) {
    std::vector<double> Ts(config.T_grid.end() - window, config.T_grid.end());
    for (std::size_t a = 0; a < ne; ++a) {
      std::vector<double> y;
      for (std::size_t b = nT - window; b < nT; ++b) y.push_back(std::log(e.Z(a, b)));
      if (window >= 2) {
        const auto f = fit_line(Ts, y);
        e.slopes.push_back(f.slope);
        e.slope_stderr.push_back(f.slope_stderr);
      } else {
        e.slopes.push_back(y[0] / Ts[0]);
        e.slope_stderr.push_back(0.0);
      }
    }
    if (ne >= 2) {
      const auto f = fit_line(config.eps_grid, e.slopes);
      e.P_hat = f.intercept;
      e.eps_fit_rms = ne > 2 ? std::sqrt(f.ssr / static_cast<double>(ne - 2)) : 0.0;
    } else {
      e.P_hat = e.slopes[0];
    }
    if (ne < 3) e.warnings.push_back("fewer than three eps values; eps extrapolation is unreliable");
    e.fit_residual = e.eps_fit_rms;
    for (double se : e.slope_stderr) e.fit_residual = std::max(e.fit_residual, se);

    const auto emin = std::min_element(config.eps_grid.begin(), config.eps_grid.end()) - config.eps_grid.begin();
    const auto emax = std::max_element(config.eps_grid.begin(), config.eps_grid.end()) - config.eps_grid.begin();
    const int cmin = e.counts(emin, nT - 1), cmax = e.counts(emax, nT - 1);
    if (ne >= 2 && cmin < 10 * cmax) {
      std::ostringstream w;
      w << "insufficient-sample: selected " << cmin << " at eps=" << config.eps_grid[emin] << " vs " << cmax
        << " at eps=" << config.eps_grid[emax] << " (T=" << config.T_grid.back() << "); need a 10x ratio";
      e.warnings.push_back(w.str());
    }
  }
  return est;
}

std::vector<PressureEstimate> pressure_separated(const FlowSystem& system, const std::vector<Vec>& samples,
                                                 const PressureConfig& config) {
  return pressure_separated(system, prepare_samples(system, samples, config), config);
}

PressureEstimate pressure_separated(const FlowSystem& system, double s, const std::vector<double>& eps_grid,
                                    const std::vector<double>& T_grid, const std::vector<Vec>& samples,
                                    PressureConfig config) {
  config.s_values = {s};
  config.eps_grid = eps_grid;
  config.T_grid = T_grid;
  return pressure_separated(system, samples, config).front();
}

VariationalEstimate pressure_variational(const NHReport& nh, double s, const PreparedSamples& prepared,
                                         const std::vector<double>& T_grid) {
  if (nh.degenerate || nh.r_star != nh.r_cap) {
    std::ostringstream msg;
    msg << "variational reduction requires infinity-normally hyperbolic trapping; nh_check gave r_star = "
        << nh.r_star << " < r_cap = " << nh.r_cap << " for " << nh.system;
    throw NotNormallyHyperbolic(msg.str());
  }
  if (prepared.lambda.empty()) throw NumericalFailure("no usable samples for the variational estimate");
  VariationalEstimate v;
  v.s = s;
  v.T = T_grid.back();
  v.min_rate = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < prepared.lambda.size(); ++i) {
    const double rate = prepared.lambda[i].back() / v.T;
    if (rate < v.min_rate) {
      v.min_rate = rate;
      v.argmin_sample = prepared.source_index[i];
    }
  }
  v.P = -s * v.min_rate;
  return v;
}

VariationalEstimate pressure_variational(const FlowSystem& system, const NHReport& nh, double s,
                                         const std::vector<Vec>& samples, const PressureConfig& config) {
  if (nh.degenerate || nh.r_star != nh.r_cap) return pressure_variational(nh, s, PreparedSamples{}, config.T_grid);
  return pressure_variational(nh, s, prepare_samples(system, samples, config), config.T_grid);
}

}  // namespace tp
