#pragma once

// Monte Carlo verification: empirical tails, bound domination, interval
// coverage, the martingale normalization and the normal-tail comparison.
//
// Replica i always draws from ReplicaStream(seed, i) and writes only its own
// slot; aggregation runs in replica order afterwards. Reports therefore do not
// depend on the worker count.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <exception>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "bpre/bounds.hpp"
#include "bpre/error.hpp"
#include "bpre/intervals.hpp"
#include "bpre/offspring.hpp"
#include "bpre/process.hpp"
#include "bpre/rng.hpp"

namespace bpre {

struct RunOptions {
  GrowthPolicy policy{10'000'000, GrowthMode::clt_approx};
  unsigned workers = 0;  ///< 0: one per hardware thread
};

/// Runs body(i) for i in [0, count) across worker threads. The first
/// exception thrown by any task is rethrown on the caller's thread.
template <class Body>
void parallel_for(std::size_t count, unsigned workers, Body&& body) {
  if (workers == 0) workers = std::max(1u, std::thread::hardware_concurrency());
  workers = static_cast<unsigned>(std::min<std::size_t>(workers, std::max<std::size_t>(count, 1)));
  if (workers <= 1) {
    for (std::size_t i = 0; i < count; ++i) body(i);
    return;
  }
  std::exception_ptr error;
  std::mutex error_mutex;
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (unsigned w = 0; w < workers; ++w) {
    pool.emplace_back([&, w] {
      try {
        for (std::size_t i = w; i < count; i += workers) body(i);
      } catch (...) {
        std::lock_guard lock(error_mutex);
        if (!error) error = std::current_exception();
      }
    });
  }
  for (auto& t : pool) t.join();
  if (error) std::rethrow_exception(error);
}

/// Log ratios ln(Z_{n0+n}/Z_{n0}) for every replica and every requested n.
struct LogRatioSample {
  int n0 = 0;
  std::vector<int> ns;
  std::size_t replicas = 0;
  /// values[j][i]: replica i at horizon ns[j]; NaN for rejected replicas.
  std::vector<std::vector<double>> values;
  /// exact[j][i]: no normal-approximation step up to generation n0 + ns[j].
  std::vector<std::vector<char>> exact;
  std::vector<char> rejected;

  std::size_t rejected_count() const { return static_cast<std::size_t>(std::count(rejected.begin(), rejected.end(), 1)); }
};

inline LogRatioSample sample_log_ratios(const EnvironmentModel& env, int n0, std::vector<int> ns, std::size_t replicas,
                                        std::uint64_t seed, const RunOptions& opts = {}) {
  if (replicas < 1) fail(ErrorCode::domain_error, "need at least one replica");
  if (n0 < 0 || ns.empty()) fail(ErrorCode::domain_error, "need n0 >= 0 and a non-empty horizon list");
  for (int n : ns)
    if (n < 1) fail(ErrorCode::domain_error, "horizons must be >= 1");

  const Simulator sim(env, opts.policy);
  const int horizon = n0 + *std::max_element(ns.begin(), ns.end());

  LogRatioSample out;
  out.n0 = n0;
  out.ns = std::move(ns);
  out.replicas = replicas;
  out.values.assign(out.ns.size(), std::vector<double>(replicas, std::nan("")));
  out.exact.assign(out.ns.size(), std::vector<char>(replicas, 0));
  out.rejected.assign(replicas, 0);

  parallel_for(replicas, opts.workers, [&](std::size_t i) {
    ReplicaStream rng(seed, i);
    const auto traj = sim.try_run(horizon, rng);
    if (!traj) {
      out.rejected[i] = 1;
      return;
    }
    for (std::size_t j = 0; j < out.ns.size(); ++j) {
      const int end = n0 + out.ns[j];
      out.values[j][i] = log_ratio(*traj, n0, out.ns[j]);
      out.exact[j][i] = std::none_of(traj->approx.begin(), traj->approx.begin() + end + 1, [](bool a) { return a; });
    }
  });
  return out;
}

struct TailEstimate {
  double x = 0.0;
  Scale scale = Scale::standardized;
  double p_hat = 0.0;
  std::size_t replicas = 0;  ///< replicas that completed (rejected ones excluded)
  std::size_t hits = 0;
  double std_err = 0.0;
  std::uint64_t seed = 0;
  int n0 = 0;
  int n = 1;
  std::size_t exact_replicas = 0;
  std::size_t exact_hits = 0;
  std::size_t rejected = 0;

  double p_hat_exact() const {
    return exact_replicas ? static_cast<double>(exact_hits) / static_cast<double>(exact_replicas) : 0.0;
  }
};

inline double binomial_std_err(double p, std::size_t trials) {
  return trials ? std::sqrt(p * (1.0 - p) / static_cast<double>(trials)) : 0.0;
}

/// Tail estimate at x from the horizon `ns[j]` of a sample.
inline TailEstimate tail_from_sample(const LogRatioSample& sample, std::size_t j, double x, Scale scale, double mu,
                                     double sigma, std::uint64_t seed) {
  TailEstimate est;
  est.x = x;
  est.scale = scale;
  est.seed = seed;
  est.n0 = sample.n0;
  est.n = sample.ns.at(j);
  est.rejected = sample.rejected_count();
  for (std::size_t i = 0; i < sample.replicas; ++i) {
    if (sample.rejected[i]) continue;
    const bool hit = reaches(to_scale(sample.values[j][i], est.n, scale, mu, sigma), x);
    ++est.replicas;
    est.hits += hit;
    if (sample.exact[j][i]) {
      ++est.exact_replicas;
      est.exact_hits += hit;
    }
  }
  est.p_hat = est.replicas ? static_cast<double>(est.hits) / static_cast<double>(est.replicas) : 0.0;
  est.std_err = binomial_std_err(est.p_hat, est.replicas);
  return est;
}

/// Moments needed to place a statistic on `scale`; constant environments
/// only support the raw log-ratio scale.
inline MomentProfile scale_profile(const EnvironmentModel& env, Scale scale) {
  if (scale == Scale::log_ratio) return {};
  return moment_profile(env, 0.5, 2.0, 2);
}

inline TailEstimate estimate_tail(const EnvironmentModel& env, int n0, int n, double x, Scale scale,
                                  std::size_t replicas, std::uint64_t seed, const RunOptions& opts = {}) {
  const auto prof = scale_profile(env, scale);
  const auto sample = sample_log_ratios(env, n0, {n}, replicas, seed, opts);
  return tail_from_sample(sample, 0, x, scale, prof.mu, prof.sigma(), seed);
}

// ---------------------------------------------------------------------------
// Bound domination

struct VerificationPoint {
  double x = 0.0;
  int n = 1;
  TailEstimate tail;
  double bound_raw = 0.0;
  double bound_clamped = 0.0;
  bool pass = false;
};

struct VerificationReport {
  Theorem theorem = Theorem::bernstein;
  Scale scale = Scale::standardized;
  int n0 = 0;
  std::size_t replicas = 0;
  std::uint64_t seed = 0;
  MomentProfile profile;
  bool hypothesis_ok = true;
  std::string hypothesis_note;
  std::vector<VerificationPoint> points;

  std::size_t passed() const {
    return static_cast<std::size_t>(std::count_if(points.begin(), points.end(), [](const auto& p) { return p.pass; }));
  }
  double pass_rate() const { return points.empty() ? 1.0 : static_cast<double>(passed()) / static_cast<double>(points.size()); }
  bool all_pass() const { return passed() == points.size(); }
  bool any_approx() const {
    return std::any_of(points.begin(), points.end(), [](const auto& p) { return p.tail.exact_replicas < p.tail.replicas; });
  }
};

/// Domination holds at a point when the estimate minus three standard errors
/// does not exceed the clamped bound.
inline bool dominates(const TailEstimate& tail, double bound_clamped) {
  return tail.p_hat - 3.0 * tail.std_err <= bound_clamped;
}

struct VerifyOptions {
  double alpha = 0.5;
  double p = 2.0;
  int k_max = 50;
  /// Replaces the profile's H (Bernstein constant, or the upper range for
  /// Hoeffding). The report records whether the replacement satisfies the
  /// theorem's hypothesis.
  std::optional<double> H_override;
  RunOptions run;
};

/// Checks `theorem` against an existing sample; the sample's horizons are the n grid.
/// Sharing one sample across theorems keeps a multi-theorem run to one simulation.
inline VerificationReport verify_bound_on_sample(const EnvironmentModel& env, Theorem theorem,
                                                 const std::vector<double>& x_grid, const LogRatioSample& sample,
                                                 std::uint64_t seed, const VerifyOptions& opts = {}) {
  if (x_grid.empty() || sample.ns.empty()) fail(ErrorCode::domain_error, "verification grids must be non-empty");

  VerificationReport report;
  report.theorem = theorem;
  report.scale = theorem_scale(theorem);
  report.n0 = sample.n0;
  report.replicas = sample.replicas;
  report.seed = seed;
  report.profile = moment_profile(env, opts.alpha, opts.p, opts.k_max);

  std::string reason;
  if (!hypothesis_holds(theorem, report.profile, &reason)) fail(ErrorCode::hypothesis_unmet, reason);

  if (opts.H_override) {
    const double H = *opts.H_override;
    if (!(H > 0.0)) fail(ErrorCode::domain_error, "H override must be positive");
    if (theorem == Theorem::bernstein) {
      report.profile.bernstein_H = H;
      if (!satisfies_bernstein_condition(env, H, opts.k_max)) {
        report.hypothesis_ok = false;
        report.hypothesis_note = "H violates Bernstein's condition; failures are attributable to the hypothesis";
      }
    } else if (theorem == Theorem::hoeffding) {
      if (H < report.profile.upper) {
        report.hypothesis_ok = false;
        report.hypothesis_note = "X <= mu + H fails for the supplied H; failures are attributable to the hypothesis";
      }
      report.profile.upper = H;
    } else {
      fail(ErrorCode::hypothesis_unmet, std::string(theorem_name(theorem)) + " bound has no H constant to override");
    }
  }

  for (double x : x_grid) {
    if (!in_domain(theorem, x, report.profile))
      fail(ErrorCode::domain_error,
           "x = " + std::to_string(x) + " outside the domain of the " + std::string(theorem_name(theorem)) + " bound");
  }

  for (std::size_t j = 0; j < sample.ns.size(); ++j) {
    for (double x : x_grid) {
      VerificationPoint pt;
      pt.x = x;
      pt.n = sample.ns[j];
      pt.tail = tail_from_sample(sample, j, x, report.scale, report.profile.mu, report.profile.sigma(), seed);
      const auto bound = evaluate_bound(theorem, x, pt.n, report.profile);
      pt.bound_raw = bound.value;
      pt.bound_clamped = bound.clamped();
      pt.pass = dominates(pt.tail, pt.bound_clamped);
      report.points.push_back(std::move(pt));
    }
  }
  return report;
}

inline VerificationReport verify_bound(const EnvironmentModel& env, Theorem theorem, const std::vector<double>& x_grid,
                                       const std::vector<int>& n_grid, int n0, std::size_t replicas,
                                       std::uint64_t seed, const VerifyOptions& opts = {}) {
  if (x_grid.empty() || n_grid.empty()) fail(ErrorCode::domain_error, "verification grids must be non-empty");
  // validate before paying for the simulation
  const auto prof = moment_profile(env, opts.alpha, opts.p, opts.k_max);
  std::string reason;
  if (!hypothesis_holds(theorem, prof, &reason)) fail(ErrorCode::hypothesis_unmet, reason);
  const auto sample = sample_log_ratios(env, n0, n_grid, replicas, seed, opts.run);
  return verify_bound_on_sample(env, theorem, x_grid, sample, seed, opts);
}

// ---------------------------------------------------------------------------
// Interval coverage

enum class Estimator {
  mu_bernstein,  ///< lower bound for mu from the Bernstein bound
  mu_bounded,    ///< lower bound for mu from the bounded-range corollary
  z_bernstein,   ///< upper prediction for Z_{n0+n} from the Bernstein bound
  z_bounded,     ///< upper prediction for Z_{n0+n} from the bounded-range corollary
};

inline constexpr Estimator kAllEstimators[] = {Estimator::mu_bernstein, Estimator::mu_bounded, Estimator::z_bernstein,
                                               Estimator::z_bounded};

inline std::string_view estimator_name(Estimator e) {
  switch (e) {
    case Estimator::mu_bernstein: return "mu_bernstein";
    case Estimator::mu_bounded: return "mu_bounded";
    case Estimator::z_bernstein: return "z_bernstein";
    case Estimator::z_bounded: return "z_bounded";
  }
  return "unknown";
}

inline Estimator parse_estimator(std::string_view name) {
  for (Estimator e : kAllEstimators)
    if (estimator_name(e) == name) return e;
  fail(ErrorCode::config_parse, "unknown estimator '" + std::string(name) + "'");
}

struct CoverageReport {
  Estimator estimator = Estimator::mu_bernstein;
  int n0 = 0;
  int n = 1;
  double delta = 0.1;
  double delta_n = 0.0;
  std::size_t replicas = 0;
  std::size_t covered = 0;
  std::size_t exact_replicas = 0;
  std::size_t rejected = 0;
  double coverage = 0.0;
  double std_err = 0.0;    ///< binomial standard error at the nominal level
  double threshold = 0.0;  ///< 1 - delta - 3 std_err
  bool pass = false;
  std::uint64_t seed = 0;
};

inline CoverageReport coverage_experiment(const EnvironmentModel& env, Estimator estimator, int n0, int n,
                                          double delta, std::size_t replicas, std::uint64_t seed,
                                          const RunOptions& opts = {}) {
  const auto prof = moment_profile(env, 0.5, 2.0, 50);
  const bool bernstein = estimator == Estimator::mu_bernstein || estimator == Estimator::z_bernstein;
  const bool for_mu = estimator == Estimator::mu_bernstein || estimator == Estimator::mu_bounded;

  CoverageReport rep;
  rep.estimator = estimator;
  rep.n0 = n0;
  rep.n = n;
  rep.delta = delta;
  rep.seed = seed;
  rep.delta_n = bernstein ? delta_bernstein(n, delta, prof.sigma(), prof.bernstein_H)
                          : delta_bounded(n, delta, prof.range());

  const Simulator sim(env, opts.policy);
  std::vector<signed char> outcome(replicas, -1);
  std::vector<char> exact(replicas, 0);
  parallel_for(replicas, opts.workers, [&](std::size_t i) {
    ReplicaStream rng(seed, i);
    const auto traj = sim.try_run(n0 + n, rng);
    if (!traj) return;
    const double ln_from = traj->ln_z[static_cast<std::size_t>(n0)];
    const double ln_to = traj->ln_z[static_cast<std::size_t>(n0 + n)];
    bool covered = false;
    if (for_mu) {
      covered = mu_lower_from_log_ratio(ln_to - ln_from, n, delta, rep.delta_n, n0).a_n <= prof.mu;
    } else {
      covered = ln_to <= z_upper_from_log(ln_from, n, prof.mu, delta, rep.delta_n, n0).log_a_n + kTieTolerance;
    }
    outcome[i] = covered ? 1 : 0;
    exact[i] = !traj->any_approx();
  });

  for (std::size_t i = 0; i < replicas; ++i) {
    if (outcome[i] < 0) {
      ++rep.rejected;
      continue;
    }
    ++rep.replicas;
    rep.covered += static_cast<std::size_t>(outcome[i]);
    rep.exact_replicas += static_cast<std::size_t>(exact[i]);
  }
  rep.coverage = rep.replicas ? static_cast<double>(rep.covered) / static_cast<double>(rep.replicas) : 0.0;
  rep.std_err = binomial_std_err(1.0 - delta, rep.replicas);
  rep.threshold = 1.0 - delta - 3.0 * rep.std_err;
  rep.pass = rep.replicas > 0 && rep.coverage >= rep.threshold;
  return rep;
}

// ---------------------------------------------------------------------------
// Martingale normalization

struct MartingaleReport {
  int n = 0;
  std::size_t replicas = 0;  ///< exact replicas used
  std::size_t rejected = 0;
  double mean_w = 1.0;
  double std_err = 0.0;
  /// Largest |ln Z_k - S_k - ln W_k| over every step of every replica.
  double max_decomposition_residual = 0.0;
  bool pass = true;
  std::uint64_t seed = 0;
};

/// Sample mean of W_n = Z_n / Pi_n over exact replicas; passes when it is
/// within four standard errors of 1.
inline MartingaleReport martingale_check(const EnvironmentModel& env, int n, std::size_t replicas, std::uint64_t seed,
                                         std::uint64_t exact_threshold = 10'000'000, unsigned workers = 0) {
  MartingaleReport rep;
  rep.n = n;
  rep.seed = seed;
  if (n < 0) fail(ErrorCode::domain_error, "martingale_check needs n >= 0");
  if (n == 0) {
    rep.replicas = replicas;
    return rep;
  }

  const Simulator sim(env, GrowthPolicy{exact_threshold, GrowthMode::reject});
  std::vector<double> w(replicas, std::nan(""));
  std::vector<double> residual(replicas, 0.0);
  parallel_for(replicas, workers, [&](std::size_t i) {
    ReplicaStream rng(seed, i);
    const auto traj = sim.try_run(n, rng);
    if (!traj) return;
    double worst = 0.0;
    for (std::size_t k = 0; k < traj->ln_z.size(); ++k)
      worst = std::max(worst, std::fabs(traj->ln_z[k] - traj->s[k] - traj->ln_w[k]));
    residual[i] = worst;
    w[i] = traj->w(n);
  });

  long double sum = 0.0L, sum_sq = 0.0L;
  for (std::size_t i = 0; i < replicas; ++i) {
    if (std::isnan(w[i])) {
      ++rep.rejected;
      continue;
    }
    ++rep.replicas;
    sum += w[i];
    sum_sq += static_cast<long double>(w[i]) * w[i];
    rep.max_decomposition_residual = std::max(rep.max_decomposition_residual, residual[i]);
  }
  if (rep.replicas == 0) fail(ErrorCode::threshold_exceeded, "every replica exceeded the exact threshold");
  const long double m = sum / static_cast<long double>(rep.replicas);
  rep.mean_w = static_cast<double>(m);
  if (rep.replicas > 1) {
    const long double var = (sum_sq - static_cast<long double>(rep.replicas) * m * m) / static_cast<long double>(rep.replicas - 1);
    rep.std_err = static_cast<double>(std::sqrt(std::max(var, 0.0L) / static_cast<long double>(rep.replicas)));
  }
  const double dev = std::fabs(rep.mean_w - 1.0);
  // the floor absorbs rounding in ln W when W is identically 1
  rep.pass = dev <= 4.0 * rep.std_err || dev <= 1e-12;
  return rep;
}

// ---------------------------------------------------------------------------
// Normal-tail comparison

/// 1 - Phi(x) for the standard normal.
inline double normal_upper_tail(double x) { return 0.5 * std::erfc(x / std::sqrt(2.0)); }

struct DiagnosticRow {
  int n = 1;
  double x = 0.0;
  double p_hat = 0.0;
  double std_err = 0.0;
  double normal_tail = 0.5;
  double ratio = 0.0;
  bool moderate = true;  ///< x <= n^(1/6)
};

struct DiagnosticReport {
  int n0 = 0;
  std::size_t replicas = 0;
  std::uint64_t seed = 0;
  std::vector<DiagnosticRow> rows;
};

/// Empirical P(Z_{n0,n} >= x) divided by 1 - Phi(x). Informational only.
inline DiagnosticReport normal_tail_diagnostic(const EnvironmentModel& env, int n0, const std::vector<int>& n_grid,
                                               const std::vector<double>& x_grid, std::size_t replicas,
                                               std::uint64_t seed, const RunOptions& opts = {}) {
  const auto prof = moment_profile(env, 0.5, 2.0, 2);
  const auto sample = sample_log_ratios(env, n0, n_grid, replicas, seed, opts);
  DiagnosticReport rep{n0, replicas, seed, {}};
  for (std::size_t j = 0; j < n_grid.size(); ++j) {
    for (double x : x_grid) {
      const auto est = tail_from_sample(sample, j, x, Scale::standardized, prof.mu, prof.sigma(), seed);
      DiagnosticRow row;
      row.n = n_grid[j];
      row.x = x;
      row.p_hat = est.p_hat;
      row.std_err = est.std_err;
      row.normal_tail = normal_upper_tail(x);
      row.ratio = est.p_hat / row.normal_tail;
      row.moderate = x <= std::pow(static_cast<double>(row.n), 1.0 / 6.0);
      rep.rows.push_back(row);
    }
  }
  return rep;
}

}  // namespace bpre
