#pragma once

// Offspring laws, the i.i.d. environment, and exact moment functionals of
// X = ln m(xi_0). Every quantity is a finite sum over the environment states.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <numeric>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "bpre/error.hpp"

namespace bpre {

/// Probability mass placed on one offspring count.
struct SupportPoint {
  std::uint64_t value = 1;
  double prob = 1.0;
};

/// Raw (unvalidated) input to `make_offspring_law`; `value` is signed so a
/// zero or negative count can be reported instead of silently wrapped.
struct RawPoint {
  std::int64_t value = 1;
  double prob = 1.0;
};

inline constexpr double kNormalizationTolerance = 1e-9;

/// Finite-support offspring law on {1, 2, ...}. Support is sorted by value.
class OffspringLaw {
 public:
  std::span<const SupportPoint> support() const { return support_; }
  double mean() const { return mean_; }
  double variance() const { return variance_; }
  std::uint64_t max_value() const { return support_.back().value; }
  bool is_deterministic() const { return support_.size() == 1; }

 private:
  friend OffspringLaw make_offspring_law(std::span<const RawPoint> points);

  std::vector<SupportPoint> support_;
  double mean_ = 0.0;
  double variance_ = 0.0;
};

inline OffspringLaw make_offspring_law(std::span<const RawPoint> points) {
  if (points.empty()) fail(ErrorCode::invalid_law, "offspring law has an empty support");

  std::vector<SupportPoint> support;
  support.reserve(points.size());
  long double total = 0.0L;
  for (const auto& p : points) {
    if (p.value == 0)
      fail(ErrorCode::zero_offspring, "offspring support contains 0; laws must satisfy p(0) = 0");
    if (p.value < 0)
      fail(ErrorCode::invalid_law, "offspring value " + std::to_string(p.value) + " is negative");
    if (!(p.prob > 0.0) || p.prob > 1.0 || !std::isfinite(p.prob))
      fail(ErrorCode::invalid_law, "offspring probability must lie in (0, 1]");
    support.push_back({static_cast<std::uint64_t>(p.value), p.prob});
    total += p.prob;
  }
  if (std::fabs(static_cast<double>(total) - 1.0) > kNormalizationTolerance)
    fail(ErrorCode::not_normalized,
         "offspring probabilities sum to " + std::to_string(static_cast<double>(total)));

  std::sort(support.begin(), support.end(),
            [](const SupportPoint& a, const SupportPoint& b) { return a.value < b.value; });
  for (std::size_t i = 1; i < support.size(); ++i) {
    if (support[i].value == support[i - 1].value)
      fail(ErrorCode::invalid_law, "duplicate offspring value " + std::to_string(support[i].value));
  }

  long double mean = 0.0L;
  for (auto& s : support) {
    s.prob = static_cast<double>(s.prob / total);
    mean += static_cast<long double>(s.value) * s.prob;
  }
  long double var = 0.0L;
  for (const auto& s : support) {
    const long double d = static_cast<long double>(s.value) - mean;
    var += d * d * s.prob;
  }

  OffspringLaw law;
  law.support_ = std::move(support);
  law.mean_ = static_cast<double>(mean);
  law.variance_ = static_cast<double>(var);
  return law;
}

inline OffspringLaw make_offspring_law(std::initializer_list<RawPoint> points) {
  return make_offspring_law(std::span<const RawPoint>(points.begin(), points.size()));
}

/// Deterministic law: every individual has exactly `children` offspring.
inline OffspringLaw point_mass(std::int64_t children) { return make_offspring_law({{children, 1.0}}); }

/// Finite mixture of offspring laws; xi_n picks state e with probability weights[e].
class EnvironmentModel {
 public:
  std::span<const OffspringLaw> states() const { return states_; }
  std::span<const double> weights() const { return weights_; }
  std::size_t size() const { return states_.size(); }
  const OffspringLaw& state(std::size_t e) const { return states_.at(e); }

  /// Support of X = ln m(xi): one point per state (duplicates allowed).
  std::vector<double> log_means() const {
    std::vector<double> out;
    out.reserve(states_.size());
    for (const auto& s : states_) out.push_back(std::log(s.mean()));
    return out;
  }

 private:
  friend EnvironmentModel make_environment(std::vector<OffspringLaw> states,
                                           std::vector<double> weights);

  std::vector<OffspringLaw> states_;
  std::vector<double> weights_;
};

inline EnvironmentModel make_environment(std::vector<OffspringLaw> states,
                                         std::vector<double> weights) {
  if (states.empty()) fail(ErrorCode::invalid_environment, "environment has no states");
  if (states.size() != weights.size())
    fail(ErrorCode::invalid_environment, "environment needs one weight per state");

  long double total = 0.0L;
  for (double w : weights) {
    if (!(w > 0.0) || w > 1.0 || !std::isfinite(w))
      fail(ErrorCode::invalid_environment, "environment weights must lie in (0, 1]");
    total += w;
  }
  if (std::fabs(static_cast<double>(total) - 1.0) > kNormalizationTolerance)
    fail(ErrorCode::not_normalized,
         "environment weights sum to " + std::to_string(static_cast<double>(total)));
  for (double& w : weights) w = static_cast<double>(w / total);

  // p(0) = 0 forces m >= 1, so mu = E ln m > 0 unless every state has m = 1.
  const bool all_critical = std::all_of(states.begin(), states.end(),
                                        [](const OffspringLaw& s) { return s.mean() <= 1.0; });
  if (all_critical)
    fail(ErrorCode::not_supercritical, "every environment state has mean 1; the process is not supercritical");

  EnvironmentModel env;
  env.states_ = std::move(states);
  env.weights_ = std::move(weights);
  return env;
}

/// Uniform mixture over `states`.
inline EnvironmentModel make_uniform_environment(std::vector<OffspringLaw> states) {
  const std::size_t k = states.size();
  return make_environment(std::move(states), std::vector<double>(k, k ? 1.0 / static_cast<double>(k) : 0.0));
}

/// Exact functionals of X = ln m_0 used by the deviation bounds.
struct MomentProfile {
  double mu = 0.0;
  double sigma2 = 0.0;
  double bernstein_H = 0.0;
  double alpha = 0.5;
  double u = 1.0;
  double p = 2.0;
  double abs_p_moment = 0.0;
  double std_abs_p_moment = 0.0;
  double lower = 0.0;  ///< min of X - mu over the support (<= 0)
  double upper = 0.0;  ///< max of X - mu over the support (>= 0)
  int k_max = 50;

  double sigma() const { return std::sqrt(sigma2); }
  /// Width of the support of X - mu; stands in for H2 - H1 in the bounded-range bounds.
  double range() const { return upper - lower; }
  double max_abs_deviation() const { return std::max(-lower, upper); }
};

namespace detail {

/// Weighted sum of f(x) over the support of X, accumulated in long double.
template <class F>
long double expect(std::span<const double> xs, std::span<const double> ws, F&& f) {
  long double acc = 0.0L;
  for (std::size_t i = 0; i < xs.size(); ++i) acc += static_cast<long double>(ws[i]) * f(static_cast<long double>(xs[i]));
  return acc;
}

inline long double mean_of(std::span<const double> xs, std::span<const double> ws) {
  return expect(xs, ws, [](long double x) { return x; });
}

/// E(X - mu)^k for k = 0..k_max.
inline std::vector<long double> central_moments(std::span<const double> xs, std::span<const double> ws,
                                                long double mu, int k_max) {
  std::vector<long double> m(static_cast<std::size_t>(k_max) + 1, 0.0L);
  for (std::size_t i = 0; i < xs.size(); ++i) {
    const long double d = static_cast<long double>(xs[i]) - mu;
    long double pw = 1.0L;
    for (int k = 0; k <= k_max; ++k) {
      m[static_cast<std::size_t>(k)] += static_cast<long double>(ws[i]) * pw;
      pw *= d;
    }
  }
  return m;
}

/// Bernstein's condition E(X-mu)^k <= k!/2 H^(k-2) E(X-mu)^2 for k = 2..k_max.
inline bool bernstein_condition_holds(std::span<const long double> moments, double H, int k_max) {
  const long double var = moments[2];
  const long double logH = std::log(static_cast<long double>(H));
  for (int k = 3; k <= k_max; ++k) {
    const long double mk = moments[static_cast<std::size_t>(k)];
    if (mk <= 0.0L) continue;
    const long double rhs = 0.5L * std::exp(std::lgamma(static_cast<long double>(k) + 1.0L) +
                                            static_cast<long double>(k - 2) * logH) * var;
    if (mk > rhs * (1.0L + 1e-12L)) return false;
  }
  return true;
}

}  // namespace detail

inline MomentProfile moment_profile(const EnvironmentModel& env, double alpha, double p, int k_max = 50) {
  if (!(alpha > 0.0 && alpha < 1.0)) fail(ErrorCode::domain_error, "alpha must lie in (0, 1)");
  if (!(p > 1.0) || !std::isfinite(p)) fail(ErrorCode::domain_error, "p must exceed 1");
  if (k_max < 2) fail(ErrorCode::domain_error, "K_max must be at least 2");

  const auto xs = env.log_means();
  const auto ws = env.weights();
  const long double mu = detail::mean_of(xs, ws);
  if (!(mu > 0.0L)) fail(ErrorCode::not_supercritical, "mu = E ln m must be positive");

  const auto [lo_it, hi_it] = std::minmax_element(xs.begin(), xs.end());
  if (*hi_it - *lo_it <= 1e-15 * std::max(1.0, std::fabs(static_cast<double>(mu))))
    fail(ErrorCode::degenerate, "X = ln m is almost surely constant; sigma^2 = 0");

  const auto moments = detail::central_moments(xs, ws, mu, k_max);

  MomentProfile prof;
  prof.mu = static_cast<double>(mu);
  prof.sigma2 = static_cast<double>(moments[2]);
  prof.alpha = alpha;
  prof.p = p;
  prof.k_max = k_max;
  prof.lower = std::min(0.0, static_cast<double>(static_cast<long double>(*lo_it) - mu));
  prof.upper = std::max(0.0, static_cast<double>(static_cast<long double>(*hi_it) - mu));
  prof.bernstein_H = prof.max_abs_deviation();
  if (!detail::bernstein_condition_holds(moments, prof.bernstein_H, k_max))
    fail(ErrorCode::hypothesis_unmet, "max|X - mu| fails Bernstein's condition");

  const long double semi = detail::expect(xs, ws, [&](long double x) {
    const long double d = x - mu;
    const long double pos = d > 0.0L ? d : 0.0L;
    return d * d * std::exp(std::pow(pos, static_cast<long double>(alpha)));
  });
  prof.u = static_cast<double>(semi / moments[2]);

  const long double absp = detail::expect(xs, ws, [&](long double x) {
    return std::pow(std::fabs(x - mu), static_cast<long double>(p));
  });
  prof.abs_p_moment = static_cast<double>(absp);
  prof.std_abs_p_moment = static_cast<double>(absp / std::pow(moments[2], static_cast<long double>(p) / 2.0L));
  return prof;
}

/// True when `H` satisfies Bernstein's condition for X under `env` for k = 2..k_max.
inline bool satisfies_bernstein_condition(const EnvironmentModel& env, double H, int k_max = 50) {
  if (!(H > 0.0)) return false;
  const auto xs = env.log_means();
  const auto ws = env.weights();
  const long double mu = detail::mean_of(xs, ws);
  return detail::bernstein_condition_holds(detail::central_moments(xs, ws, mu, k_max), H, k_max);
}

/// Smallest H (to within `tol`) satisfying Bernstein's condition for k = 2..k_max,
/// found by bisection on [0, max|X - mu|]. The upper end is always feasible for
/// bounded X, so it doubles as the fallback.
inline double minimal_bernstein_H(const EnvironmentModel& env, int k_max = 50, double tol = 1e-9) {
  if (k_max < 2) fail(ErrorCode::domain_error, "K_max must be at least 2");
  if (!(tol > 0.0)) fail(ErrorCode::domain_error, "bisection tolerance must be positive");
  const auto prof = moment_profile(env, 0.5, 2.0, 2);  // validates supercritical / non-degenerate

  const auto xs = env.log_means();
  const auto ws = env.weights();
  const long double mu = detail::mean_of(xs, ws);
  const auto moments = detail::central_moments(xs, ws, mu, k_max);

  double lo = 0.0;
  double hi = prof.max_abs_deviation();
  while (hi - lo > tol) {
    const double mid = 0.5 * (lo + hi);
    if (detail::bernstein_condition_holds(moments, mid, k_max))
      hi = mid;
    else
      lo = mid;
  }
  return hi;
}

}  // namespace bpre
