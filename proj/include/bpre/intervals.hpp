#pragma once

// One-sided confidence intervals for mu and prediction intervals for Z_{n0+n}
// obtained by inverting the Bernstein bound and the Rio corollary.

#include <cmath>
#include <cstdint>
#include <string>
#include <string_view>

#include "bpre/error.hpp"

namespace bpre {

enum class IntervalKind {
  mu_lower,  ///< [a_n, +inf) covers mu
  z_upper,   ///< [1, a_n] covers Z_{n0+n}
};

inline std::string_view interval_kind_name(IntervalKind k) {
  return k == IntervalKind::mu_lower ? "mu_lower" : "z_upper";
}

struct IntervalResult {
  IntervalKind kind = IntervalKind::mu_lower;
  double a_n = 0.0;
  /// ln a_n for z_upper (a_n itself can overflow for long horizons); equals a_n for mu_lower.
  double log_a_n = 0.0;
  double delta_n = 0.0;
  double delta = 0.0;
  int n = 1;
  int n0 = 0;
};

/// Positive root Delta of 2 exp{-n Delta^2 / (2(sigma^2 + 6(1 + H) Delta))} = delta.
inline double delta_bernstein(int n, double delta, double sigma, double H) {
  if (!(delta > 0.0 && delta <= 1.0)) fail(ErrorCode::domain_error, "risk delta must lie in (0, 1]");
  if (n < 1 || !(sigma > 0.0) || !(H > 0.0))
    fail(ErrorCode::domain_error, "delta_bernstein needs n >= 1, sigma > 0, H > 0");
  const double dn = static_cast<double>(n);
  const double log_term = std::log(2.0 / delta);
  const double linear = 6.0 * (1.0 + H) / dn * log_term;
  return linear + std::sqrt(linear * linear + 2.0 / dn * sigma * sigma * log_term);
}

/// Smallest risk the bounded-range construction can certify at horizon n.
inline double min_delta_bounded(int n, double R) { return 2.0 * std::exp(-static_cast<double>(n) * R * R / 2.0); }

/// Positive root Delta of 2 exp{-n Delta^2 / (2 R^2)} = delta, for
/// delta in [2 exp{-n R^2 / 2}, 1].
inline double delta_bounded(int n, double delta, double R) {
  if (n < 1 || !(R > 0.0)) fail(ErrorCode::domain_error, "delta_bounded needs n >= 1 and R > 0");
  if (!(delta > 0.0 && delta <= 1.0)) fail(ErrorCode::domain_error, "risk delta must lie in (0, 1]");
  const double floor = min_delta_bounded(n, R);
  if (!(delta >= floor * (1.0 - 1e-12)))
    fail(ErrorCode::domain_error, "risk " + std::to_string(delta) + " is below the certifiable minimum " +
                                      std::to_string(floor) + " at n = " + std::to_string(n));
  return R * std::sqrt(2.0 / static_cast<double>(n) * std::log(2.0 / delta));
}

inline IntervalResult mu_lower_from_log_ratio(double log_ratio, int n, double delta, double delta_n, int n0 = 0) {
  const double a = log_ratio / static_cast<double>(n) - delta_n;
  return {IntervalKind::mu_lower, a, a, delta_n, delta, n, n0};
}

inline IntervalResult z_upper_from_log(double log_z_n0, int n, double mu, double delta, double delta_n, int n0 = 0) {
  const double log_a = log_z_n0 + static_cast<double>(n) * (mu + delta_n);
  return {IntervalKind::z_upper, std::exp(log_a), log_a, delta_n, delta, n, n0};
}

namespace detail {
inline double log_population(std::uint64_t z) {
  if (z < 1) fail(ErrorCode::domain_error, "populations must be >= 1");
  return std::log(static_cast<double>(z));
}
}  // namespace detail

inline IntervalResult ci_mu_bernstein(std::uint64_t z_n0, std::uint64_t z_n0_plus_n, int n, double delta,
                                      double sigma, double H, int n0 = 0) {
  const double dn = delta_bernstein(n, delta, sigma, H);
  return mu_lower_from_log_ratio(detail::log_population(z_n0_plus_n) - detail::log_population(z_n0), n, delta, dn, n0);
}

inline IntervalResult ci_mu_bounded(std::uint64_t z_n0, std::uint64_t z_n0_plus_n, int n, double delta, double R,
                                    int n0 = 0) {
  const double dn = delta_bounded(n, delta, R);
  return mu_lower_from_log_ratio(detail::log_population(z_n0_plus_n) - detail::log_population(z_n0), n, delta, dn, n0);
}

inline IntervalResult predict_z_bernstein(std::uint64_t z_n0, int n, double mu, double delta, double sigma, double H,
                                          int n0 = 0) {
  return z_upper_from_log(detail::log_population(z_n0), n, mu, delta, delta_bernstein(n, delta, sigma, H), n0);
}

inline IntervalResult predict_z_bounded(std::uint64_t z_n0, int n, double mu, double delta, double R, int n0 = 0) {
  return z_upper_from_log(detail::log_population(z_n0), n, mu, delta, delta_bounded(n, delta, R), n0);
}

}  // namespace bpre
