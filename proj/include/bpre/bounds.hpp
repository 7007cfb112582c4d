#pragma once

// Deviation bounds for ln(Z_{n0+n}/Z_{n0}).
//
// Bernstein, semi-exponential, Fuk-Nagaev and Hoeffding bounds control the
// standardized statistic (ln(Z_{n0+n}/Z_{n0}) - n mu)/(sigma sqrt(n)).
// von Bahr-Esseen, Rio, its corollary and Azuma-Hoeffding control the
// per-generation deviation (1/n) ln(Z_{n0+n}/Z_{n0}) - mu.
//
// Every bound is reported raw (it may exceed 1 for small x) and clamped.
// x = 0 is accepted wherever the expression extends continuously.

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <string_view>
#include <vector>

#include "bpre/error.hpp"
#include "bpre/offspring.hpp"
#include "bpre/process.hpp"

namespace bpre {

struct BoundComponent {
  std::string name;
  double value = 0.0;
};

struct BoundValue {
  double value = 0.0;
  std::vector<BoundComponent> components;

  double clamped() const { return std::min(value, 1.0); }
  double component(std::size_t i) const { return i < components.size() ? components[i].value : 0.0; }
};

enum class Theorem {
  bernstein,
  semi_exponential,
  fuk_nagaev,
  von_bahr_esseen,
  hoeffding,
  rio,
  rio_corollary,
  azuma_hoeffding,
};

inline constexpr Theorem kAllTheorems[] = {
    Theorem::bernstein,  Theorem::semi_exponential, Theorem::fuk_nagaev,    Theorem::von_bahr_esseen,
    Theorem::hoeffding,  Theorem::rio,              Theorem::rio_corollary, Theorem::azuma_hoeffding,
};

inline std::string_view theorem_name(Theorem t) {
  switch (t) {
    case Theorem::bernstein: return "bernstein";
    case Theorem::semi_exponential: return "semi_exponential";
    case Theorem::fuk_nagaev: return "fuk_nagaev";
    case Theorem::von_bahr_esseen: return "von_bahr_esseen";
    case Theorem::hoeffding: return "hoeffding";
    case Theorem::rio: return "rio";
    case Theorem::rio_corollary: return "rio_corollary";
    case Theorem::azuma_hoeffding: return "azuma_hoeffding";
  }
  return "unknown";
}

inline Theorem parse_theorem(std::string_view name) {
  for (Theorem t : kAllTheorems)
    if (theorem_name(t) == name) return t;
  fail(ErrorCode::config_parse, "unknown theorem '" + std::string(name) + "'");
}

inline Scale theorem_scale(Theorem t) {
  switch (t) {
    case Theorem::bernstein:
    case Theorem::semi_exponential:
    case Theorem::fuk_nagaev:
    case Theorem::hoeffding: return Scale::standardized;
    default: return Scale::per_generation;
  }
}

namespace detail {

inline void require(bool ok, const char* what) {
  if (!ok) fail(ErrorCode::domain_error, what);
}

/// (1 + t) ln(1 + t) - t, with a series for small t where the difference cancels.
inline double bennett_h(double t) {
  if (std::fabs(t) < 1e-3) {
    double sum = 0.0;
    double pw = t * t;
    for (int k = 2; k < 12; ++k) {
      sum += ((k % 2 == 0) ? 1.0 : -1.0) * pw / (k * (k - 1.0));
      pw *= t;
    }
    return sum;
  }
  return (1.0 + t) * std::log1p(t) - t;
}

}  // namespace detail

/// 2 exp{-x^2 / (2(1 + 6(1 + H) x / (sigma sqrt(n))))}.
inline BoundValue bernstein_bound(double x, int n, double sigma, double H) {
  detail::require(x >= 0.0, "bernstein_bound needs x >= 0");
  detail::require(n >= 1 && sigma > 0.0 && H > 0.0, "bernstein_bound needs n >= 1, sigma > 0, H > 0");
  const double scale = sigma * std::sqrt(static_cast<double>(n));
  const double v = 2.0 * std::exp(-x * x / (2.0 * (1.0 + 6.0 * (1.0 + H) * x / scale)));
  return {v, {{"exponential_term", v}}};
}

/// 3 exp{-x^2 / (8(u + (sigma sqrt(n))^-alpha x^(2 - alpha)))}.
inline BoundValue semi_exp_bound(double x, int n, double sigma, double alpha, double u) {
  detail::require(x >= 0.0, "semi_exp_bound needs x >= 0");
  detail::require(alpha > 0.0 && alpha < 1.0, "semi_exp_bound needs alpha in (0, 1)");
  detail::require(u >= 1.0 - 1e-12, "semi_exp_bound needs u >= 1");
  detail::require(n >= 1 && sigma > 0.0, "semi_exp_bound needs n >= 1, sigma > 0");
  const double scale = sigma * std::sqrt(static_cast<double>(n));
  const double denom = 8.0 * (u + std::pow(scale, -alpha) * std::pow(x, 2.0 - alpha));
  const double v = 3.0 * std::exp(-x * x / denom);
  return {v, {{"exponential_term", v}}};
}

/// exp{-x^2/(2V^2)} + C_p / (n^((p-2)/2) x^p) with V^2 = (p+2)^2 e^p and
/// C_p = 2^(p+1) (1 + 2/p)^p E|(X - mu)/sigma|^p.
inline BoundValue fuk_nagaev_bound(double x, int n, double p, double std_abs_p_moment) {
  detail::require(x > 0.0, "fuk_nagaev_bound needs x > 0 (the polynomial term diverges at 0)");
  detail::require(p >= 2.0, "fuk_nagaev_bound needs p >= 2");
  detail::require(n >= 1 && std_abs_p_moment >= 0.0, "fuk_nagaev_bound needs n >= 1");
  const double v2 = (p + 2.0) * (p + 2.0) * std::exp(p);
  const double cp = std::pow(2.0, p + 1.0) * std::pow(1.0 + 2.0 / p, p) * std_abs_p_moment;
  const double gaussian = std::exp(-x * x / (2.0 * v2));
  const double polynomial = cp / (std::pow(static_cast<double>(n), (p - 2.0) / 2.0) * std::pow(x, p));
  return {gaussian + polynomial, {{"gaussian_term", gaussian}, {"polynomial_term", polynomial}}};
}

/// C_p / (x^p n^(p-1)) with C_p = 2^(p+1) E|X - mu|^p + (2p)^p e^-p.
inline BoundValue von_bahr_esseen_bound(double x, int n, double p, double abs_p_moment) {
  detail::require(x > 0.0, "von_bahr_esseen_bound needs x > 0");
  detail::require(p > 1.0 && p <= 2.0, "von_bahr_esseen_bound needs p in (1, 2]");
  detail::require(n >= 1 && abs_p_moment >= 0.0, "von_bahr_esseen_bound needs n >= 1");
  const double denom = std::pow(x, p) * std::pow(static_cast<double>(n), p - 1.0);
  const double walk = std::pow(2.0, p + 1.0) * abs_p_moment / denom;
  const double martingale = std::pow(2.0 * p, p) * std::exp(-p) / denom;
  return {walk + martingale, {{"walk_term", walk}, {"martingale_term", martingale}}};
}

/// Hoeffding-type bound when X <= mu + H.
///
/// `sharp` and `relaxed` follow the two-regime statement: for x <= sigma sqrt(n)/2
/// the Bennett (resp. Bernstein) exponential doubled, beyond it the exponential
/// plus exp{-x sigma sqrt(n)/2}. `value` is the exponential plus that Markov
/// term at every x; it never exceeds `sharp` and is non-increasing in n.
struct HoeffdingBound {
  BoundValue value;
  BoundValue sharp;
  BoundValue relaxed;
  bool small_deviation = true;  ///< x <= sigma sqrt(n)/2
};

/// Bennett exponent (sigma^2 n / H^2) h(H x / (2 sigma sqrt(n))).
inline double hoeffding_sharp_exponent(double x, int n, double sigma, double H) {
  const double scale = sigma * std::sqrt(static_cast<double>(n));
  const double t = H * x / (2.0 * scale);
  return scale * scale / (H * H) * detail::bennett_h(t);
}

inline double hoeffding_relaxed_exponent(double x, int n, double sigma, double H) {
  const double scale = sigma * std::sqrt(static_cast<double>(n));
  return x * x / (8.0 * (1.0 + H * x / (6.0 * scale)));
}

inline HoeffdingBound hoeffding_bound(double x, int n, double sigma, double H) {
  detail::require(x >= 0.0, "hoeffding_bound needs x >= 0");
  detail::require(n >= 1 && sigma > 0.0 && H > 0.0, "hoeffding_bound needs n >= 1, sigma > 0, H > 0");
  const double scale = sigma * std::sqrt(static_cast<double>(n));
  const double sharp_term = std::exp(-hoeffding_sharp_exponent(x, n, sigma, H));
  const double relaxed_term = std::exp(-hoeffding_relaxed_exponent(x, n, sigma, H));
  const double markov = std::exp(-x * scale / 2.0);

  HoeffdingBound out;
  out.small_deviation = x <= scale / 2.0;
  out.value = {sharp_term + markov, {{"bennett_term", sharp_term}, {"markov_term", markov}}};
  if (out.small_deviation) {
    out.sharp = {2.0 * sharp_term, {{"bennett_term", 2.0 * sharp_term}}};
    out.relaxed = {2.0 * relaxed_term, {{"bernstein_term", 2.0 * relaxed_term}}};
  } else {
    out.sharp = {sharp_term + markov, {{"bennett_term", sharp_term}, {"markov_term", markov}}};
    out.relaxed = {relaxed_term + markov, {{"bernstein_term", relaxed_term}, {"markov_term", markov}}};
  }
  return out;
}

inline double rio_psi1(double x, double R) {
  const double r = x / R;
  return r * r / 2.0 + r * r * r * r / 36.0;
}

/// (x^2/(4R^2) - x/R) ln(1 - x/(2R)); both factors are <= 0 on [0, 2R).
inline double rio_psi2(double x, double R) {
  const double r = x / R;
  return (r * r / 4.0 - r) * std::log1p(-r / 2.0);
}

/// Rio-type bound for range R = H2 - H1 on x in [0, 2R).
struct RioBound {
  BoundValue sharp;     ///< exp{-n max(psi1, psi2)} + exp{-nx/2}
  BoundValue factored;  ///< (1 - x/(2R))^((nx/R)(1 - x/(4R))) + exp{-nx/2}
};

inline RioBound rio_bound(double x, int n, double R) {
  detail::require(R > 0.0 && n >= 1, "rio_bound needs R > 0 and n >= 1");
  detail::require(x >= 0.0 && x < 2.0 * R, "rio_bound needs x in [0, 2R)");
  const double dn = static_cast<double>(n);
  const double markov = std::exp(-dn * x / 2.0);
  const double psi = std::max(rio_psi1(x, R), rio_psi2(x, R));
  const double sharp_term = std::exp(-dn * psi);
  const double factored_term = std::pow(1.0 - x / (2.0 * R), dn * x / R * (1.0 - x / (4.0 * R)));
  return {{sharp_term + markov, {{"rio_term", sharp_term}, {"markov_term", markov}}},
          {factored_term + markov, {{"factored_term", factored_term}, {"markov_term", markov}}}};
}

/// exp{-nx^2/(2R^2)} + exp{-nx/2}.
inline BoundValue rio_corollary_bound(double x, int n, double R) {
  detail::require(x >= 0.0, "rio_corollary_bound needs x >= 0");
  detail::require(R > 0.0 && n >= 1, "rio_corollary_bound needs R > 0 and n >= 1");
  const double dn = static_cast<double>(n);
  const double gaussian = std::exp(-dn * x * x / (2.0 * R * R));
  const double markov = std::exp(-dn * x / 2.0);
  return {gaussian + markov, {{"gaussian_term", gaussian}, {"markov_term", markov}}};
}

/// 2 exp{-nx^2/(2R^2)} on 0 <= x <= R^2, where the Markov term is the smaller one.
inline BoundValue azuma_hoeffding_bound(double x, int n, double R) {
  detail::require(R > 0.0 && n >= 1, "azuma_hoeffding_bound needs R > 0 and n >= 1");
  detail::require(x >= 0.0 && x <= R * R, "azuma_hoeffding_bound needs 0 <= x <= R^2");
  const double v = 2.0 * std::exp(-static_cast<double>(n) * x * x / (2.0 * R * R));
  return {v, {{"gaussian_term", v}}};
}

/// (1 - x)^(n x (2 - x)) <= exp{-2 n x^2} for x in [0, 1].
inline bool rio_remark_check(double x, int n) {
  detail::require(x >= 0.0 && x <= 1.0 && n >= 1, "rio_remark_check needs x in [0, 1] and n >= 1");
  const double dn = static_cast<double>(n);
  const double lhs = std::pow(1.0 - x, dn * x * (2.0 - x));
  const double rhs = std::exp(-2.0 * dn * x * x);
  return lhs <= rhs * (1.0 + 4.0 * std::numeric_limits<double>::epsilon());
}

/// Argument bundle for theorem dispatch; `scale` must match the theorem.
struct BoundInput {
  double x = 0.0;
  int n = 1;
  MomentProfile profile;
  Scale scale = Scale::standardized;
};

/// x lies in the range where the theorem's bound is stated.
inline bool in_domain(Theorem t, double x, const MomentProfile& prof) {
  switch (t) {
    case Theorem::fuk_nagaev:
    case Theorem::von_bahr_esseen: return x > 0.0;
    case Theorem::rio: return x >= 0.0 && x < 2.0 * prof.range();
    case Theorem::azuma_hoeffding: return x >= 0.0 && x <= prof.range() * prof.range();
    default: return x >= 0.0;
  }
}

/// Moment hypothesis of `t` holds for `prof`; on failure `reason` says why.
inline bool hypothesis_holds(Theorem t, const MomentProfile& prof, std::string* reason = nullptr) {
  auto no = [&](const char* why) {
    if (reason) *reason = why;
    return false;
  };
  switch (t) {
    case Theorem::fuk_nagaev:
      if (prof.p < 2.0) return no("Fuk-Nagaev bound needs p >= 2");
      break;
    case Theorem::von_bahr_esseen:
      if (!(prof.p > 1.0 && prof.p <= 2.0)) return no("von Bahr-Esseen bound needs p in (1, 2]");
      break;
    case Theorem::semi_exponential:
      if (!(prof.alpha > 0.0 && prof.alpha < 1.0)) return no("semi-exponential bound needs alpha in (0, 1)");
      break;
    case Theorem::hoeffding:
      if (!(prof.upper > 0.0)) return no("Hoeffding bound needs X <= mu + H with H > 0");
      break;
    case Theorem::rio:
    case Theorem::rio_corollary:
    case Theorem::azuma_hoeffding:
      if (!(prof.range() > 0.0)) return no("range bounds need a non-degenerate range of X - mu");
      break;
    case Theorem::bernstein:
      if (!(prof.bernstein_H > 0.0)) return no("Bernstein bound needs H > 0");
      break;
  }
  return true;
}

/// The bound a theorem gives at (x, n), with constants taken from the profile.
/// Hoeffding reports its all-x form and Rio its sharp form.
inline BoundValue evaluate_bound(Theorem t, const BoundInput& in) {
  if (in.scale != theorem_scale(t))
    fail(ErrorCode::domain_error, std::string(theorem_name(t)) + " bound is stated on the " +
                                      std::string(scale_name(theorem_scale(t))) + " scale");
  std::string reason;
  if (!hypothesis_holds(t, in.profile, &reason)) fail(ErrorCode::hypothesis_unmet, reason);
  const auto& p = in.profile;
  switch (t) {
    case Theorem::bernstein: return bernstein_bound(in.x, in.n, p.sigma(), p.bernstein_H);
    case Theorem::semi_exponential: return semi_exp_bound(in.x, in.n, p.sigma(), p.alpha, p.u);
    case Theorem::fuk_nagaev: return fuk_nagaev_bound(in.x, in.n, p.p, p.std_abs_p_moment);
    case Theorem::von_bahr_esseen: return von_bahr_esseen_bound(in.x, in.n, p.p, p.abs_p_moment);
    case Theorem::hoeffding: return hoeffding_bound(in.x, in.n, p.sigma(), p.upper).value;
    case Theorem::rio: return rio_bound(in.x, in.n, p.range()).sharp;
    case Theorem::rio_corollary: return rio_corollary_bound(in.x, in.n, p.range());
    case Theorem::azuma_hoeffding: return azuma_hoeffding_bound(in.x, in.n, p.range());
  }
  return {};
}

inline BoundValue evaluate_bound(Theorem t, double x, int n, const MomentProfile& prof) {
  return evaluate_bound(t, BoundInput{x, n, prof, theorem_scale(t)});
}

}  // namespace bpre
