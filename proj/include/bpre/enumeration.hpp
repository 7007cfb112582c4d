#pragma once

// Exact law of ln(Z_{n0+n}/Z_{n0}) for small instances, by enumerating every
// environment sequence and propagating the quenched pmf of Z_k with
// convolution powers of the active offspring law.

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "bpre/error.hpp"
#include "bpre/offspring.hpp"
#include "bpre/process.hpp"

namespace bpre {

struct EnumerationLimits {
  int max_n0 = 2;
  int max_n = 4;
  std::uint64_t max_sequences = 1u << 20;
};

/// Exact tail together with the probability mass that was dropped above the
/// population cap. `prob` is a lower bound on the true tail, `upper()` an
/// upper bound; they coincide when nothing was truncated.
struct ExactTail {
  double prob = 0.0;
  double truncated_mass = 0.0;

  double lower() const { return prob; }
  double upper() const { return prob + truncated_mass; }
};

namespace detail {

/// Lazily built table of z-fold convolution powers of one offspring law,
/// indexed by population value (entry 0 unused).
class ConvolutionPowers {
 public:
  explicit ConvolutionPowers(const OffspringLaw& law) {
    std::vector<double> base(law.max_value() + 1, 0.0);
    for (const auto& pt : law.support()) base[pt.value] = pt.prob;
    powers_.push_back({1.0});  // z = 0: point mass at 0
    powers_.push_back(std::move(base));
  }

  const std::vector<double>& power(std::uint64_t z) {
    while (powers_.size() <= z) {
      const auto& prev = powers_.back();
      const auto& base = powers_[1];
      std::vector<double> next(prev.size() + base.size() - 1, 0.0);
      for (std::size_t i = 0; i < prev.size(); ++i) {
        if (prev[i] == 0.0) continue;
        for (std::size_t j = 1; j < base.size(); ++j) next[i + j] += prev[i] * base[j];
      }
      powers_.push_back(std::move(next));
    }
    return powers_[z];
  }

 private:
  std::vector<std::vector<double>> powers_;
};

using Pmf = std::map<std::uint64_t, double>;

/// One generation under a fixed state; mass landing above `z_cap` is
/// added to `truncated` instead of the returned pmf.
inline Pmf step_pmf(const Pmf& current, ConvolutionPowers& powers, std::uint64_t z_cap, double& truncated) {
  Pmf next;
  for (const auto& [z, pz] : current) {
    const auto& conv = powers.power(z);
    for (std::size_t v = 1; v < conv.size(); ++v) {
      if (conv[v] == 0.0) continue;
      if (v > z_cap)
        truncated += pz * conv[v];
      else
        next[v] += pz * conv[v];
    }
  }
  return next;
}

}  // namespace detail

/// Exact joint law of (Z_{n0}, Z_{n0+n}) collapsed to atoms of the log ratio.
class LogRatioLaw {
 public:
  struct Atom {
    std::uint64_t z_from = 1;
    std::uint64_t z_to = 1;
    double log_ratio = 0.0;
    double prob = 0.0;
  };

  std::vector<Atom> atoms;
  double truncated_mass = 0.0;
  /// Largest |1 - (retained + truncated mass)| over environment sequences.
  double max_sequence_mass_defect = 0.0;
  std::uint64_t sequences = 0;
  int n0 = 0;
  int n = 1;

  /// P(statistic >= x) with the statistic on `scale`.
  ExactTail tail(double x, Scale scale, double mu = 0.0, double sigma = 1.0) const {
    long double acc = 0.0L;
    for (const auto& a : atoms) {
      if (reaches(to_scale(a.log_ratio, n, scale, mu, sigma), x)) acc += a.prob;
    }
    return {static_cast<double>(acc), truncated_mass};
  }

  double retained_mass() const {
    long double acc = 0.0L;
    for (const auto& a : atoms) acc += a.prob;
    return static_cast<double>(acc);
  }
};

inline LogRatioLaw enumerate_log_ratio(const EnvironmentModel& env, int n0, int n, std::uint64_t z_cap,
                                       const EnumerationLimits& limits = {}) {
  if (n0 < 0 || n < 1) fail(ErrorCode::domain_error, "enumeration needs n0 >= 0 and n >= 1");
  if (z_cap < 1) fail(ErrorCode::domain_error, "z_cap must be >= 1");
  if (n0 > limits.max_n0 || n > limits.max_n)
    fail(ErrorCode::infeasible_enumeration,
         "enumeration limited to n0 <= " + std::to_string(limits.max_n0) + ", n <= " + std::to_string(limits.max_n));

  const int horizon = n0 + n;
  const std::size_t k_states = env.size();
  std::uint64_t sequences = 1;
  for (int i = 0; i < horizon; ++i) {
    if (sequences > limits.max_sequences / k_states)
      fail(ErrorCode::infeasible_enumeration, "too many environment sequences to enumerate");
    sequences *= k_states;
  }

  std::vector<detail::ConvolutionPowers> powers;
  powers.reserve(k_states);
  for (const auto& law : env.states()) powers.emplace_back(law);

  std::map<std::pair<std::uint64_t, std::uint64_t>, long double> joint;
  long double truncated_total = 0.0L;
  double max_defect = 0.0;

  std::vector<std::size_t> seq(static_cast<std::size_t>(horizon), 0);
  for (std::uint64_t code = 0; code < sequences; ++code) {
    double weight = 1.0;
    std::uint64_t c = code;
    for (int i = 0; i < horizon; ++i) {
      seq[static_cast<std::size_t>(i)] = c % k_states;
      c /= k_states;
      weight *= env.weights()[seq[static_cast<std::size_t>(i)]];
    }

    double truncated = 0.0;
    detail::Pmf head{{1, 1.0}};
    for (int k = 0; k < n0; ++k) head = detail::step_pmf(head, powers[seq[static_cast<std::size_t>(k)]], z_cap, truncated);

    long double retained = 0.0L;
    for (const auto& [z_from, p_from] : head) {
      detail::Pmf tail{{z_from, 1.0}};
      double tail_truncated = 0.0;
      for (int k = n0; k < horizon; ++k)
        tail = detail::step_pmf(tail, powers[seq[static_cast<std::size_t>(k)]], z_cap, tail_truncated);
      truncated += p_from * tail_truncated;
      for (const auto& [z_to, p_to] : tail) {
        joint[{z_from, z_to}] += static_cast<long double>(weight) * p_from * p_to;
        retained += static_cast<long double>(p_from) * p_to;
      }
    }
    max_defect = std::max(max_defect, std::fabs(1.0 - static_cast<double>(retained) - truncated));
    truncated_total += static_cast<long double>(weight) * truncated;
  }

  LogRatioLaw law;
  law.n0 = n0;
  law.n = n;
  law.sequences = sequences;
  law.truncated_mass = static_cast<double>(truncated_total);
  law.max_sequence_mass_defect = max_defect;
  law.atoms.reserve(joint.size());
  for (const auto& [zz, p] : joint) {
    const double lr = std::log(static_cast<double>(zz.second)) - std::log(static_cast<double>(zz.first));
    law.atoms.push_back({zz.first, zz.second, lr, static_cast<double>(p)});
  }
  return law;
}

/// Exact P(Z_{n0,n} >= x) on the standardized scale, using the environment's
/// own mu and sigma.
inline ExactTail exact_tail(const EnvironmentModel& env, int n0, int n, double x, std::uint64_t z_cap,
                            const EnumerationLimits& limits = {}) {
  const auto prof = moment_profile(env, 0.5, 2.0, 2);
  return enumerate_log_ratio(env, n0, n, z_cap, limits).tail(x, Scale::standardized, prof.mu, prof.sigma());
}

}  // namespace bpre
