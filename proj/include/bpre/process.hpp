#pragma once

// Simulation of a branching process in an i.i.d. random environment.
//
// Populations are exact integers while Z <= exact_threshold. The associated
// random walk S_k and the normalized population ln W_k = ln Z_k - S_k are
// accumulated step by step, so the decomposition ln Z_k = S_k + ln W_k is a
// real check on the bookkeeping rather than a definition.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <optional>
#include <random>
#include <string>
#include <string_view>
#include <vector>

#include "bpre/error.hpp"
#include "bpre/offspring.hpp"
#include "bpre/rng.hpp"

namespace bpre {

enum class GrowthMode { reject, clt_approx };

struct GrowthPolicy {
  std::uint64_t exact_threshold = 10'000'000;
  GrowthMode mode_above_threshold = GrowthMode::reject;
};

/// Samples of a statistic within this distance below x still count as >= x.
/// Keeps lattice-valued statistics (deterministic laws) from flipping on
/// rounding noise, identically in every engine.
inline constexpr double kTieTolerance = 1e-9;

inline bool reaches(double statistic, double x) { return statistic >= x - kTieTolerance; }

struct Trajectory {
  /// Exact Z_k; empty once the population has passed the exact threshold.
  std::vector<std::optional<std::uint64_t>> z;
  std::vector<double> ln_z;
  /// env_idx[k] is the state of xi_k, which produced generation k + 1.
  std::vector<std::size_t> env_idx;
  std::vector<double> s;
  std::vector<double> ln_w;
  /// approx[k] is true when generation k came from the normal approximation.
  std::vector<bool> approx;

  int generations() const { return static_cast<int>(ln_z.size()) - 1; }
  bool any_approx() const { return std::find(approx.begin(), approx.end(), true) != approx.end(); }
  double w(int k) const { return std::exp(ln_w.at(static_cast<std::size_t>(k))); }
};

/// Sum of z i.i.d. draws from `law`, sampled exactly through the multinomial
/// vector of per-value counts.
template <class Rng>
std::uint64_t offspring_sum_sample(const OffspringLaw& law, std::uint64_t z, Rng& rng) {
  if (z == 0) fail(ErrorCode::domain_error, "offspring_sum_sample needs z >= 1");
  if (z > std::numeric_limits<std::uint64_t>::max() / law.max_value())
    fail(ErrorCode::domain_error, "offspring sum would overflow 64 bits");

  const auto support = law.support();
  if (support.size() == 1) return z * support.front().value;

  std::uint64_t remaining = z;
  double remaining_prob = 1.0;
  std::uint64_t total = 0;
  for (std::size_t j = 0; j + 1 < support.size() && remaining > 0; ++j) {
    const double q = std::clamp(support[j].prob / remaining_prob, 0.0, 1.0);
    std::binomial_distribution<std::uint64_t> pick(remaining, q);
    const std::uint64_t count = pick(rng);
    total += count * support[j].value;
    remaining -= count;
    remaining_prob -= support[j].prob;
  }
  total += remaining * support.back().value;
  return total;
}

/// Reusable simulation setup for one (environment, policy) pair.
class Simulator {
 public:
  Simulator(EnvironmentModel env, GrowthPolicy policy) : env_(std::move(env)), policy_(policy) {
    if (policy_.exact_threshold < 1) fail(ErrorCode::domain_error, "exact_threshold must be >= 1");
    std::uint64_t max_value = 1;
    double acc = 0.0;
    for (std::size_t e = 0; e < env_.size(); ++e) {
      const auto& law = env_.state(e);
      max_value = std::max(max_value, law.max_value());
      log_mean_.push_back(std::log(law.mean()));
      acc += env_.weights()[e];
      cumulative_.push_back(acc);
    }
    cumulative_.back() = 1.0;
    if (policy_.exact_threshold > (std::uint64_t{1} << 53) / max_value)
      fail(ErrorCode::domain_error, "exact_threshold too large for exact arithmetic");
  }

  const EnvironmentModel& environment() const { return env_; }
  const GrowthPolicy& policy() const { return policy_; }
  double log_mean(std::size_t e) const { return log_mean_.at(e); }

  /// One trajectory of `generations` steps; std::nullopt when the policy is
  /// `reject` and the population passed the exact threshold.
  std::optional<Trajectory> try_run(int generations, ReplicaStream& rng) const {
    if (generations < 1) fail(ErrorCode::domain_error, "trajectory needs N >= 1");
    const auto n = static_cast<std::size_t>(generations);

    Trajectory t;
    t.z.reserve(n + 1);
    t.ln_z.reserve(n + 1);
    t.env_idx.reserve(n);
    t.s.reserve(n + 1);
    t.ln_w.reserve(n + 1);
    t.approx.reserve(n + 1);
    t.z.emplace_back(1);
    t.ln_z.push_back(0.0);
    t.s.push_back(0.0);
    t.ln_w.push_back(0.0);
    t.approx.push_back(false);

    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::normal_distribution<double> gauss(0.0, 1.0);
    std::optional<std::uint64_t> exact = 1;
    double ln_z = 0.0;

    for (std::size_t k = 0; k < n; ++k) {
      const std::size_t e = pick_state(unit(rng));
      const auto& law = env_.state(e);
      const double step_mean = log_mean_[e];
      t.env_idx.push_back(e);

      bool approx = false;
      double next_ln_z = 0.0;
      if (exact && *exact <= policy_.exact_threshold) {
        const std::uint64_t next = offspring_sum_sample(law, *exact, rng);
        exact = next;
        next_ln_z = std::log(static_cast<double>(next));
      } else {
        // Z_{k+1} ~ N(Z m, Z var) given Z_k = Z and xi_k; only ln Z is kept.
        approx = true;
        exact.reset();
        const double rel_sd = std::sqrt(law.variance() * std::exp(-ln_z)) / law.mean();
        double jump = rel_sd * gauss(rng);
        const double lo = static_cast<double>(law.support().front().value) / law.mean() - 1.0;
        const double hi = static_cast<double>(law.max_value()) / law.mean() - 1.0;
        jump = std::clamp(jump, lo, hi);
        next_ln_z = ln_z + step_mean + std::log1p(jump);
      }

      if (exact && *exact > policy_.exact_threshold && policy_.mode_above_threshold == GrowthMode::reject)
        return std::nullopt;

      t.ln_w.push_back(t.ln_w.back() + (next_ln_z - ln_z - step_mean));
      t.s.push_back(t.s.back() + step_mean);
      t.z.push_back(exact);
      t.ln_z.push_back(next_ln_z);
      t.approx.push_back(approx);
      ln_z = next_ln_z;
    }
    return t;
  }

  Trajectory run(int generations, std::uint64_t seed, std::uint64_t replica_id) const {
    ReplicaStream rng(seed, replica_id);
    auto t = try_run(generations, rng);
    if (!t)
      fail(ErrorCode::threshold_exceeded,
           "population exceeded exact_threshold " + std::to_string(policy_.exact_threshold) +
               " in replica " + std::to_string(replica_id));
    return std::move(*t);
  }

 private:
  std::size_t pick_state(double uniform) const {
    const auto it = std::upper_bound(cumulative_.begin(), cumulative_.end(), uniform);
    return std::min(static_cast<std::size_t>(it - cumulative_.begin()), cumulative_.size() - 1);
  }

  EnvironmentModel env_;
  GrowthPolicy policy_;
  std::vector<double> log_mean_;
  std::vector<double> cumulative_;
};

inline Trajectory simulate_trajectory(const EnvironmentModel& env, int generations, GrowthPolicy policy,
                                      std::uint64_t seed, std::uint64_t replica_id) {
  return Simulator(env, policy).run(generations, seed, replica_id);
}

/// Realization of (ln(Z_{n0+n}/Z_{n0}) - n mu) / (sigma sqrt(n)).
struct StandardizedStat {
  double value = 0.0;
};

inline double standardize(double log_ratio, int n, double mu, double sigma) {
  const double dn = static_cast<double>(n);
  return (log_ratio - dn * mu) / (sigma * std::sqrt(dn));
}

/// (1/n) ln(Z_{n0+n}/Z_{n0}) - mu, the scale used by the polynomial and range bounds.
inline double per_generation(double log_ratio, int n, double mu) {
  return log_ratio / static_cast<double>(n) - mu;
}

/// Scale on which a tail event {statistic >= x} is stated.
enum class Scale {
  standardized,    ///< (ln(Z_{n0+n}/Z_{n0}) - n mu) / (sigma sqrt(n))
  per_generation,  ///< (1/n) ln(Z_{n0+n}/Z_{n0}) - mu
  log_ratio,       ///< ln(Z_{n0+n}/Z_{n0}), needs no moments (constant environments)
};

inline std::string_view scale_name(Scale scale) {
  switch (scale) {
    case Scale::standardized: return "standardized";
    case Scale::per_generation: return "per_generation";
    case Scale::log_ratio: return "log_ratio";
  }
  return "unknown";
}

inline Scale parse_scale(std::string_view name) {
  if (name == "standardized") return Scale::standardized;
  if (name == "per_generation") return Scale::per_generation;
  if (name == "log_ratio") return Scale::log_ratio;
  fail(ErrorCode::config_parse, "unknown scale '" + std::string(name) + "'");
}

inline double to_scale(double log_ratio, int n, Scale scale, double mu, double sigma) {
  switch (scale) {
    case Scale::standardized: return standardize(log_ratio, n, mu, sigma);
    case Scale::per_generation: return per_generation(log_ratio, n, mu);
    case Scale::log_ratio: return log_ratio;
  }
  return log_ratio;
}

inline double log_ratio(const Trajectory& traj, int n0, int n) {
  if (n0 < 0 || n < 1 || n0 + n > traj.generations())
    fail(ErrorCode::domain_error, "window [n0, n0 + n] outside the trajectory");
  return traj.ln_z[static_cast<std::size_t>(n0 + n)] - traj.ln_z[static_cast<std::size_t>(n0)];
}

inline StandardizedStat standardized_statistic(const Trajectory& traj, int n0, int n, const MomentProfile& profile) {
  return {standardize(log_ratio(traj, n0, n), n, profile.mu, profile.sigma())};
}

}  // namespace bpre
