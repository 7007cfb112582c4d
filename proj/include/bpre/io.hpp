#pragma once

// Experiment configuration (JSON) and CSV/JSON serialization of results.
// Column sets and JSON keys are part of the output contract; bump
// kSchemaVersion whenever one changes.

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <type_traits>
#include <vector>

#include <json.hpp>

#include "bpre/bounds.hpp"
#include "bpre/enumeration.hpp"
#include "bpre/error.hpp"
#include "bpre/harness.hpp"
#include "bpre/intervals.hpp"
#include "bpre/offspring.hpp"
#include "bpre/process.hpp"

namespace bpre {

using json = nlohmann::ordered_json;

inline constexpr int kSchemaVersion = 1;

// ---------------------------------------------------------------------------
// Formatting

/// Shortest round-trip text for a double; identical input gives identical text.
inline std::string fmt_double(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[32];
  for (int prec = 15; prec <= 17; ++prec) {
    std::snprintf(buf, sizeof buf, "%.*g", prec, v);
    if (std::strtod(buf, nullptr) == v) break;
  }
  return buf;
}

class CsvWriter {
 public:
  explicit CsvWriter(std::string_view header) { out_ << header << '\n'; }

  template <class... Cells>
  void row(const Cells&... cells) {
    bool first = true;
    ((out_ << (first ? "" : ",") << cell(cells), first = false), ...);
    out_ << '\n';
  }

  std::string str() const { return out_.str(); }

 private:
  static std::string cell(double v) { return fmt_double(v); }
  static std::string cell(bool v) { return v ? "1" : "0"; }
  static std::string cell(std::string_view v) { return std::string(v); }
  static std::string cell(const std::string& v) { return v; }
  static std::string cell(const char* v) { return v; }
  template <class Int, class = std::enable_if_t<std::is_integral_v<Int>>>
  static std::string cell(Int v) { return std::to_string(v); }

  std::ostringstream out_;
};

inline void write_file(const std::string& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary);
  if (!f) fail(ErrorCode::config_parse, "cannot write " + path);
  f << text;
}

// ---------------------------------------------------------------------------
// Configuration

struct TheoremSpec {
  Theorem theorem = Theorem::bernstein;
  std::vector<double> x_grid;
  double p = 2.0;
  double alpha = 0.5;
  std::optional<double> H_override;
};

struct ExperimentConfig {
  EnvironmentModel env;
  std::vector<int> n0_grid{0};
  std::vector<int> n_grid{1};
  std::vector<double> x_grid;
  Scale scale = Scale::standardized;
  std::vector<TheoremSpec> theorems;
  std::vector<Estimator> estimators;
  std::vector<double> delta_grid{0.1};
  std::size_t replicas = 1000;
  std::uint64_t seed = 1;
  int k_max = 50;
  std::uint64_t z_cap = 1u << 16;
  GrowthPolicy policy{10'000'000, GrowthMode::clt_approx};
  unsigned workers = 0;
  std::string out_dir = ".";
};

namespace detail {

template <class T>
std::vector<T> read_grid(const json& j, const char* one, const char* many, std::vector<T> fallback) {
  std::vector<T> out;
  if (j.contains(many))
    out = j.at(many).get<std::vector<T>>();
  else if (j.contains(one))
    out = {j.at(one).get<T>()};
  else
    return fallback;
  if (out.empty()) fail(ErrorCode::config_parse, std::string("'") + many + "' must not be empty");
  for (std::size_t i = 1; i < out.size(); ++i)
    if (!(out[i - 1] < out[i])) fail(ErrorCode::config_parse, std::string("'") + many + "' must be sorted ascending");
  return out;
}

}  // namespace detail

inline OffspringLaw parse_offspring_law(const json& j) {
  const auto values = j.at("values").get<std::vector<std::int64_t>>();
  const auto probs = j.at("probs").get<std::vector<double>>();
  if (values.size() != probs.size()) fail(ErrorCode::config_parse, "offspring 'values' and 'probs' differ in length");
  std::vector<RawPoint> pts;
  for (std::size_t i = 0; i < values.size(); ++i) pts.push_back({values[i], probs[i]});
  return make_offspring_law(pts);
}

inline EnvironmentModel parse_environment(const json& j) {
  std::vector<OffspringLaw> states;
  for (const auto& s : j.at("states")) states.push_back(parse_offspring_law(s));
  std::vector<double> weights;
  if (j.contains("weights"))
    weights = j.at("weights").get<std::vector<double>>();
  else
    weights.assign(states.size(), states.empty() ? 0.0 : 1.0 / static_cast<double>(states.size()));
  return make_environment(std::move(states), std::move(weights));
}

inline json environment_to_json(const EnvironmentModel& env) {
  json states = json::array();
  for (const auto& law : env.states()) {
    json values = json::array(), probs = json::array();
    for (const auto& pt : law.support()) {
      values.push_back(pt.value);
      probs.push_back(pt.prob);
    }
    states.push_back({{"values", values}, {"probs", probs}});
  }
  return {{"states", states}, {"weights", std::vector<double>(env.weights().begin(), env.weights().end())}};
}

/// Parses a config document. Library errors (e.g. ZERO_OFFSPRING) propagate
/// with their own codes; malformed JSON and type mismatches become CONFIG_PARSE.
inline ExperimentConfig parse_config(const json& j) {
  try {
    if (j.contains("schema_version") && j.at("schema_version").get<int>() != kSchemaVersion)
      fail(ErrorCode::config_parse, "unsupported schema_version");
    ExperimentConfig cfg;
    cfg.env = parse_environment(j.at("environment"));
    cfg.n0_grid = detail::read_grid<int>(j, "n0", "n0_grid", {0});
    cfg.n_grid = detail::read_grid<int>(j, "n", "n_grid", {1});
    cfg.x_grid = detail::read_grid<double>(j, "x", "x_grid", {});
    cfg.delta_grid = detail::read_grid<double>(j, "delta", "delta_grid", {0.1});
    if (j.contains("scale")) cfg.scale = parse_scale(j.at("scale").get<std::string>());
    cfg.replicas = j.value("replicas", cfg.replicas);
    cfg.seed = j.value("seed", cfg.seed);
    cfg.k_max = j.value("k_max", cfg.k_max);
    cfg.z_cap = j.value("z_cap", cfg.z_cap);
    cfg.workers = j.value("workers", cfg.workers);
    const double alpha = j.value("alpha", 0.5);
    const double p = j.value("p", 2.0);

    if (j.contains("growth")) {
      const auto& g = j.at("growth");
      cfg.policy.exact_threshold = g.value("exact_threshold", cfg.policy.exact_threshold);
      const auto mode = g.value("mode", std::string("clt_approx"));
      if (mode == "reject")
        cfg.policy.mode_above_threshold = GrowthMode::reject;
      else if (mode == "clt_approx")
        cfg.policy.mode_above_threshold = GrowthMode::clt_approx;
      else
        fail(ErrorCode::config_parse, "growth.mode must be 'reject' or 'clt_approx'");
    }

    if (j.contains("theorems")) {
      for (const auto& t : j.at("theorems")) {
        TheoremSpec spec;
        spec.p = p;
        spec.alpha = alpha;
        spec.x_grid = cfg.x_grid;
        if (t.is_string()) {
          spec.theorem = parse_theorem(t.get<std::string>());
        } else {
          spec.theorem = parse_theorem(t.at("id").get<std::string>());
          spec.x_grid = detail::read_grid<double>(t, "x", "x_grid", cfg.x_grid);
          spec.p = t.value("p", p);
          spec.alpha = t.value("alpha", alpha);
          if (t.contains("H")) spec.H_override = t.at("H").get<double>();
        }
        cfg.theorems.push_back(std::move(spec));
      }
    }
    if (j.contains("estimators"))
      for (const auto& e : j.at("estimators")) cfg.estimators.push_back(parse_estimator(e.get<std::string>()));
    if (j.contains("output")) cfg.out_dir = j.at("output").value("dir", cfg.out_dir);
    return cfg;
  } catch (const json::exception& e) {
    fail(ErrorCode::config_parse, e.what());
  }
}

inline ExperimentConfig load_config(const std::string& path) {
  std::ifstream f(path);
  if (!f) fail(ErrorCode::config_parse, "cannot open config " + path);
  json j;
  try {
    j = json::parse(f, nullptr, true, /*ignore_comments=*/true);
  } catch (const json::exception& e) {
    fail(ErrorCode::config_parse, e.what());
  }
  return parse_config(j);
}

inline json error_envelope(ErrorCode code, std::string_view message) {
  return {{"schema_version", kSchemaVersion},
          {"error", {{"code", std::string(code_name(code))}, {"message", std::string(message)}}}};
}

// ---------------------------------------------------------------------------
// CSV outputs

inline constexpr std::string_view kTrajectoryHeader = "replica,k,z,ln_z,s,ln_w,env_idx,approx_flag";
inline constexpr std::string_view kBoundHeader =
    "theorem_id,scale,n,x,raw_value,clamped_value,component_1,component_2";
inline constexpr std::string_view kVerifyHeader =
    "theorem_id,scale,n0,n,x,p_hat,std_err,replicas,p_hat_exact,exact_replicas,bound_raw,bound_clamped,pass";
inline constexpr std::string_view kExactTailHeader = "n0,n,scale,x,prob,truncated_mass,upper_prob";
inline constexpr std::string_view kDiagnosticHeader = "n0,n,x,p_hat,std_err,normal_tail,ratio,moderate";
inline constexpr std::string_view kIntervalHeader = "kind,n,n0,delta,delta_n,a_n";

/// Rows for one trajectory; z is blank once only ln Z is tracked, env_idx is
/// the state that produced generation k (blank at k = 0).
inline void append_trajectory(CsvWriter& csv, std::size_t replica, const Trajectory& t) {
  for (std::size_t k = 0; k < t.ln_z.size(); ++k) {
    csv.row(replica, k, t.z[k] ? std::to_string(*t.z[k]) : std::string(), t.ln_z[k], t.s[k], t.ln_w[k],
            k == 0 ? std::string() : std::to_string(t.env_idx[k - 1]), static_cast<bool>(t.approx[k]));
  }
}

inline void append_bound(CsvWriter& csv, Theorem t, int n, double x, const BoundValue& b) {
  csv.row(theorem_name(t), scale_name(theorem_scale(t)), n, x, b.value, b.clamped(), b.component(0), b.component(1));
}

inline std::string verification_csv(const std::vector<VerificationReport>& reports) {
  CsvWriter csv(kVerifyHeader);
  for (const auto& r : reports)
    for (const auto& p : r.points)
      csv.row(theorem_name(r.theorem), scale_name(r.scale), r.n0, p.n, p.x, p.tail.p_hat, p.tail.std_err,
              p.tail.replicas, p.tail.p_hat_exact(), p.tail.exact_replicas, p.bound_raw, p.bound_clamped, p.pass);
  return csv.str();
}

inline std::string diagnostic_csv(const DiagnosticReport& rep) {
  CsvWriter csv(kDiagnosticHeader);
  for (const auto& r : rep.rows) csv.row(rep.n0, r.n, r.x, r.p_hat, r.std_err, r.normal_tail, r.ratio, r.moderate);
  return csv.str();
}

inline std::string interval_csv(const std::vector<IntervalResult>& rows) {
  CsvWriter csv(kIntervalHeader);
  for (const auto& r : rows) csv.row(interval_kind_name(r.kind), r.n, r.n0, r.delta, r.delta_n, r.a_n);
  return csv.str();
}

// ---------------------------------------------------------------------------
// JSON outputs

inline json profile_to_json(const MomentProfile& p) {
  return {{"mu", p.mu},
          {"sigma2", p.sigma2},
          {"bernstein_H", p.bernstein_H},
          {"alpha", p.alpha},
          {"u", p.u},
          {"p", p.p},
          {"abs_p_moment", p.abs_p_moment},
          {"std_abs_p_moment", p.std_abs_p_moment},
          {"lower", p.lower},
          {"upper", p.upper},
          {"k_max", p.k_max}};
}

inline json to_json(const VerificationReport& r) {
  json points = json::array();
  for (const auto& p : r.points) {
    points.push_back({{"x", p.x},
                      {"n", p.n},
                      {"p_hat", p.tail.p_hat},
                      {"std_err", p.tail.std_err},
                      {"replicas", p.tail.replicas},
                      {"p_hat_exact", p.tail.p_hat_exact()},
                      {"exact_replicas", p.tail.exact_replicas},
                      {"rejected", p.tail.rejected},
                      {"bound_raw", p.bound_raw},
                      {"bound_clamped", p.bound_clamped},
                      {"pass", p.pass}});
  }
  return {{"theorem_id", std::string(theorem_name(r.theorem))},
          {"scale", std::string(scale_name(r.scale))},
          {"n0", r.n0},
          {"replicas", r.replicas},
          {"seed", r.seed},
          {"profile", profile_to_json(r.profile)},
          {"hypothesis_ok", r.hypothesis_ok},
          {"hypothesis_note", r.hypothesis_note},
          {"approximations_used", r.any_approx()},
          {"points", points},
          {"summary", {{"passed", r.passed()}, {"total", r.points.size()}, {"pass_rate", r.pass_rate()}}}};
}

inline json verification_document(const std::vector<VerificationReport>& reports) {
  json arr = json::array();
  bool all = true;
  for (const auto& r : reports) {
    arr.push_back(to_json(r));
    all = all && r.all_pass();
  }
  return {{"schema_version", kSchemaVersion}, {"all_pass", all}, {"reports", arr}};
}

inline json to_json(const CoverageReport& r) {
  return {{"estimator", std::string(estimator_name(r.estimator))},
          {"n0", r.n0},
          {"n", r.n},
          {"delta", r.delta},
          {"delta_n", r.delta_n},
          {"replicas", r.replicas},
          {"rejected", r.rejected},
          {"exact_replicas", r.exact_replicas},
          {"covered", r.covered},
          {"coverage", r.coverage},
          {"std_err", r.std_err},
          {"threshold", r.threshold},
          {"seed", r.seed},
          {"pass", r.pass}};
}

inline json coverage_document(const std::vector<CoverageReport>& reports) {
  json arr = json::array();
  bool all = true;
  for (const auto& r : reports) {
    arr.push_back(to_json(r));
    all = all && r.pass;
  }
  return {{"schema_version", kSchemaVersion}, {"all_pass", all}, {"reports", arr}};
}

inline json to_json(const IntervalResult& r) {
  return {{"kind", std::string(interval_kind_name(r.kind))},
          {"n", r.n},
          {"n0", r.n0},
          {"delta", r.delta},
          {"delta_n", r.delta_n},
          {"a_n", r.a_n}};
}

inline json to_json(const MartingaleReport& r) {
  return {{"n", r.n},
          {"replicas", r.replicas},
          {"rejected", r.rejected},
          {"mean_w", r.mean_w},
          {"std_err", r.std_err},
          {"max_decomposition_residual", r.max_decomposition_residual},
          {"seed", r.seed},
          {"pass", r.pass}};
}

}  // namespace bpre
