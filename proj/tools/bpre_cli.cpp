// Command-line front end: bpre_cli <subcommand> --config FILE [overrides]
//
// Exit status: 0 success, 1 config/domain/hypothesis error (JSON envelope on
// stderr), 2 a verification or coverage check failed.

#include <algorithm>
#include <cstdint>
#include <exception>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "bpre/bpre.hpp"

namespace fs = std::filesystem;
using namespace bpre;

namespace {

struct Overrides {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> replicas;
  std::optional<std::string> out;
  std::optional<unsigned> workers;
};

ExperimentConfig load(const Overrides& o) {
  auto cfg = load_config(o.config);
  if (o.seed) cfg.seed = *o.seed;
  if (o.replicas) cfg.replicas = *o.replicas;
  if (o.out) cfg.out_dir = *o.out;
  if (o.workers) cfg.workers = *o.workers;
  if (cfg.replicas < 1) fail(ErrorCode::config_parse, "replicas must be >= 1");
  std::error_code ec;
  fs::create_directories(cfg.out_dir, ec);
  if (ec) fail(ErrorCode::config_parse, "cannot create output directory " + cfg.out_dir + ": " + ec.message());
  return cfg;
}

std::string out_path(const ExperimentConfig& cfg, const char* name) { return (fs::path(cfg.out_dir) / name).string(); }

RunOptions run_options(const ExperimentConfig& cfg) { return {cfg.policy, cfg.workers}; }

void summary(const char* command, const std::vector<std::string>& files, std::optional<bool> all_pass = {}) {
  json j{{"schema_version", kSchemaVersion}, {"command", command}, {"outputs", files}};
  if (all_pass) j["all_pass"] = *all_pass;
  std::cout << j.dump() << '\n';
}

std::vector<TheoremSpec> theorems_or_all(const ExperimentConfig& cfg) {
  if (!cfg.theorems.empty()) return cfg.theorems;
  std::vector<TheoremSpec> all;
  for (Theorem t : kAllTheorems) all.push_back({t, cfg.x_grid, 2.0, 0.5, std::nullopt});
  return all;
}

MomentProfile theorem_profile(const ExperimentConfig& cfg, const TheoremSpec& spec) {
  auto prof = moment_profile(cfg.env, spec.alpha, spec.p, cfg.k_max);
  if (spec.H_override) {
    if (spec.theorem == Theorem::bernstein) prof.bernstein_H = *spec.H_override;
    else if (spec.theorem == Theorem::hoeffding) prof.upper = *spec.H_override;
    else fail(ErrorCode::hypothesis_unmet, std::string(theorem_name(spec.theorem)) + " bound has no H constant");
  }
  return prof;
}

int cmd_simulate(const ExperimentConfig& cfg) {
  const int horizon =
      *std::max_element(cfg.n0_grid.begin(), cfg.n0_grid.end()) + *std::max_element(cfg.n_grid.begin(), cfg.n_grid.end());
  const Simulator sim(cfg.env, cfg.policy);
  CsvWriter csv(kTrajectoryHeader);
  std::size_t rejected = 0;
  for (std::size_t i = 0; i < cfg.replicas; ++i) {
    ReplicaStream rng(cfg.seed, i);
    const auto traj = sim.try_run(horizon, rng);
    if (!traj) {
      ++rejected;
      continue;
    }
    append_trajectory(csv, i, *traj);
  }
  const auto path = out_path(cfg, "trajectories.csv");
  write_file(path, csv.str());
  if (rejected) std::cerr << rejected << " replica(s) exceeded the exact threshold and were dropped\n";
  summary("simulate", {path});
  return 0;
}

int cmd_bounds(const ExperimentConfig& cfg) {
  CsvWriter csv(kBoundHeader);
  for (const auto& spec : theorems_or_all(cfg)) {
    if (spec.x_grid.empty()) fail(ErrorCode::config_parse, "no x_grid for " + std::string(theorem_name(spec.theorem)));
    const auto prof = theorem_profile(cfg, spec);
    for (int n : cfg.n_grid)
      for (double x : spec.x_grid) append_bound(csv, spec.theorem, n, x, evaluate_bound(spec.theorem, x, n, prof));
  }
  const auto path = out_path(cfg, "bounds.csv");
  write_file(path, csv.str());
  summary("bounds", {path});
  return 0;
}

int cmd_verify(const ExperimentConfig& cfg) {
  const auto specs = theorems_or_all(cfg);
  for (const auto& spec : specs)
    if (spec.x_grid.empty()) fail(ErrorCode::config_parse, "no x_grid for " + std::string(theorem_name(spec.theorem)));

  std::vector<VerificationReport> reports;
  for (int n0 : cfg.n0_grid) {
    const auto sample = sample_log_ratios(cfg.env, n0, cfg.n_grid, cfg.replicas, cfg.seed, run_options(cfg));
    for (const auto& spec : specs) {
      VerifyOptions vo;
      vo.alpha = spec.alpha;
      vo.p = spec.p;
      vo.k_max = cfg.k_max;
      vo.H_override = spec.H_override;
      vo.run = run_options(cfg);
      reports.push_back(verify_bound_on_sample(cfg.env, spec.theorem, spec.x_grid, sample, cfg.seed, vo));
    }
  }
  const auto doc = verification_document(reports);
  const auto json_path = out_path(cfg, "verify.json");
  const auto csv_path = out_path(cfg, "verify.csv");
  write_file(json_path, doc.dump(2) + "\n");
  write_file(csv_path, verification_csv(reports));
  const bool ok = doc.at("all_pass").get<bool>();
  summary("verify", {json_path, csv_path}, ok);
  return ok ? 0 : 2;
}

int cmd_coverage(const ExperimentConfig& cfg) {
  std::vector<Estimator> estimators = cfg.estimators;
  if (estimators.empty()) estimators.assign(std::begin(kAllEstimators), std::end(kAllEstimators));

  const auto prof = moment_profile(cfg.env, 0.5, 2.0, cfg.k_max);
  std::vector<CoverageReport> reports;
  std::vector<IntervalResult> widths;
  for (Estimator e : estimators)
    for (int n0 : cfg.n0_grid)
      for (int n : cfg.n_grid)
        for (double delta : cfg.delta_grid) {
          reports.push_back(coverage_experiment(cfg.env, e, n0, n, delta, cfg.replicas, cfg.seed, run_options(cfg)));
          const bool for_mu = e == Estimator::mu_bernstein || e == Estimator::mu_bounded;
          // a_n is reported for a unit log ratio / unit start; the realized
          // intervals shift with the data
          IntervalResult r;
          r.kind = for_mu ? IntervalKind::mu_lower : IntervalKind::z_upper;
          r.n = n;
          r.n0 = n0;
          r.delta = delta;
          r.delta_n = reports.back().delta_n;
          r.a_n = for_mu ? prof.mu - r.delta_n : std::exp(n * (prof.mu + r.delta_n));
          r.log_a_n = for_mu ? r.a_n : n * (prof.mu + r.delta_n);
          widths.push_back(r);
        }

  const auto doc = coverage_document(reports);
  const auto json_path = out_path(cfg, "coverage.json");
  const auto csv_path = out_path(cfg, "intervals.csv");
  write_file(json_path, doc.dump(2) + "\n");
  write_file(csv_path, interval_csv(widths));
  const bool ok = doc.at("all_pass").get<bool>();
  summary("ci-coverage", {json_path, csv_path}, ok);
  return ok ? 0 : 2;
}

int cmd_enumerate(const ExperimentConfig& cfg) {
  if (cfg.x_grid.empty()) fail(ErrorCode::config_parse, "enumerate needs an x_grid");
  const auto prof = scale_profile(cfg.env, cfg.scale);
  CsvWriter csv(kExactTailHeader);
  for (int n0 : cfg.n0_grid)
    for (int n : cfg.n_grid) {
      const auto law = enumerate_log_ratio(cfg.env, n0, n, cfg.z_cap);
      for (double x : cfg.x_grid) {
        const auto t = law.tail(x, cfg.scale, prof.mu, prof.sigma());
        csv.row(n0, n, scale_name(cfg.scale), x, t.prob, t.truncated_mass, t.upper());
      }
    }
  const auto path = out_path(cfg, "exact_tail.csv");
  write_file(path, csv.str());
  summary("enumerate", {path});
  return 0;
}

int cmd_diagnose(const ExperimentConfig& cfg) {
  if (cfg.x_grid.empty()) fail(ErrorCode::config_parse, "diagnose needs an x_grid");
  CsvWriter csv(kDiagnosticHeader);
  for (int n0 : cfg.n0_grid) {
    const auto rep = normal_tail_diagnostic(cfg.env, n0, cfg.n_grid, cfg.x_grid, cfg.replicas, cfg.seed, run_options(cfg));
    for (const auto& r : rep.rows) csv.row(n0, r.n, r.x, r.p_hat, r.std_err, r.normal_tail, r.ratio, r.moderate);
  }
  const auto path = out_path(cfg, "diagnose.csv");
  write_file(path, csv.str());
  summary("diagnose", {path});
  return 0;
}

int report_error(std::string_view code, std::string_view message) {
  json env{{"schema_version", kSchemaVersion}, {"error", {{"code", code}, {"message", message}}}};
  std::cerr << env.dump() << '\n';
  return 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Supercritical branching processes in random environments: simulation, bounds, verification"};
  app.require_subcommand(1);
  Overrides o;

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("-c,--config", o.config, "JSON experiment config")->required();
    sub->add_option("--seed", o.seed, "override the config seed");
    sub->add_option("--replicas", o.replicas, "override the replica count");
    sub->add_option("-o,--out", o.out, "override the output directory");
    sub->add_option("--workers", o.workers, "worker threads (0 = hardware concurrency)");
  };

  struct Command {
    const char* name;
    const char* help;
    int (*run)(const ExperimentConfig&);
  };
  const Command commands[] = {
      {"simulate", "write trajectories.csv", cmd_simulate},
      {"bounds", "write bounds.csv for the selected theorems", cmd_bounds},
      {"verify", "check bound domination, write verify.json and verify.csv", cmd_verify},
      {"ci-coverage", "interval coverage experiment, write coverage.json and intervals.csv", cmd_coverage},
      {"enumerate", "exact tails by enumeration, write exact_tail.csv", cmd_enumerate},
      {"diagnose", "ratio to the normal tail, write diagnose.csv", cmd_diagnose},
  };
  std::vector<std::pair<CLI::App*, const Command*>> subs;
  for (const auto& c : commands) {
    auto* sub = app.add_subcommand(c.name, c.help);
    add_common(sub);
    subs.emplace_back(sub, &c);
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    return report_error(code_name(ErrorCode::config_parse), e.what());
  }

  try {
    for (const auto& [sub, cmd] : subs)
      if (sub->parsed()) return cmd->run(load(o));
  } catch (const Error& e) {
    return report_error(code_name(e.code()), e.what());
  } catch (const std::exception& e) {
    return report_error("INTERNAL", e.what());
  }
  return 1;
}
