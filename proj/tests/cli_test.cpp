#include <sys/wait.h>
#include <unistd.h>

#include <atomic>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <gtest/gtest.h>

#include "bpre/io.hpp"

namespace fs = std::filesystem;

namespace {

struct Result {
  int exit_code = -1;
  std::string out;
  std::string err;
};

std::string slurp(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  std::ostringstream s;
  s << f.rdbuf();
  return s.str();
}

class Cli : public ::testing::Test {
 protected:
  void SetUp() override {
    static std::atomic<int> counter{0};
    dir_ = fs::temp_directory_path() /
           ("bpre_cli_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }

  fs::path write(const std::string& name, const std::string& text) {
    const auto p = dir_ / name;
    std::ofstream(p) << text;
    return p;
  }

  Result run(const std::string& args) {
    const auto out = dir_ / "stdout.txt", err = dir_ / "stderr.txt";
    const std::string cmd = std::string(BPRE_CLI_PATH) + " " + args + " >" + out.string() + " 2>" + err.string();
    const int status = std::system(cmd.c_str());
    return {WIFEXITED(status) ? WEXITSTATUS(status) : -1, slurp(out), slurp(err)};
  }

  fs::path dir_;
};

const char* kM1Env = R"("environment": {"states": [{"values": [1, 2], "probs": [0.5, 0.5]},
                                                   {"values": [2, 3], "probs": [0.6, 0.4]}]})";

}  // namespace

TEST_F(Cli, ZeroOffspringIsExitOneWithCode) {
  const auto cfg = write("bad.json", R"({"environment": {"states": [{"values": [0, 2], "probs": [0.3, 0.7]}]}})");
  const auto r = run("bounds --config " + cfg.string() + " --out " + (dir_ / "o").string());
  EXPECT_EQ(r.exit_code, 1);
  const auto env = bpre::json::parse(r.err);
  EXPECT_EQ(env.at("schema_version"), 1);
  EXPECT_EQ(env.at("error").at("code"), "ZERO_OFFSPRING");
  EXPECT_FALSE(env.at("error").at("message").get<std::string>().empty());
}

TEST_F(Cli, BernsteinAtZeroIsTwo) {
  const auto cfg = write("b.json", std::string("{") + kM1Env + R"(, "n_grid": [4], "x_grid": [0], "theorems": ["bernstein"]})");
  const auto r = run("bounds -c " + cfg.string() + " -o " + (dir_ / "o").string());
  ASSERT_EQ(r.exit_code, 0) << r.err;
  const auto csv = slurp(dir_ / "o" / "bounds.csv");
  EXPECT_EQ(csv, std::string(bpre::kBoundHeader) + "\nbernstein,standardized,4,0,2,1,2,0\n");
}

TEST_F(Cli, VerifyIsDeterministicAndReparses) {
  const auto cfg = write("v.json", std::string("{") + kM1Env + R"(, "n0_grid": [0, 1], "n_grid": [4, 16],
      "x_grid": [0.5, 1, 2], "theorems": ["bernstein", {"id": "rio", "x_grid": [0.1, 0.5]}], "replicas": 3000, "seed": 5})");
  const auto a = run("verify -c " + cfg.string() + " -o " + (dir_ / "a").string() + " --workers 1");
  const auto b = run("verify -c " + cfg.string() + " -o " + (dir_ / "b").string() + " --workers 3");
  ASSERT_EQ(a.exit_code, 0) << a.err;
  ASSERT_EQ(b.exit_code, 0) << b.err;
  EXPECT_EQ(slurp(dir_ / "a" / "verify.json"), slurp(dir_ / "b" / "verify.json"));
  EXPECT_EQ(slurp(dir_ / "a" / "verify.csv"), slurp(dir_ / "b" / "verify.csv"));
  const auto doc = bpre::json::parse(slurp(dir_ / "a" / "verify.json"));
  EXPECT_EQ(doc.at("schema_version"), bpre::kSchemaVersion);
  EXPECT_TRUE(doc.at("all_pass").get<bool>());
  EXPECT_EQ(doc.at("reports").size(), 4u);
  EXPECT_EQ(bpre::json::parse(a.out).at("all_pass"), true);

  // seed override changes the sample
  const auto c = run("verify -c " + cfg.string() + " -o " + (dir_ / "c").string() + " --seed 6");
  ASSERT_EQ(c.exit_code, 0);
  EXPECT_NE(slurp(dir_ / "a" / "verify.csv"), slurp(dir_ / "c" / "verify.csv"));
}

TEST_F(Cli, EnumerateM2) {
  const auto r = run("enumerate -c " + std::string(BPRE_CONFIG_DIR) + "/m2.json -o " + (dir_ / "e").string());
  ASSERT_EQ(r.exit_code, 0) << r.err;
  const auto csv = slurp(dir_ / "e" / "exact_tail.csv");
  std::size_t lines = 0;
  for (char ch : csv) lines += ch == '\n';
  EXPECT_EQ(lines, 1u + 2 * 3 * 10);
  EXPECT_EQ(csv.rfind(bpre::kExactTailHeader, 0), 0u);
}

TEST_F(Cli, SimulateConstantEnvironment) {
  const auto r = run("simulate -c " + std::string(BPRE_CONFIG_DIR) + "/m3.json -o " + (dir_ / "s").string() +
                     " --replicas 4");
  ASSERT_EQ(r.exit_code, 0) << r.err;
  const auto csv = slurp(dir_ / "s" / "trajectories.csv");
  std::size_t lines = 0;
  for (char ch : csv) lines += ch == '\n';
  EXPECT_EQ(lines, 1u + 4 * 5);  // horizon max(n0) + max(n) = 4
}

TEST_F(Cli, CoverageAndDiagnose) {
  const auto cfg = write("c.json", std::string("{") + kM1Env + R"(, "n_grid": [32], "x_grid": [0, 1],
      "delta_grid": [0.1], "estimators": ["mu_bernstein", "z_bernstein"], "replicas": 500})");
  const auto r = run("ci-coverage -c " + cfg.string() + " -o " + (dir_ / "c").string());
  ASSERT_EQ(r.exit_code, 0) << r.err;
  const auto doc = bpre::json::parse(slurp(dir_ / "c" / "coverage.json"));
  EXPECT_EQ(doc.at("reports").size(), 2u);
  EXPECT_EQ(slurp(dir_ / "c" / "intervals.csv").rfind(bpre::kIntervalHeader, 0), 0u);

  const auto d = run("diagnose -c " + cfg.string() + " -o " + (dir_ / "d").string());
  ASSERT_EQ(d.exit_code, 0) << d.err;
  EXPECT_EQ(slurp(dir_ / "d" / "diagnose.csv").rfind(bpre::kDiagnosticHeader, 0), 0u);
}

TEST_F(Cli, UncertifiableRiskIsDomainError) {
  const auto cfg = write("m2.json", R"({"environment": {"states": [{"values": [1], "probs": [1]},
      {"values": [2], "probs": [1]}]}, "n_grid": [4], "delta_grid": [0.1], "estimators": ["mu_bounded"], "replicas": 10})");
  const auto r = run("ci-coverage -c " + cfg.string() + " -o " + (dir_ / "c").string());
  EXPECT_EQ(r.exit_code, 1);
  EXPECT_EQ(bpre::json::parse(r.err).at("error").at("code"), "DOMAIN_ERROR");
}

TEST_F(Cli, UsageErrors) {
  EXPECT_EQ(run("bounds").exit_code, 1);
  EXPECT_EQ(bpre::json::parse(run("bounds").err).at("error").at("code"), "CONFIG_PARSE");
  EXPECT_NE(run("frobnicate -c x").exit_code, 0);
  const auto missing = run("bounds -c " + (dir_ / "none.json").string());
  EXPECT_EQ(missing.exit_code, 1);
  EXPECT_EQ(bpre::json::parse(missing.err).at("error").at("code"), "CONFIG_PARSE");
  const auto malformed = write("m.json", "{ not json");
  EXPECT_EQ(bpre::json::parse(run("bounds -c " + malformed.string()).err).at("error").at("code"), "CONFIG_PARSE");
  EXPECT_EQ(run("--help").exit_code, 0);
}
