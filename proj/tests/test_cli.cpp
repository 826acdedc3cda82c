#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "cli.hpp"
#include "json.hpp"

namespace fs = std::filesystem;
using hsolve::cli::run_cli;

namespace {

struct CliRun {
  int code = 0;
  std::string out;
  std::string err;
  nlohmann::json json() const { return nlohmann::json::parse(out); }
};

CliRun cli(std::vector<std::string> args) {
  args.insert(args.begin(), "hsolve");
  std::vector<const char*> argv;
  for (const std::string& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  CliRun r;
  r.code = run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
  r.out = out.str();
  r.err = err.str();
  return r;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream s;
  s << in.rdbuf();
  return s.str();
}

class Cli : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() /
           ("hsolve_cli_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }
  std::string path(const std::string& name) const { return (dir_ / name).string(); }

  fs::path dir_;
};

// Compares against tests/data/<name>; HSOLVE_UPDATE_GOLDEN=1 rewrites it.
void expect_golden(const std::string& name, const std::string& text) {
  const fs::path golden = fs::path(HSOLVE_TEST_DATA) / name;
  if (std::getenv("HSOLVE_UPDATE_GOLDEN") != nullptr) {
    std::ofstream(golden) << text;
    return;
  }
  ASSERT_TRUE(fs::exists(golden)) << golden;
  EXPECT_EQ(text, slurp(golden));
}

// Wall-clock columns of the bench table vary between runs.
std::string mask_wall_clock(const std::string& csv) {
  std::istringstream in(csv);
  std::ostringstream out;
  std::string line;
  bool header = true;
  while (std::getline(in, line)) {
    std::vector<std::string> cells;
    std::stringstream s(line);
    for (std::string cell; std::getline(s, cell, ',');) cells.push_back(cell);
    if (!header) {
      for (int c : {5, 6, 7}) cells.at(c) = "*";
    }
    header = false;
    for (std::size_t c = 0; c < cells.size(); ++c) out << (c ? "," : "") << cells[c];
    out << '\n';
  }
  return out.str();
}

}  // namespace

TEST_F(Cli, GenPoissonRows) {
  const CliRun r = cli({"gen", "--problem", "poisson", "--n", "8", "--out", path("p.mtx")});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(r.json()["result"]["rows"], 512);
  std::ifstream in(path("p.mtx"));
  std::string header, dims;
  std::getline(in, header);
  std::getline(in, dims);
  EXPECT_EQ(dims.substr(0, 8), "512 512 ");
}

TEST_F(Cli, GenIsReproducible) {
  for (const char* name : {"a.mtx", "b.mtx"}) {
    ASSERT_EQ(cli({"gen", "--problem", "vcpoisson", "--n", "8", "--seed", "1", "--out", path(name)}).code, 0);
  }
  EXPECT_EQ(slurp(path("a.mtx")), slurp(path("b.mtx")));
}

TEST_F(Cli, GenHelmholtzIsSymmetric) {
  const CliRun r = cli({"gen", "--problem", "helmholtz", "--n", "32", "--freq", "1", "--out", path("h.mtx")});
  ASSERT_EQ(r.code, 0);
  std::ifstream in(path("h.mtx"));
  std::string header;
  std::getline(in, header);
  EXPECT_EQ(header, "%%MatrixMarket matrix coordinate real symmetric");
}

TEST_F(Cli, SolvePoissonConverges) {
  const CliRun r = cli({"solve", "--n", "16", "--rank", "8", "--solve-tol", "1e-12", "--out-csv", path("h.csv"),
                     "--out-json", path("r.json")});
  ASSERT_EQ(r.code, 0) << r.out;
  const auto j = r.json();
  EXPECT_TRUE(j["result"]["converged"].get<bool>());
  EXPECT_LE(j["result"]["final_residual"].get<double>(), 1e-12);
  EXPECT_GT(j["result"]["memory_bytes"].get<double>(), 0.0);
  for (const char* key : {"setup_seconds", "solve_seconds", "total_seconds", "iterations", "residuals"}) {
    EXPECT_TRUE(j["result"].contains(key)) << key;
  }
  EXPECT_EQ(nlohmann::json::parse(slurp(path("r.json"))), j);
  const std::string csv = slurp(path("h.csv"));
  EXPECT_EQ(csv.substr(0, csv.find('\n')), "iteration,residual");
  EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), j["result"]["iterations"].get<int>() + 2);
}

TEST_F(Cli, ExitCodes) {
  CliRun r = cli({"solve", "--matrix", path("missing.mtx")});
  EXPECT_EQ(r.code, 2);
  EXPECT_EQ(r.json()["error"], "io");

  EXPECT_EQ(cli({"solve", "--rank", "8", "--tol", "0.1"}).code, 3);
  EXPECT_EQ(cli({"solve", "--solve-tol", "0"}).code, 3);
  EXPECT_EQ(cli({"solve", "--matrix", "x.mtx", "--problem", "poisson"}).code, 3);
  EXPECT_EQ(cli({"solve", "--backend", "concurrent", "--schedule", "bsp"}).code, 3);
  EXPECT_EQ(cli({"frobnicate"}).code, 3);

  r = cli({"solve", "--n", "8", "--maxit", "1", "--solve-tol", "1e-14"});
  EXPECT_EQ(r.code, 1);
  EXPECT_FALSE(r.json()["result"]["converged"].get<bool>());

  std::ofstream(path("bad.mtx")) << "%%MatrixMarket matrix coordinate complex general\n2 2 1\n1 1 1 0\n";
  r = cli({"solve", "--matrix", path("bad.mtx")});
  EXPECT_EQ(r.code, 2);
  EXPECT_EQ(r.json()["error"], "unsupported_field");
}

TEST_F(Cli, ConfigEchoReproducesRun) {
  const CliRun first = cli({"--save-config", path("run.toml"), "solve", "--n", "10", "--tol", "0.1", "--workers",
                         "2", "--krylov", "gmres", "--seed", "7"});
  ASSERT_EQ(first.code, 0) << first.err;
  const auto a = first.json();
  EXPECT_EQ(a["version"], "0.1.0");
  EXPECT_EQ(a["config"]["seed"], 7);
  const CliRun again = cli({"solve", "--config", path("run.toml")});
  ASSERT_EQ(again.code, 0) << again.err;
  const auto b = again.json();
  EXPECT_EQ(a["config"], b["config"]);
  EXPECT_EQ(a["result"]["residuals"], b["result"]["residuals"]);
}

TEST_F(Cli, PsimCommLogGolden) {
  const CliRun r = cli({"psim", "--n", "8", "--workers", "2", "--rank", "8", "--cluster-size", "32", "--schedule",
                     "bsp", "--out-csv", path("comm.csv")});
  ASSERT_EQ(r.code, 0) << r.out;
  const auto j = r.json()["result"];
  EXPECT_TRUE(j["identical_factor"].get<bool>());
  EXPECT_EQ(j["max_solve_diff"].get<double>(), 0.0);
  EXPECT_EQ(j["locality_violations"], 0);
  expect_golden("golden_psim_n8_p2.csv", slurp(path("comm.csv")));
}

TEST_F(Cli, BenchTableGolden) {
  const CliRun r = cli({"bench", "--ns", "6,8", "--ps", "1,2", "--ranks", "4", "--tols", "0.5", "--cluster-size",
                     "16", "--out-csv", path("bench.csv"), "--out-json", path("bench.json")});
  ASSERT_EQ(r.code, 0) << r.out;
  expect_golden("golden_bench.csv", mask_wall_clock(slurp(path("bench.csv"))));
  const auto j = nlohmann::json::parse(slurp(path("bench.json")));
  EXPECT_EQ(j["rows"], 8);
  ASSERT_EQ(j["scaling"].size(), 2u);
  EXPECT_EQ(j["scaling"][0]["S"].size(), 2u);
  EXPECT_EQ(j["scaling"][0]["Es"].size(), 2u);
}

TEST_F(Cli, BenchFlagsFailedRows) {
  // 64 workers cannot split 8 clusters; the failed row is kept.
  const CliRun r = cli({"bench", "--ns", "8", "--ps", "1,64", "--out-csv", path("b.csv")});
  EXPECT_EQ(r.code, 3);
  const std::string csv = slurp(path("b.csv"));
  EXPECT_NE(csv.find(",ok\n"), std::string::npos);
  EXPECT_NE(csv.find(",error:invalid_argument\n"), std::string::npos);
}

TEST_F(Cli, ColorCheck) {
  for (const char* mode : {"strict", "owner-aware"}) {
    const CliRun r = cli({"color-check", "--n", "16", "--workers", "4", "--coloring", mode});
    ASSERT_EQ(r.code, 0) << r.out;
    const auto j = r.json()["result"];
    EXPECT_EQ(j["strict"]["conflicts"], 0);
    EXPECT_EQ(j["owner_aware"]["conflicts"], 0);
    EXPECT_LE(j["owner_aware"]["colors"].get<int>(), j["strict"]["colors"].get<int>());
  }
}
