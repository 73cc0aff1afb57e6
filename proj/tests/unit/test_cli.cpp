#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <gtest/gtest.h>

#include "ipddp/cli.hpp"
#include "ipddp/trace_io.hpp"

namespace ipddp {
namespace {

namespace fs = std::filesystem;

fs::path fresh_dir(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("ipddp_cli_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

int run(const std::vector<std::string>& args, std::string* out_text = nullptr, std::string* err_text = nullptr) {
  std::ostringstream out, err;
  const int code = run_command(args, out, err);
  if (out_text) *out_text = out.str();
  if (err_text) *err_text = err.str();
  return code;
}

TEST(Cli, SolveWritesTraceAndSolution) {
  const fs::path dir = fresh_dir("solve");
  ASSERT_EQ(run({"solve", "--problem", "pendulum", "--algorithm", "feasible-ipddp", "--seed", "0", "--out",
                 dir.string()}),
            kExitOk);
  const fs::path trace = dir / "pendulum_feasible-ipddp_solve.csv";
  ASSERT_TRUE(fs::exists(trace));
  const auto records = read_trace_csv(trace);
  ASSERT_FALSE(records.empty());
  EXPECT_LE(records.back().F_inf, 1e-7);
  EXPECT_TRUE(records.back().optimality_error.has_value());
  ASSERT_TRUE(fs::exists(dir / "pendulum_feasible-ipddp_solution.json"));

  std::string text;
  EXPECT_EQ(run({"verify", (dir / "pendulum_feasible-ipddp_solution.json").string()}, &text), kExitOk);
  EXPECT_NE(text.find("kkt: pass"), std::string::npos);
  EXPECT_NE(text.find("derivatives: pass"), std::string::npos);
}

TEST(Cli, TraceFilesAreByteIdentical) {
  const fs::path a = fresh_dir("det_a"), b = fresh_dir("det_b");
  for (const fs::path& d : {a, b}) {
    run({"solve", "--problem", "pendulum", "--algorithm", "infeasible-ipddp", "--seed", "5", "--max-iter", "40",
         "--out", d.string()});
  }
  const std::string name = "pendulum_infeasible-ipddp_solve.csv";
  ASSERT_TRUE(fs::exists(a / name));
  EXPECT_EQ(slurp(a / name), slurp(b / name));
}

TEST(Cli, TraceColumnsConstantAndFinite) {
  const fs::path dir = fresh_dir("columns");
  run({"solve", "--problem", "car", "--algorithm", "feasible-ipddp", "--max-iter", "25", "--out", dir.string()});
  std::ifstream in(dir / "car_feasible-ipddp_solve.csv");
  std::string line;
  std::getline(in, line);
  EXPECT_EQ(line, kTraceHeader);
  int rows = 0;
  while (std::getline(in, line)) {
    EXPECT_EQ(std::count(line.begin(), line.end(), ','), 7) << line;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) {
      if (cell.empty()) continue;
      EXPECT_TRUE(std::isfinite(std::stod(cell))) << line;
    }
    ++rows;
  }
  EXPECT_EQ(rows, 26);
}

TEST(Cli, BenchWritesOneTracePerTrialAndSummary) {
  const fs::path dir = fresh_dir("bench");
  std::string text;
  EXPECT_EQ(run({"bench", "--problem", "pendulum", "--algorithm", "feasible-ipddp", "--trials", "3", "--max-iter",
                 "10", "--out", dir.string()},
                &text),
            kExitOk);
  int traces = 0;
  for (const auto& entry : fs::directory_iterator(dir)) traces += entry.path().extension() == ".csv";
  EXPECT_EQ(traces, 3);
  EXPECT_TRUE(fs::exists(dir / "pendulum_feasible-ipddp_summary.json"));
  EXPECT_NE(text.find("/3"), std::string::npos);
}

TEST(Cli, UnknownProblemIsConfigError) {
  std::string err;
  EXPECT_EQ(run({"solve", "--problem", "nosuch"}, nullptr, &err), kExitConfigError);
  EXPECT_NE(err.find("nosuch"), std::string::npos);
}

TEST(Cli, UnknownAlgorithmAndFlagsAreConfigErrors) {
  EXPECT_EQ(run({"solve", "--problem", "pendulum", "--algorithm", "cldddp"}), kExitConfigError);
  EXPECT_EQ(run({"solve", "--problem", "pendulum", "--bogus", "1"}), kExitConfigError);
  EXPECT_EQ(run({"solve", "--problem", "pendulum", "--kappa", "0.5"}), kExitConfigError);
  EXPECT_EQ(run({}), kExitConfigError);
}

TEST(Cli, ConfigFileRejectsUnknownKeysAndFlagsOverride) {
  const fs::path dir = fresh_dir("config");
  {
    std::ofstream f(dir / "bad.json");
    f << R"({"problem": "pendulum", "solver": {"kapa": 3}})";
  }
  EXPECT_EQ(run({"solve", "--config", (dir / "bad.json").string(), "--out", dir.string()}), kExitConfigError);
  {
    std::ofstream f(dir / "good.json");
    f << R"({"problem": "pendulum", "algorithm": "infeasible-ipddp", "solver": {"max_iterations": 3}})";
  }
  EXPECT_EQ(run({"solve", "--config", (dir / "good.json").string(), "--max-iter", "5", "--out", dir.string()}),
            kExitSolverFailure);
  EXPECT_EQ(read_trace_csv(dir / "pendulum_infeasible-ipddp_solve.csv").size(), 6u);
}

TEST(Cli, VerifyMissingFileIsConfigError) {
  EXPECT_EQ(run({"verify", "/nonexistent/solution.json"}), kExitConfigError);
}

TEST(TraceIo, RoundTrip) {
  const fs::path dir = fresh_dir("trace_io");
  std::vector<IterationRecord> recs(2);
  recs[0].iteration = 0;
  recs[0].objective = 1.5;
  recs[0].mu = 0.1;
  recs[0].F_inf = 0.3;
  recs[1].iteration = 1;
  recs[1].objective = 1.25;
  recs[1].optimality_error = -2.5;
  recs[1].mu = 0.02;
  recs[1].F_inf = 1e-9;
  recs[1].step = 0.5;
  recs[1].gamma_reg = 1e-6;
  recs[1].min_eig = 0.125;
  write_trace_csv(dir / "t.csv", recs);
  const auto back = read_trace_csv(dir / "t.csv");
  ASSERT_EQ(back.size(), 2u);
  EXPECT_FALSE(back[0].optimality_error.has_value());
  EXPECT_FALSE(back[0].min_eig.has_value());
  EXPECT_EQ(back[1].objective, 1.25);
  EXPECT_EQ(*back[1].optimality_error, -2.5);
  EXPECT_EQ(back[1].F_inf, 1e-9);
  EXPECT_EQ(back[1].step, 0.5);
  EXPECT_EQ(*back[1].min_eig, 0.125);
  for (const auto& e : fs::directory_iterator(dir)) EXPECT_EQ(e.path().filename(), "t.csv");
}

}  // namespace
}  // namespace ipddp
