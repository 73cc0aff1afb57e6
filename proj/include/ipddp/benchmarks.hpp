#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "ipddp/problem.hpp"
#include "ipddp/solver.hpp"

namespace ipddp {

enum class ProblemId { kPendulum, kCar, kUnicycle };
enum class Algorithm { kFeasibleIPDDP, kInfeasibleIPDDP, kBarrier, kRelaxedBarrier };

std::string to_string(ProblemId id);
std::string to_string(Algorithm algorithm);
/// Throws ConfigError on unknown names.
ProblemId parse_problem_id(std::string_view name);
Algorithm parse_algorithm(std::string_view name);

/// Control-limited inverted pendulum: n = 2, m = 1, l = 2, N = 500, h = 0.05,
/// x0 = (-pi, 0), |u| <= 0.25.
OCProblem build_pendulum();

/// Kinematic car parking: n = 4, m = 2, l = 4, N = 500, h = 0.03, d = 2,
/// x0 = (1, 1, 3 pi / 2, 0), |w| <= 0.5, |a| <= 2.
OCProblem build_car_parking();

/// Unicycle with three circular obstacles: n = 3, m = 1, l = 7, N = 600,
/// h = 0.1, v = 1.5, x0 = (-10, 0, 0).
OCProblem build_unicycle();

OCProblem build_problem(ProblemId id);

/// Smooth absolute value sqrt(y^2 + z^2) - z.
double smooth_abs(double y, double z);

struct Obstacle {
  double cx, cy, radius;
};
const std::vector<Obstacle>& unicycle_obstacles();

/// log10(J - J*), with gaps below 1e-16 clamped to 1e-16.
double optimality_error(double J, double J_star);

struct ReferenceOptimum {
  ProblemId problem;
  double J_star;
  std::string provenance;
};

/// Committed reference optimum for a benchmark, if one has been generated.
std::optional<ReferenceOptimum> reference_optimum(ProblemId id);

/// Solver settings used for a benchmark/algorithm pair. The unicycle samples
/// its initial mu from [0.5, 1] and drops the second-order dynamics terms.
SolverConfig default_config(ProblemId id, Algorithm algorithm);

/// Runs one algorithm from the given controls.
Solution run_algorithm(const OCProblem& problem, Algorithm algorithm, std::span<const Vector> controls,
                       const SolverConfig& config);

struct TrialSpec {
  ProblemId problem = ProblemId::kPendulum;
  Algorithm algorithm = Algorithm::kFeasibleIPDDP;
  int trials = 40;
  double control_low = -0.01;
  double control_high = 0.01;
  std::uint64_t base_seed = 0;
  SolverConfig config;              // seed and reference_objective are filled per trial
  double success_threshold = -4.0;  // E_J threshold used for iterations-to-threshold
  int jobs = 1;

  void validate() const;
};

struct TrialResult {
  int trial = 0;
  std::uint64_t seed = 0;
  std::string status;  // solve status, or "error"
  std::string error;
  int iterations = 0;
  double final_objective = 0.0;
  std::optional<double> final_optimality_error;
  std::optional<int> iterations_to_threshold;
  double final_mu = 0.0;
  double final_F_inf = 0.0;
  double max_constraint_violation = 0.0;
  bool success = false;
  Solution solution;
};

/// Runs trial i with seed base_seed + i.
TrialResult run_trial(const TrialSpec& spec, const OCProblem& problem, int trial);

/// Runs every trial (up to spec.jobs concurrently). When `out_dir` is given,
/// writes `<problem>_<algorithm>_trial<i>.csv` per trial and
/// `<problem>_<algorithm>_summary.json`.
std::vector<TrialResult> run_trials(const TrialSpec& spec, const std::optional<std::filesystem::path>& out_dir);

/// max over stages and constraints of max(c, 0).
double max_constraint_violation(const OCProblem& problem, const Iterate& w);

}  // namespace ipddp
