#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "ipddp/backward_pass.hpp"
#include "ipddp/forward_pass.hpp"
#include "ipddp/problem.hpp"
#include "ipddp/trajectory.hpp"

namespace ipddp {

class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// The feasible variant was started from a rollout that violates c < 0.
class InfeasibleStartError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct MuInitPolicy {
  enum class Kind {
    kAuto,      // J(x, u) / (N l)
    kExplicit,  // value
    kSampled,   // uniform in [low, high] drawn from the run's seed
  };
  Kind kind = Kind::kAuto;
  double value = 0.0;
  double low = 0.5;
  double high = 1.0;

  static MuInitPolicy automatic() { return {}; }
  static MuInitPolicy fixed(double mu) { return {Kind::kExplicit, mu, 0.0, 0.0}; }
  static MuInitPolicy sampled(double low, double high) { return {Kind::kSampled, 0.0, low, high}; }
};

struct SolverConfig {
  Variant variant = Variant::kFeasible;
  double kappa = 5.0;
  MuInitPolicy mu_init;
  double mu_min = 1e-8;
  double f_tol = 1e-7;
  double mu_accept_factor = 0.2;  // reduce mu once |F|_inf < mu_accept_factor * mu
  int max_iterations = 1000;
  LineSearchConfig line_search;
  double gamma_reg_max = 1e8;
  std::uint64_t seed = 0;
  bool ilqr_mode = false;      // drop second-order dynamics terms
  bool trace_min_eig = false;  // record min eigenvalue of the condensed Q_uu
  bool check_kkt_at_mu_events = true;
  std::optional<double> reference_objective;  // J*, enables E_J in the trace
  /// Called with every accepted iterate and the index it gets in the trace.
  std::function<void(int iteration, const Iterate& w)> on_accept;

  void validate() const;
};

struct IterationRecord {
  int iteration = 0;
  double objective = 0.0;
  std::optional<double> optimality_error;  // E_J
  double mu = 0.0;
  double F_inf = 0.0;
  double step = 0.0;  // 0 when no step was taken
  double gamma_reg = 0.0;
  std::optional<double> min_eig;
  double wall_time = 0.0;  // seconds since the solve started
};

struct KKTReport {
  double grad_x_inf = 0.0;
  double grad_u_inf = 0.0;
  double dynamics_inf = 0.0;
  double complementarity_inf = 0.0;
  double max_constraint = 0.0;  // max_t max_j c_j(x_t, u_t)
  double min_dual = 0.0;        // min_t min_j s_t,j
  bool passed = false;
};

/// Snapshot taken every time the solver accepts a mu-subproblem and reduces mu.
struct MuEvent {
  int iteration = 0;
  double mu = 0.0;
  double F_inf = 0.0;
  KKTReport kkt;
};

enum class SolveStatus { kConverged, kMaxIterations, kNumericalFailure };

std::string to_string(SolveStatus status);

struct Solution {
  Iterate iterate;
  Multipliers multipliers;
  double mu = 0.0;
  double objective = 0.0;
  double F_inf = 0.0;
  SolveStatus status = SolveStatus::kMaxIterations;
  int iterations = 0;
  std::vector<IterationRecord> trace;
  std::vector<MuEvent> mu_events;
  std::vector<StageGains> gains;  // feedback policy from the last backward pass

  bool converged() const { return status == SolveStatus::kConverged; }
};

struct Residual {
  Vector F;
  double inf_norm = 0.0;
};

/// Adjoint sweep over the Lagrangian l = q + s'c:
/// lambda_N = p_x(x_N), lambda_t = l_x + f_x' lambda_{t+1},
/// Q_u^t = l_u + f_u' lambda_{t+1}, plus the complementarity residuals.
struct CostateSweep {
  Multipliers multipliers;
  std::vector<Vector> Qu;
  std::vector<Vector> r;   // feasible: S c + mu
  std::vector<Vector> rp;  // infeasible: c + y
  std::vector<Vector> rd;  // infeasible: S y - mu
};

CostateSweep costate_sweep(const OCProblem& problem, const Iterate& w, double mu, Variant variant);

/// Stacks F = (Q_u^t..., r_t...) for the feasible variant and
/// (Q_u^t..., r^p_t..., r^d_t...) for the infeasible one.
Residual residual_F(const CostateSweep& sweep, Variant variant);
Residual residual_F(const OCProblem& problem, const Iterate& w, double mu, Variant variant);

/// min(mu / kappa, mu^1.2).
double update_mu(double mu, double kappa);

double init_mu(const OCProblem& problem, const Iterate& w, const MuInitPolicy& policy, std::uint64_t seed);

/// lambda_N = V_x^N, lambda_t = Q_x^t.
Multipliers recover_multipliers(std::span<const ValueCoeffs> value, std::span<const Vector> Qx);

/// Evaluates every block of the perturbed KKT system. Sign conditions are
/// exact for the feasible variant; the infeasible variant allows c <= tol.
KKTReport check_perturbed_kkt(const OCProblem& problem, const Iterate& w, const Multipliers& lambda, double mu,
                              double tol, Variant variant = Variant::kFeasible);

/// Duals (and slacks) for a given primal trajectory:
/// feasible s = mu max(1, 1/(-c)) clipped to [1e-3, 1e3];
/// infeasible y = max(-c, 1e-2), s = min(0.1, mu / y).
void initialize_duals(const OCProblem& problem, Iterate& w, double mu, Variant variant);

/// Interior-point DDP from the given controls.
Solution solve(const OCProblem& problem, std::span<const Vector> initial_controls, const SolverConfig& config);

/// Interior-point DDP from a complete primal-dual iterate (warm start) with a
/// given starting mu.
Solution solve_from(const OCProblem& problem, Iterate w, double mu, const SolverConfig& config);

/// Uniform controls in [low, high] from a seeded generator.
std::vector<Vector> random_controls(int horizon, int m, double low, double high, std::uint64_t seed);

}  // namespace ipddp
