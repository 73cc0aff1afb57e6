#pragma once

#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "ipddp/problem.hpp"

namespace ipddp {

/// Feasible: iterates keep c < 0 and s > 0. Infeasible: slacks y with c + y = 0
/// enforced only in the limit; iterates keep s > 0 and y > 0.
enum class Variant { kFeasible, kInfeasible };

/// Primal-dual tuple over the horizon. `y` is empty for the feasible variant.
struct Iterate {
  std::vector<Vector> x;  // N + 1 states
  std::vector<Vector> u;  // N controls
  std::vector<Vector> s;  // N dual vectors of length l
  std::vector<Vector> y;  // N slack vectors of length l (infeasible variant only)

  int horizon() const { return static_cast<int>(u.size()); }
};

/// Costates lambda_0 .. lambda_N.
struct Multipliers {
  std::vector<Vector> lambda;
};

/// Raised when a rollout produces a non-finite state.
class DivergenceError : public std::runtime_error {
 public:
  DivergenceError(int stage, const std::string& what) : std::runtime_error(what), stage_(stage) {}
  int stage() const { return stage_; }

 private:
  int stage_;
};

std::vector<Vector> rollout(const OCProblem& problem, std::span<const Vector> controls);

double objective(const OCProblem& problem, std::span<const Vector> states, std::span<const Vector> controls);

inline double objective(const OCProblem& problem, const Iterate& w) { return objective(problem, w.x, w.u); }

struct FeasibilityReport {
  bool passed = false;
  double worst_margin = 0.0;     // min over stages of the strictness margins
  std::vector<bool> stage_ok;    // one flag per stage
};

/// Strict interior test: feasible variant requires -c > 0 and s > 0, the
/// infeasible variant s > 0 and y > 0, element-wise at every stage.
FeasibilityReport check_strict_feasibility(const OCProblem& problem, const Iterate& w, Variant variant);

/// Maximum dynamics defect max_t |x_{t+1} - f(x_t, u_t)|_inf (plus |x_0 - x0|_inf).
double dynamics_defect(const OCProblem& problem, const Iterate& w);

struct DerivativeCheckReport {
  bool passed = false;
  double max_rel_error = 0.0;
  std::string worst_block;  // e.g. "f_xx[1]"
  int worst_row = -1;
  int worst_col = -1;
};

/// Compares every analytic Jacobian and Hessian at (x, u) against central
/// differences. Relative error is |analytic - fd| / max(1, |fd|).
DerivativeCheckReport finite_diff_check(const OCProblem& problem, const Vector& x, const Vector& u,
                                        double rel_tol);

}  // namespace ipddp
