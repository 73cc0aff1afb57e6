#include "ipddp/trajectory.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "finite_difference.hpp"

namespace ipddp {

std::vector<Vector> rollout(const OCProblem& problem, std::span<const Vector> controls) {
  if (static_cast<int>(controls.size()) != problem.horizon) {
    throw ProblemError("rollout: expected " + std::to_string(problem.horizon) + " controls, got " +
                       std::to_string(controls.size()));
  }
  std::vector<Vector> states;
  states.reserve(controls.size() + 1);
  states.push_back(problem.x0);
  for (std::size_t t = 0; t < controls.size(); ++t) {
    if (controls[t].size() != problem.m) throw ProblemError("rollout: control has wrong dimension");
    Vector next = problem.dynamics(states.back(), controls[t]);
    if (!next.allFinite()) {
      throw DivergenceError(static_cast<int>(t) + 1,
                            "rollout diverged: non-finite state at stage " + std::to_string(t + 1));
    }
    states.push_back(std::move(next));
  }
  return states;
}

double objective(const OCProblem& problem, std::span<const Vector> states, std::span<const Vector> controls) {
  if (states.size() != controls.size() + 1) throw ProblemError("objective: states/controls length mismatch");
  double J = 0.0;
  for (std::size_t t = 0; t < controls.size(); ++t) J += problem.stage_cost(states[t], controls[t]);
  return J + problem.terminal_cost(states.back());
}

FeasibilityReport check_strict_feasibility(const OCProblem& problem, const Iterate& w, Variant variant) {
  FeasibilityReport report;
  const int N = w.horizon();
  report.stage_ok.assign(N, true);
  double worst = std::numeric_limits<double>::infinity();
  for (int t = 0; t < N; ++t) {
    double margin = std::numeric_limits<double>::infinity();
    if (problem.l > 0) {
      margin = std::min(margin, w.s[t].minCoeff());
      if (variant == Variant::kFeasible) {
        margin = std::min(margin, (-problem.constraints(w.x[t], w.u[t])).minCoeff());
      } else {
        margin = std::min(margin, w.y[t].minCoeff());
      }
    }
    report.stage_ok[t] = margin > 0.0;
    worst = std::min(worst, margin);
  }
  report.worst_margin = worst;
  report.passed = worst > 0.0;
  return report;
}

double dynamics_defect(const OCProblem& problem, const Iterate& w) {
  double defect = (w.x.front() - problem.x0).cwiseAbs().maxCoeff();
  for (int t = 0; t < w.horizon(); ++t) {
    defect = std::max(defect, (w.x[t + 1] - problem.dynamics(w.x[t], w.u[t])).cwiseAbs().maxCoeff());
  }
  return defect;
}

namespace {

class ErrorTracker {
 public:
  void compare(const std::string& block, const Matrix& analytic, const Matrix& numeric) {
    if (analytic.rows() != numeric.rows() || analytic.cols() != numeric.cols()) {
      worst_ = std::numeric_limits<double>::infinity();
      block_ = block + " (shape mismatch)";
      return;
    }
    for (Eigen::Index i = 0; i < analytic.rows(); ++i) {
      for (Eigen::Index j = 0; j < analytic.cols(); ++j) {
        double err = std::abs(analytic(i, j) - numeric(i, j)) / std::max(1.0, std::abs(numeric(i, j)));
        if (std::isnan(err)) err = std::numeric_limits<double>::infinity();
        if (err > worst_) {
          worst_ = err;
          block_ = block;
          row_ = static_cast<int>(i);
          col_ = static_cast<int>(j);
        }
      }
    }
  }

  DerivativeCheckReport report(double rel_tol) const {
    DerivativeCheckReport r;
    r.max_rel_error = worst_;
    r.worst_block = block_;
    r.worst_row = row_;
    r.worst_col = col_;
    r.passed = worst_ <= rel_tol;
    return r;
  }

 private:
  double worst_ = 0.0;
  std::string block_;
  int row_ = -1;
  int col_ = -1;
};

Matrix as_row(const Vector& v) { return v.transpose(); }

}  // namespace

DerivativeCheckReport finite_diff_check(const OCProblem& problem, const Vector& x, const Vector& u,
                                        double rel_tol) {
  const int n = problem.n;
  const int m = problem.m;
  const int l = problem.l;
  ErrorTracker tracker;
  const Vector z = detail::stack(x, u);
  auto slot = [](const std::string& name, int i) { return name + "[" + std::to_string(i) + "]"; };

  // Dynamics: Jacobians from values, Hessians from analytic Jacobians.
  {
    const DynamicsDerivatives d = problem.dynamics_derivatives(x, u, true);
    const Matrix J = detail::jacobian([&](const Vector& zz) { return problem.dynamics(zz.head(n), zz.tail(m)); }, z);
    tracker.compare("f_x", d.fx, J.leftCols(n));
    tracker.compare("f_u", d.fu, J.rightCols(m));
    for (int i = 0; i < n; ++i) {
      const Matrix Hx = detail::jacobian(
          [&](const Vector& zz) -> Vector {
            return problem.dynamics_derivatives(zz.head(n), zz.tail(m), false).fx.row(i).transpose();
          },
          z);
      const Matrix Hu = detail::jacobian(
          [&](const Vector& zz) -> Vector {
            return problem.dynamics_derivatives(zz.head(n), zz.tail(m), false).fu.row(i).transpose();
          },
          z);
      tracker.compare(slot("f_xx", i), i < static_cast<int>(d.fxx.size()) ? d.fxx[i] : Matrix(), Hx.leftCols(n));
      tracker.compare(slot("f_xu", i), i < static_cast<int>(d.fxu.size()) ? d.fxu[i] : Matrix(), Hx.rightCols(m));
      tracker.compare(slot("f_uu", i), i < static_cast<int>(d.fuu.size()) ? d.fuu[i] : Matrix(), Hu.rightCols(m));
    }
  }

  // Stage cost.
  {
    const CostDerivatives d = problem.stage_cost_derivatives(x, u);
    const Matrix g = detail::jacobian(
        [&](const Vector& zz) {
          Vector v(1);
          v(0) = problem.stage_cost(zz.head(n), zz.tail(m));
          return v;
        },
        z);
    tracker.compare("q_x", as_row(d.qx), g.leftCols(n));
    tracker.compare("q_u", as_row(d.qu), g.rightCols(m));
    const Matrix Hx = detail::jacobian(
        [&](const Vector& zz) { return problem.stage_cost_derivatives(zz.head(n), zz.tail(m)).qx; }, z);
    const Matrix Hu = detail::jacobian(
        [&](const Vector& zz) { return problem.stage_cost_derivatives(zz.head(n), zz.tail(m)).qu; }, z);
    tracker.compare("q_xx", d.qxx, Hx.leftCols(n));
    tracker.compare("q_xu", d.qxu, Hx.rightCols(m));
    tracker.compare("q_uu", d.quu, Hu.rightCols(m));
  }

  // Terminal cost.
  {
    const TerminalDerivatives d = problem.terminal_cost_derivatives(x);
    const Matrix g = detail::jacobian(
        [&](const Vector& xx) {
          Vector v(1);
          v(0) = problem.terminal_cost(xx);
          return v;
        },
        x);
    tracker.compare("p_x", as_row(d.px), g);
    const Matrix H = detail::jacobian([&](const Vector& xx) { return problem.terminal_cost_derivatives(xx).px; }, x);
    tracker.compare("p_xx", d.pxx, H);
  }

  // Constraints.
  if (l > 0) {
    const ConstraintDerivatives d = problem.constraint_derivatives(x, u, true);
    const Matrix J =
        detail::jacobian([&](const Vector& zz) { return problem.constraints(zz.head(n), zz.tail(m)); }, z);
    tracker.compare("c_x", d.cx, J.leftCols(n));
    tracker.compare("c_u", d.cu, J.rightCols(m));
    for (int j = 0; j < l; ++j) {
      const Matrix Hx = detail::jacobian(
          [&](const Vector& zz) -> Vector {
            return problem.constraint_derivatives(zz.head(n), zz.tail(m), false).cx.row(j).transpose();
          },
          z);
      const Matrix Hu = detail::jacobian(
          [&](const Vector& zz) -> Vector {
            return problem.constraint_derivatives(zz.head(n), zz.tail(m), false).cu.row(j).transpose();
          },
          z);
      tracker.compare(slot("c_xx", j), j < static_cast<int>(d.cxx.size()) ? d.cxx[j] : Matrix(), Hx.leftCols(n));
      tracker.compare(slot("c_xu", j), j < static_cast<int>(d.cxu.size()) ? d.cxu[j] : Matrix(), Hx.rightCols(m));
      tracker.compare(slot("c_uu", j), j < static_cast<int>(d.cuu.size()) ? d.cuu[j] : Matrix(), Hu.rightCols(m));
    }
  }
  return tracker.report(rel_tol);
}

}  // namespace ipddp
