#pragma once

#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace ipddp {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

/// Raised when a problem definition is malformed (dimensions, shapes, symmetry).
class ProblemError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Raised by callbacks evaluated outside their domain (e.g. a strict log barrier at c >= 0).
class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// Jacobians of f and, when requested, its second derivatives stored per output row i:
/// fxx[i] = d2 f_i / dx dx (n x n), fuu[i] = d2 f_i / du du (m x m),
/// fxu[i] = d2 f_i / dx du (n x m).
struct DynamicsDerivatives {
  Matrix fx;
  Matrix fu;
  std::vector<Matrix> fxx;
  std::vector<Matrix> fuu;
  std::vector<Matrix> fxu;
};

struct CostDerivatives {
  Vector qx;
  Vector qu;
  Matrix qxx;
  Matrix quu;
  Matrix qxu;  // n x m
};

struct TerminalDerivatives {
  Vector px;
  Matrix pxx;
};

/// Constraint Jacobians (l x n, l x m) and per-row Hessians.
struct ConstraintDerivatives {
  Matrix cx;
  Matrix cu;
  std::vector<Matrix> cxx;
  std::vector<Matrix> cuu;
  std::vector<Matrix> cxu;
};

/// Finite-horizon problem
///   min  sum_t q(x_t, u_t) + p(x_N)
///   s.t. x_0 = x0, x_{t+1} = f(x_t, u_t), c(x_t, u_t) <= 0.
///
/// The callback table is immutable once built and may be shared read-only
/// between concurrent solves. `constraints` and `constraint_derivatives` may be
/// left empty when l == 0.
struct OCProblem {
  std::string name;
  int n = 0;        // state dimension
  int m = 0;        // control dimension
  int l = 0;        // inequality constraints per stage
  int horizon = 0;  // N
  Vector x0;

  std::function<Vector(const Vector& x, const Vector& u)> dynamics;
  std::function<DynamicsDerivatives(const Vector& x, const Vector& u, bool second_order)>
      dynamics_derivatives;

  std::function<double(const Vector& x, const Vector& u)> stage_cost;
  std::function<CostDerivatives(const Vector& x, const Vector& u)> stage_cost_derivatives;

  std::function<double(const Vector& x)> terminal_cost;
  std::function<TerminalDerivatives(const Vector& x)> terminal_cost_derivatives;

  std::function<Vector(const Vector& x, const Vector& u)> constraints;
  std::function<ConstraintDerivatives(const Vector& x, const Vector& u, bool second_order)>
      constraint_derivatives;

  Vector eval_constraints(const Vector& x, const Vector& u) const {
    return l == 0 ? Vector(0) : constraints(x, u);
  }
  ConstraintDerivatives eval_constraint_derivatives(const Vector& x, const Vector& u,
                                                    bool second_order) const;
};

/// Checks dimensions, that every callback is present, and that all outputs at
/// (x, u) have the declared shapes and symmetric Hessians. Throws ProblemError.
void validate(const OCProblem& problem, const Vector& x, const Vector& u);

/// Shape check at (x0, 0).
void validate(const OCProblem& problem);

/// Replaces every derivative callback with central finite differences of the
/// value callbacks. Meant for prototyping problems without analytic derivatives.
OCProblem with_finite_difference_derivatives(OCProblem problem);

}  // namespace ipddp
