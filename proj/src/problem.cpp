#include "ipddp/problem.hpp"

#include <memory>
#include <sstream>

#include "finite_difference.hpp"

namespace ipddp {

namespace {

void expect_shape(const std::string& what, Eigen::Index rows, Eigen::Index cols, Eigen::Index want_rows,
                  Eigen::Index want_cols) {
  if (rows != want_rows || cols != want_cols) {
    std::ostringstream msg;
    msg << what << " has shape " << rows << "x" << cols << ", expected " << want_rows << "x" << want_cols;
    throw ProblemError(msg.str());
  }
}

void expect_symmetric(const std::string& what, const Matrix& A) {
  const double scale = 1.0 + A.cwiseAbs().maxCoeff();
  if ((A - A.transpose()).cwiseAbs().maxCoeff() > 1e-9 * scale) {
    throw ProblemError(what + " is not symmetric");
  }
}

void expect_tensor(const std::string& what, const std::vector<Matrix>& blocks, std::size_t count,
                   Eigen::Index rows, Eigen::Index cols, bool symmetric) {
  if (blocks.size() != count) {
    std::ostringstream msg;
    msg << what << " has " << blocks.size() << " slices, expected " << count;
    throw ProblemError(msg.str());
  }
  for (std::size_t i = 0; i < blocks.size(); ++i) {
    const std::string name = what + "[" + std::to_string(i) + "]";
    expect_shape(name, blocks[i].rows(), blocks[i].cols(), rows, cols);
    if (symmetric) expect_symmetric(name, blocks[i]);
  }
}

}  // namespace

ConstraintDerivatives OCProblem::eval_constraint_derivatives(const Vector& x, const Vector& u,
                                                             bool second_order) const {
  if (l == 0) {
    ConstraintDerivatives d;
    d.cx = Matrix::Zero(0, n);
    d.cu = Matrix::Zero(0, m);
    return d;
  }
  return constraint_derivatives(x, u, second_order);
}

void validate(const OCProblem& problem, const Vector& x, const Vector& u) {
  const int n = problem.n, m = problem.m, l = problem.l;
  if (n < 1 || m < 1 || l < 0 || problem.horizon < 1) {
    throw ProblemError("problem '" + problem.name + "' requires n >= 1, m >= 1, l >= 0, N >= 1");
  }
  expect_shape("x0", problem.x0.rows(), problem.x0.cols(), n, 1);
  if (!problem.dynamics || !problem.dynamics_derivatives || !problem.stage_cost ||
      !problem.stage_cost_derivatives || !problem.terminal_cost || !problem.terminal_cost_derivatives) {
    throw ProblemError("problem '" + problem.name + "' is missing a dynamics or cost callback");
  }
  if (l > 0 && (!problem.constraints || !problem.constraint_derivatives)) {
    throw ProblemError("problem '" + problem.name + "' declares constraints without callbacks");
  }

  const Vector fx = problem.dynamics(x, u);
  expect_shape("f", fx.rows(), fx.cols(), n, 1);
  const DynamicsDerivatives fd = problem.dynamics_derivatives(x, u, true);
  expect_shape("f_x", fd.fx.rows(), fd.fx.cols(), n, n);
  expect_shape("f_u", fd.fu.rows(), fd.fu.cols(), n, m);
  expect_tensor("f_xx", fd.fxx, n, n, n, true);
  expect_tensor("f_uu", fd.fuu, n, m, m, true);
  expect_tensor("f_xu", fd.fxu, n, n, m, false);

  const CostDerivatives qd = problem.stage_cost_derivatives(x, u);
  expect_shape("q_x", qd.qx.rows(), qd.qx.cols(), n, 1);
  expect_shape("q_u", qd.qu.rows(), qd.qu.cols(), m, 1);
  expect_shape("q_xx", qd.qxx.rows(), qd.qxx.cols(), n, n);
  expect_shape("q_uu", qd.quu.rows(), qd.quu.cols(), m, m);
  expect_shape("q_xu", qd.qxu.rows(), qd.qxu.cols(), n, m);
  expect_symmetric("q_xx", qd.qxx);
  expect_symmetric("q_uu", qd.quu);

  const TerminalDerivatives pd = problem.terminal_cost_derivatives(x);
  expect_shape("p_x", pd.px.rows(), pd.px.cols(), n, 1);
  expect_shape("p_xx", pd.pxx.rows(), pd.pxx.cols(), n, n);
  expect_symmetric("p_xx", pd.pxx);

  if (l > 0) {
    const Vector c = problem.constraints(x, u);
    expect_shape("c", c.rows(), c.cols(), l, 1);
    const ConstraintDerivatives cd = problem.constraint_derivatives(x, u, true);
    expect_shape("c_x", cd.cx.rows(), cd.cx.cols(), l, n);
    expect_shape("c_u", cd.cu.rows(), cd.cu.cols(), l, m);
    expect_tensor("c_xx", cd.cxx, l, n, n, true);
    expect_tensor("c_uu", cd.cuu, l, m, m, true);
    expect_tensor("c_xu", cd.cxu, l, n, m, false);
  }
}

void validate(const OCProblem& problem) {
  if (problem.m < 1) throw ProblemError("problem '" + problem.name + "' requires m >= 1");
  validate(problem, problem.x0, Vector::Zero(problem.m));
}

OCProblem with_finite_difference_derivatives(OCProblem problem) {
  const int n = problem.n;
  const int m = problem.m;

  // The value callbacks are shared by the new derivative callbacks.
  auto f = problem.dynamics;
  auto q = problem.stage_cost;
  auto p = problem.terminal_cost;
  auto c = problem.constraints;

  auto split_hessians = [n, m](const std::vector<Matrix>& H, std::vector<Matrix>& xx, std::vector<Matrix>& uu,
                               std::vector<Matrix>& xu) {
    for (const Matrix& h : H) {
      xx.push_back(h.topLeftCorner(n, n));
      uu.push_back(h.bottomRightCorner(m, m));
      xu.push_back(h.topRightCorner(n, m));
    }
  };

  problem.dynamics_derivatives = [=](const Vector& x, const Vector& u, bool second_order) {
    const detail::VectorFunction F = [&](const Vector& z) { return f(z.head(n), z.tail(m)); };
    const Vector z = detail::stack(x, u);
    const Matrix J = detail::jacobian(F, z);
    DynamicsDerivatives d;
    d.fx = J.leftCols(n);
    d.fu = J.rightCols(m);
    if (second_order) split_hessians(detail::hessians(F, z), d.fxx, d.fuu, d.fxu);
    return d;
  };

  problem.stage_cost_derivatives = [=](const Vector& x, const Vector& u) {
    const detail::VectorFunction F = [&](const Vector& z) {
      Vector v(1);
      v(0) = q(z.head(n), z.tail(m));
      return v;
    };
    const Vector z = detail::stack(x, u);
    const Matrix J = detail::jacobian(F, z);
    const Matrix H = detail::hessians(F, z)[0];
    CostDerivatives d;
    d.qx = J.row(0).head(n).transpose();
    d.qu = J.row(0).tail(m).transpose();
    d.qxx = H.topLeftCorner(n, n);
    d.quu = H.bottomRightCorner(m, m);
    d.qxu = H.topRightCorner(n, m);
    return d;
  };

  problem.terminal_cost_derivatives = [=](const Vector& x) {
    const detail::VectorFunction F = [&](const Vector& z) {
      Vector v(1);
      v(0) = p(z);
      return v;
    };
    TerminalDerivatives d;
    d.px = detail::jacobian(F, x).row(0).transpose();
    d.pxx = detail::hessians(F, x)[0];
    return d;
  };

  if (problem.l > 0) {
    problem.constraint_derivatives = [=](const Vector& x, const Vector& u, bool second_order) {
      const detail::VectorFunction F = [&](const Vector& z) { return c(z.head(n), z.tail(m)); };
      const Vector z = detail::stack(x, u);
      const Matrix J = detail::jacobian(F, z);
      ConstraintDerivatives d;
      d.cx = J.leftCols(n);
      d.cu = J.rightCols(m);
      if (second_order) split_hessians(detail::hessians(F, z), d.cxx, d.cuu, d.cxu);
      return d;
    };
  }
  return problem;
}

}  // namespace ipddp
