#include "ipddp/backward_pass.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace ipddp {

namespace {

double inf_norm(const Vector& v) { return v.size() == 0 ? 0.0 : v.cwiseAbs().maxCoeff(); }

void symmetrize(Matrix& A) { A = 0.5 * (A + A.transpose()).eval(); }

// Solves Quu * [alpha beta] = -[Qu Qux] and fills the control gains.
bool solve_control_gains(const Matrix& Quu, const Vector& Qu, const Matrix& Qxu, Factorization factorization,
                         StageGains& gains) {
  Eigen::LLT<Matrix> llt(Quu);
  if (llt.info() == Eigen::Success) {
    gains.alpha = -llt.solve(Qu);
    gains.beta = -llt.solve(Qxu.transpose());
    return true;
  }
  if (factorization == Factorization::kRequirePositiveDefinite) throw NotPositiveDefiniteError(-1);
  Eigen::PartialPivLU<Matrix> lu(Quu);
  gains.alpha = -lu.solve(Qu);
  gains.beta = -lu.solve(Qxu.transpose());
  return false;
}

}  // namespace

QExpansion stage_expansion(const OCProblem& problem, const Vector& x, const Vector& u, const Vector& s,
                           const ValueCoeffs& next, bool second_order_dynamics) {
  const DynamicsDerivatives fd = problem.dynamics_derivatives(x, u, second_order_dynamics);
  const CostDerivatives qd = problem.stage_cost_derivatives(x, u);

  QExpansion Q;
  Q.Qx = qd.qx + fd.fx.transpose() * next.Vx;
  Q.Qu = qd.qu + fd.fu.transpose() * next.Vx;
  const Matrix Vxx_fu = next.Vxx * fd.fu;
  Q.Qxx = qd.qxx + fd.fx.transpose() * next.Vxx * fd.fx;
  Q.Quu = qd.quu + fd.fu.transpose() * Vxx_fu;
  Q.Qxu = qd.qxu + fd.fx.transpose() * Vxx_fu;

  if (second_order_dynamics) {
    // Contraction over the output index of f.
    for (int i = 0; i < problem.n; ++i) {
      if (i < static_cast<int>(fd.fxx.size())) Q.Qxx += next.Vx(i) * fd.fxx[i];
      if (i < static_cast<int>(fd.fuu.size())) Q.Quu += next.Vx(i) * fd.fuu[i];
      if (i < static_cast<int>(fd.fxu.size())) Q.Qxu += next.Vx(i) * fd.fxu[i];
    }
  }

  if (problem.l > 0) {
    const ConstraintDerivatives cd = problem.constraint_derivatives(x, u, true);
    Q.Qs = problem.constraints(x, u);
    Q.Qx += cd.cx.transpose() * s;
    Q.Qu += cd.cu.transpose() * s;
    for (int j = 0; j < problem.l; ++j) {
      if (j < static_cast<int>(cd.cxx.size())) Q.Qxx += s(j) * cd.cxx[j];
      if (j < static_cast<int>(cd.cuu.size())) Q.Quu += s(j) * cd.cuu[j];
      if (j < static_cast<int>(cd.cxu.size())) Q.Qxu += s(j) * cd.cxu[j];
    }
    Q.Qsx = cd.cx;
    Q.Qsu = cd.cu;
  } else {
    Q.Qs = Vector(0);
    Q.Qsx = Matrix::Zero(0, problem.n);
    Q.Qsu = Matrix::Zero(0, problem.m);
  }
  symmetrize(Q.Qxx);
  symmetrize(Q.Quu);
  return Q;
}

StageSolution solve_stage_feasible(const QExpansion& Q, const Vector& s, const Vector& c, double mu,
                                   double gamma_reg, Factorization factorization) {
  const Eigen::Index m = Q.Qu.size();
  StageSolution out;
  CondensedCoeffs& H = out.condensed;

  H.r = s.cwiseProduct(c).array() + mu;
  const Vector s_over_c = s.cwiseQuotient(c);
  const Vector r_over_c = H.r.cwiseQuotient(c);
  const Matrix sc_cx = s_over_c.asDiagonal() * Q.Qsx;
  const Matrix sc_cu = s_over_c.asDiagonal() * Q.Qsu;

  H.Qx = Q.Qx - Q.Qsx.transpose() * r_over_c;
  H.Qu = Q.Qu - Q.Qsu.transpose() * r_over_c;
  H.Qxx = Q.Qxx - Q.Qsx.transpose() * sc_cx;
  H.Qxu = Q.Qxu - Q.Qsx.transpose() * sc_cu;
  H.Quu = Q.Quu - Q.Qsu.transpose() * sc_cu + gamma_reg * Matrix::Identity(m, m);
  symmetrize(H.Qxx);
  symmetrize(H.Quu);

  StageGains& g = out.gains;
  out.positive_definite = solve_control_gains(H.Quu, H.Qu, H.Qxu, factorization, g);

  // ds = -C^{-1} (r + S Q_su du + S Q_sx dx)
  g.eta = -(H.r + s.cwiseProduct(Q.Qsu * g.alpha)).cwiseQuotient(c);
  g.theta = -(sc_cx + sc_cu * g.beta);
  return out;
}

StageSolution solve_stage_infeasible(const QExpansion& Q, const Vector& s, const Vector& y, const Vector& c,
                                     double mu, double gamma_reg, Factorization factorization) {
  const Eigen::Index m = Q.Qu.size();
  StageSolution out;
  CondensedCoeffs& H = out.condensed;

  H.rp = c + y;
  H.rd = s.cwiseProduct(y).array() - mu;
  H.rhat = s.cwiseProduct(H.rp) - H.rd;
  const Vector s_over_y = s.cwiseQuotient(y);
  const Vector rhat_over_y = H.rhat.cwiseQuotient(y);
  const Matrix sy_cx = s_over_y.asDiagonal() * Q.Qsx;
  const Matrix sy_cu = s_over_y.asDiagonal() * Q.Qsu;

  H.Qx = Q.Qx + Q.Qsx.transpose() * rhat_over_y;
  H.Qu = Q.Qu + Q.Qsu.transpose() * rhat_over_y;
  H.Qxx = Q.Qxx + Q.Qsx.transpose() * sy_cx;
  H.Qxu = Q.Qxu + Q.Qsx.transpose() * sy_cu;
  H.Quu = Q.Quu + Q.Qsu.transpose() * sy_cu + gamma_reg * Matrix::Identity(m, m);
  symmetrize(H.Qxx);
  symmetrize(H.Quu);

  StageGains& g = out.gains;
  out.positive_definite = solve_control_gains(H.Quu, H.Qu, H.Qxu, factorization, g);

  // Reduced row: S Q_su du - Y ds = -rhat - S Q_sx dx.
  g.eta = (H.rhat + s.cwiseProduct(Q.Qsu * g.alpha)).cwiseQuotient(y);
  g.theta = sy_cx + sy_cu * g.beta;
  // dy = -rp - Q_su du - Q_sx dx.
  g.chi = -H.rp - Q.Qsu * g.alpha;
  g.zeta = -Q.Qsx - Q.Qsu * g.beta;
  return out;
}

ValueCoeffs value_update(const CondensedCoeffs& Qhat, const StageGains& gains) {
  ValueCoeffs V;
  V.Vx = Qhat.Qx + Qhat.Qxu * gains.alpha;
  V.Vxx = Qhat.Qxx + Qhat.Qxu * gains.beta;
  symmetrize(V.Vxx);
  return V;
}

BackwardPassResult backward_pass(const OCProblem& problem, const Iterate& w, double mu, double gamma_reg,
                                 Variant variant, const BackwardPassOptions& options) {
  const int N = w.horizon();
  BackwardPassResult out;
  out.gains.resize(N);
  out.value.resize(N + 1);
  out.Qx.resize(N);
  out.Qu.resize(N);
  out.r.resize(N);
  out.rp.resize(N);
  out.rd.resize(N);
  BackwardPassDiagnostics& diag = out.diagnostics;

  const TerminalDerivatives pd = problem.terminal_cost_derivatives(w.x[N]);
  out.value[N].Vx = pd.px;
  out.value[N].Vxx = pd.pxx;
  symmetrize(out.value[N].Vxx);

  double min_eig = std::numeric_limits<double>::infinity();
  const Vector empty(0);
  for (int t = N - 1; t >= 0; --t) {
    const Vector& s = problem.l > 0 ? w.s[t] : empty;
    const QExpansion Q =
        stage_expansion(problem, w.x[t], w.u[t], s, out.value[t + 1], options.second_order_dynamics);

    StageSolution sol;
    try {
      if (variant == Variant::kFeasible) {
        sol = solve_stage_feasible(Q, s, Q.Qs, mu, gamma_reg, options.factorization);
      } else {
        const Vector& y = problem.l > 0 ? w.y[t] : empty;
        sol = solve_stage_infeasible(Q, s, y, Q.Qs, mu, gamma_reg, options.factorization);
      }
    } catch (const NotPositiveDefiniteError&) {
      throw NotPositiveDefiniteError(t);
    }

    out.value[t] = value_update(sol.condensed, sol.gains);
    out.Qx[t] = Q.Qx;
    out.Qu[t] = Q.Qu;
    diag.max_Qu_inf = std::max(diag.max_Qu_inf, inf_norm(Q.Qu));
    diag.positive_definite = diag.positive_definite && sol.positive_definite;
    if (variant == Variant::kFeasible) {
      diag.max_r_inf = std::max(diag.max_r_inf, inf_norm(sol.condensed.r));
      out.r[t] = std::move(sol.condensed.r);
    } else {
      diag.max_rp_inf = std::max(diag.max_rp_inf, inf_norm(sol.condensed.rp));
      diag.max_rd_inf = std::max(diag.max_rd_inf, inf_norm(sol.condensed.rd));
      out.rp[t] = std::move(sol.condensed.rp);
      out.rd[t] = std::move(sol.condensed.rd);
    }
    if (options.compute_min_eigenvalue) {
      const Matrix unregularized =
          sol.condensed.Quu - gamma_reg * Matrix::Identity(problem.m, problem.m);
      Eigen::SelfAdjointEigenSolver<Matrix> eig(unregularized, Eigen::EigenvaluesOnly);
      min_eig = std::min(min_eig, eig.eigenvalues().minCoeff());
    }
    out.gains[t] = std::move(sol.gains);
  }
  if (options.compute_min_eigenvalue) diag.min_eigenvalue = min_eig;
  return out;
}

}  // namespace ipddp
