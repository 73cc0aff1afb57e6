#pragma once

#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "ipddp/problem.hpp"
#include "ipddp/trajectory.hpp"

namespace ipddp {

/// Quadratic model of Q^t(x, u, s) = q + s'c + V^{t+1}(f(x, u)) around (x_t, u_t, s_t).
/// Q_s = c, Q_sx = c_x, Q_su = c_u, and Q_ss = 0 (not stored).
struct QExpansion {
  Vector Qx, Qu, Qs;
  Matrix Qxx, Quu, Qxu;  // Qxu is n x m
  Matrix Qsx, Qsu;       // l x n, l x m
};

/// Affine update laws du = alpha + beta dx, ds = eta + theta dx, dy = chi + zeta dx.
/// chi and zeta are empty for the feasible variant.
struct StageGains {
  Vector alpha;
  Matrix beta;
  Vector eta;
  Matrix theta;
  Vector chi;
  Matrix zeta;
};

struct ValueCoeffs {
  Vector Vx;
  Matrix Vxx;
};

/// Coefficients of the system left after eliminating the dual (and slack)
/// updates, plus the residuals that define them. Quu includes the
/// regularization the gains were computed with.
struct CondensedCoeffs {
  Vector Qx, Qu;
  Matrix Qxx, Qxu, Quu;
  Vector r;     // feasible: S c + mu
  Vector rp;    // infeasible: c + y
  Vector rd;    // infeasible: S y - mu
  Vector rhat;  // infeasible: S rp - rd
};

struct StageSolution {
  StageGains gains;
  CondensedCoeffs condensed;
  bool positive_definite = true;
};

/// The condensed control Hessian failed a Cholesky factorization.
class NotPositiveDefiniteError : public std::runtime_error {
 public:
  explicit NotPositiveDefiniteError(int stage)
      : std::runtime_error("condensed Q_uu is not positive definite at stage " + std::to_string(stage)),
        stage_(stage) {}
  int stage() const { return stage_; }

 private:
  int stage_;
};

/// How the condensed control Hessian is factorized.
enum class Factorization {
  /// Cholesky only; a failure raises NotPositiveDefiniteError.
  kRequirePositiveDefinite,
  /// Cholesky, falling back to pivoted LU on failure. Used for residual sweeps.
  kAllowIndefinite,
};

QExpansion stage_expansion(const OCProblem& problem, const Vector& x, const Vector& u, const Vector& s,
                           const ValueCoeffs& next, bool second_order_dynamics = true);

StageSolution solve_stage_feasible(const QExpansion& Q, const Vector& s, const Vector& c, double mu,
                                   double gamma_reg,
                                   Factorization factorization = Factorization::kRequirePositiveDefinite);

StageSolution solve_stage_infeasible(const QExpansion& Q, const Vector& s, const Vector& y, const Vector& c,
                                     double mu, double gamma_reg,
                                     Factorization factorization = Factorization::kRequirePositiveDefinite);

/// V_x = Qhat_x + Qhat_xu alpha, V_xx = Qhat_xx + Qhat_xu beta (symmetrized).
ValueCoeffs value_update(const CondensedCoeffs& Qhat, const StageGains& gains);

struct BackwardPassOptions {
  Factorization factorization = Factorization::kRequirePositiveDefinite;
  bool second_order_dynamics = true;
  bool compute_min_eigenvalue = false;
};

struct BackwardPassDiagnostics {
  double max_Qu_inf = 0.0;
  double max_r_inf = 0.0;   // feasible: |S c + mu|
  double max_rp_inf = 0.0;  // infeasible: |c + y|
  double max_rd_inf = 0.0;  // infeasible: |S y - mu|
  bool positive_definite = true;
  /// min over stages of the smallest eigenvalue of the unregularized condensed Q_uu.
  std::optional<double> min_eigenvalue;
};

struct BackwardPassResult {
  std::vector<StageGains> gains;   // N
  std::vector<ValueCoeffs> value;  // N + 1
  std::vector<Vector> Qx;          // N, Q_x^t at the current iterate
  std::vector<Vector> Qu;          // N
  std::vector<Vector> r;           // N, feasible residual (empty vectors for infeasible)
  std::vector<Vector> rp;          // N, infeasible residuals
  std::vector<Vector> rd;
  BackwardPassDiagnostics diagnostics;
};

/// Full sweep t = N-1 .. 0. Throws NotPositiveDefiniteError (with the failing
/// stage) under Factorization::kRequirePositiveDefinite.
BackwardPassResult backward_pass(const OCProblem& problem, const Iterate& w, double mu, double gamma_reg,
                                 Variant variant, const BackwardPassOptions& options = {});

}  // namespace ipddp
