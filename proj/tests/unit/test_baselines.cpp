#include <cmath>
#include <random>
#include <vector>

#include <gtest/gtest.h>

#include "ipddp/barrier.hpp"
#include "ipddp/benchmarks.hpp"
#include "../oracles/riccati.hpp"
#include "../oracles/sample_points.hpp"
#include "../oracles/toy_problems.hpp"

namespace ipddp {
namespace {

TEST(RelaxedPenalty, LogBranch) {
  const PenaltyValue v = relaxed_penalty(1.0, 0.5);
  EXPECT_EQ(v.value, 0.0);
  EXPECT_DOUBLE_EQ(v.d1, -1.0);
  EXPECT_DOUBLE_EQ(v.d2, 1.0);
}

TEST(RelaxedPenalty, QuadraticBranch) {
  const PenaltyValue v = relaxed_penalty(0.25, 0.5);
  EXPECT_NEAR(v.value, 0.5 * (1.5 * 1.5 - 1.0) - std::log(0.5), 1e-15);
  EXPECT_NEAR(v.value, 1.3181, 1e-4);
  EXPECT_DOUBLE_EQ(v.d1, (0.25 - 1.0) / 0.25);
  EXPECT_DOUBLE_EQ(v.d2, 4.0);
}

TEST(RelaxedPenalty, ContinuousAtThreshold) {
  for (double delta : {1e-6, 1e-3, 0.1, 0.5, 2.0}) {
    const PenaltyValue at = relaxed_penalty(delta, delta);
    const PenaltyValue below = relaxed_penalty(std::nextafter(delta, 0.0), delta);
    EXPECT_DOUBLE_EQ(at.value, -std::log(delta));
    // Quadratic branch evaluated exactly at delta.
    const double quad = 0.5 * (std::pow((delta - 2 * delta) / delta, 2) - 1.0) - std::log(delta);
    EXPECT_DOUBLE_EQ(quad, -std::log(delta));
    EXPECT_NEAR(below.value, at.value, 1e-12 * std::max(1.0, std::abs(at.value)));
    EXPECT_NEAR(below.d1, at.d1, 1e-9 * std::abs(at.d1));
    EXPECT_NEAR(below.d2, at.d2, 1e-9 * at.d2);
    EXPECT_DOUBLE_EQ(1.0 / (delta * delta), at.d2);
  }
}

TEST(RelaxedPenalty, FiniteEverywhere) {
  for (double z : {-100.0, -1.0, 0.0, 1e-9, 3.0}) {
    const PenaltyValue v = relaxed_penalty(z, 0.01);
    EXPECT_TRUE(std::isfinite(v.value) && std::isfinite(v.d1) && std::isfinite(v.d2));
  }
}

TEST(LogPenalty, DomainError) {
  EXPECT_THROW(log_penalty(0.0), DomainError);
  EXPECT_THROW(log_penalty(-1.0), DomainError);
  EXPECT_DOUBLE_EQ(log_penalty(std::exp(1.0)).value, -1.0);
}

TEST(BarrierTransform, VanishingBarrierLeavesCostUnchanged) {
  const OCProblem p = build_pendulum();
  const OCProblem b = barrier_transform(p, 1e-12, BarrierKind::kStrict, 0.0);
  EXPECT_EQ(b.l, 0);
  Vector x(2);
  x << 0.3, -0.1;
  const Vector u = Vector::Constant(1, 0.01);
  EXPECT_NEAR(b.stage_cost(x, u), p.stage_cost(x, u), 1e-10);
}

TEST(BarrierTransform, StrictThrowsOutsideDomain) {
  const OCProblem b = barrier_transform(build_pendulum(), 0.1, BarrierKind::kStrict, 0.0);
  EXPECT_THROW(b.stage_cost(Vector::Zero(2), Vector::Constant(1, 0.3)), DomainError);
}

TEST(BarrierTransform, RelaxedFiniteAtViolatedPoint) {
  // c_1 = u - 0.25 = +0.1.
  const OCProblem b = barrier_transform(build_pendulum(), 0.1, BarrierKind::kRelaxed, 0.1);
  const Vector x = Vector::Zero(2), u = Vector::Constant(1, 0.35);
  EXPECT_TRUE(std::isfinite(b.stage_cost(x, u)));
  const CostDerivatives d = b.stage_cost_derivatives(x, u);
  EXPECT_TRUE(d.qu.allFinite() && d.quu.allFinite() && d.qx.allFinite());
}

TEST(BarrierTransform, DerivativesMatchFiniteDifferences) {
  std::mt19937_64 rng(21);
  for (ProblemId id : {ProblemId::kPendulum, ProblemId::kCar, ProblemId::kUnicycle}) {
    const OCProblem p = build_problem(id);
    for (BarrierKind kind : {BarrierKind::kStrict, BarrierKind::kRelaxed}) {
      const OCProblem b = barrier_transform(p, 0.3, kind, 0.3);
      for (int k = 0; k < 100; ++k) {
        const auto [x, u] = testing::random_interior_point(p, id, rng);
        const DerivativeCheckReport rep = finite_diff_check(b, x, u, 1e-5);
        EXPECT_TRUE(rep.passed) << to_string(id) << " " << rep.worst_block << " " << rep.max_rel_error;
      }
    }
  }
}

TEST(BarrierDDP, LqrWithInactiveBoxesMatchesRiccati) {
  Matrix A(2, 2), B(2, 1);
  A << 1.0, 0.1, 0.0, 1.0;
  B << 0.005, 0.1;
  const Matrix Q = Matrix::Identity(2, 2), R = Matrix::Constant(1, 1, 0.1), Qf = 10.0 * Matrix::Identity(2, 2);
  Vector x0(2);
  x0 << 1.0, -0.5;
  const int N = 40;
  const OCProblem p = testing::make_lq_problem(A, B, Q, R, Qf, x0, N, 50.0);
  const double J_star = testing::riccati_sweep(A, B, Q, R, Qf, x0, N).cost;
  for (BarrierKind kind : {BarrierKind::kStrict, BarrierKind::kRelaxed}) {
    const Solution sol = solve_barrier_ddp(p, std::vector<Vector>(N, Vector::Zero(1)), SolverConfig{}, kind);
    ASSERT_TRUE(sol.converged());
    EXPECT_NEAR(sol.objective, J_star, 1e-6);
  }
}

TEST(BarrierDDP, StrictIteratesStayFeasible) {
  const OCProblem p = testing::make_bounded_integrator(10, 2.0, 0.5, 3.0, -0.4);
  SolverConfig cfg;
  bool ok = true;
  cfg.on_accept = [&](int, const Iterate& w) { ok = ok && max_constraint_violation(p, w) == 0.0; };
  const Solution sol = solve_barrier_ddp(p, std::vector<Vector>(10, Vector::Zero(1)), cfg, BarrierKind::kStrict);
  EXPECT_TRUE(sol.converged());
  EXPECT_TRUE(ok);
}

TEST(BarrierDDP, RelaxedRecoversFromViolatedStart) {
  const OCProblem p = testing::make_bounded_integrator(10, 2.0, 0.5, 3.0, -0.4);
  const Solution sol = solve_barrier_ddp(p, std::vector<Vector>(10, Vector::Constant(1, -1.0)), SolverConfig{},
                                         BarrierKind::kRelaxed);
  EXPECT_TRUE(sol.converged());
  EXPECT_LE(max_constraint_violation(p, sol.iterate), 1e-6);
}

}  // namespace
}  // namespace ipddp
