// Acceptance suite: one PASS/FAIL line per criterion. Exit status is nonzero
// when any criterion fails. Pass criterion numbers as arguments to run a subset.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "ipddp/backward_pass.hpp"
#include "ipddp/barrier.hpp"
#include "ipddp/benchmarks.hpp"
#include "ipddp/solver.hpp"
#include "../oracles/brute_force.hpp"
#include "../oracles/random_stage.hpp"
#include "../oracles/riccati.hpp"
#include "../oracles/sample_points.hpp"
#include "../oracles/toy_problems.hpp"

namespace ipddp {
namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

double median(std::vector<double> v) {
  if (v.empty()) return std::nan("");
  std::sort(v.begin(), v.end());
  const size_t k = v.size() / 2;
  return v.size() % 2 ? v[k] : 0.5 * (v[k - 1] + v[k]);
}

constexpr int kTrials = 40;

// Pendulum runs shared by criteria 1-3.
struct PendulumRun {
  Variant variant;
  TrialResult result;
  bool strictly_feasible_throughout = true;
};

std::vector<PendulumRun>& pendulum_runs() {
  static std::vector<PendulumRun> runs = [] {
    std::vector<PendulumRun> out;
    const OCProblem problem = build_pendulum();
    for (Algorithm alg : {Algorithm::kFeasibleIPDDP, Algorithm::kInfeasibleIPDDP}) {
      TrialSpec spec;
      spec.problem = ProblemId::kPendulum;
      spec.algorithm = alg;
      spec.config = default_config(spec.problem, alg);
      spec.config.max_iterations = 250;
      spec.success_threshold = -4.0;
      for (int i = 0; i < kTrials; ++i) {
        PendulumRun run;
        run.variant = spec.config.variant;
        bool ok = true;
        TrialSpec local = spec;
        if (run.variant == Variant::kFeasible) {
          local.config.on_accept = [&](int, const Iterate& w) {
            ok = ok && check_strict_feasibility(problem, w, Variant::kFeasible).passed;
          };
        }
        run.result = run_trial(local, problem, i);
        run.strictly_feasible_throughout = ok;
        out.push_back(std::move(run));
      }
    }
    return out;
  }();
  return runs;
}

Outcome criterion1() {
  int ok[2] = {0, 0};
  std::vector<double> iters[2];
  for (const PendulumRun& r : pendulum_runs()) {
    const int k = r.variant == Variant::kFeasible ? 0 : 1;
    if (r.result.iterations_to_threshold && *r.result.iterations_to_threshold <= 250) {
      ++ok[k];
      iters[k].push_back(*r.result.iterations_to_threshold);
    }
  }
  const int need = static_cast<int>(std::ceil(0.9 * kTrials));
  return {ok[0] >= need && ok[1] >= need,
          fmt("E_J <= -4 within 250 iterations: feasible %d/%d (median %.0f it), infeasible %d/%d (median %.0f it)",
              ok[0], kTrials, median(iters[0]), ok[1], kTrials, median(iters[1]))};
}

Outcome criterion2() {
  int converged = 0, bang_bang = 0, feasible_runs = 0, feasible_ok = 0;
  double worst_u = 0.0, min_frac = 1.0;
  for (const PendulumRun& r : pendulum_runs()) {
    if (r.variant == Variant::kFeasible) {
      ++feasible_runs;
      feasible_ok += r.strictly_feasible_throughout ? 1 : 0;
    }
    if (r.result.status != "converged") continue;
    ++converged;
    const auto& u = r.result.solution.iterate.u;
    double umax = 0.0;
    int at_bound = 0;
    for (const Vector& ut : u) {
      umax = std::max(umax, std::abs(ut(0)));
      at_bound += std::abs(ut(0)) >= 0.2499 ? 1 : 0;
    }
    const double frac = static_cast<double>(at_bound) / u.size();
    worst_u = std::max(worst_u, umax);
    min_frac = std::min(min_frac, frac);
    bang_bang += (umax <= 0.25 + 1e-9 && frac >= 0.2) ? 1 : 0;
  }
  const bool pass = converged > 0 && bang_bang == converged && feasible_ok == feasible_runs;
  return {pass, fmt("%d/%d converged runs bang-bang (max|u| = %.12f, min fraction at bound %.3f); "
                    "feasible runs strictly feasible at every accepted iterate: %d/%d",
                    bang_bang, converged, worst_u, min_frac, feasible_ok, feasible_runs)};
}

Outcome criterion3() {
  int events = 0, passed = 0;
  for (const PendulumRun& r : pendulum_runs()) {
    for (const MuEvent& e : r.result.solution.mu_events) {
      ++events;
      passed += e.kkt.passed ? 1 : 0;
    }
  }
  return {events > 0 && passed == events, fmt("%d/%d mu-acceptance events pass the KKT check at tol 10(0.2 mu)",
                                               passed, events)};
}

// Residuals of a fixed-mu run from a perturbed copy of `ref`: noise on u and s,
// rolled out through the converged feedback policy so the start is a
// dynamically consistent point near the solution.
std::vector<double> perturbed_run(const OCProblem& p, const Solution& ref, double mu, const SolverConfig& base,
                                  std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> noise(-1e-3, 1e-3);
  const Iterate& ws = ref.iterate;
  Iterate w = ws;
  w.x[0] = p.x0;
  for (int t = 0; t < p.horizon; ++t) {
    const Vector dx = w.x[t] - ws.x[t];
    w.u[t] = ws.u[t] + ref.gains[t].beta * dx;
    w.u[t](0) = std::clamp(w.u[t](0) + noise(rng), -0.25 + 1e-6, 0.25 - 1e-6);
    w.s[t] = ws.s[t] + ref.gains[t].theta * dx;
    for (int j = 0; j < p.l; ++j) w.s[t](j) = std::max(w.s[t](j) + noise(rng), 1e-8);
    w.x[t + 1] = p.dynamics(w.x[t], w.u[t]);
  }
  SolverConfig cfg = base;
  cfg.f_tol = 1e-300;  // run into the round-off floor
  cfg.max_iterations = 12;
  const Solution sol = solve_from(p, w, mu, cfg);
  std::vector<double> F;
  for (const IterationRecord& r : sol.trace) F.push_back(r.F_inf);
  return F;
}

Outcome criterion4() {
  const OCProblem p = build_pendulum();
  const double mu = 1e-3;
  SolverConfig base = default_config(ProblemId::kPendulum, Algorithm::kFeasibleIPDDP);
  base.mu_min = mu;
  base.f_tol = 1e-12;
  base.max_iterations = 400;
  const Solution ref = solve(p, random_controls(p.horizon, 1, -0.01, 0.01, 0), base);
  if (ref.F_inf > 1e-10) return {false, fmt("reference solve at mu = 1e-3 stalled at F = %.3e", ref.F_inf)};

  int passed = 0;
  const int runs = 5;
  std::string detail;
  for (int seed = 0; seed < runs; ++seed) {
    std::vector<double> F = perturbed_run(p, ref, mu, base, 2024 + seed);
    // Round-off floor from the stagnant tail; keep the residuals above it.
    std::vector<double> tail(F.end() - 5, F.end());
    const double floor = 10.0 * median(tail);
    size_t end = 0;
    while (end < F.size() && F[end] > floor) ++end;
    F.resize(end);

    std::ostringstream seq;
    for (double f : F) seq << fmt("%.2e ", f);
    bool ok = false;
    double M = std::nan(""), MF = std::nan("");
    if (F.size() >= 3) {
      const size_t k = F.size() - 1;
      M = std::max(F[k - 1] / (F[k - 2] * F[k - 2]), F[k] / (F[k - 1] * F[k - 1]));
      // Any linear-rate tail gives M F_{k-1} = 1; quadratic gives the last ratio.
      MF = M * F[k - 1];
      bool below = false;
      for (size_t i = 1; i < F.size(); ++i) below = below || F[i] / F[i - 1] < 0.1;
      ok = MF <= 0.5 && below;
    }
    passed += ok ? 1 : 0;
    if (seed == 0 || !ok) {
      detail += fmt("[seed %d: F %s(floor %.1e) M = %.3g, M F_{k-1} = %.2e] ", seed, seq.str().c_str(), floor, M, MF);
    }
  }
  return {passed == runs, fmt("%d/%d perturbed warm starts converge quadratically ", passed, runs) + detail};
}

Outcome criterion5() {
  std::mt19937_64 rng(5);
  double worst_stage = 0.0;
  for (int k = 0; k < 100; ++k) {
    const testing::RandomStage st = testing::random_stage(rng, 4, 2, 3);
    const StageSolution a = solve_stage_feasible(st.Q, st.s, st.c, st.mu, 0.0, Factorization::kAllowIndefinite);
    const StageSolution b =
        solve_stage_infeasible(st.Q, st.s, -st.c, st.c, st.mu, 0.0, Factorization::kAllowIndefinite);
    for (const auto& d : {(a.gains.alpha - b.gains.alpha).eval(), (a.gains.eta - b.gains.eta).eval()})
      worst_stage = std::max(worst_stage, d.lpNorm<Eigen::Infinity>());
    for (const auto& d : {(a.gains.beta - b.gains.beta).eval(), (a.gains.theta - b.gains.theta).eval()})
      worst_stage = std::max(worst_stage, d.lpNorm<Eigen::Infinity>());
  }

  const OCProblem p = build_pendulum();
  Iterate w;
  w.u = random_controls(p.horizon, 1, -0.2, 0.2, 55);
  w.x = rollout(p, w.u);
  initialize_duals(p, w, 0.05, Variant::kFeasible);
  Iterate wi = w;
  for (int t = 0; t < p.horizon; ++t) wi.y.push_back(-p.constraints(w.x[t], w.u[t]));
  const BackwardPassOptions opt{Factorization::kAllowIndefinite, true, false};
  const BackwardPassResult a = backward_pass(p, w, 0.05, 0.0, Variant::kFeasible, opt);
  const BackwardPassResult b = backward_pass(p, wi, 0.05, 0.0, Variant::kInfeasible, opt);
  double worst_pass = 0.0;
  for (int t = 0; t < p.horizon; ++t) {
    const StageGains &ga = a.gains[t], &gb = b.gains[t];
    worst_pass = std::max({worst_pass, (ga.alpha - gb.alpha).lpNorm<Eigen::Infinity>(),
                           (ga.beta - gb.beta).lpNorm<Eigen::Infinity>(),
                           (ga.eta - gb.eta).lpNorm<Eigen::Infinity>(),
                           (ga.theta - gb.theta).lpNorm<Eigen::Infinity>()});
  }
  return {worst_stage <= 1e-10 && worst_pass <= 1e-8,
          fmt("max gain gap: 100 random stages %.2e (tol 1e-10), pendulum pass %.2e (tol 1e-8)", worst_stage,
              worst_pass)};
}

Outcome criterion6() {
  const double x0 = 1.0, w = 0.5, wf = 4.0, lower = -0.35;
  const OCProblem p = testing::make_bounded_integrator(3, x0, w, wf, lower);
  auto J = [&](const Eigen::VectorXd& u) {
    double x = x0, total = 0.0;
    for (int t = 0; t < 3; ++t) {
      total += x * x + w * u(t) * u(t);
      x += u(t);
    }
    return total + wf * x * x;
  };
  const testing::BruteForceResult oracle = testing::brute_force_minimize(J, 3, lower, 1.0);
  double worst = 0.0;
  bool converged = true;
  for (Variant v : {Variant::kFeasible, Variant::kInfeasible}) {
    SolverConfig cfg;
    cfg.variant = v;
    const Solution sol = solve(p, std::vector<Vector>(3, Vector::Zero(1)), cfg);
    converged = converged && sol.converged();
    worst = std::max(worst, std::abs(sol.objective - oracle.cost));
  }
  return {converged && worst <= 1e-6, fmt("oracle J = %.10f (u0 at bound: %s), max |J - J_oracle| = %.2e",
                                          oracle.cost, oracle.active[0] ? "yes" : "no", worst)};
}

Outcome criterion7() {
  Matrix A(2, 2), B(2, 1);
  A << 1.0, 0.1, 0.0, 1.0;
  B << 0.005, 0.1;
  const Matrix Q = Matrix::Identity(2, 2), R = Matrix::Constant(1, 1, 0.1), Qf = 10.0 * Matrix::Identity(2, 2);
  Vector x0(2);
  x0 << 1.0, -0.5;
  const int N = 50;
  const testing::RiccatiSolution ric = testing::riccati_sweep(A, B, Q, R, Qf, x0, N);

  auto gap = [&](const Solution& sol, double& dJ, double& dK) {
    dJ = std::abs(sol.objective - ric.cost);
    dK = 0.0;
    for (int t = 0; t < N; ++t) dK = std::max(dK, (sol.gains[t].beta - ric.K[t]).lpNorm<Eigen::Infinity>());
  };
  double dJ0, dK0;
  const Solution free_sol =
      solve(testing::make_lq_problem(A, B, Q, R, Qf, x0, N), random_controls(N, 1, -1, 1, 7), SolverConfig{});
  gap(free_sol, dJ0, dK0);

  double dJ1 = 0.0, dK1 = 0.0;
  bool boxed_ok = true;
  for (Variant v : {Variant::kFeasible, Variant::kInfeasible}) {
    SolverConfig cfg;
    cfg.variant = v;
    const Solution boxed =
        solve(testing::make_lq_problem(A, B, Q, R, Qf, x0, N, 50.0), random_controls(N, 1, -1, 1, 7), cfg);
    double a, b;
    gap(boxed, a, b);
    boxed_ok = boxed_ok && boxed.converged() && boxed.mu <= 1e-8;
    dJ1 = std::max(dJ1, a);
    dK1 = std::max(dK1, b);
  }
  const bool pass = free_sol.converged() && dJ0 <= 1e-8 && dK0 <= 1e-8 && boxed_ok && dJ1 <= 1e-8 && dK1 <= 1e-8;
  return {pass, fmt("l = 0: |dJ| = %.2e, max|dK| = %.2e; inactive boxes at mu = 1e-8: |dJ| = %.2e, max|dK| = %.2e",
                    dJ0, dK0, dJ1, dK1)};
}

Outcome criterion8() {
  const OCProblem p = build_unicycle();
  auto violates_obstacle_2 = [&](const std::vector<Vector>& u) {
    const auto x = rollout(p, u);
    for (int t = 0; t < p.horizon; ++t)
      if (p.constraints(x[t], u[t])(5) > 0.0) return true;
    return false;
  };
  auto reached = [](const TrialResult& r) {
    return r.status != "error" && r.max_constraint_violation <= 1e-6 && r.final_mu <= 1e-6;
  };

  int start_violations = 0;
  int ok[2] = {0, 0};
  std::vector<double> iters[2];
  double best_mu[2] = {1e300, 1e300}, best_viol[2] = {1e300, 1e300};
  const Algorithm algs[2] = {Algorithm::kInfeasibleIPDDP, Algorithm::kRelaxedBarrier};
  for (int a = 0; a < 2; ++a) {
    TrialSpec spec;
    spec.problem = ProblemId::kUnicycle;
    spec.algorithm = algs[a];
    spec.config = default_config(spec.problem, algs[a]);
    spec.config.max_iterations = 500;
    for (int i = 0; i < kTrials; ++i) {
      if (a == 0) {
        const auto u0 = random_controls(p.horizon, p.m, spec.control_low, spec.control_high, spec.base_seed + i);
        start_violations += violates_obstacle_2(u0) ? 1 : 0;
      }
      const TrialResult r = run_trial(spec, p, i);
      if (reached(r)) {
        ++ok[a];
        iters[a].push_back(r.iterations);
      }
      best_mu[a] = std::min(best_mu[a], r.final_mu);
      best_viol[a] = std::min(best_viol[a], r.max_constraint_violation);
    }
  }
  const int need = static_cast<int>(std::ceil(0.75 * kTrials));
  const bool medians_ok = !iters[0].empty() && !iters[1].empty() && median(iters[1]) >= median(iters[0]);
  const bool pass = start_violations == kTrials && ok[0] >= need && ok[1] >= need && medians_ok;
  return {pass, fmt("infeasible starts %d/%d; viol <= 1e-6 and mu <= 1e-6 within 500 it: IPDDP %d/%d "
                    "(median %.0f it, smallest mu %.2e, smallest viol %.2e), relaxed barrier %d/%d "
                    "(median %.0f it, smallest mu %.2e)",
                    start_violations, kTrials, ok[0], kTrials, median(iters[0]), best_mu[0], best_viol[0], ok[1],
                    kTrials, median(iters[1]), best_mu[1])};
}

Outcome criterion9() {
  const OCProblem p = build_car_parking();
  int ok[2] = {0, 0};
  std::vector<double> finals;
  const Algorithm algs[2] = {Algorithm::kFeasibleIPDDP, Algorithm::kInfeasibleIPDDP};
  for (int a = 0; a < 2; ++a) {
    TrialSpec spec;
    spec.problem = ProblemId::kCar;
    spec.algorithm = algs[a];
    spec.config = default_config(spec.problem, algs[a]);
    spec.config.max_iterations = 500;
    spec.success_threshold = -3.0;
    for (int i = 0; i < kTrials; ++i) {
      const TrialResult r = run_trial(spec, p, i);
      if (r.iterations_to_threshold && *r.iterations_to_threshold <= 500) ++ok[a];
      if (r.status == "converged") finals.push_back(r.final_objective);
    }
  }
  std::sort(finals.begin(), finals.end());
  int clusters = finals.empty() ? 0 : 1;
  for (size_t i = 1; i < finals.size(); ++i) clusters += finals[i] - finals[i - 1] > 1e-2 ? 1 : 0;
  const int need = static_cast<int>(std::ceil(0.75 * kTrials));
  const bool pass = ok[0] >= need && ok[1] >= need && clusters >= 2;
  return {pass, fmt("E_J <= -3 within 500 it: feasible %d/%d, infeasible %d/%d; %d converged finals in %d "
                    "cluster(s), J range [%.6f, %.6f]",
                    ok[0], kTrials, ok[1], kTrials, static_cast<int>(finals.size()), clusters,
                    finals.empty() ? 0.0 : finals.front(), finals.empty() ? 0.0 : finals.back())};
}

Outcome criterion10() {
  const OCProblem p = build_pendulum();
  int checked = 0, bad = 0;
  double min_eig = 1e300;
  for (Algorithm alg : {Algorithm::kFeasibleIPDDP, Algorithm::kInfeasibleIPDDP}) {
    for (int seed = 0; seed < 5; ++seed) {
      SolverConfig cfg = default_config(ProblemId::kPendulum, alg);
      cfg.trace_min_eig = true;
      cfg.seed = seed;
      const Solution sol = solve(p, random_controls(p.horizon, 1, -0.01, 0.01, seed), cfg);
      for (const IterationRecord& r : sol.trace) {
        if (r.mu > 1e-3) continue;
        ++checked;
        const double e = r.min_eig.value_or(-1.0);
        min_eig = std::min(min_eig, e);
        bad += (r.gamma_reg == 0.0 && e > 0.0) ? 0 : 1;
      }
    }
  }
  return {checked > 0 && bad == 0,
          fmt("%d iterations with mu <= 1e-3 over 10 runs, %d needed regularization or had min-eig <= 0; "
              "smallest min-eig %.3e",
              checked, bad, min_eig)};
}

Outcome criterion11() {
  std::mt19937_64 rng(11);
  int failures = 0, checks = 0;
  double worst = 0.0;
  std::string worst_where;
  auto record = [&](const DerivativeCheckReport& rep, const std::string& where) {
    ++checks;
    failures += rep.passed ? 0 : 1;
    if (rep.max_rel_error > worst) {
      worst = rep.max_rel_error;
      worst_where = where + " " + rep.worst_block;
    }
  };
  for (ProblemId id : {ProblemId::kPendulum, ProblemId::kCar, ProblemId::kUnicycle}) {
    const OCProblem p = build_problem(id);
    const OCProblem strict = barrier_transform(p, 0.1, BarrierKind::kStrict, 0.1);
    const OCProblem relaxed = barrier_transform(p, 0.1, BarrierKind::kRelaxed, 0.1);
    for (int k = 0; k < 100; ++k) {
      const auto [x, u] = testing::random_interior_point(p, id, rng);
      record(finite_diff_check(p, x, u, 1e-4), to_string(id));
      record(finite_diff_check(strict, x, u, 1e-4), to_string(id) + "/barrier");
      record(finite_diff_check(relaxed, x, u, 1e-4), to_string(id) + "/relaxed-barrier");
    }
  }
  return {failures == 0, fmt("%d/%d point checks pass at rel tol 1e-4; worst %.2e (%s)", checks - failures, checks,
                             worst, worst_where.c_str())};
}

}  // namespace
}  // namespace ipddp

int main(int argc, char** argv) {
  using namespace ipddp;
  const std::vector<std::function<Outcome()>> criteria = {criterion1, criterion2, criterion3,  criterion4,
                                                          criterion5, criterion6, criterion7,  criterion8,
                                                          criterion9, criterion10, criterion11};
  const char* names[] = {"pendulum convergence",
                         "pendulum bang-bang structure",
                         "perturbed-KKT oracle at mu events",
                         "local quadratic convergence",
                         "feasible/infeasible gain equivalence",
                         "small-instance brute-force oracle",
                         "LQR exactness",
                         "unicycle infeasible start",
                         "car parking",
                         "central-path curvature",
                         "derivative suite"};
  std::set<int> selected;
  for (int i = 1; i < argc; ++i) selected.insert(std::atoi(argv[i]));

  int failed = 0;
  for (size_t k = 0; k < criteria.size(); ++k) {
    const int id = static_cast<int>(k) + 1;
    if (!selected.empty() && !selected.count(id)) continue;
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = criteria[k]();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    std::printf("CRITERION %2d %s: %s | %s (%.1f s)\n", id, o.pass ? "PASS" : "FAIL", names[k], o.detail.c_str(),
                secs);
    std::fflush(stdout);
    failed += o.pass ? 0 : 1;
  }
  std::printf("%d criteria failed\n", failed);
  return failed == 0 ? 0 : 1;
}
