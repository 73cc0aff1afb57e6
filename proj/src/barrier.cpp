#include "ipddp/barrier.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <memory>

namespace ipddp {

PenaltyValue relaxed_penalty(double z, double delta) {
  if (z > delta) return {-std::log(z), -1.0 / z, 1.0 / (z * z)};
  const double ratio = (z - 2.0 * delta) / delta;
  return {0.5 * (ratio * ratio - 1.0) - std::log(delta), (z - 2.0 * delta) / (delta * delta), 1.0 / (delta * delta)};
}

PenaltyValue log_penalty(double z) {
  if (!(z > 0.0)) throw DomainError("log barrier evaluated at a non-interior point");
  return {-std::log(z), -1.0 / z, 1.0 / (z * z)};
}

OCProblem barrier_transform(const OCProblem& problem, double mu, BarrierKind kind, double delta) {
  if (!(mu > 0.0)) throw ConfigError("barrier weight must be > 0");
  if (kind == BarrierKind::kRelaxed && !(delta > 0.0)) throw ConfigError("relaxation delta must be > 0");

  auto base = std::make_shared<const OCProblem>(problem);
  auto penalty = [kind, delta](double z) {
    return kind == BarrierKind::kStrict ? log_penalty(z) : relaxed_penalty(z, delta);
  };

  OCProblem out = problem;
  out.name = problem.name + (kind == BarrierKind::kStrict ? "+barrier" : "+relaxed-barrier");
  out.l = 0;
  out.constraints = nullptr;
  out.constraint_derivatives = nullptr;
  if (problem.l == 0) return out;

  out.stage_cost = [base, mu, penalty](const Vector& x, const Vector& u) {
    const Vector c = base->constraints(x, u);
    double value = base->stage_cost(x, u);
    for (Eigen::Index j = 0; j < c.size(); ++j) value += mu * penalty(-c(j)).value;
    return value;
  };

  out.stage_cost_derivatives = [base, mu, penalty](const Vector& x, const Vector& u) {
    CostDerivatives d = base->stage_cost_derivatives(x, u);
    const Vector c = base->constraints(x, u);
    const ConstraintDerivatives cd = base->constraint_derivatives(x, u, true);
    for (Eigen::Index j = 0; j < c.size(); ++j) {
      // d/dv beta(-c_j) = -beta' grad c_j; d2 = beta'' grad c grad c' - beta' hess c_j.
      const PenaltyValue b = penalty(-c(j));
      const Vector gx = cd.cx.row(j).transpose();
      const Vector gu = cd.cu.row(j).transpose();
      d.qx -= mu * b.d1 * gx;
      d.qu -= mu * b.d1 * gu;
      d.qxx += mu * b.d2 * gx * gx.transpose();
      d.quu += mu * b.d2 * gu * gu.transpose();
      d.qxu += mu * b.d2 * gx * gu.transpose();
      if (j < static_cast<Eigen::Index>(cd.cxx.size())) d.qxx -= mu * b.d1 * cd.cxx[j];
      if (j < static_cast<Eigen::Index>(cd.cuu.size())) d.quu -= mu * b.d1 * cd.cuu[j];
      if (j < static_cast<Eigen::Index>(cd.cxu.size())) d.qxu -= mu * b.d1 * cd.cxu[j];
    }
    return d;
  };
  return out;
}

namespace {

constexpr double kGammaFloor = 1e-6;

double increase_gamma(double gamma) { return std::max(kGammaFloor, 10.0 * gamma); }

double decrease_gamma(double gamma) {
  const double next = gamma / 10.0;
  return next < kGammaFloor ? 0.0 : next;
}

// Duals implied by the barrier stationarity conditions: s_j = -mu beta'(-c_j).
void implied_duals(const OCProblem& problem, Iterate& w, double mu, BarrierKind kind, double delta) {
  w.s.assign(w.horizon(), Vector(problem.l));
  for (int t = 0; t < w.horizon(); ++t) {
    const Vector c = problem.constraints(w.x[t], w.u[t]);
    for (int j = 0; j < problem.l; ++j) {
      const double z = -c(j);
      const double d1 = kind == BarrierKind::kStrict ? -1.0 / z : relaxed_penalty(z, delta).d1;
      w.s[t](j) = -mu * d1;
    }
  }
}

}  // namespace

Solution solve_barrier_ddp(const OCProblem& problem, std::span<const Vector> initial_controls,
                           const SolverConfig& config, BarrierKind kind) {
  config.validate();
  validate(problem);
  const auto start = std::chrono::steady_clock::now();

  Iterate w;
  w.u.assign(initial_controls.begin(), initial_controls.end());
  w.x = rollout(problem, w.u);
  if (problem.l > 0 && kind == BarrierKind::kStrict) {
    for (int t = 0; t < problem.horizon; ++t) {
      if ((problem.constraints(w.x[t], w.u[t]).array() >= 0.0).any()) {
        throw InfeasibleStartError("initial rollout violates c < 0 at stage " + std::to_string(t));
      }
    }
  }

  double mu = problem.l == 0 ? config.mu_min : init_mu(problem, w, config.mu_init, config.seed);
  double delta = mu;
  OCProblem penalized = barrier_transform(problem, mu, kind, delta);

  LineSearchConfig line_search = config.line_search;
  line_search.acceptance = Acceptance::kSufficientDecrease;
  StepFilter unused_filter;

  BackwardPassOptions step_options;
  step_options.second_order_dynamics = !config.ilqr_mode;
  BackwardPassOptions diag_options = step_options;
  diag_options.factorization = Factorization::kAllowIndefinite;
  diag_options.compute_min_eigenvalue = true;

  const Variant kkt_variant = kind == BarrierKind::kStrict ? Variant::kFeasible : Variant::kInfeasible;

  Solution sol;
  CostateSweep adjoint;
  Residual grad;
  double gamma = 0.0;
  int iteration = 0;
  int inner = 0;
  auto elapsed = [&] { return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count(); };

  while (true) {
    adjoint = costate_sweep(penalized, w, 0.0, Variant::kFeasible);
    grad = residual_F(adjoint, Variant::kFeasible);
    const double J = objective(problem, w);

    if (problem.l > 0 && mu > config.mu_min &&
        (grad.inf_norm < config.mu_accept_factor * mu || inner >= kBarrierInnerIterationCap)) {
      MuEvent event;
      event.iteration = iteration;
      event.mu = mu;
      event.F_inf = grad.inf_norm;
      if (config.check_kkt_at_mu_events) {
        Iterate primal_dual = w;
        implied_duals(problem, primal_dual, mu, kind, delta);
        event.kkt = check_perturbed_kkt(problem, primal_dual, adjoint.multipliers, mu,
                                        10.0 * config.mu_accept_factor * mu, kkt_variant);
      }
      sol.mu_events.push_back(event);
      mu = std::max(update_mu(mu, config.kappa), config.mu_min);
      delta = mu;
      penalized = barrier_transform(problem, mu, kind, delta);
      inner = 0;
      continue;
    }

    IterationRecord record;
    record.iteration = iteration;
    record.objective = J;
    if (config.reference_objective) {
      record.optimality_error = std::log10(std::max(J - *config.reference_objective, 1e-16));
    }
    record.mu = mu;
    record.F_inf = grad.inf_norm;
    record.gamma_reg = gamma;

    const bool done = mu <= config.mu_min && grad.inf_norm <= config.f_tol;
    if (done || iteration >= config.max_iterations) {
      sol.status = done ? SolveStatus::kConverged : SolveStatus::kMaxIterations;
      if (config.trace_min_eig) {
        record.min_eig = backward_pass(penalized, w, 0.0, 0.0, Variant::kFeasible, diag_options)
                             .diagnostics.min_eigenvalue;
      }
      record.wall_time = elapsed();
      sol.trace.push_back(record);
      break;
    }

    std::vector<StageGains> gains;
    std::vector<Vector> Qu;
    bool have_gains = false;
    if (config.trace_min_eig) {
      BackwardPassResult diag = backward_pass(penalized, w, 0.0, 0.0, Variant::kFeasible, diag_options);
      record.min_eig = diag.diagnostics.min_eigenvalue;
      if (gamma == 0.0 && diag.diagnostics.positive_definite) {
        gains = std::move(diag.gains);
        Qu = std::move(diag.Qu);
        have_gains = true;
      }
    }
    bool numerical_failure = false;
    while (!have_gains) {
      if (gamma > config.gamma_reg_max) {
        numerical_failure = true;
        break;
      }
      try {
        BackwardPassResult bp = backward_pass(penalized, w, 0.0, gamma, Variant::kFeasible, step_options);
        gains = std::move(bp.gains);
        Qu = std::move(bp.Qu);
        have_gains = true;
      } catch (const NotPositiveDefiniteError&) {
        gamma = increase_gamma(gamma);
      }
    }
    record.gamma_reg = gamma;

    if (!numerical_failure) {
      LineSearchConfig ls = line_search;
      ls.expected_decrease = 0.0;
      for (int t = 0; t < problem.horizon; ++t) ls.expected_decrease -= Qu[t].dot(gains[t].alpha);
      std::optional<StepCandidate> candidate =
          forward_pass(penalized, w, gains, unused_filter, 0.0, Variant::kFeasible, ls);
      if (candidate) {
        record.step = candidate->step;
        w = std::move(candidate->iterate);
        if (config.on_accept) config.on_accept(iteration + 1, w);
        gamma = decrease_gamma(gamma);
      } else {
        gamma = increase_gamma(gamma);
        numerical_failure = gamma > config.gamma_reg_max;
      }
    }
    record.wall_time = elapsed();
    sol.trace.push_back(record);
    ++iteration;
    ++inner;
    if (numerical_failure) {
      adjoint = costate_sweep(penalized, w, 0.0, Variant::kFeasible);
      grad = residual_F(adjoint, Variant::kFeasible);
      sol.status = SolveStatus::kNumericalFailure;
      break;
    }
  }

  sol.iterations = iteration;
  sol.mu = mu;
  sol.F_inf = grad.inf_norm;
  sol.objective = objective(problem, w);
  sol.multipliers = std::move(adjoint.multipliers);
  sol.gains = backward_pass(penalized, w, 0.0, 0.0, Variant::kFeasible, diag_options).gains;
  if (problem.l > 0) implied_duals(problem, w, mu, kind, delta);
  sol.iterate = std::move(w);
  return sol;
}

}  // namespace ipddp
