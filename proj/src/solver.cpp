#include "ipddp/solver.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <random>

namespace ipddp {

namespace {

constexpr double kGammaFloor = 1e-6;
constexpr std::uint64_t kMuStreamOffset = 0x9E3779B97F4A7C15ULL;

double inf_norm(const Vector& v) { return v.size() == 0 ? 0.0 : v.cwiseAbs().maxCoeff(); }

double increase_gamma(double gamma) { return std::max(kGammaFloor, 10.0 * gamma); }

double decrease_gamma(double gamma) {
  const double next = gamma / 10.0;
  return next < kGammaFloor ? 0.0 : next;
}

std::optional<double> optimality_error_of(const SolverConfig& config, double J) {
  if (!config.reference_objective) return std::nullopt;
  return std::log10(std::max(J - *config.reference_objective, 1e-16));
}

}  // namespace

void SolverConfig::validate() const {
  if (!(kappa > 1.0)) throw ConfigError("kappa must be > 1");
  if (!(mu_accept_factor > 0.0 && mu_accept_factor < 1.0)) throw ConfigError("mu_accept_factor must lie in (0, 1)");
  if (!(mu_min > 0.0)) throw ConfigError("mu_min must be > 0");
  if (!(f_tol > 0.0)) throw ConfigError("f_tol must be > 0");
  if (max_iterations < 0) throw ConfigError("max_iterations must be >= 0");
  if (line_search.max_halvings < 0) throw ConfigError("line search needs at least one step");
  if (mu_init.kind == MuInitPolicy::Kind::kExplicit && !(mu_init.value > 0.0)) {
    throw ConfigError("explicit mu must be > 0");
  }
  if (mu_init.kind == MuInitPolicy::Kind::kSampled && !(0.0 < mu_init.low && mu_init.low <= mu_init.high)) {
    throw ConfigError("sampled mu range must satisfy 0 < low <= high");
  }
}

std::string to_string(SolveStatus status) {
  switch (status) {
    case SolveStatus::kConverged:
      return "converged";
    case SolveStatus::kMaxIterations:
      return "max-iterations";
    case SolveStatus::kNumericalFailure:
      return "numerical-failure";
  }
  return "unknown";
}

CostateSweep costate_sweep(const OCProblem& problem, const Iterate& w, double mu, Variant variant) {
  const int N = w.horizon();
  CostateSweep out;
  std::vector<Vector>& lambda = out.multipliers.lambda;
  lambda.resize(N + 1);
  out.Qu.resize(N);
  if (variant == Variant::kFeasible) {
    out.r.resize(N);
  } else {
    out.rp.resize(N);
    out.rd.resize(N);
  }
  lambda[N] = problem.terminal_cost_derivatives(w.x[N]).px;
  for (int t = N - 1; t >= 0; --t) {
    const DynamicsDerivatives fd = problem.dynamics_derivatives(w.x[t], w.u[t], false);
    const CostDerivatives qd = problem.stage_cost_derivatives(w.x[t], w.u[t]);
    Vector lx = qd.qx;
    Vector lu = qd.qu;
    if (problem.l > 0) {
      const ConstraintDerivatives cd = problem.constraint_derivatives(w.x[t], w.u[t], false);
      const Vector c = problem.constraints(w.x[t], w.u[t]);
      lx += cd.cx.transpose() * w.s[t];
      lu += cd.cu.transpose() * w.s[t];
      if (variant == Variant::kFeasible) {
        out.r[t] = w.s[t].cwiseProduct(c).array() + mu;
      } else {
        out.rp[t] = c + w.y[t];
        out.rd[t] = w.s[t].cwiseProduct(w.y[t]).array() - mu;
      }
    } else if (variant == Variant::kFeasible) {
      out.r[t] = Vector(0);
    } else {
      out.rp[t] = Vector(0);
      out.rd[t] = Vector(0);
    }
    out.Qu[t] = lu + fd.fu.transpose() * lambda[t + 1];
    lambda[t] = lx + fd.fx.transpose() * lambda[t + 1];
  }
  return out;
}

Residual residual_F(const CostateSweep& sweep, Variant variant) {
  const std::size_t N = sweep.Qu.size();
  Eigen::Index size = 0;
  for (std::size_t t = 0; t < N; ++t) {
    size += sweep.Qu[t].size();
    if (variant == Variant::kFeasible) {
      size += sweep.r[t].size();
    } else {
      size += sweep.rp[t].size() + sweep.rd[t].size();
    }
  }
  Residual out;
  out.F.resize(size);
  Eigen::Index k = 0;
  auto append = [&](const Vector& v) {
    out.F.segment(k, v.size()) = v;
    k += v.size();
  };
  for (const Vector& v : sweep.Qu) append(v);
  if (variant == Variant::kFeasible) {
    for (const Vector& v : sweep.r) append(v);
  } else {
    for (const Vector& v : sweep.rp) append(v);
    for (const Vector& v : sweep.rd) append(v);
  }
  out.inf_norm = inf_norm(out.F);
  return out;
}

Residual residual_F(const OCProblem& problem, const Iterate& w, double mu, Variant variant) {
  return residual_F(costate_sweep(problem, w, mu, variant), variant);
}

double update_mu(double mu, double kappa) { return std::min(mu / kappa, std::pow(mu, 1.2)); }

double init_mu(const OCProblem& problem, const Iterate& w, const MuInitPolicy& policy, std::uint64_t seed) {
  switch (policy.kind) {
    case MuInitPolicy::Kind::kAuto:
      if (problem.l == 0) throw ConfigError("automatic mu initialization needs at least one constraint");
      return objective(problem, w) / (static_cast<double>(problem.horizon) * problem.l);
    case MuInitPolicy::Kind::kExplicit:
      return policy.value;
    case MuInitPolicy::Kind::kSampled: {
      std::mt19937_64 rng(seed + kMuStreamOffset);
      std::uniform_real_distribution<double> dist(policy.low, policy.high);
      return dist(rng);
    }
  }
  throw ConfigError("unknown mu initialization policy");
}

Multipliers recover_multipliers(std::span<const ValueCoeffs> value, std::span<const Vector> Qx) {
  Multipliers out;
  out.lambda.reserve(value.size());
  for (const Vector& q : Qx) out.lambda.push_back(q);
  out.lambda.push_back(value.back().Vx);
  return out;
}

KKTReport check_perturbed_kkt(const OCProblem& problem, const Iterate& w, const Multipliers& lambda, double mu,
                              double tol, Variant variant) {
  const int N = w.horizon();
  const auto& lam = lambda.lambda;
  KKTReport rep;
  rep.max_constraint = -std::numeric_limits<double>::infinity();
  rep.min_dual = std::numeric_limits<double>::infinity();
  rep.dynamics_inf = inf_norm(problem.x0 - w.x[0]);

  for (int t = 0; t < N; ++t) {
    const DynamicsDerivatives fd = problem.dynamics_derivatives(w.x[t], w.u[t], false);
    const CostDerivatives qd = problem.stage_cost_derivatives(w.x[t], w.u[t]);
    Vector gx = qd.qx + fd.fx.transpose() * lam[t + 1] - lam[t];
    Vector gu = qd.qu + fd.fu.transpose() * lam[t + 1];
    if (problem.l > 0) {
      const ConstraintDerivatives cd = problem.constraint_derivatives(w.x[t], w.u[t], false);
      const Vector c = problem.constraints(w.x[t], w.u[t]);
      gx += cd.cx.transpose() * w.s[t];
      gu += cd.cu.transpose() * w.s[t];
      rep.complementarity_inf =
          std::max(rep.complementarity_inf, inf_norm(Vector(w.s[t].cwiseProduct(c).array() + mu)));
      rep.max_constraint = std::max(rep.max_constraint, c.maxCoeff());
      rep.min_dual = std::min(rep.min_dual, w.s[t].minCoeff());
    }
    rep.grad_x_inf = std::max(rep.grad_x_inf, inf_norm(gx));
    rep.grad_u_inf = std::max(rep.grad_u_inf, inf_norm(gu));
    rep.dynamics_inf = std::max(rep.dynamics_inf, inf_norm(problem.dynamics(w.x[t], w.u[t]) - w.x[t + 1]));
  }
  const TerminalDerivatives pd = problem.terminal_cost_derivatives(w.x[N]);
  rep.grad_x_inf = std::max(rep.grad_x_inf, inf_norm(pd.px - lam[N]));

  bool signs = true;
  if (problem.l > 0) {
    const double c_bound = variant == Variant::kFeasible ? 0.0 : tol;
    signs = rep.max_constraint <= c_bound && rep.min_dual >= 0.0;
  } else {
    rep.max_constraint = 0.0;
    rep.min_dual = 0.0;
  }
  rep.passed = signs && rep.grad_x_inf <= tol && rep.grad_u_inf <= tol && rep.dynamics_inf <= tol &&
               rep.complementarity_inf <= tol;
  return rep;
}

void initialize_duals(const OCProblem& problem, Iterate& w, double mu, Variant variant) {
  const int N = w.horizon();
  w.s.assign(N, Vector(problem.l));
  w.y.clear();
  if (variant == Variant::kInfeasible) w.y.assign(N, Vector(problem.l));
  if (problem.l == 0) return;
  for (int t = 0; t < N; ++t) {
    const Vector c = problem.constraints(w.x[t], w.u[t]);
    if (variant == Variant::kFeasible) {
      for (int j = 0; j < problem.l; ++j) {
        w.s[t](j) = std::clamp(mu * std::max(1.0, 1.0 / (-c(j))), 1e-3, 1e3);
      }
    } else {
      w.y[t] = (-c).cwiseMax(1e-2);
      w.s[t] = (mu / w.y[t].array()).cwiseMin(0.1).matrix();
    }
  }
}

std::vector<Vector> random_controls(int horizon, int m, double low, double high, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> dist(low, high);
  std::vector<Vector> controls(horizon, Vector(m));
  for (Vector& u : controls) {
    for (int i = 0; i < m; ++i) u(i) = dist(rng);
  }
  return controls;
}

Solution solve(const OCProblem& problem, std::span<const Vector> initial_controls, const SolverConfig& config) {
  config.validate();
  validate(problem);
  Iterate w;
  w.u.assign(initial_controls.begin(), initial_controls.end());
  w.x = rollout(problem, w.u);

  const double mu = problem.l == 0 ? config.mu_min : init_mu(problem, w, config.mu_init, config.seed);
  if (problem.l > 0 && config.variant == Variant::kFeasible) {
    for (int t = 0; t < problem.horizon; ++t) {
      if ((problem.constraints(w.x[t], w.u[t]).array() >= 0.0).any()) {
        throw InfeasibleStartError("initial rollout violates c < 0 at stage " + std::to_string(t));
      }
    }
  }
  initialize_duals(problem, w, mu, config.variant);
  return solve_from(problem, std::move(w), mu, config);
}

Solution solve_from(const OCProblem& problem, Iterate w, double mu, const SolverConfig& config) {
  config.validate();
  const auto start = std::chrono::steady_clock::now();
  const Variant variant = config.variant;
  const bool constrained = problem.l > 0;

  StepFilter filter(config.line_search.filter_gamma_h, config.line_search.filter_gamma_f);
  double gamma = 0.0;

  BackwardPassOptions step_options;
  step_options.second_order_dynamics = !config.ilqr_mode;
  BackwardPassOptions diag_options = step_options;
  diag_options.factorization = Factorization::kAllowIndefinite;
  diag_options.compute_min_eigenvalue = true;

  Solution sol;
  CostateSweep adjoint;
  Residual F;
  int iteration = 0;
  auto elapsed = [&] { return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count(); };

  while (true) {
    adjoint = costate_sweep(problem, w, mu, variant);
    F = residual_F(adjoint, variant);
    const double J = objective(problem, w);

    if (constrained && mu > config.mu_min && F.inf_norm < config.mu_accept_factor * mu) {
      MuEvent event;
      event.iteration = iteration;
      event.mu = mu;
      event.F_inf = F.inf_norm;
      if (config.check_kkt_at_mu_events) {
        event.kkt =
            check_perturbed_kkt(problem, w, adjoint.multipliers, mu, 10.0 * config.mu_accept_factor * mu, variant);
      }
      sol.mu_events.push_back(event);
      mu = std::max(update_mu(mu, config.kappa), config.mu_min);
      filter.reset();
      continue;
    }

    IterationRecord record;
    record.iteration = iteration;
    record.objective = J;
    record.optimality_error = optimality_error_of(config, J);
    record.mu = mu;
    record.F_inf = F.inf_norm;

    const bool converged = mu <= config.mu_min && F.inf_norm <= config.f_tol;
    if (converged || iteration >= config.max_iterations) {
      sol.status = converged ? SolveStatus::kConverged : SolveStatus::kMaxIterations;
      if (config.trace_min_eig) {
        record.min_eig = backward_pass(problem, w, mu, 0.0, variant, diag_options).diagnostics.min_eigenvalue;
      }
      record.gamma_reg = gamma;
      record.wall_time = elapsed();
      sol.trace.push_back(record);
      break;
    }

    // Step gains, escalating the regularization until the factorization succeeds.
    std::vector<StageGains> gains;
    bool have_gains = false;
    if (config.trace_min_eig) {
      BackwardPassResult diag = backward_pass(problem, w, mu, 0.0, variant, diag_options);
      record.min_eig = diag.diagnostics.min_eigenvalue;
      if (gamma == 0.0 && diag.diagnostics.positive_definite) {
        gains = std::move(diag.gains);
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
        gains = backward_pass(problem, w, mu, gamma, variant, step_options).gains;
        have_gains = true;
      } catch (const NotPositiveDefiniteError&) {
        gamma = increase_gamma(gamma);
      }
    }
    record.gamma_reg = gamma;

    if (!numerical_failure) {
      std::optional<StepCandidate> candidate =
          forward_pass(problem, w, gains, filter, mu, variant, config.line_search);
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
    if (numerical_failure) {
      adjoint = costate_sweep(problem, w, mu, variant);
      F = residual_F(adjoint, variant);
      sol.status = SolveStatus::kNumericalFailure;
      break;
    }
  }

  sol.iterations = iteration;
  sol.mu = mu;
  sol.F_inf = F.inf_norm;
  sol.objective = objective(problem, w);
  sol.multipliers = std::move(adjoint.multipliers);
  sol.gains = backward_pass(problem, w, mu, 0.0, variant, diag_options).gains;
  sol.iterate = std::move(w);
  return sol;
}

}  // namespace ipddp
