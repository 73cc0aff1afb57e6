#include "ipddp/benchmarks.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <numbers>
#include <thread>

#include "ipddp/barrier.hpp"
#include "ipddp/trace_io.hpp"

namespace ipddp {

namespace {

Matrix zeros(int rows, int cols) { return Matrix::Zero(rows, cols); }

std::vector<Matrix> zero_tensor(int count, int rows, int cols) {
  return std::vector<Matrix>(count, Matrix::Zero(rows, cols));
}

}  // namespace

std::string to_string(ProblemId id) {
  switch (id) {
    case ProblemId::kPendulum:
      return "pendulum";
    case ProblemId::kCar:
      return "car";
    case ProblemId::kUnicycle:
      return "unicycle";
  }
  return "unknown";
}

std::string to_string(Algorithm algorithm) {
  switch (algorithm) {
    case Algorithm::kFeasibleIPDDP:
      return "feasible-ipddp";
    case Algorithm::kInfeasibleIPDDP:
      return "infeasible-ipddp";
    case Algorithm::kBarrier:
      return "barrier";
    case Algorithm::kRelaxedBarrier:
      return "relaxed-barrier";
  }
  return "unknown";
}

ProblemId parse_problem_id(std::string_view name) {
  for (ProblemId id : {ProblemId::kPendulum, ProblemId::kCar, ProblemId::kUnicycle}) {
    if (name == to_string(id)) return id;
  }
  throw ConfigError("unknown problem '" + std::string(name) + "' (expected pendulum, car or unicycle)");
}

Algorithm parse_algorithm(std::string_view name) {
  for (Algorithm a : {Algorithm::kFeasibleIPDDP, Algorithm::kInfeasibleIPDDP, Algorithm::kBarrier,
                      Algorithm::kRelaxedBarrier}) {
    if (name == to_string(a)) return a;
  }
  throw ConfigError("unknown algorithm '" + std::string(name) +
                    "' (expected feasible-ipddp, infeasible-ipddp, barrier or relaxed-barrier)");
}

double smooth_abs(double y, double z) { return std::sqrt(y * y + z * z) - z; }

OCProblem build_pendulum() {
  static constexpr double h = 0.05;
  static constexpr double u_max = 0.25;
  OCProblem P;
  P.name = "pendulum";
  P.n = 2;
  P.m = 1;
  P.l = 2;
  P.horizon = 500;
  P.x0 = Vector(2);
  P.x0 << -std::numbers::pi, 0.0;

  P.dynamics = [](const Vector& x, const Vector& u) {
    Vector next(2);
    next << x(0) + h * x(1), x(1) + h * std::sin(x(0)) + h * u(0);
    return next;
  };
  P.dynamics_derivatives = [](const Vector& x, const Vector&, bool second_order) {
    DynamicsDerivatives d;
    d.fx = Matrix(2, 2);
    d.fx << 1.0, h, h * std::cos(x(0)), 1.0;
    d.fu = Matrix(2, 1);
    d.fu << 0.0, h;
    if (second_order) {
      d.fxx = zero_tensor(2, 2, 2);
      d.fxx[1](0, 0) = -h * std::sin(x(0));
      d.fuu = zero_tensor(2, 1, 1);
      d.fxu = zero_tensor(2, 2, 1);
    }
    return d;
  };

  P.stage_cost = [](const Vector& x, const Vector& u) { return 0.025 * (x.squaredNorm() + u.squaredNorm()); };
  P.stage_cost_derivatives = [](const Vector& x, const Vector& u) {
    CostDerivatives d;
    d.qx = 0.05 * x;
    d.qu = 0.05 * u;
    d.qxx = 0.05 * Matrix::Identity(2, 2);
    d.quu = 0.05 * Matrix::Identity(1, 1);
    d.qxu = zeros(2, 1);
    return d;
  };
  P.terminal_cost = [](const Vector& x) { return 5.0 * x.squaredNorm(); };
  P.terminal_cost_derivatives = [](const Vector& x) {
    return TerminalDerivatives{10.0 * x, 10.0 * Matrix::Identity(2, 2)};
  };

  P.constraints = [](const Vector&, const Vector& u) {
    Vector c(2);
    c << u(0) - u_max, -u(0) - u_max;
    return c;
  };
  P.constraint_derivatives = [](const Vector&, const Vector&, bool second_order) {
    ConstraintDerivatives d;
    d.cx = zeros(2, 2);
    d.cu = Matrix(2, 1);
    d.cu << 1.0, -1.0;
    if (second_order) {
      d.cxx = zero_tensor(2, 2, 2);
      d.cuu = zero_tensor(2, 1, 1);
      d.cxu = zero_tensor(2, 2, 1);
    }
    return d;
  };
  return P;
}

namespace {

constexpr double kCarStep = 0.03;
constexpr double kCarAxle = 2.0;

// Rear-axle displacement b(v, w) = d + h v cos w - sqrt(d^2 - h^2 v^2 sin^2 w) and its derivatives.
struct AxleTerm {
  double b, b_v, b_w, b_vv, b_vw, b_ww;
};

AxleTerm axle_term(double v, double w) {
  const double h = kCarStep, d = kCarAxle;
  const double S = std::sin(w), C = std::cos(w);
  const double sq = std::sqrt(d * d - h * h * v * v * S * S);
  const double sq3 = sq * sq * sq;
  const double P = h * h * v * v * S * C;
  AxleTerm a;
  a.b = d + h * v * C - sq;
  a.b_v = h * C + h * h * v * S * S / sq;
  a.b_w = -h * v * S + P / sq;
  a.b_vv = h * h * S * S * d * d / sq3;
  a.b_vw = -h * S + 2.0 * h * h * v * S * C / sq + h * h * v * S * S * P / sq3;
  a.b_ww = -h * v * C + h * h * v * v * std::cos(2.0 * w) / sq + P * P / sq3;
  return a;
}

double smooth_abs_d1(double y, double z) { return y / std::sqrt(y * y + z * z); }

double smooth_abs_d2(double y, double z) {
  const double r2 = y * y + z * z;
  return z * z / (r2 * std::sqrt(r2));
}

}  // namespace

OCProblem build_car_parking() {
  static constexpr double h = kCarStep;
  static constexpr double d = kCarAxle;
  OCProblem P;
  P.name = "car";
  P.n = 4;
  P.m = 2;
  P.l = 4;
  P.horizon = 500;
  P.x0 = Vector(4);
  P.x0 << 1.0, 1.0, 1.5 * std::numbers::pi, 0.0;

  // x = (r_x, r_y, phi, v), u = (w, a).
  P.dynamics = [](const Vector& x, const Vector& u) {
    const AxleTerm a = axle_term(x(3), u(0));
    Vector next(4);
    next << x(0) + a.b * std::cos(x(2)), x(1) + a.b * std::sin(x(2)),
        x(2) + std::asin(h * x(3) * std::sin(u(0)) / d), x(3) + h * u(1);
    return next;
  };
  P.dynamics_derivatives = [](const Vector& x, const Vector& u, bool second_order) {
    const double phi = x(2), v = x(3), w = u(0);
    const double cp = std::cos(phi), sp = std::sin(phi);
    const AxleTerm a = axle_term(v, w);
    // Heading increment asin(z), z = (h / d) v sin w.
    const double k = h / d;
    const double z = k * v * std::sin(w);
    const double z_v = k * std::sin(w), z_w = k * v * std::cos(w);
    const double z_vw = k * std::cos(w), z_ww = -k * v * std::sin(w);
    const double a1 = 1.0 / std::sqrt(1.0 - z * z);
    const double a2 = z * a1 * a1 * a1;

    DynamicsDerivatives dd;
    dd.fx = Matrix::Identity(4, 4);
    dd.fx(0, 2) = -a.b * sp;
    dd.fx(0, 3) = a.b_v * cp;
    dd.fx(1, 2) = a.b * cp;
    dd.fx(1, 3) = a.b_v * sp;
    dd.fx(2, 3) = a1 * z_v;
    dd.fu = zeros(4, 2);
    dd.fu(0, 0) = a.b_w * cp;
    dd.fu(1, 0) = a.b_w * sp;
    dd.fu(2, 0) = a1 * z_w;
    dd.fu(3, 1) = h;
    if (second_order) {
      dd.fxx = zero_tensor(4, 4, 4);
      dd.fuu = zero_tensor(4, 2, 2);
      dd.fxu = zero_tensor(4, 4, 2);

      dd.fxx[0](2, 2) = -a.b * cp;
      dd.fxx[0](2, 3) = dd.fxx[0](3, 2) = -a.b_v * sp;
      dd.fxx[0](3, 3) = a.b_vv * cp;
      dd.fxu[0](2, 0) = -a.b_w * sp;
      dd.fxu[0](3, 0) = a.b_vw * cp;
      dd.fuu[0](0, 0) = a.b_ww * cp;

      dd.fxx[1](2, 2) = -a.b * sp;
      dd.fxx[1](2, 3) = dd.fxx[1](3, 2) = a.b_v * cp;
      dd.fxx[1](3, 3) = a.b_vv * sp;
      dd.fxu[1](2, 0) = a.b_w * cp;
      dd.fxu[1](3, 0) = a.b_vw * sp;
      dd.fuu[1](0, 0) = a.b_ww * sp;

      dd.fxx[2](3, 3) = a2 * z_v * z_v;
      dd.fxu[2](3, 0) = a2 * z_v * z_w + a1 * z_vw;
      dd.fuu[2](0, 0) = a2 * z_w * z_w + a1 * z_ww;
    }
    return dd;
  };

  P.stage_cost = [](const Vector& x, const Vector& u) {
    return 0.01 * (smooth_abs(x(0), 0.1) + smooth_abs(x(1), 0.1) + u(0) * u(0) + 0.01 * u(1) * u(1));
  };
  P.stage_cost_derivatives = [](const Vector& x, const Vector& u) {
    CostDerivatives c;
    c.qx = Vector::Zero(4);
    c.qx(0) = 0.01 * smooth_abs_d1(x(0), 0.1);
    c.qx(1) = 0.01 * smooth_abs_d1(x(1), 0.1);
    c.qxx = zeros(4, 4);
    c.qxx(0, 0) = 0.01 * smooth_abs_d2(x(0), 0.1);
    c.qxx(1, 1) = 0.01 * smooth_abs_d2(x(1), 0.1);
    c.qu = Vector(2);
    c.qu << 0.02 * u(0), 0.0002 * u(1);
    c.quu = zeros(2, 2);
    c.quu(0, 0) = 0.02;
    c.quu(1, 1) = 0.0002;
    c.qxu = zeros(4, 2);
    return c;
  };

  static constexpr double kTerminalWidth[4] = {0.1, 0.1, 0.01, 0.1};
  P.terminal_cost = [](const Vector& x) {
    double value = 0.0;
    for (int i = 0; i < 4; ++i) value += smooth_abs(x(i), kTerminalWidth[i]);
    return value;
  };
  P.terminal_cost_derivatives = [](const Vector& x) {
    TerminalDerivatives t{Vector::Zero(4), zeros(4, 4)};
    for (int i = 0; i < 4; ++i) {
      t.px(i) = smooth_abs_d1(x(i), kTerminalWidth[i]);
      t.pxx(i, i) = smooth_abs_d2(x(i), kTerminalWidth[i]);
    }
    return t;
  };

  P.constraints = [](const Vector&, const Vector& u) {
    Vector c(4);
    c << u(0) - 0.5, -u(0) - 0.5, u(1) - 2.0, -u(1) - 2.0;
    return c;
  };
  P.constraint_derivatives = [](const Vector&, const Vector&, bool second_order) {
    ConstraintDerivatives c;
    c.cx = zeros(4, 4);
    c.cu = Matrix(4, 2);
    c.cu << 1.0, 0.0, -1.0, 0.0, 0.0, 1.0, 0.0, -1.0;
    if (second_order) {
      c.cxx = zero_tensor(4, 4, 4);
      c.cuu = zero_tensor(4, 2, 2);
      c.cxu = zero_tensor(4, 4, 2);
    }
    return c;
  };
  return P;
}

const std::vector<Obstacle>& unicycle_obstacles() {
  static const std::vector<Obstacle> obstacles = {{-5.5, -1.0, 1.0}, {-8.0, 0.2, 0.5}, {-2.5, 1.0, 1.5}};
  return obstacles;
}

OCProblem build_unicycle() {
  static constexpr double h = 0.1;
  static constexpr double v = 1.5;
  OCProblem P;
  P.name = "unicycle";
  P.n = 3;
  P.m = 1;
  P.l = 7;
  P.horizon = 600;
  P.x0 = Vector(3);
  P.x0 << -10.0, 0.0, 0.0;

  // x = (r_x, r_y, phi).
  P.dynamics = [](const Vector& x, const Vector& u) {
    Vector next(3);
    next << x(0) + h * v * std::cos(x(2)), x(1) + h * v * std::sin(x(2)), x(2) + h * u(0);
    return next;
  };
  P.dynamics_derivatives = [](const Vector& x, const Vector&, bool second_order) {
    DynamicsDerivatives d;
    d.fx = Matrix::Identity(3, 3);
    d.fx(0, 2) = -h * v * std::sin(x(2));
    d.fx(1, 2) = h * v * std::cos(x(2));
    d.fu = zeros(3, 1);
    d.fu(2, 0) = h;
    if (second_order) {
      d.fxx = zero_tensor(3, 3, 3);
      d.fxx[0](2, 2) = -h * v * std::cos(x(2));
      d.fxx[1](2, 2) = -h * v * std::sin(x(2));
      d.fuu = zero_tensor(3, 1, 1);
      d.fxu = zero_tensor(3, 3, 1);
    }
    return d;
  };

  P.stage_cost = [](const Vector& x, const Vector& u) {
    return 0.1 * (x.squaredNorm() + 0.1 * u.squaredNorm());
  };
  P.stage_cost_derivatives = [](const Vector& x, const Vector& u) {
    CostDerivatives d;
    d.qx = 0.2 * x;
    d.qu = 0.02 * u;
    d.qxx = 0.2 * Matrix::Identity(3, 3);
    d.quu = 0.02 * Matrix::Identity(1, 1);
    d.qxu = zeros(3, 1);
    return d;
  };
  P.terminal_cost = [](const Vector& x) { return 0.1 * x.squaredNorm(); };
  P.terminal_cost_derivatives = [](const Vector& x) {
    return TerminalDerivatives{0.2 * x, 0.2 * Matrix::Identity(3, 3)};
  };

  // Input and lane bounds, then R^2 - |r - o|^2 <= 0 for each obstacle.
  P.constraints = [](const Vector& x, const Vector& u) {
    Vector c(7);
    c(0) = u(0) - 1.5;
    c(1) = -u(0) - 1.5;
    c(2) = x(1) - 1.0;
    c(3) = -x(1) - 1.0;
    const auto& obs = unicycle_obstacles();
    for (int i = 0; i < 3; ++i) {
      const double dx = x(0) - obs[i].cx, dy = x(1) - obs[i].cy;
      c(4 + i) = obs[i].radius * obs[i].radius - (dx * dx + dy * dy);
    }
    return c;
  };
  P.constraint_derivatives = [](const Vector& x, const Vector&, bool second_order) {
    ConstraintDerivatives d;
    d.cx = zeros(7, 3);
    d.cu = zeros(7, 1);
    d.cu(0, 0) = 1.0;
    d.cu(1, 0) = -1.0;
    d.cx(2, 1) = 1.0;
    d.cx(3, 1) = -1.0;
    const auto& obs = unicycle_obstacles();
    for (int i = 0; i < 3; ++i) {
      d.cx(4 + i, 0) = -2.0 * (x(0) - obs[i].cx);
      d.cx(4 + i, 1) = -2.0 * (x(1) - obs[i].cy);
    }
    if (second_order) {
      d.cxx = zero_tensor(7, 3, 3);
      for (int i = 0; i < 3; ++i) {
        d.cxx[4 + i](0, 0) = -2.0;
        d.cxx[4 + i](1, 1) = -2.0;
      }
      d.cuu = zero_tensor(7, 1, 1);
      d.cxu = zero_tensor(7, 3, 1);
    }
    return d;
  };
  return P;
}

OCProblem build_problem(ProblemId id) {
  switch (id) {
    case ProblemId::kPendulum:
      return build_pendulum();
    case ProblemId::kCar:
      return build_car_parking();
    case ProblemId::kUnicycle:
      return build_unicycle();
  }
  throw ConfigError("unknown problem id");
}

double optimality_error(double J, double J_star) { return std::log10(std::max(J - J_star, 1e-16)); }

SolverConfig default_config(ProblemId id, Algorithm algorithm) {
  SolverConfig config;
  config.variant = algorithm == Algorithm::kInfeasibleIPDDP ? Variant::kInfeasible : Variant::kFeasible;
  if (id == ProblemId::kUnicycle) {
    config.mu_init = MuInitPolicy::sampled(0.5, 1.0);
    // f_xx V_x dominates Q_uu far from the solution and no gamma below the cap restores definiteness.
    config.ilqr_mode = true;
  }
  return config;
}

Solution run_algorithm(const OCProblem& problem, Algorithm algorithm, std::span<const Vector> controls,
                       const SolverConfig& config) {
  switch (algorithm) {
    case Algorithm::kFeasibleIPDDP: {
      SolverConfig c = config;
      c.variant = Variant::kFeasible;
      return solve(problem, controls, c);
    }
    case Algorithm::kInfeasibleIPDDP: {
      SolverConfig c = config;
      c.variant = Variant::kInfeasible;
      return solve(problem, controls, c);
    }
    case Algorithm::kBarrier:
      return solve_barrier_ddp(problem, controls, config, BarrierKind::kStrict);
    case Algorithm::kRelaxedBarrier:
      return solve_barrier_ddp(problem, controls, config, BarrierKind::kRelaxed);
  }
  throw ConfigError("unknown algorithm");
}

double max_constraint_violation(const OCProblem& problem, const Iterate& w) {
  double worst = 0.0;
  if (problem.l == 0) return worst;
  for (int t = 0; t < w.horizon(); ++t) {
    worst = std::max(worst, problem.constraints(w.x[t], w.u[t]).maxCoeff());
  }
  return worst;
}

void TrialSpec::validate() const {
  if (trials < 1) throw ConfigError("trial count must be >= 1");
  if (!(control_low < control_high)) throw ConfigError("control range must satisfy low < high");
  if (jobs < 1) throw ConfigError("jobs must be >= 1");
  config.validate();
}

TrialResult run_trial(const TrialSpec& spec, const OCProblem& problem, int trial) {
  TrialResult result;
  result.trial = trial;
  result.seed = spec.base_seed + static_cast<std::uint64_t>(trial);

  SolverConfig config = spec.config;
  config.seed = result.seed;
  if (!config.reference_objective) {
    if (auto ref = reference_optimum(spec.problem)) config.reference_objective = ref->J_star;
  }

  const std::vector<Vector> controls =
      random_controls(problem.horizon, problem.m, spec.control_low, spec.control_high, result.seed);
  try {
    result.solution = run_algorithm(problem, spec.algorithm, controls, config);
  } catch (const std::exception& e) {
    result.status = "error";
    result.error = e.what();
    return result;
  }

  const Solution& sol = result.solution;
  result.status = to_string(sol.status);
  result.iterations = sol.iterations;
  result.final_objective = sol.objective;
  result.final_mu = sol.mu;
  result.final_F_inf = sol.F_inf;
  result.max_constraint_violation = max_constraint_violation(problem, sol.iterate);
  if (config.reference_objective) {
    result.final_optimality_error = optimality_error(sol.objective, *config.reference_objective);
    for (const IterationRecord& r : sol.trace) {
      if (r.optimality_error && *r.optimality_error <= spec.success_threshold) {
        result.iterations_to_threshold = r.iteration;
        break;
      }
    }
    result.success = result.iterations_to_threshold.has_value();
  } else {
    result.success = sol.converged();
  }
  return result;
}

std::vector<TrialResult> run_trials(const TrialSpec& spec, const std::optional<std::filesystem::path>& out_dir) {
  spec.validate();
  const OCProblem problem = build_problem(spec.problem);
  validate(problem);

  std::vector<TrialResult> results(spec.trials);
  std::atomic<int> next{0};
  auto worker = [&] {
    for (int i = next++; i < spec.trials; i = next++) {
      results[i] = run_trial(spec, problem, i);
      if (out_dir) {
        const std::string file =
            to_string(spec.problem) + "_" + to_string(spec.algorithm) + "_trial" + std::to_string(i) + ".csv";
        write_trace_csv(*out_dir / file, results[i].solution.trace);
      }
    }
  };

  const int jobs = std::min(spec.jobs, spec.trials);
  if (jobs <= 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (int j = 0; j < jobs; ++j) pool.emplace_back(worker);
  }

  if (out_dir) {
    const std::string file = to_string(spec.problem) + "_" + to_string(spec.algorithm) + "_summary.json";
    write_summary_json(*out_dir / file, spec, results);
  }
  return results;
}

}  // namespace ipddp
