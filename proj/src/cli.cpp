#include "ipddp/cli.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <set>

#include "CLI11.hpp"
#include "ipddp/benchmarks.hpp"
#include "ipddp/trace_io.hpp"
#include "json.hpp"

namespace ipddp {

namespace {

using nlohmann::json;

struct RunOptions {
  std::string problem = "pendulum";
  std::string algorithm = "feasible-ipddp";
  int trials = 40;
  std::uint64_t seed = 0;
  std::optional<double> mu_init;
  std::optional<double> kappa;
  std::optional<int> max_iter;
  int jobs = 1;
  std::string out = "runs";
  bool ilqr = false;
  std::string config_file;
  std::string solution_file;
  double tol = 0.0;
};

void reject_unknown(const json& obj, const std::set<std::string>& allowed, const std::string& where) {
  if (!obj.is_object()) throw ConfigError(where + " must be an object");
  for (const auto& item : obj.items()) {
    if (!allowed.count(item.key())) throw ConfigError("unknown key '" + item.key() + "' in " + where);
  }
}

template <typename T>
void read_key(const json& obj, const char* key, T& target) {
  if (!obj.contains(key)) return;
  try {
    target = obj.at(key).get<T>();
  } catch (const json::exception& e) {
    throw ConfigError(std::string("bad value for '") + key + "': " + e.what());
  }
}

MuInitPolicy parse_mu_init(const json& value) {
  if (value.is_number()) return MuInitPolicy::fixed(value.get<double>());
  if (value.is_string() && value.get<std::string>() == "auto") return MuInitPolicy::automatic();
  if (value.is_object()) {
    reject_unknown(value, {"low", "high"}, "mu_init");
    MuInitPolicy p = MuInitPolicy::sampled(0.5, 1.0);
    read_key(value, "low", p.low);
    read_key(value, "high", p.high);
    return p;
  }
  throw ConfigError("mu_init must be a number, \"auto\" or {\"low\", \"high\"}");
}

// Applies the top-level keys of a config document to `run` and `spec` and
// returns its "solver" object (null when absent). Flags are applied afterwards.
json apply_config_file(const std::string& path, RunOptions& run, TrialSpec& spec) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config file " + path);
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::exception& e) {
    throw ConfigError("config file " + path + ": " + e.what());
  }
  reject_unknown(doc,
                 {"problem", "algorithm", "trials", "seed", "jobs", "out", "control_low", "control_high",
                  "success_threshold", "solver"},
                 "config");
  read_key(doc, "problem", run.problem);
  read_key(doc, "algorithm", run.algorithm);
  read_key(doc, "trials", run.trials);
  read_key(doc, "seed", run.seed);
  read_key(doc, "jobs", run.jobs);
  read_key(doc, "out", run.out);
  read_key(doc, "control_low", spec.control_low);
  read_key(doc, "control_high", spec.control_high);
  read_key(doc, "success_threshold", spec.success_threshold);
  return doc.contains("solver") ? doc.at("solver") : json();
}

// Overrides the benchmark defaults in `config` with the keys of a "solver" object.
void apply_solver_keys(const json& s, SolverConfig& config) {
  reject_unknown(s,
                 {"kappa", "mu_init", "mu_min", "f_tol", "mu_accept_factor", "max_iterations", "gamma_reg_max",
                  "ilqr_mode", "trace_min_eig", "check_kkt_at_mu_events", "reference_objective", "line_search"},
                 "solver");
  read_key(s, "kappa", config.kappa);
  if (s.contains("mu_init")) config.mu_init = parse_mu_init(s.at("mu_init"));
  read_key(s, "mu_min", config.mu_min);
  read_key(s, "f_tol", config.f_tol);
  read_key(s, "mu_accept_factor", config.mu_accept_factor);
  read_key(s, "max_iterations", config.max_iterations);
  read_key(s, "gamma_reg_max", config.gamma_reg_max);
  read_key(s, "ilqr_mode", config.ilqr_mode);
  read_key(s, "trace_min_eig", config.trace_min_eig);
  read_key(s, "check_kkt_at_mu_events", config.check_kkt_at_mu_events);
  if (s.contains("reference_objective")) {
    double v = 0.0;
    read_key(s, "reference_objective", v);
    config.reference_objective = v;
  }
  if (s.contains("line_search")) {
    const json& ls = s.at("line_search");
    reject_unknown(ls, {"max_halvings", "filter_gamma_h", "filter_gamma_f", "decrease_coefficient"}, "line_search");
    read_key(ls, "max_halvings", config.line_search.max_halvings);
    read_key(ls, "filter_gamma_h", config.line_search.filter_gamma_h);
    read_key(ls, "filter_gamma_f", config.line_search.filter_gamma_f);
    read_key(ls, "decrease_coefficient", config.line_search.decrease_coefficient);
  }
}

struct Resolved {
  ProblemId problem;
  Algorithm algorithm;
  SolverConfig config;
  TrialSpec spec;
};

Resolved resolve(RunOptions& run, const CLI::App& sub) {
  TrialSpec spec;
  json solver_keys;
  RunOptions flags = run;
  if (!run.config_file.empty()) {
    solver_keys = apply_config_file(run.config_file, run, spec);
    // Flags given on the command line win over the file.
    auto given = [&](const char* name) {
      const CLI::Option* opt = sub.get_option_no_throw(name);
      return opt != nullptr && opt->count() > 0;
    };
    if (given("--problem")) run.problem = flags.problem;
    if (given("--algorithm")) run.algorithm = flags.algorithm;
    if (given("--trials")) run.trials = flags.trials;
    if (given("--seed")) run.seed = flags.seed;
    if (given("--jobs")) run.jobs = flags.jobs;
    if (given("--out")) run.out = flags.out;
  }

  Resolved r;
  r.problem = parse_problem_id(run.problem);
  r.algorithm = parse_algorithm(run.algorithm);
  r.config = default_config(r.problem, r.algorithm);
  if (!solver_keys.is_null()) apply_solver_keys(solver_keys, r.config);
  if (run.mu_init) r.config.mu_init = MuInitPolicy::fixed(*run.mu_init);
  if (run.kappa) r.config.kappa = *run.kappa;
  if (run.max_iter) r.config.max_iterations = *run.max_iter;
  if (run.ilqr) r.config.ilqr_mode = true;
  r.config.seed = run.seed;
  r.config.validate();

  spec.problem = r.problem;
  spec.algorithm = r.algorithm;
  spec.trials = run.trials;
  spec.base_seed = run.seed;
  spec.jobs = run.jobs;
  spec.config = r.config;
  r.spec = spec;
  return r;
}

std::string stem(const Resolved& r) { return to_string(r.problem) + "_" + to_string(r.algorithm); }

int run_solve(RunOptions& run, const CLI::App& sub, std::ostream& out) {
  Resolved r = resolve(run, sub);
  const OCProblem problem = build_problem(r.problem);
  if (!r.config.reference_objective) {
    if (auto ref = reference_optimum(r.problem)) r.config.reference_objective = ref->J_star;
  }
  const auto controls =
      random_controls(problem.horizon, problem.m, r.spec.control_low, r.spec.control_high, run.seed);
  const Solution sol = run_algorithm(problem, r.algorithm, controls, r.config);

  const std::filesystem::path dir = run.out;
  write_trace_csv(dir / (stem(r) + "_solve.csv"), sol.trace);
  write_solution_json(dir / (stem(r) + "_solution.json"), to_string(r.problem), to_string(r.algorithm), sol);
  out << "status=" << to_string(sol.status) << " iterations=" << sol.iterations << " J=" << sol.objective
      << " mu=" << sol.mu << " F_inf=" << sol.F_inf << "\n";
  return sol.converged() ? kExitOk : kExitSolverFailure;
}

int run_bench(RunOptions& run, const CLI::App& sub, std::ostream& out) {
  Resolved r = resolve(run, sub);
  const auto results = run_trials(r.spec, std::filesystem::path(run.out));
  int successes = 0, errors = 0;
  for (const TrialResult& t : results) {
    successes += t.success ? 1 : 0;
    errors += t.status == "error" ? 1 : 0;
  }
  out << stem(r) << ": " << successes << "/" << results.size() << " successful trials";
  if (errors > 0) out << ", " << errors << " errored";
  out << "\n";
  return errors == 0 ? kExitOk : kExitSolverFailure;
}

int run_verify(RunOptions& run, std::ostream& out) {
  if (!std::filesystem::is_regular_file(run.solution_file)) {
    throw ConfigError("no solution file at " + run.solution_file);
  }
  const StoredSolution stored = read_solution_json(run.solution_file);
  const ProblemId id = parse_problem_id(stored.problem);
  const Algorithm algorithm = parse_algorithm(stored.algorithm);
  const OCProblem problem = build_problem(id);
  if (static_cast<int>(stored.iterate.u.size()) != problem.horizon ||
      static_cast<int>(stored.iterate.x.size()) != problem.horizon + 1 ||
      static_cast<int>(stored.multipliers.lambda.size()) != problem.horizon + 1) {
    throw ConfigError("stored solution does not match the " + stored.problem + " horizon");
  }

  const Variant variant =
      (algorithm == Algorithm::kInfeasibleIPDDP || algorithm == Algorithm::kRelaxedBarrier) ? Variant::kInfeasible
                                                                                           : Variant::kFeasible;
  const double tol = run.tol > 0.0 ? run.tol : 10.0 * SolverConfig{}.f_tol;
  const KKTReport kkt = check_perturbed_kkt(problem, stored.iterate, stored.multipliers, stored.mu, tol, variant);
  out << "kkt: " << (kkt.passed ? "pass" : "fail") << " grad_x=" << kkt.grad_x_inf << " grad_u=" << kkt.grad_u_inf
      << " dynamics=" << kkt.dynamics_inf << " complementarity=" << kkt.complementarity_inf
      << " max_c=" << kkt.max_constraint << " min_s=" << kkt.min_dual << "\n";

  bool derivatives_ok = true;
  double worst = 0.0;
  const int stride = std::max(1, problem.horizon / 100);
  for (int t = 0; t < problem.horizon; t += stride) {
    const DerivativeCheckReport rep = finite_diff_check(problem, stored.iterate.x[t], stored.iterate.u[t], 1e-4);
    derivatives_ok = derivatives_ok && rep.passed;
    worst = std::max(worst, rep.max_rel_error);
  }
  out << "derivatives: " << (derivatives_ok ? "pass" : "fail") << " max_rel_error=" << worst << "\n";
  return kkt.passed && derivatives_ok ? kExitOk : kExitSolverFailure;
}

void add_run_flags(CLI::App* sub, RunOptions& run) {
  sub->add_option("--problem", run.problem, "pendulum | car | unicycle");
  sub->add_option("--algorithm", run.algorithm, "feasible-ipddp | infeasible-ipddp | barrier | relaxed-barrier");
  sub->add_option("--seed", run.seed, "random seed (trial i uses seed + i)");
  sub->add_option("--mu-init", run.mu_init, "explicit initial mu");
  sub->add_option("--kappa", run.kappa, "mu reduction factor");
  sub->add_option("--max-iter", run.max_iter, "iteration limit");
  sub->add_option("--out", run.out, "output directory");
  sub->add_flag("--ilqr", run.ilqr, "drop second-order dynamics terms");
  sub->add_option("--config", run.config_file, "JSON config file; flags override it");
}

}  // namespace

int run_command(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Interior-point DDP trajectory optimization"};
  app.require_subcommand(1);
  RunOptions run;

  CLI::App* solve_cmd = app.add_subcommand("solve", "run one trajectory optimization");
  add_run_flags(solve_cmd, run);
  CLI::App* bench_cmd = app.add_subcommand("bench", "run seeded trials");
  add_run_flags(bench_cmd, run);
  bench_cmd->add_option("--trials", run.trials, "number of trials");
  bench_cmd->add_option("--jobs", run.jobs, "concurrent trials");
  CLI::App* verify_cmd = app.add_subcommand("verify", "check a stored solution");
  verify_cmd->add_option("solution", run.solution_file, "solution JSON written by solve")->required();
  verify_cmd->add_option("--tol", run.tol, "KKT tolerance (default 1e-6)");

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) {
      out << app.help();
      return kExitOk;
    }
    err << "error: " << e.what() << "\n";
    return kExitConfigError;
  }

  try {
    if (solve_cmd->parsed()) return run_solve(run, *solve_cmd, out);
    if (bench_cmd->parsed()) return run_bench(run, *bench_cmd, out);
    return run_verify(run, out);
  } catch (const ConfigError& e) {
    err << "configuration error: " << e.what() << "\n";
    return kExitConfigError;
  } catch (const ProblemError& e) {
    err << "configuration error: " << e.what() << "\n";
    return kExitConfigError;
  } catch (const std::exception& e) {
    err << "solver failure: " << e.what() << "\n";
    return kExitSolverFailure;
  }
}

int run_command(int argc, const char* const* argv) {
  std::vector<std::string> args;
  for (int i = 1; i < argc; ++i) args.emplace_back(argv[i]);
  return run_command(args, std::cout, std::cerr);
}

}  // namespace ipddp
