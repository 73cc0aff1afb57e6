#include "ipddp/forward_pass.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace ipddp {

namespace {
constexpr double kRoundOff = 10.0 * std::numeric_limits<double>::epsilon();
}  // namespace

StepMetrics evaluate_metrics(const OCProblem& problem, const Iterate& w, double mu, Variant variant) {
  StepMetrics metrics;
  metrics.objective = objective(problem, w);
  metrics.merit = metrics.objective;
  if (problem.l == 0) return metrics;

  double log_sum = 0.0;
  double h = 0.0;
  for (int t = 0; t < w.horizon(); ++t) {
    const Vector c = problem.constraints(w.x[t], w.u[t]);
    if (variant == Variant::kFeasible) {
      log_sum += (-c).array().log().sum();
      h += (w.s[t].cwiseProduct(c).array() + mu).abs().sum();
    } else {
      log_sum += w.y[t].array().log().sum();
      h += (c + w.y[t]).cwiseAbs().sum();
      h += (w.s[t].cwiseProduct(w.y[t]).array() - mu).abs().sum();
    }
  }
  metrics.merit -= mu * log_sum;
  metrics.infeasibility = h;
  return metrics;
}

bool StepFilter::acceptable(double h, double merit) const {
  // Merit comparisons tolerate round-off in the entry's own value.
  return std::all_of(entries_.begin(), entries_.end(), [&](const FilterEntry& e) {
    return h <= (1.0 - gamma_h_) * e.infeasibility ||
           merit <= e.merit - gamma_f_ * h + kRoundOff * std::abs(e.merit);
  });
}

void StepFilter::insert(double h, double merit) {
  std::erase_if(entries_, [&](const FilterEntry& e) { return h <= e.infeasibility && merit <= e.merit; });
  entries_.push_back({h, merit});
}

bool filter_accept(StepFilter& filter, const StepMetrics& candidate) {
  if (!filter.acceptable(candidate.infeasibility, candidate.merit)) return false;
  filter.insert(candidate.infeasibility, candidate.merit);
  return true;
}

std::optional<Iterate> apply_gains(const OCProblem& problem, const Iterate& w, std::span<const StageGains> gains,
                                   double step, Variant variant) {
  const int N = w.horizon();
  const bool has_duals = problem.l > 0;
  const bool has_slacks = has_duals && variant == Variant::kInfeasible;

  Iterate next;
  next.x.resize(N + 1);
  next.u.resize(N);
  if (has_duals) next.s.resize(N);
  if (has_slacks) next.y.resize(N);
  next.x[0] = w.x[0];

  for (int t = 0; t < N; ++t) {
    const StageGains& g = gains[t];
    const Vector dx = next.x[t] - w.x[t];
    next.u[t] = w.u[t] + step * g.alpha + g.beta * dx;
    if (has_duals) next.s[t] = w.s[t] + step * g.eta + g.theta * dx;
    if (has_slacks) next.y[t] = w.y[t] + step * g.chi + g.zeta * dx;
    next.x[t + 1] = problem.dynamics(next.x[t], next.u[t]);
    if (!next.x[t + 1].allFinite() || !next.u[t].allFinite()) return std::nullopt;
  }
  return next;
}

double fraction_to_boundary(double mu) { return std::max(0.95, 1.0 - mu); }

bool positivity_guard(const OCProblem& problem, const Iterate& candidate, const Iterate& current, Variant variant,
                      double tau) {
  if (problem.l == 0) return true;
  const double keep = 1.0 - tau;
  for (int t = 0; t < current.horizon(); ++t) {
    if ((candidate.s[t].array() < keep * current.s[t].array()).any()) return false;
    if (variant == Variant::kFeasible) {
      const Vector c_new = problem.constraints(candidate.x[t], candidate.u[t]);
      const Vector c_old = problem.constraints(current.x[t], current.u[t]);
      if (!c_new.allFinite() || (c_new.array() > keep * c_old.array()).any()) return false;
    } else {
      if ((candidate.y[t].array() < keep * current.y[t].array()).any()) return false;
    }
  }
  return true;
}

std::optional<StepCandidate> forward_pass(const OCProblem& problem, const Iterate& w,
                                          std::span<const StageGains> gains, StepFilter& filter, double mu,
                                          Variant variant, const LineSearchConfig& config) {
  const double tau = fraction_to_boundary(mu);
  double current_merit = std::numeric_limits<double>::infinity();
  if (config.acceptance == Acceptance::kSufficientDecrease) {
    current_merit = evaluate_metrics(problem, w, mu, variant).merit;
  }

  double step = 1.0;
  for (int k = 0; k <= config.max_halvings; ++k, step *= 0.5) {
    std::optional<Iterate> trial = apply_gains(problem, w, gains, step, variant);
    if (!trial || !positivity_guard(problem, *trial, w, variant, tau)) continue;

    StepMetrics metrics;
    try {
      metrics = evaluate_metrics(problem, *trial, mu, variant);
    } catch (const DomainError&) {
      continue;
    }
    if (!std::isfinite(metrics.merit) || !std::isfinite(metrics.infeasibility)) continue;

    bool accepted = false;
    if (config.acceptance == Acceptance::kFilter) {
      accepted = filter_accept(filter, metrics);
    } else {
      accepted = metrics.merit <= current_merit - config.decrease_coefficient * step * config.expected_decrease +
                                      kRoundOff * std::abs(current_merit);
    }
    if (accepted) return StepCandidate{step, std::move(*trial), metrics};
  }
  return std::nullopt;
}

}  // namespace ipddp
