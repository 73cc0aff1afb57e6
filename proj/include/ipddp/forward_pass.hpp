#pragma once

#include <optional>
#include <span>
#include <vector>

#include "ipddp/backward_pass.hpp"
#include "ipddp/problem.hpp"
#include "ipddp/trajectory.hpp"

namespace ipddp {

/// Measures used to rank trial points.
struct StepMetrics {
  double objective = 0.0;      // J(x, u)
  double merit = 0.0;          // barrier objective
  double infeasibility = 0.0;  // filter infeasibility measure h
};

/// Feasible: merit = J - mu sum log(-c), h = sum |S c + mu|_1.
/// Infeasible: merit = J - mu sum log(y), h = sum |c + y|_1 + sum |S y - mu|_1.
/// With l == 0 the merit is J and h is zero.
StepMetrics evaluate_metrics(const OCProblem& problem, const Iterate& w, double mu, Variant variant);

struct FilterEntry {
  double infeasibility;
  double merit;
};

/// Pareto set of (h, merit) pairs. A trial point is acceptable if, against
/// every entry, it reduces h by the fraction gamma_h or the merit by gamma_f * h.
class StepFilter {
 public:
  explicit StepFilter(double gamma_h = 1e-5, double gamma_f = 1e-5) : gamma_h_(gamma_h), gamma_f_(gamma_f) {}

  bool acceptable(double h, double merit) const;
  /// Adds the pair and drops the entries it dominates.
  void insert(double h, double merit);
  void reset() { entries_.clear(); }

  std::span<const FilterEntry> entries() const { return entries_; }
  double gamma_h() const { return gamma_h_; }
  double gamma_f() const { return gamma_f_; }

 private:
  double gamma_h_;
  double gamma_f_;
  std::vector<FilterEntry> entries_;
};

/// Accepts and records the candidate if the filter allows it.
bool filter_accept(StepFilter& filter, const StepMetrics& candidate);

/// Rolls out u+ = u + step alpha + beta (x+ - x) (and the dual/slack updates).
/// Only the feedforward terms are scaled by `step`. Returns nullopt if the
/// rollout produces a non-finite value.
std::optional<Iterate> apply_gains(const OCProblem& problem, const Iterate& w, std::span<const StageGains> gains,
                                   double step, Variant variant);

/// Fraction-to-boundary parameter max(0.95, 1 - mu).
double fraction_to_boundary(double mu);

/// Fraction-to-boundary test of `candidate` against `current`.
bool positivity_guard(const OCProblem& problem, const Iterate& candidate, const Iterate& current, Variant variant,
                      double tau);

enum class Acceptance {
  kFilter,
  /// Merit must drop by at least decrease_coefficient * step * expected_decrease
  /// (unconstrained barrier baselines), up to round-off in the current merit.
  kSufficientDecrease,
};

struct LineSearchConfig {
  int max_halvings = 10;  // steps 1, 1/2, ..., 2^-max_halvings
  double filter_gamma_h = 1e-5;
  double filter_gamma_f = 1e-5;
  double decrease_coefficient = 1e-8;
  double expected_decrease = 1.0;  // predicted merit decrease of a unit step, scales the test above
  Acceptance acceptance = Acceptance::kFilter;
};

struct StepCandidate {
  double step = 0.0;
  Iterate iterate;
  StepMetrics metrics;
};

/// Backtracking over the halving grid. Returns the first candidate that passes
/// positivity_guard and the acceptance test (the filter is updated on
/// success), or nullopt when the grid is exhausted.
std::optional<StepCandidate> forward_pass(const OCProblem& problem, const Iterate& w,
                                          std::span<const StageGains> gains, StepFilter& filter, double mu,
                                          Variant variant, const LineSearchConfig& config = {});

}  // namespace ipddp
