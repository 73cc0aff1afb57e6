#pragma once

#include <span>

#include "ipddp/problem.hpp"
#include "ipddp/solver.hpp"

namespace ipddp {

struct PenaltyValue {
  double value;
  double d1;  // first derivative
  double d2;  // second derivative
};

/// Relaxed log barrier: -log z for z > delta, otherwise the quadratic
/// extension 0.5 (((z - 2 delta) / delta)^2 - 1) - log delta, which is C^2 at z = delta.
PenaltyValue relaxed_penalty(double z, double delta);

/// -log z; throws DomainError for z <= 0.
PenaltyValue log_penalty(double z);

enum class BarrierKind { kStrict, kRelaxed };

/// Unconstrained problem (l = 0) with stage cost q(x, u) + mu sum_j beta(-c_j(x, u)),
/// where beta is the strict or relaxed barrier. Derivatives are assembled by
/// the chain rule from the wrapped callbacks. The strict variant throws
/// DomainError when evaluated at c_j >= 0.
OCProblem barrier_transform(const OCProblem& problem, double mu, BarrierKind kind, double delta);

/// Inner iterations allowed at one mu before the reduction is forced.
inline constexpr int kBarrierInnerIterationCap = 200;

/// Log-barrier DDP: outer loop over mu with the same initialization and update
/// rules as the interior-point solver; mu is reduced once the gradient of the
/// penalized objective drops below mu_accept_factor * mu. The relaxed variant
/// tracks delta = mu.
Solution solve_barrier_ddp(const OCProblem& problem, std::span<const Vector> initial_controls,
                           const SolverConfig& config, BarrierKind kind);

}  // namespace ipddp
