#include "ipddp/benchmarks.hpp"

namespace ipddp {

// Regenerate with `ipddp_cli bench --problem <p> --algorithm barrier --trials 1 --seed 0`
// and copy final_J from the summary. The tests rerun that command's solve.
std::optional<ReferenceOptimum> reference_optimum(ProblemId id) {
  switch (id) {
    case ProblemId::kPendulum:
      return ReferenceOptimum{id, 61.38795708048106,
                              "log-barrier DDP, trial seed 0, default config, mu_min 1e-8, 152 iterations "
                              "(2026-10-15)"};
    case ProblemId::kCar:
      return ReferenceOptimum{id, 6.075341752447255,
                              "log-barrier DDP, trial seed 0, default config, mu_min 1e-8, 174 iterations "
                              "(2026-10-15)"};
    case ProblemId::kUnicycle:
      // No run reaches mu_min; see the README.
      return std::nullopt;
  }
  return std::nullopt;
}

}  // namespace ipddp
