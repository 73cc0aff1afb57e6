#pragma once

#include <filesystem>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "ipddp/benchmarks.hpp"
#include "ipddp/solver.hpp"

namespace ipddp {

/// Header of every trace file.
inline constexpr const char* kTraceHeader = "iter,J,E_J,mu,F_inf,step,gamma_reg,min_eig";

void write_trace_csv(std::ostream& out, std::span<const IterationRecord> trace);

/// Writes to a temporary sibling and renames it into place.
void write_trace_csv(const std::filesystem::path& path, std::span<const IterationRecord> trace);

/// Parses a file written by write_trace_csv. Wall time is not stored.
std::vector<IterationRecord> read_trace_csv(const std::filesystem::path& path);

void write_summary_json(const std::filesystem::path& path, const TrialSpec& spec,
                        std::span<const TrialResult> results);

struct StoredSolution {
  std::string problem;
  std::string algorithm;
  double mu = 0.0;
  Iterate iterate;
  Multipliers multipliers;
};

void write_solution_json(const std::filesystem::path& path, const std::string& problem, const std::string& algorithm,
                         const Solution& solution);
StoredSolution read_solution_json(const std::filesystem::path& path);

/// Writes `contents` to `path` through a temporary file and a rename.
void write_file_atomic(const std::filesystem::path& path, const std::string& contents);

}  // namespace ipddp
