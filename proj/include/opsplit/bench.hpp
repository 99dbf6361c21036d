#pragma once

// Runs problem specs: builds the problem, validates every schedule index up front,
// dispatches to the iteration or splitting engine and exports the trace.

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "opsplit/iteration.hpp"
#include "opsplit/problem_spec.hpp"

namespace opsplit {

struct RunReport {
  std::string name;
  std::string kind;
  std::uint64_t seed = 0;
  std::size_t iterations = 0;
  double final_residual = 0.0;
  std::string stop_reason;
  double wall_time_s = 0.0;
  double running_sum = 0.0;
  double error_sum = 0.0;
  double residual_square_sum = 0.0;
  std::optional<double> cocoercive_sum;
  std::vector<double> factor_error_sums;
  std::vector<double> factor_displacement_sums;
  std::size_t fejer_violations = 0;
  std::size_t descent_violations = 0;
  std::size_t error_bound_violations = 0;
  std::optional<double> nu;
  std::optional<double> reference_distance;
  std::vector<double> set_distances;
  std::optional<double> objective;
  std::vector<double> final_iterate;
  std::vector<std::string> annotations;
  bool converged = false;
  std::vector<std::string> acceptance_failures;

  bool passed() const noexcept { return converged && acceptance_failures.empty(); }
};

/// Every field is emitted; absent values are null.
nlohmann::json to_json(const RunReport& r);

struct RunResult {
  RunReport report;
  IterationTrace trace;
};

/// Runs the spec without writing files. Throws ValidationError / ScheduleViolation on
/// invalid specs (before iterating) and NumericalError on non-finite state.
RunResult execute_spec(const ProblemSpec& spec);

/// OPSPLIT_TRACE_DIR when set, otherwise spec.output.trace_dir.
std::filesystem::path trace_directory(const ProblemSpec& spec);

/// Writes <dir>/<name>.trace.csv, .trace.json (per the output block) and .report.json.
void export_run(const ProblemSpec& spec, const RunResult& result, const std::filesystem::path& dir);

/// execute_spec followed by export_run into trace_directory(spec).
RunReport run_spec(const ProblemSpec& spec);

/// One-line human summary.
std::string summary_line(const RunReport& r);

struct ComparisonSide {
  std::string label;
  std::string lambda_rule;
  std::size_t iterations = 0;
  bool reached = false;
  double final_residual = 0.0;
};

struct ComparisonReport {
  std::string name;
  std::string kind;
  double residual_target = 0.0;
  ComparisonSide baseline;
  ComparisonSide extended;
  std::optional<double> ratio;  ///< baseline / extended iterations
};

nlohmann::json to_json(const ComparisonReport& r);

/// Splitting kinds: lambda = 1 against the upper end of the range.
/// Feasibility with strings: the cap from the legacy constant against the cap from the sharp one.
ComparisonReport compare_relaxation(const ProblemSpec& spec);

/// The shipped fixture library.
std::vector<ProblemSpec> fixture_specs();

}  // namespace opsplit
