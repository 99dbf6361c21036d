#pragma once

// Bookkeeping shared by every iteration loop: stop rule, thinning, running sums
// and the Fejer ledgers against an optional reference solution.

#include <optional>
#include <span>
#include <vector>

#include "opsplit/iteration.hpp"

namespace opsplit::detail {

struct StepData {
  std::size_t index;
  const Point& x;
  const Point& next;
  double residual;
  double lambda;
  double alpha;
  double error_norm;
  double error_bound;
  std::span<const double> factor_errors;
  std::optional<double> objective;
};

class TraceBuilder {
 public:
  TraceBuilder(const StopRule& stop, const RunOptions& options, const Point& x0);

  std::optional<StopReason> should_stop(std::size_t n, double residual, const Point& x) const;

  void add(const StepData& step);
  void annotate(std::string note);

  IterationTrace& trace() noexcept { return trace_; }
  const std::optional<Point>& reference() const noexcept { return options_.reference; }

  IterationTrace finish(Point final_iterate, double final_residual, StopReason reason);

 private:
  const StopRule& stop_;
  const RunOptions& options_;
  IterationTrace trace_;
  double ledger_scale_ = 1.0;
  std::size_t steps_ = 0;

  // Per-step ledger data, kept only with a reference solution.
  std::vector<double> dist_;          // ||x_n - x||, n = 0..iterations
  std::vector<double> decrement_;     // l_n (1/a_n - l_n) r_n^2
  std::vector<double> perturbation_;  // l_n ||e_n||
};

}  // namespace opsplit::detail
