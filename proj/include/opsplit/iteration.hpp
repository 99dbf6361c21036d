#pragma once

// Inexact Krasnosel'skii-Mann iterations over averaged operators:
//
//   km_run        x+ = x + l_n (T_n x + e_n - x)
//   composed_run  x+ = x + l_n (T_1(T_2(... T_m x + e_m ...) + e_2) + e_1 - x)
//   string_run    x+ = x + l_n (T x - x),  T = sum_k w_k (string_k composed)
//
// Each run produces an IterationTrace with the summability and Fejer ledgers
// used to monitor the convergence conclusions at run time.

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "opsplit/calculus.hpp"
#include "opsplit/operators.hpp"

namespace opsplit {

/// A real sequence given by a closed-form rule.
///
///   constant  v
///   harmonic  scale / (n + 1)
///   table     values[n], repeating the last value past the end
///   cycle     values[n mod size]
class SequenceRule {
 public:
  enum class Kind { constant, harmonic, table, cycle };

  static SequenceRule constant(double value);
  static SequenceRule harmonic(double scale);
  static SequenceRule table(std::vector<double> values);
  static SequenceRule cycle(std::vector<double> values);

  double at(std::size_t n) const;
  /// True when a table is read past its end at index n.
  bool extrapolated(std::size_t n) const noexcept;
  /// Final value of eventually constant rules.
  std::optional<double> limit() const;

  Kind kind() const noexcept { return kind_; }
  const std::vector<double>& values() const noexcept { return values_; }
  double scale() const noexcept { return scale_; }

 private:
  SequenceRule(Kind kind, double scale, std::vector<double> values)
      : kind_(kind), scale_(scale), values_(std::move(values)) {}
  Kind kind_;
  double scale_;
  std::vector<double> values_;
};

enum class RelaxationMode {
  classical,  ///< lambda_n in ]0, 1/alpha_n[
  extended,   ///< lambda_n in [eps, (1-eps)(1+eps alpha_n)/alpha_n]
};

struct Schedule {
  SequenceRule relaxations;
  RelaxationMode mode = RelaxationMode::classical;
  std::optional<Epsilon> eps;  ///< required in extended mode

  static Schedule classical(SequenceRule lambdas);
  static Schedule extended(SequenceRule lambdas, Epsilon eps);
};

/// Relative slack applied to the closed (inclusive) upper bounds.
inline constexpr double kClosedBoundSlack = 1e-12;

/// Throws ScheduleViolation if lambda at index n is outside the range for alpha.
void check_relaxation(const Schedule& s, std::size_t n, double lambda, Alpha alpha);

/// Error vectors e_{slot,n}. Slots index the factors of a composition (0 = outermost).
class ErrorInjector {
 public:
  using Generator = std::function<Point(std::size_t n, std::size_t slot)>;
  using NormBound = std::function<double(std::size_t n)>;

  /// No errors; runs skip the inexact evaluation entirely.
  static ErrorInjector none();
  /// Seeded random directions with norm exactly scale * (n+1)^(-power) in every slot.
  static ErrorInjector decaying(std::size_t dimension, std::size_t slots, double scale,
                                double power, std::uint64_t seed);

  ErrorInjector(std::size_t slots, Generator generator, NormBound bound);

  bool active() const noexcept { return static_cast<bool>(generator_); }
  std::size_t slots() const noexcept { return slots_; }
  double declared_bound(std::size_t n) const { return bound_ ? bound_(n) : 0.0; }

  /// Generates e_{slot,n}, checking it against the declared bound.
  Point draw(std::size_t n, std::size_t slot, std::size_t dimension) const;

 private:
  ErrorInjector() = default;
  std::size_t slots_ = 0;
  Generator generator_;
  NormBound bound_;
};

struct StopRule {
  std::size_t max_iterations = 1000;
  double residual_tolerance = 0.0;
  std::optional<Point> target;
  double target_tolerance = 0.0;
};

struct RunOptions {
  /// A point of the solution set; enables the distance ledgers.
  std::optional<Point> reference;
  /// Sets whose distances are recorded (feasibility fixtures).
  std::vector<ConvexSet> sets;
  /// Record every k-th iteration; 0 selects 1 below 10^4 iterations and 10 above.
  std::size_t thinning = 0;
  bool store_iterates = false;
};

enum class StopReason { residual, target, max_iterations };

std::string_view to_string(StopReason r);

struct IterationRecord {
  std::size_t index = 0;
  double residual = 0.0;     ///< ||T_n x_n - x_n||, error free
  double lambda = 0.0;
  double alpha = 0.0;
  double error_norm = 0.0;   ///< ||e_n|| of the composite error
  double error_bound = 0.0;  ///< sum_i ||e_{i,n}||
  std::optional<double> dist_to_ref;
  double running_sum = 0.0;  ///< sum_{k<=n} l_k (1/a_k - l_k) ||T_k x_k - x_k||^2
  std::optional<double> objective;
  std::vector<double> set_distances;
  std::optional<Point> iterate;  ///< x_n
};

struct IterationTrace {
  std::vector<IterationRecord> records;
  std::vector<std::string> annotations;
  std::size_t thinning = 1;

  Point final_iterate;
  std::size_t iterations = 0;
  double final_residual = 0.0;
  StopReason stop_reason = StopReason::max_iterations;

  double running_sum = 0.0;          ///< sum l_n (1/a_n - l_n) r_n^2
  double error_sum = 0.0;            ///< sum l_n ||e_n||
  double residual_square_sum = 0.0;  ///< sum r_n^2
  std::vector<double> factor_error_sums;  ///< per slot: sum l_n ||e_{i,n}||
  std::size_t error_bound_violations = 0;  ///< ||e_n|| > sum_i ||e_{i,n}|| + 1e-12

  // Ledgers that need a reference solution.
  std::vector<double> factor_displacement_sums;
  std::optional<double> cocoercive_sum;  ///< sum ||B x_n - B x||^2 (splitting runs)
  std::size_t fejer_violations = 0;      ///< ||x+ - x|| > ||x_n - x|| + l_n ||e_n||
  std::optional<std::size_t> first_fejer_violation;
  std::size_t descent_violations = 0;    ///< the squared inequality with nu, checked post hoc
  std::optional<double> nu;

  std::vector<double> final_set_distances;
};

using OperatorSequence = std::function<AveragedMap(std::size_t n)>;
using FactorSequence = std::function<std::vector<AveragedMap>(std::size_t n)>;

IterationTrace km_run(const OperatorSequence& operators, const Schedule& schedule,
                      const ErrorInjector& errors, const Point& x0, const StopRule& stop,
                      const RunOptions& options = {});

IterationTrace km_run(const AveragedMap& op, const Schedule& schedule,
                      const ErrorInjector& errors, const Point& x0, const StopRule& stop,
                      const RunOptions& options = {});

/// Extended-mode schedule required; alpha_n = compose_many_closed of the factor constants.
IterationTrace composed_run(const FactorSequence& factors, const Schedule& schedule,
                            const ErrorInjector& errors, const Point& x0, const StopRule& stop,
                            const RunOptions& options = {});

IterationTrace composed_run(const std::vector<AveragedMap>& factors, const Schedule& schedule,
                            const ErrorInjector& errors, const Point& x0, const StopRule& stop,
                            const RunOptions& options = {});

/// The operator handed to string_run, with its constant from string_averaging_constant.
AveragedMap string_operator(const std::vector<std::vector<AveragedMap>>& strings,
                            const Weights& w);

IterationTrace string_run(const std::vector<std::vector<AveragedMap>>& strings, const Weights& w,
                          const Schedule& schedule, const Point& x0, const StopRule& stop,
                          const RunOptions& options = {});

struct QuasiFejerReport {
  bool holds = true;
  std::optional<std::size_t> first_violation;
  double max_excess = 0.0;
  double decrement_sum = 0.0;
  double perturbation_sum = 0.0;
  bool convergent = false;
  double tail_oscillation = 0.0;
};

/// Checks values[n+1] <= values[n] - decrements[n] + perturbations[n] for every n,
/// with slack `slack * max(1, values[n])`. Convergence is judged by the spread of
/// the last quarter of the values against `tail_tolerance`.
QuasiFejerReport quasi_fejer_check(std::span<const double> values,
                                   std::span<const double> decrements,
                                   std::span<const double> perturbations, double slack = 1e-12,
                                   double tail_tolerance = 1e-8);

}  // namespace opsplit
