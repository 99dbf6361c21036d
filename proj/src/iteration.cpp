#include "opsplit/iteration.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <string>

#include "opsplit/errors.hpp"
#include "trace_builder.hpp"

namespace opsplit {

// ---------------------------------------------------------------------------
// SequenceRule

namespace {

void require_finite_values(const std::vector<double>& values, const char* what) {
  if (values.empty()) throw ValidationError("sequence", std::string(what) + ": no values");
  for (double v : values) {
    if (!std::isfinite(v)) throw ValidationError("sequence", std::string(what) + ": non-finite value");
  }
}

}  // namespace

SequenceRule SequenceRule::constant(double value) {
  if (!std::isfinite(value)) throw ValidationError("sequence", "constant rule: non-finite value");
  return SequenceRule(Kind::constant, 1.0, {value});
}

SequenceRule SequenceRule::harmonic(double scale) {
  if (!(scale > 0.0) || !std::isfinite(scale)) {
    throw ValidationError("sequence", "harmonic rule: scale must be positive", scale, 0.0);
  }
  return SequenceRule(Kind::harmonic, scale, {});
}

SequenceRule SequenceRule::table(std::vector<double> values) {
  require_finite_values(values, "table rule");
  return SequenceRule(Kind::table, 1.0, std::move(values));
}

SequenceRule SequenceRule::cycle(std::vector<double> values) {
  require_finite_values(values, "cycle rule");
  return SequenceRule(Kind::cycle, 1.0, std::move(values));
}

double SequenceRule::at(std::size_t n) const {
  switch (kind_) {
    case Kind::constant:
      return values_.front();
    case Kind::harmonic:
      return scale_ / static_cast<double>(n + 1);
    case Kind::table:
      return n < values_.size() ? values_[n] : values_.back();
    case Kind::cycle:
      return values_[n % values_.size()];
  }
  return values_.front();
}

bool SequenceRule::extrapolated(std::size_t n) const noexcept {
  return kind_ == Kind::table && n >= values_.size();
}

std::optional<double> SequenceRule::limit() const {
  if (kind_ == Kind::constant || kind_ == Kind::table) return values_.back();
  if (kind_ == Kind::harmonic) return 0.0;
  return std::nullopt;
}

// ---------------------------------------------------------------------------
// Schedule

Schedule Schedule::classical(SequenceRule lambdas) {
  return Schedule{std::move(lambdas), RelaxationMode::classical, std::nullopt};
}

Schedule Schedule::extended(SequenceRule lambdas, Epsilon eps) {
  return Schedule{std::move(lambdas), RelaxationMode::extended, eps};
}

void check_relaxation(const Schedule& s, std::size_t n, double lambda, Alpha alpha) {
  if (s.mode == RelaxationMode::classical) {
    const double upper = 1.0 / alpha.value();
    if (!(lambda > 0.0 && lambda < upper)) {
      throw ScheduleViolation(lambda > 0.0 ? "lambda_upper" : "lambda_lower",
                              "relaxation " + std::to_string(lambda) + " at iteration " +
                                  std::to_string(n) + " outside ]0, 1/alpha[ = ]0, " +
                                  std::to_string(upper) + "[",
                              n, lambda, 0.0, upper);
    }
    return;
  }
  if (!s.eps) throw ValidationError("eps", "extended schedule without epsilon");
  const auto ranges = relaxation_ranges(alpha, *s.eps);
  const double lower = s.eps->value();
  const double upper = ranges.extended.value;
  const bool low_ok = lambda >= lower;
  const bool high_ok = ranges.extended.admits(lambda, kClosedBoundSlack * upper);
  if (!low_ok || !high_ok) {
    throw ScheduleViolation(low_ok ? "lambda_upper" : "lambda_lower",
                            "relaxation " + std::to_string(lambda) + " at iteration " +
                                std::to_string(n) + " outside [eps, (1-eps)(1+eps*alpha)/alpha] = [" +
                                std::to_string(lower) + ", " + std::to_string(upper) + "]",
                            n, lambda, lower, upper);
  }
}

// ---------------------------------------------------------------------------
// ErrorInjector

ErrorInjector ErrorInjector::none() { return ErrorInjector(); }

ErrorInjector::ErrorInjector(std::size_t slots, Generator generator, NormBound bound)
    : slots_(slots), generator_(std::move(generator)), bound_(std::move(bound)) {
  if (slots_ == 0) throw ValidationError("error_slots", "error injector needs at least one slot");
  if (!generator_ || !bound_) {
    throw ValidationError("errors", "error injector needs a generator and a norm bound");
  }
}

ErrorInjector ErrorInjector::decaying(std::size_t dimension, std::size_t slots, double scale,
                                      double power, std::uint64_t seed) {
  if (!(scale >= 0.0) || !std::isfinite(scale)) {
    throw ValidationError("error_scale", "error scale must be nonnegative", scale, 0.0);
  }
  if (!(power > 0.0)) throw ValidationError("error_power", "error decay power must be positive");
  auto norm = [scale, power](std::size_t n) {
    return scale * std::pow(static_cast<double>(n + 1), -power);
  };
  auto gen = [dimension, seed, norm](std::size_t n, std::size_t slot) -> Point {
    // Seeded per (n, slot) so the draw does not depend on evaluation order.
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(n), static_cast<std::uint32_t>(n >> 32),
                      static_cast<std::uint32_t>(slot)};
    std::mt19937_64 rng(seq);
    std::normal_distribution<double> normal(0.0, 1.0);
    Point d(static_cast<Eigen::Index>(dimension));
    do {
      for (Eigen::Index i = 0; i < d.size(); ++i) d[i] = normal(rng);
    } while (d.squaredNorm() == 0.0);
    return norm(n) / d.norm() * d;
  };
  return ErrorInjector(slots, gen, norm);
}

Point ErrorInjector::draw(std::size_t n, std::size_t slot, std::size_t dimension) const {
  Point e = generator_(n, slot);
  if (static_cast<std::size_t>(e.size()) != dimension) {
    throw ValidationError("dimension", "error vector has wrong dimension",
                          static_cast<double>(e.size()), static_cast<double>(dimension));
  }
  const double bound = bound_(n);
  const double norm = e.norm();
  if (!(norm <= bound * (1.0 + 1e-12))) {
    throw ValidationError("error_bound",
                          "error norm " + std::to_string(norm) + " exceeds declared bound " +
                              std::to_string(bound) + " at iteration " + std::to_string(n),
                          norm, bound);
  }
  return e;
}

// ---------------------------------------------------------------------------
// TraceBuilder

std::string_view to_string(StopReason r) {
  switch (r) {
    case StopReason::residual:
      return "residual";
    case StopReason::target:
      return "target";
    case StopReason::max_iterations:
      return "max_iterations";
  }
  return "unknown";
}

namespace detail {

TraceBuilder::TraceBuilder(const StopRule& stop, const RunOptions& options, const Point& x0)
    : stop_(stop), options_(options) {
  if (stop.max_iterations == 0) {
    throw ValidationError("max_iterations", "stop rule needs a positive iteration cap");
  }
  if (!(stop.residual_tolerance >= 0.0)) {
    throw ValidationError("residual_tolerance", "residual tolerance must be nonnegative");
  }
  trace_.thinning = options.thinning != 0 ? options.thinning
                                          : (stop.max_iterations < 10000 ? 1 : 10);
  if (options_.reference) {
    if (options_.reference->size() != x0.size()) {
      throw ValidationError("dimension", "reference point has wrong dimension",
                            static_cast<double>(options_.reference->size()),
                            static_cast<double>(x0.size()));
    }
    const double d0 = (x0 - *options_.reference).norm();
    ledger_scale_ = std::max(1.0, d0);
    dist_.push_back(d0);
  }
}

std::optional<StopReason> TraceBuilder::should_stop(std::size_t n, double residual,
                                                    const Point& x) const {
  if (residual <= stop_.residual_tolerance) return StopReason::residual;
  if (stop_.target && (x - *stop_.target).norm() <= stop_.target_tolerance) {
    return StopReason::target;
  }
  if (n >= stop_.max_iterations) return StopReason::max_iterations;
  return std::nullopt;
}

void TraceBuilder::annotate(std::string note) {
  if (std::find(trace_.annotations.begin(), trace_.annotations.end(), note) ==
      trace_.annotations.end()) {
    trace_.annotations.push_back(std::move(note));
  }
}

void TraceBuilder::add(const StepData& s) {
  ++steps_;
  const double r2 = s.residual * s.residual;
  const double decrement = s.lambda * (1.0 / s.alpha - s.lambda) * r2;
  const double perturbation = s.lambda * s.error_norm;
  trace_.running_sum += decrement;
  trace_.error_sum += perturbation;
  trace_.residual_square_sum += r2;
  if (trace_.factor_error_sums.size() < s.factor_errors.size()) {
    trace_.factor_error_sums.resize(s.factor_errors.size(), 0.0);
  }
  for (std::size_t i = 0; i < s.factor_errors.size(); ++i) {
    trace_.factor_error_sums[i] += s.lambda * s.factor_errors[i];
  }
  if (s.error_norm > s.error_bound + 1e-12) ++trace_.error_bound_violations;

  std::optional<double> dist;
  if (options_.reference) {
    dist = dist_.back();
    const double next_dist = (s.next - *options_.reference).norm();
    if (next_dist > dist_.back() + perturbation + 1e-9 * ledger_scale_) {
      ++trace_.fejer_violations;
      if (!trace_.first_fejer_violation) trace_.first_fejer_violation = s.index;
    }
    dist_.push_back(next_dist);
    decrement_.push_back(decrement);
    perturbation_.push_back(perturbation);
  }

  if (s.index % trace_.thinning == 0) {
    IterationRecord rec;
    rec.index = s.index;
    rec.residual = s.residual;
    rec.lambda = s.lambda;
    rec.alpha = s.alpha;
    rec.error_norm = s.error_norm;
    rec.error_bound = s.error_bound;
    rec.dist_to_ref = dist;
    rec.running_sum = trace_.running_sum;
    rec.objective = s.objective;
    if (!options_.sets.empty()) rec.set_distances = distance_to_sets(options_.sets, s.x);
    if (options_.store_iterates) rec.iterate = s.x;
    trace_.records.push_back(std::move(rec));
  }
}

IterationTrace TraceBuilder::finish(Point final_iterate, double final_residual,
                                    StopReason reason) {
  trace_.iterations = steps_;
  if (options_.reference) {
    // nu = sum l_k ||e_k|| + 2 sup ||x_k - x||, from the realized trace.
    const double sup = *std::max_element(dist_.begin(), dist_.end());
    const double nu = trace_.error_sum + 2.0 * sup;
    trace_.nu = nu;
    const double slack = 1e-9 * ledger_scale_ * ledger_scale_;
    for (std::size_t n = 0; n < decrement_.size(); ++n) {
      const double lhs = dist_[n + 1] * dist_[n + 1];
      const double rhs = dist_[n] * dist_[n] - decrement_[n] + nu * perturbation_[n];
      if (lhs > rhs + slack) ++trace_.descent_violations;
    }
  }
  if (!options_.sets.empty()) trace_.final_set_distances = distance_to_sets(options_.sets, final_iterate);
  trace_.final_iterate = std::move(final_iterate);
  trace_.final_residual = final_residual;
  trace_.stop_reason = reason;
  return std::move(trace_);
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Engines

namespace {

IterationTrace run_factors(const FactorSequence& factors_at, const Schedule& schedule,
                           const ErrorInjector& errors, const Point& x0, const StopRule& stop,
                           const RunOptions& options) {
  require_finite(x0, "x0");
  if (schedule.mode == RelaxationMode::extended && !schedule.eps) {
    throw ValidationError("eps", "extended schedule without epsilon");
  }
  const auto dim = static_cast<std::size_t>(x0.size());
  detail::TraceBuilder tb(stop, options, x0);

  Point x = x0;
  std::vector<Point> inputs;      // inputs[i] = T_{i+} x, the argument of factor i
  std::vector<Point> ref_inputs;  // same chain from the reference point
  std::vector<double> factor_errors;
  std::vector<Alpha> alphas;

  for (std::size_t n = 0;; ++n) {
    const std::vector<AveragedMap> factors = factors_at(n);
    const std::size_t m = factors.size();
    if (m == 0) throw ValidationError("operators", "empty factor list at iteration " + std::to_string(n));
    alphas.clear();
    for (const auto& t : factors) {
      if (t.dimension() != dim) {
        throw ValidationError("dimension", "operator dimension differs from x0",
                              static_cast<double>(t.dimension()), static_cast<double>(dim));
      }
      alphas.push_back(t.alpha());
    }
    if (errors.active() && errors.slots() != m) {
      throw ValidationError("error_slots",
                            "error injector has " + std::to_string(errors.slots()) +
                                " slots for " + std::to_string(m) + " factors",
                            static_cast<double>(errors.slots()), static_cast<double>(m));
    }
    const Alpha alpha = compose_many_closed(alphas);

    // Exact chain T_1 ... T_m x, innermost first.
    inputs.resize(m);
    Point w = x;
    for (std::size_t i = m; i-- > 0;) {
      inputs[i] = w;
      w = factors[i](w);
    }
    const Point exact = std::move(w);
    const double residual = (exact - x).norm();

    if (auto reason = tb.should_stop(n, residual, x)) {
      return tb.finish(std::move(x), residual, *reason);
    }

    const double lambda = schedule.relaxations.at(n);
    if (schedule.relaxations.extrapolated(n) && (n == 0 || !schedule.relaxations.extrapolated(n - 1))) {
      tb.annotate("relaxation table exhausted at iteration " + std::to_string(n) +
                  "; repeating its last value");
    }
    check_relaxation(schedule, n, lambda, alpha);

    Point inexact;
    double error_norm = 0.0;
    double error_bound = 0.0;
    factor_errors.assign(errors.active() ? m : 0, 0.0);
    if (errors.active()) {
      Point v = x;
      for (std::size_t i = m; i-- > 0;) {
        const Point e = errors.draw(n, i, dim);
        factor_errors[i] = e.norm();
        error_bound += factor_errors[i];
        v = factors[i](v) + e;
      }
      error_norm = (v - exact).norm();
      inexact = std::move(v);
    }
    const Point& out = errors.active() ? inexact : exact;

    Point next = x + lambda * (out - x);
    if (!next.allFinite()) {
      throw NumericalError("non-finite iterate at iteration " + std::to_string(n + 1));
    }

    if (const auto& ref = tb.reference()) {
      auto& sums = tb.trace().factor_displacement_sums;
      if (sums.size() < m) sums.resize(m, 0.0);
      ref_inputs.resize(m);
      Point r = *ref;
      for (std::size_t i = m; i-- > 0;) {
        ref_inputs[i] = r;
        r = factors[i](r);
      }
      for (std::size_t i = 0; i < m; ++i) {
        const Point& out_x = i == 0 ? exact : inputs[i - 1];
        const Point& out_r = i == 0 ? r : ref_inputs[i - 1];
        const double d = ((inputs[i] - out_x) - (ref_inputs[i] - out_r)).squaredNorm();
        const double a = alphas[i].value();
        sums[i] += lambda * (1.0 - a) / a * d;
      }
    }

    tb.add({n, x, next, residual, lambda, alpha.value(), error_norm, error_bound, factor_errors,
            std::nullopt});
    x = std::move(next);
  }
}

}  // namespace

IterationTrace km_run(const OperatorSequence& operators, const Schedule& schedule,
                      const ErrorInjector& errors, const Point& x0, const StopRule& stop,
                      const RunOptions& options) {
  return run_factors([&operators](std::size_t n) { return std::vector<AveragedMap>{operators(n)}; },
                     schedule, errors, x0, stop, options);
}

IterationTrace km_run(const AveragedMap& op, const Schedule& schedule,
                      const ErrorInjector& errors, const Point& x0, const StopRule& stop,
                      const RunOptions& options) {
  return km_run([&op](std::size_t) { return op; }, schedule, errors, x0, stop, options);
}

IterationTrace composed_run(const FactorSequence& factors, const Schedule& schedule,
                            const ErrorInjector& errors, const Point& x0, const StopRule& stop,
                            const RunOptions& options) {
  if (schedule.mode != RelaxationMode::extended) {
    throw ValidationError("mode", "composed_run needs an extended-mode schedule");
  }
  return run_factors(factors, schedule, errors, x0, stop, options);
}

IterationTrace composed_run(const std::vector<AveragedMap>& factors, const Schedule& schedule,
                            const ErrorInjector& errors, const Point& x0, const StopRule& stop,
                            const RunOptions& options) {
  return composed_run([&factors](std::size_t) { return factors; }, schedule, errors, x0, stop,
                      options);
}

AveragedMap string_operator(const std::vector<std::vector<AveragedMap>>& strings,
                            const Weights& w) {
  if (strings.size() != w.size()) {
    throw ValidationError("weights", "number of strings differs from number of weights",
                          static_cast<double>(strings.size()), static_cast<double>(w.size()));
  }
  std::vector<AveragedMap> composed;
  composed.reserve(strings.size());
  for (const auto& s : strings) {
    if (s.empty()) throw ValidationError("strings", "string averaging: empty string");
    composed.push_back(compose(s));
  }
  return combine(w, composed);
}

IterationTrace string_run(const std::vector<std::vector<AveragedMap>>& strings, const Weights& w,
                          const Schedule& schedule, const Point& x0, const StopRule& stop,
                          const RunOptions& options) {
  const AveragedMap t = string_operator(strings, w);
  IterationTrace trace = km_run(t, schedule, ErrorInjector::none(), x0, stop, options);
  // An eventually constant rule keeps sum l_n (1/a - l_n) divergent unless the limit sits at an end.
  const auto kind = schedule.relaxations.kind();
  const bool eventually_constant =
      kind == SequenceRule::Kind::constant || kind == SequenceRule::Kind::table;
  if (auto limit = schedule.relaxations.limit(); eventually_constant && limit) {
    const double a = t.alpha().value();
    if (*limit * (1.0 / a - *limit) <= 1e-12) {
      trace.annotations.push_back(
          "relaxation limit makes sum lambda_n (1/alpha - lambda_n) finite; convergence not guaranteed");
    }
  }
  return trace;
}

// ---------------------------------------------------------------------------

QuasiFejerReport quasi_fejer_check(std::span<const double> values,
                                   std::span<const double> decrements,
                                   std::span<const double> perturbations, double slack,
                                   double tail_tolerance) {
  QuasiFejerReport report;
  if (values.empty()) return report;
  const std::size_t steps = values.size() - 1;
  if (decrements.size() < steps || perturbations.size() < steps) {
    throw ValidationError("length", "quasi_fejer_check: sequences shorter than values - 1");
  }
  for (std::size_t n = 0; n < steps; ++n) {
    report.decrement_sum += decrements[n];
    report.perturbation_sum += perturbations[n];
    const double excess = values[n + 1] - (values[n] - decrements[n] + perturbations[n]);
    report.max_excess = n == 0 ? excess : std::max(report.max_excess, excess);
    if (excess > slack * std::max(1.0, std::abs(values[n]))) {
      report.holds = false;
      if (!report.first_violation) report.first_violation = n;
    }
  }
  const std::size_t tail = std::max<std::size_t>(1, values.size() / 4);
  const auto tail_begin = values.end() - static_cast<std::ptrdiff_t>(tail);
  const auto [lo, hi] = std::minmax_element(tail_begin, values.end());
  report.tail_oscillation = *hi - *lo;
  report.convergent = report.tail_oscillation <= tail_tolerance;
  return report;
}

}  // namespace opsplit
