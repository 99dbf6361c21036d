#include "opsplit/splitting.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

#include "opsplit/errors.hpp"
#include "trace_builder.hpp"

namespace opsplit {

InclusionProblem as_inclusion(const MinimizationProblem& p) {
  return InclusionProblem{p.dimension, p.prox, p.smooth.gradient, p.smooth.beta(), p.objective};
}

FbScheduleReport validate_fb_schedule(double beta, const FbSchedule& s, std::size_t horizon) {
  FbScheduleReport r;
  const double e = s.eps.value();
  auto fail = [&r](std::size_t n, const char* bound) {
    r.valid = false;
    r.first_violation = n;
    r.violated_bound = bound;
  };
  r.gamma_lower = e;
  r.lambda_lower = e;
  if (!(beta > 0.0) || !std::isfinite(beta) || !(e < beta)) {
    fail(0, "eps_beta");
    return r;
  }
  r.gamma_upper = 2.0 * beta / (1.0 + e);
  r.phi.reserve(horizon);
  for (std::size_t n = 0; n < horizon; ++n) {
    const double g = s.gammas.at(n);
    const double l = s.lambdas.at(n);
    const double l_hi = (1.0 - e) * (2.0 + e - g / (2.0 * beta));
    if (!(g >= e) || !(g <= r.gamma_upper * (1.0 + kClosedBoundSlack))) {
      r.gamma = g;
      r.lambda = l;
      r.lambda_upper = l_hi;
      fail(n, g >= e ? "gamma_upper" : "gamma_lower");
      return r;
    }
    const double phi = 2.0 * beta / (4.0 * beta - g);
    r.phi.push_back(phi);
    const double via_phi = (1.0 - e) * (1.0 + e * phi) / phi;
    r.max_identity_gap = std::max(r.max_identity_gap, std::abs(l_hi - via_phi) / l_hi);
    if (!(l >= e) || !(l <= l_hi * (1.0 + kClosedBoundSlack))) {
      r.gamma = g;
      r.lambda = l;
      r.lambda_upper = l_hi;
      fail(n, l >= e ? "lambda_upper" : "lambda_lower");
      return r;
    }
    if (n == 0) {
      r.gamma = g;
      r.lambda = l;
      r.lambda_upper = l_hi;
    }
  }
  r.identity_holds = r.max_identity_gap <= 1e-12;
  if (!r.identity_holds) r.valid = false;
  return r;
}

FbScheduleReport require_valid_fb_schedule(double beta, const FbSchedule& s,
                                           std::size_t horizon) {
  FbScheduleReport report = validate_fb_schedule(beta, s, horizon);
  if (report.valid) return report;
  const std::size_t n = report.first_violation.value_or(0);
  const std::string bound = report.violated_bound.empty() ? "identity" : report.violated_bound;
  const bool gamma_side = bound.rfind("gamma", 0) == 0;
  const double value = gamma_side ? report.gamma : report.lambda;
  const double lower = gamma_side ? report.gamma_lower : report.lambda_lower;
  const double upper = gamma_side ? report.gamma_upper : report.lambda_upper;
  throw ScheduleViolation(bound,
                          "forward-backward schedule violates " + bound + " at iteration " +
                              std::to_string(n) + ": value " + std::to_string(value) +
                              ", range [" + std::to_string(lower) + ", " + std::to_string(upper) +
                              "]",
                          n, value, lower, upper);
}

namespace {

void require_problem(const InclusionProblem& p, const Point& x0) {
  if (!p.resolvent || !p.cocoercive) {
    throw ValidationError("problem", "inclusion problem needs a resolvent and a cocoercive map");
  }
  if (!(p.beta > 0.0) || !std::isfinite(p.beta)) {
    throw ValidationError("beta", "cocoercivity constant must be positive", p.beta, 0.0);
  }
  if (static_cast<std::size_t>(x0.size()) != p.dimension) {
    throw ValidationError("dimension", "x0 dimension differs from the problem",
                          static_cast<double>(x0.size()), static_cast<double>(p.dimension));
  }
  require_finite(x0, "x0");
}

void require_slots(const ErrorInjector& e, const char* name) {
  if (e.active() && e.slots() != 1) {
    throw ValidationError("error_slots", std::string(name) + " errors take a single slot",
                          static_cast<double>(e.slots()), 1.0);
  }
}

}  // namespace

IterationTrace forward_backward_run(const InclusionProblem& p, const FbSchedule& s,
                                    const Point& x0, const StopRule& stop,
                                    const RunOptions& options) {
  require_problem(p, x0);
  require_slots(s.a, "a_n");
  require_slots(s.b, "b_n");
  const auto report = require_valid_fb_schedule(p.beta, s, stop.max_iterations);

  const auto dim = p.dimension;
  detail::TraceBuilder tb(stop, options, x0);
  std::optional<Point> b_ref;
  if (options.reference) {
    b_ref = p.cocoercive(*options.reference);
    tb.trace().cocoercive_sum = 0.0;
  }

  Point x = x0;
  double factor_errors[2] = {0.0, 0.0};
  for (std::size_t n = 0;; ++n) {
    const double gamma = s.gammas.at(n);
    const Point bx = p.cocoercive(x);
    const Point exact = p.resolvent(gamma, x - gamma * bx);
    const double residual = (exact - x).norm();
    if (auto reason = tb.should_stop(n, residual, x)) {
      return tb.finish(std::move(x), residual, *reason);
    }
    const double lambda = s.lambdas.at(n);
    for (const auto* rule : {&s.gammas, &s.lambdas}) {
      if (rule->extrapolated(n) && (n == 0 || !rule->extrapolated(n - 1))) {
        tb.annotate(std::string(rule == &s.gammas ? "step-size" : "relaxation") +
                    " table exhausted at iteration " + std::to_string(n) + "; repeating its last value");
      }
    }
    const double phi = report.phi[n];

    Point out;
    double error_norm = 0.0;
    const bool inexact = s.a.active() || s.b.active();
    factor_errors[0] = factor_errors[1] = 0.0;
    if (inexact) {
      if (s.b.active()) {
        const Point bn = s.b.draw(n, 0, dim);
        factor_errors[1] = gamma * bn.norm();
        out = p.resolvent(gamma, x - gamma * (bx + bn));
      } else {
        out = exact;
      }
      if (s.a.active()) {
        const Point an = s.a.draw(n, 0, dim);
        factor_errors[0] = an.norm();
        out += an;
      }
      error_norm = (out - exact).norm();
    }
    const Point& target = inexact ? out : exact;
    Point next = x + lambda * (target - x);
    if (!next.allFinite()) {
      throw NumericalError("non-finite iterate at iteration " + std::to_string(n + 1));
    }
    if (b_ref) *tb.trace().cocoercive_sum += (bx - *b_ref).squaredNorm();

    std::optional<double> objective;
    if (p.objective) objective = p.objective(x);
    tb.add({n, x, next, residual, lambda, phi, error_norm, factor_errors[0] + factor_errors[1],
            inexact ? std::span<const double>(factor_errors, 2) : std::span<const double>(),
            objective});
    x = std::move(next);
  }
}

IterationTrace proximal_gradient_run(const MinimizationProblem& p, const FbSchedule& s,
                                     const Point& x0, const StopRule& stop,
                                     const RunOptions& options) {
  if (!p.prox || !p.smooth.gradient) {
    throw ValidationError("problem", "minimization problem needs a prox and a gradient");
  }
  return forward_backward_run(as_inclusion(p), s, x0, stop, options);
}

FixedPointReport fixed_point_identity_check(const InclusionProblem& p, double gamma,
                                            const Point& candidate, double tolerance) {
  const Point t = p.resolvent(gamma, candidate - gamma * p.cocoercive(candidate));
  const double residual = (t - candidate).norm();
  return {gamma, residual, tolerance, residual <= tolerance};
}

CocoercivityReport verify_cocoercive(const std::function<Point(const Point&)>& b, double beta,
                                     std::size_t dimension, std::size_t pair_count,
                                     std::uint64_t seed, double radius) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-radius, radius);
  const auto n = static_cast<Eigen::Index>(dimension);
  CocoercivityReport r;
  r.pair_count = pair_count;
  r.max_violation = -std::numeric_limits<double>::infinity();
  Point x(n), y(n);
  for (std::size_t k = 0; k < pair_count; ++k) {
    for (Eigen::Index i = 0; i < n; ++i) x[i] = u(rng);
    for (Eigen::Index i = 0; i < n; ++i) y[i] = u(rng);
    const Point d = b(x) - b(y);
    const double excess = beta * d.squaredNorm() - (x - y).dot(d);
    r.max_violation = std::max(r.max_violation, excess);
    if (excess > 1e-9) ++r.violations;
  }
  if (pair_count == 0) r.max_violation = 0.0;
  return r;
}

}  // namespace opsplit
