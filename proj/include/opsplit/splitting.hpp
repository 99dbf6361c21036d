#pragma once

// Forward-backward splitting for 0 in Ax + Bx and its proximal-gradient form.
//
//   x+ = x + l_n (J_{g_n A}(x - g_n (B x + b_n)) + a_n - x)
//
// with g_n in [eps, 2 beta/(1+eps)] and l_n in [eps, (1-eps)(2 + eps - g_n/(2 beta))].

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "opsplit/iteration.hpp"

namespace opsplit {

using Resolvent = std::function<Point(double gamma, const Point& y)>;

struct InclusionProblem {
  std::size_t dimension = 0;
  Resolvent resolvent;                          ///< (gamma, y) -> J_{gamma A} y
  std::function<Point(const Point&)> cocoercive;  ///< B
  double beta = 0.0;                            ///< cocoercivity constant of B
  std::function<double(const Point&)> objective;  ///< optional, recorded only
};

struct MinimizationProblem {
  std::size_t dimension = 0;
  Resolvent prox;  ///< (gamma, y) -> prox_{gamma f} y
  SmoothFunction smooth;
  std::function<double(const Point&)> objective;  ///< f + g, recorded only
};

/// A = subdifferential of f through its prox, B = grad g, beta = 1/lipschitz.
InclusionProblem as_inclusion(const MinimizationProblem& p);

/// Label carried by fixtures. No runtime behavior.
enum class Demiregularity { strongly_monotone, uniformly_convex, none };

struct FbSchedule {
  Epsilon eps;
  SequenceRule gammas;
  SequenceRule lambdas;
  ErrorInjector a = ErrorInjector::none();  ///< error on the resolvent output
  ErrorInjector b = ErrorInjector::none();  ///< error on B
};

struct FbScheduleReport {
  bool valid = true;
  std::optional<std::size_t> first_violation;
  std::string violated_bound;  ///< "eps_beta", "gamma_lower", "gamma_upper", "lambda_lower", "lambda_upper"
  double gamma = 0.0, gamma_lower = 0.0, gamma_upper = 0.0;
  double lambda = 0.0, lambda_lower = 0.0, lambda_upper = 0.0;
  std::vector<double> phi;            ///< 2 beta / (4 beta - g_n), one per checked index
  double max_identity_gap = 0.0;      ///< |lambda bound - (1-eps)(1+eps phi)/phi|, relative
  bool identity_holds = true;         ///< gap <= 1e-12
};

/// Checks indices 0..horizon-1. Closed bounds admit a relative slack of kClosedBoundSlack.
FbScheduleReport validate_fb_schedule(double beta, const FbSchedule& s, std::size_t horizon);

/// validate_fb_schedule, throwing ScheduleViolation on the first failing index.
FbScheduleReport require_valid_fb_schedule(double beta, const FbSchedule& s, std::size_t horizon);

/// Rejects the schedule (ScheduleViolation) unless validate_fb_schedule passes on
/// stop.max_iterations. Trace: residual ||J(x - g Bx) - x|| without errors, alpha = phi_n,
/// cocoercive_sum when options.reference is set, objective when the problem has one.
IterationTrace forward_backward_run(const InclusionProblem& p, const FbSchedule& s,
                                    const Point& x0, const StopRule& stop,
                                    const RunOptions& options = {});

IterationTrace proximal_gradient_run(const MinimizationProblem& p, const FbSchedule& s,
                                     const Point& x0, const StopRule& stop,
                                     const RunOptions& options = {});

struct FixedPointReport {
  double gamma;
  double residual;  ///< ||J_{gamma A}(c - gamma B c) - c||
  double tolerance;
  bool certified;   ///< residual <= tolerance
};

FixedPointReport fixed_point_identity_check(const InclusionProblem& p, double gamma,
                                            const Point& candidate, double tolerance = 1e-10);

struct CocoercivityReport {
  std::size_t pair_count = 0;
  std::size_t violations = 0;
  double max_violation = 0.0;  ///< largest beta||Bx-By||^2 - <x-y, Bx-By>
};

/// Samples <x-y, Bx-By> >= beta ||Bx-By||^2 - 1e-9 on pairs in [-radius, radius]^n.
CocoercivityReport verify_cocoercive(const std::function<Point(const Point&)>& b, double beta,
                                     std::size_t dimension, std::size_t pair_count,
                                     std::uint64_t seed, double radius);

}  // namespace opsplit
