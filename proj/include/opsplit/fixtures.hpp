#pragma once

// Seeded problem instances with known or precomputed solutions.

#include <cstdint>
#include <vector>

#include "opsplit/splitting.hpp"

namespace opsplit {

/// f = |x|, g = (x-3)^2 / 2 on R. Minimizer 2.
MinimizationProblem scalar_l1_problem();

/// A = normal cone of [0, inf), B = x - 2 on R (beta = 1). Zero 2.
InclusionProblem box_inclusion_problem();

struct LassoFixture {
  Matrix a;
  Point b;
  Point x_true;
  double tau;
  double beta;  ///< 1 / ||A^T A||_2
  Demiregularity demiregularity = Demiregularity::none;

  MinimizationProblem problem() const;
  /// The same problem with A given by the prox of tau ||.||_1 as a resolvent.
  InclusionProblem inclusion() const;
};

/// A has N(0,1)/sqrt(rows) entries; x_true has min(5, cols) nonzeros; b = A x_true + 0.01 noise.
LassoFixture lasso_fixture(std::size_t rows = 20, std::size_t cols = 50, double tau = 0.1,
                           std::uint64_t seed = 0);

/// Forward-backward with gamma = beta, lambda = 1 from x = 0 for `iterations` steps
/// (or until the residual is exactly zero).
Point lasso_baseline(const LassoFixture& f, std::size_t iterations = 1000000);

struct MonotoneLinearFixture {
  MonotoneLinear m;
  Point target;
  Point solution;  ///< (M + I)^{-1} target
  Demiregularity demiregularity = Demiregularity::strongly_monotone;

  /// A = M through its resolvent, B = x - target (beta = 1).
  InclusionProblem problem() const;
};

MonotoneLinearFixture monotone_linear_fixture(const Matrix& m, const Point& target);

struct FeasibilityFixture {
  std::vector<ConvexSet> sets;  ///< halfspace, halfspace, ball
  Point interior;               ///< a point inside all three sets
  Point x0;                     ///< outside the first halfspace
  std::vector<std::vector<std::size_t>> strings;  ///< {{0, 1}, {2}}
  std::vector<double> weights;                    ///< {0.5, 0.5}
};

FeasibilityFixture feasibility_fixture(std::size_t dimension = 2, std::uint64_t seed = 0);

/// Strings of projection maps indexed into `sets`.
std::vector<std::vector<AveragedMap>> projection_strings(
    const std::vector<ConvexSet>& sets, const std::vector<std::vector<std::size_t>>& strings);

}  // namespace opsplit
