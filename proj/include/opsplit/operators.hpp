#pragma once

// Averaged operators on R^n.
//
// An AveragedMap bundles an evaluation with its declared averagedness constant.
// Constructors cover the usual firmly nonexpansive building blocks (projections,
// l1 prox, linear resolvents) and explicit gradient steps; combinators propagate
// the constant through relaxation, composition and convex combination using
// the formulas in calculus.hpp. Declared constants are not proofs:
// verify_averaged samples point pairs and looks for counterexamples.

#include <Eigen/Core>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <string_view>
#include <variant>
#include <vector>

#include "opsplit/calculus.hpp"

namespace opsplit {

using Point = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

/// Throws ValidationError unless every coordinate is finite.
void require_finite(const Point& x, std::string_view what);

enum class MapTag { atomic, composed, combined, relaxed };

std::string_view to_string(MapTag tag);

class AveragedMap {
 public:
  using Evaluation = std::function<Point(const Point&)>;

  AveragedMap(std::size_t dimension, Alpha alpha, Evaluation evaluate,
              MapTag tag = MapTag::atomic, std::vector<AveragedMap> factors = {});

  Point operator()(const Point& x) const;

  Alpha alpha() const noexcept { return alpha_; }
  MapTag tag() const noexcept { return tag_; }
  std::size_t dimension() const noexcept { return dimension_; }

  /// Factor list of a composed map, outermost first (T_1, ..., T_m); empty otherwise.
  const std::vector<AveragedMap>& factors() const noexcept { return factors_; }

 private:
  std::size_t dimension_;
  Alpha alpha_;
  // Shared so copies stay cheap when the evaluation captures matrices.
  std::shared_ptr<const Evaluation> evaluate_;
  MapTag tag_;
  std::vector<AveragedMap> factors_;
};

AveragedMap identity_map(std::size_t dimension);

// ---------------------------------------------------------------------------
// Convex sets

struct BoxSet {
  Point lower;
  Point upper;
};

struct BallSet {
  Point center;
  double radius;
};

/// {x : <normal, x> <= offset}
struct HalfspaceSet {
  Point normal;
  double offset;
};

/// point + span(basis columns). The basis is stored orthonormalized.
struct AffineSet {
  Matrix basis;
  Point point;
};

class ConvexSet {
 public:
  using Variant = std::variant<BoxSet, BallSet, HalfspaceSet, AffineSet>;

  static ConvexSet box(Point lower, Point upper);
  static ConvexSet ball(Point center, double radius);
  static ConvexSet halfspace(Point normal, double offset);
  /// Columns of `basis` must be linearly independent (tolerance 1e-12).
  static ConvexSet affine(const Matrix& basis, Point point);

  std::size_t dimension() const noexcept { return dimension_; }
  const Variant& variant() const noexcept { return variant_; }

 private:
  ConvexSet(Variant v, std::size_t dimension) : variant_(std::move(v)), dimension_(dimension) {}
  Variant variant_;
  std::size_t dimension_;
};

Point project(const ConvexSet& set, const Point& x);

/// Projector as a 1/2-averaged map.
AveragedMap projection_map(const ConvexSet& set);

std::vector<double> distance_to_sets(std::span<const ConvexSet> sets, const Point& x);

// ---------------------------------------------------------------------------
// Proximal maps and resolvents

/// Componentwise soft thresholding: prox of threshold * ||.||_1.
Point prox_l1(const Point& x, double threshold);

AveragedMap prox_l1_map(std::size_t dimension, double threshold);

/// Linear operator with positive semidefinite symmetric part.
class MonotoneLinear {
 public:
  explicit MonotoneLinear(Matrix coefficients);
  const Matrix& coefficients() const noexcept { return coefficients_; }
  std::size_t dimension() const noexcept { return static_cast<std::size_t>(coefficients_.rows()); }

 private:
  Matrix coefficients_;
};

/// Solves (I + gamma M) x = y.
Point resolvent_linear(const MonotoneLinear& m, double gamma, const Point& y);

/// J_{gamma M} with the factorization computed once.
AveragedMap resolvent_map(const MonotoneLinear& m, double gamma);

// ---------------------------------------------------------------------------
// Smooth functions and explicit steps

struct SmoothFunction {
  std::size_t dimension;
  std::function<Point(const Point&)> gradient;
  double lipschitz;  ///< Lipschitz constant of the gradient, 1/beta
  std::function<double(const Point&)> value;  ///< optional

  double beta() const noexcept { return 1.0 / lipschitz; }
};

/// 1/2 ||A x - b||^2 with lipschitz = ||A^T A||_2 from power iteration.
SmoothFunction least_squares(const Matrix& a, const Point& b);

/// 1/2 ||x - center||^2.
SmoothFunction half_squared_distance(const Point& center);

/// Largest eigenvalue of A^T A by power iteration from a seeded start vector.
double largest_eigenvalue_gram(const Matrix& a, double tolerance = 1e-10,
                               std::size_t max_iterations = 100000, std::uint64_t seed = 0);

/// Sampled max of ||grad(x) - grad(y)|| / ||x - y||.
double estimate_gradient_lipschitz(const SmoothFunction& g, std::size_t pairs,
                                   std::uint64_t seed, double radius);

/// x -> x - gamma grad g(x), averaged with constant gamma / (2 beta). Needs gamma < 2 beta.
AveragedMap gradient_step(const SmoothFunction& g, double gamma);

// ---------------------------------------------------------------------------
// Combinators

/// x -> x + lambda (T x - x), averaged with constant lambda * alpha(T). Needs lambda < 1/alpha(T).
AveragedMap relax(const AveragedMap& t, double lambda);

/// T_1 o ... o T_m (T_m applied first). Constant: compose_many_closed.
AveragedMap compose(const std::vector<AveragedMap>& ts);

/// sum_i w_i T_i. Constant: convex_combination_constant.
AveragedMap combine(const Weights& w, const std::vector<AveragedMap>& ts);

// ---------------------------------------------------------------------------
// Falsification of declared constants

struct AveragednessReport {
  std::uint64_t seed;
  std::size_t pair_count;
  std::size_t violations;
  /// Largest excess over the slack across both characterizations (<= 0 when none).
  double max_violation;
  std::optional<Point> worst_x;
  std::optional<Point> worst_y;
};

/// Samples pairs uniformly in [-box_radius, box_radius]^n and tests
///   ||Tx-Ty||^2 <= ||x-y||^2 - (1-a)/a ||(Id-T)x-(Id-T)y||^2
///   ||Tx-Ty||^2 + (1-2a)||x-y||^2 <= 2(1-a)<x-y, Tx-Ty>
/// with slack 1e-9 * max(1, ||x-y||^2).
AveragednessReport verify_averaged(const AveragedMap& t, Alpha alpha, std::size_t pair_count,
                                   std::uint64_t seed, double box_radius);

}  // namespace opsplit
