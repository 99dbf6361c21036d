#include "opsplit/operators.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>
#include <Eigen/LU>
#include <Eigen/QR>
#include <algorithm>
#include <cmath>
#include <random>
#include <string>

#include "opsplit/errors.hpp"

namespace opsplit {

namespace {

void require_dimension(std::size_t expected, Eigen::Index actual, std::string_view what) {
  if (static_cast<std::size_t>(actual) != expected) {
    throw ValidationError("dimension",
                          std::string(what) + ": dimension mismatch (expected " +
                              std::to_string(expected) + ", got " + std::to_string(actual) + ")",
                          static_cast<double>(actual), static_cast<double>(expected));
  }
}

void require_positive(double v, const char* name) {
  if (!(v > 0.0) || !std::isfinite(v)) {
    throw ValidationError(name, std::string(name) + " must be positive and finite, got " +
                                    std::to_string(v),
                          v, 0.0);
  }
}

}  // namespace

void require_finite(const Point& x, std::string_view what) {
  if (!x.allFinite()) {
    throw ValidationError("finite", std::string(what) + ": non-finite coordinate");
  }
}

std::string_view to_string(MapTag tag) {
  switch (tag) {
    case MapTag::atomic:
      return "atomic";
    case MapTag::composed:
      return "composed";
    case MapTag::combined:
      return "combined";
    case MapTag::relaxed:
      return "relaxed";
  }
  return "unknown";
}

AveragedMap::AveragedMap(std::size_t dimension, Alpha alpha, Evaluation evaluate, MapTag tag,
                         std::vector<AveragedMap> factors)
    : dimension_(dimension),
      alpha_(alpha),
      evaluate_(std::make_shared<const Evaluation>(std::move(evaluate))),
      tag_(tag),
      factors_(std::move(factors)) {
  if (dimension_ == 0) throw ValidationError("dimension", "operator dimension must be positive");
}

Point AveragedMap::operator()(const Point& x) const {
  require_dimension(dimension_, x.size(), "AveragedMap");
  Point y = (*evaluate_)(x);
  require_dimension(dimension_, y.size(), "AveragedMap output");
  return y;
}

AveragedMap identity_map(std::size_t dimension) {
  // Id is averaged for every constant; 1/2 is the conventional choice.
  return AveragedMap(dimension, Alpha(0.5), [](const Point& x) { return x; });
}

// ---------------------------------------------------------------------------

ConvexSet ConvexSet::box(Point lower, Point upper) {
  if (lower.size() == 0) throw ValidationError("dimension", "box: empty bounds");
  require_dimension(static_cast<std::size_t>(lower.size()), upper.size(), "box");
  require_finite(lower, "box lower");
  require_finite(upper, "box upper");
  for (Eigen::Index i = 0; i < lower.size(); ++i) {
    if (lower[i] > upper[i]) {
      throw ValidationError("box", "box: lower bound exceeds upper bound in coordinate " +
                                       std::to_string(i),
                            lower[i], upper[i]);
    }
  }
  const auto n = static_cast<std::size_t>(lower.size());
  return ConvexSet(BoxSet{std::move(lower), std::move(upper)}, n);
}

ConvexSet ConvexSet::ball(Point center, double radius) {
  if (center.size() == 0) throw ValidationError("dimension", "ball: empty center");
  require_finite(center, "ball center");
  require_positive(radius, "radius");
  const auto n = static_cast<std::size_t>(center.size());
  return ConvexSet(BallSet{std::move(center), radius}, n);
}

ConvexSet ConvexSet::halfspace(Point normal, double offset) {
  if (normal.size() == 0) throw ValidationError("dimension", "halfspace: empty normal");
  require_finite(normal, "halfspace normal");
  if (!std::isfinite(offset)) throw ValidationError("offset", "halfspace: non-finite offset");
  if (normal.squaredNorm() == 0.0) throw ValidationError("normal", "halfspace: zero normal");
  const auto n = static_cast<std::size_t>(normal.size());
  return ConvexSet(HalfspaceSet{std::move(normal), offset}, n);
}

ConvexSet ConvexSet::affine(const Matrix& basis, Point point) {
  if (point.size() == 0) throw ValidationError("dimension", "affine: empty point");
  require_finite(point, "affine point");
  require_dimension(static_cast<std::size_t>(point.size()), basis.rows(), "affine basis");
  if (!basis.allFinite()) throw ValidationError("basis", "affine: non-finite basis");
  const auto n = static_cast<std::size_t>(point.size());
  if (basis.cols() == 0) {
    return ConvexSet(AffineSet{Matrix(point.size(), 0), std::move(point)}, n);
  }
  Eigen::ColPivHouseholderQR<Matrix> qr(basis);
  qr.setThreshold(1e-12);
  if (qr.rank() != basis.cols()) {
    throw ValidationError("basis", "affine: basis columns are linearly dependent",
                          static_cast<double>(qr.rank()), static_cast<double>(basis.cols()));
  }
  Matrix q = qr.householderQ() * Matrix::Identity(basis.rows(), basis.cols());
  return ConvexSet(AffineSet{std::move(q), std::move(point)}, n);
}

namespace {

struct Projector {
  const Point& x;

  Point operator()(const BoxSet& s) const { return x.cwiseMax(s.lower).cwiseMin(s.upper); }

  Point operator()(const BallSet& s) const {
    const Point d = x - s.center;
    const double norm = d.norm();
    if (norm <= s.radius) return x;
    return s.center + (s.radius / norm) * d;
  }

  Point operator()(const HalfspaceSet& s) const {
    const double excess = s.normal.dot(x) - s.offset;
    if (excess <= 0.0) return x;
    return x - (excess / s.normal.squaredNorm()) * s.normal;
  }

  Point operator()(const AffineSet& s) const {
    const Point d = x - s.point;
    return s.point + s.basis * (s.basis.transpose() * d);
  }
};

}  // namespace

Point project(const ConvexSet& set, const Point& x) {
  require_dimension(set.dimension(), x.size(), "project");
  return std::visit(Projector{x}, set.variant());
}

AveragedMap projection_map(const ConvexSet& set) {
  return AveragedMap(set.dimension(), Alpha(0.5),
                     [set](const Point& x) { return std::visit(Projector{x}, set.variant()); });
}

std::vector<double> distance_to_sets(std::span<const ConvexSet> sets, const Point& x) {
  std::vector<double> d;
  d.reserve(sets.size());
  for (const auto& s : sets) d.push_back((x - project(s, x)).norm());
  return d;
}

// ---------------------------------------------------------------------------

Point prox_l1(const Point& x, double threshold) {
  if (!(threshold >= 0.0)) {
    throw ValidationError("threshold", "prox_l1: threshold must be nonnegative", threshold, 0.0);
  }
  return x.unaryExpr([threshold](double v) {
    const double m = std::abs(v) - threshold;
    return m > 0.0 ? std::copysign(m, v) : 0.0;
  });
}

AveragedMap prox_l1_map(std::size_t dimension, double threshold) {
  if (!(threshold >= 0.0)) {
    throw ValidationError("threshold", "prox_l1: threshold must be nonnegative", threshold, 0.0);
  }
  return AveragedMap(dimension, Alpha(0.5),
                     [threshold](const Point& x) { return prox_l1(x, threshold); });
}

MonotoneLinear::MonotoneLinear(Matrix coefficients) : coefficients_(std::move(coefficients)) {
  if (coefficients_.rows() == 0 || coefficients_.rows() != coefficients_.cols()) {
    throw ValidationError("matrix", "monotone linear operator must be a nonempty square matrix");
  }
  if (!coefficients_.allFinite()) throw ValidationError("matrix", "non-finite coefficients");
  const Matrix sym = 0.5 * (coefficients_ + coefficients_.transpose());
  Eigen::SelfAdjointEigenSolver<Matrix> eig(sym, Eigen::EigenvaluesOnly);
  const double smallest = eig.eigenvalues().minCoeff();
  if (smallest < -1e-10) {
    throw ValidationError("monotone", "symmetric part is not positive semidefinite", smallest,
                          -1e-10);
  }
}

namespace {

Eigen::PartialPivLU<Matrix> factor_resolvent(const MonotoneLinear& m, double gamma) {
  require_positive(gamma, "gamma");
  const auto n = m.coefficients().rows();
  Eigen::PartialPivLU<Matrix> lu(Matrix::Identity(n, n) + gamma * m.coefficients());
  if (!(lu.rcond() >= 1e-12)) {
    throw NumericalError("resolvent_linear: I + gamma*M is numerically singular (rcond " +
                         std::to_string(lu.rcond()) + ")");
  }
  return lu;
}

}  // namespace

Point resolvent_linear(const MonotoneLinear& m, double gamma, const Point& y) {
  require_dimension(m.dimension(), y.size(), "resolvent_linear");
  return factor_resolvent(m, gamma).solve(y);
}

AveragedMap resolvent_map(const MonotoneLinear& m, double gamma) {
  auto lu = std::make_shared<const Eigen::PartialPivLU<Matrix>>(factor_resolvent(m, gamma));
  return AveragedMap(m.dimension(), Alpha(0.5), [lu](const Point& y) -> Point {
    return lu->solve(y);
  });
}

// ---------------------------------------------------------------------------

double largest_eigenvalue_gram(const Matrix& a, double tolerance, std::size_t max_iterations,
                               std::uint64_t seed) {
  if (a.size() == 0) throw ValidationError("matrix", "power iteration: empty matrix");
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  Point v(a.cols());
  for (Eigen::Index i = 0; i < v.size(); ++i) v[i] = normal(rng);
  v.normalize();
  double estimate = (a * v).squaredNorm();
  for (std::size_t k = 0; k < max_iterations; ++k) {
    Point w = a.transpose() * (a * v);
    const double norm = w.norm();
    if (norm == 0.0) return 0.0;
    v = w / norm;
    const double next = (a * v).squaredNorm();
    const bool done = std::abs(next - estimate) <= tolerance * next;
    estimate = next;
    if (done) break;
  }
  return estimate;
}

SmoothFunction least_squares(const Matrix& a, const Point& b) {
  require_dimension(static_cast<std::size_t>(a.rows()), b.size(), "least_squares");
  const double lipschitz = largest_eigenvalue_gram(a);
  require_positive(lipschitz, "lipschitz");
  auto data = std::make_shared<const std::pair<Matrix, Point>>(a, b);
  return SmoothFunction{
      static_cast<std::size_t>(a.cols()),
      [data](const Point& x) -> Point {
        return data->first.transpose() * (data->first * x - data->second);
      },
      lipschitz,
      [data](const Point& x) { return 0.5 * (data->first * x - data->second).squaredNorm(); }};
}

SmoothFunction half_squared_distance(const Point& center) {
  return SmoothFunction{static_cast<std::size_t>(center.size()),
                        [center](const Point& x) -> Point { return x - center; }, 1.0,
                        [center](const Point& x) { return 0.5 * (x - center).squaredNorm(); }};
}

double estimate_gradient_lipschitz(const SmoothFunction& g, std::size_t pairs,
                                   std::uint64_t seed, double radius) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-radius, radius);
  const auto n = static_cast<Eigen::Index>(g.dimension);
  double best = 0.0;
  Point x(n), y(n);
  for (std::size_t k = 0; k < pairs; ++k) {
    for (Eigen::Index i = 0; i < n; ++i) x[i] = u(rng);
    for (Eigen::Index i = 0; i < n; ++i) y[i] = u(rng);
    const double dx = (x - y).norm();
    if (dx == 0.0) continue;
    best = std::max(best, (g.gradient(x) - g.gradient(y)).norm() / dx);
  }
  return best;
}

AveragedMap gradient_step(const SmoothFunction& g, double gamma) {
  require_positive(gamma, "gamma");
  require_positive(g.lipschitz, "lipschitz");
  const double two_beta = 2.0 / g.lipschitz;
  if (!(gamma < two_beta)) {
    throw ValidationError("gamma_upper", "gradient step needs gamma < 2*beta", gamma, two_beta);
  }
  auto grad = g.gradient;
  return AveragedMap(g.dimension, Alpha(gamma / two_beta),
                     [grad, gamma](const Point& x) -> Point { return x - gamma * grad(x); });
}

// ---------------------------------------------------------------------------

AveragedMap relax(const AveragedMap& t, double lambda) {
  require_positive(lambda, "lambda");
  const double sup = 1.0 / t.alpha().value();
  if (!(lambda * t.alpha().value() < 1.0)) {
    throw ValidationError("lambda_upper", "relaxation needs lambda < 1/alpha", lambda, sup);
  }
  if (lambda == 1.0) return t;
  return AveragedMap(
      t.dimension(), Alpha(lambda * t.alpha().value()),
      [t, lambda](const Point& x) -> Point { return x + lambda * (t(x) - x); }, MapTag::relaxed);
}

namespace {

std::size_t common_dimension(const std::vector<AveragedMap>& ts, const char* what) {
  if (ts.empty()) throw ValidationError("operators", std::string(what) + ": empty operator list");
  const std::size_t n = ts.front().dimension();
  for (const auto& t : ts) require_dimension(n, static_cast<Eigen::Index>(t.dimension()), what);
  return n;
}

std::vector<Alpha> constants_of(const std::vector<AveragedMap>& ts) {
  std::vector<Alpha> a;
  a.reserve(ts.size());
  for (const auto& t : ts) a.push_back(t.alpha());
  return a;
}

}  // namespace

AveragedMap compose(const std::vector<AveragedMap>& ts) {
  const std::size_t n = common_dimension(ts, "compose");
  if (ts.size() == 1) return ts.front();
  const Alpha alpha = compose_many_closed(constants_of(ts));
  return AveragedMap(
      n, alpha,
      [ts](const Point& x) -> Point {
        Point y = x;
        for (auto it = ts.rbegin(); it != ts.rend(); ++it) y = (*it)(y);
        return y;
      },
      MapTag::composed, ts);
}

AveragedMap combine(const Weights& w, const std::vector<AveragedMap>& ts) {
  const std::size_t n = common_dimension(ts, "combine");
  const Alpha alpha = convex_combination_constant(w, constants_of(ts));
  if (ts.size() == 1) return ts.front();
  std::vector<double> weights(w.entries().begin(), w.entries().end());
  return AveragedMap(
      n, alpha,
      [ts, weights](const Point& x) -> Point {
        Point y = weights[0] * ts[0](x);
        for (std::size_t i = 1; i < ts.size(); ++i) y += weights[i] * ts[i](x);
        return y;
      },
      MapTag::combined);
}

// ---------------------------------------------------------------------------

AveragednessReport verify_averaged(const AveragedMap& t, Alpha alpha, std::size_t pair_count,
                                   std::uint64_t seed, double box_radius) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-box_radius, box_radius);
  const auto n = static_cast<Eigen::Index>(t.dimension());
  const double a = alpha.value();

  AveragednessReport report{seed, pair_count, 0, -std::numeric_limits<double>::infinity(),
                            std::nullopt, std::nullopt};
  Point x(n), y(n);
  for (std::size_t k = 0; k < pair_count; ++k) {
    for (Eigen::Index i = 0; i < n; ++i) x[i] = u(rng);
    for (Eigen::Index i = 0; i < n; ++i) y[i] = u(rng);
    const Point tx = t(x);
    const Point ty = t(y);
    const Point dx = x - y;
    const Point dt = tx - ty;
    const double dx2 = dx.squaredNorm();
    const double dt2 = dt.squaredNorm();
    const double slack = 1e-9 * std::max(1.0, dx2);

    const double descent = dt2 - dx2 + (1.0 - a) / a * (dx - dt).squaredNorm();
    const double inner = dt2 + (1.0 - 2.0 * a) * dx2 - 2.0 * (1.0 - a) * dx.dot(dt);
    const double excess = std::max(descent, inner) - slack;
    if (excess > 0.0) ++report.violations;
    if (excess > report.max_violation) {
      report.max_violation = excess;
      report.worst_x = x;
      report.worst_y = y;
    }
  }
  return report;
}

}  // namespace opsplit
