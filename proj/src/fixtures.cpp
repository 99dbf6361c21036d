#include "opsplit/fixtures.hpp"

#include <Eigen/LU>
#include <algorithm>
#include <numeric>
#include <random>

#include "opsplit/errors.hpp"

namespace opsplit {

MinimizationProblem scalar_l1_problem() {
  Point c(1);
  c << 3.0;
  MinimizationProblem p;
  p.dimension = 1;
  p.prox = [](double gamma, const Point& y) { return prox_l1(y, gamma); };
  p.smooth = half_squared_distance(c);
  p.objective = [c](const Point& x) { return x.lpNorm<1>() + 0.5 * (x - c).squaredNorm(); };
  return p;
}

InclusionProblem box_inclusion_problem() {
  InclusionProblem p;
  p.dimension = 1;
  p.resolvent = [](double, const Point& y) -> Point { return y.cwiseMax(0.0); };
  p.cocoercive = [](const Point& x) -> Point { return x.array() - 2.0; };
  p.beta = 1.0;
  return p;
}

MinimizationProblem LassoFixture::problem() const {
  MinimizationProblem p;
  p.dimension = static_cast<std::size_t>(a.cols());
  const double t = tau;
  p.prox = [t](double gamma, const Point& y) { return prox_l1(y, gamma * t); };
  p.smooth = least_squares(a, b);
  p.smooth.lipschitz = 1.0 / beta;
  const auto g = p.smooth.value;
  p.objective = [t, g](const Point& x) { return t * x.lpNorm<1>() + g(x); };
  return p;
}

InclusionProblem LassoFixture::inclusion() const { return as_inclusion(problem()); }

LassoFixture lasso_fixture(std::size_t rows, std::size_t cols, double tau, std::uint64_t seed) {
  if (rows == 0 || cols == 0) throw ValidationError("lasso_size", "lasso fixture needs rows, cols > 0");
  if (!(tau > 0.0)) throw ValidationError("tau", "regularization must be positive", tau, 0.0);
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  const auto r = static_cast<Eigen::Index>(rows);
  const auto c = static_cast<Eigen::Index>(cols);
  LassoFixture f;
  f.tau = tau;
  f.a.resize(r, c);
  const double scale = 1.0 / std::sqrt(static_cast<double>(rows));
  for (Eigen::Index j = 0; j < c; ++j) {
    for (Eigen::Index i = 0; i < r; ++i) f.a(i, j) = normal(rng) * scale;
  }
  std::vector<std::size_t> idx(cols);
  std::iota(idx.begin(), idx.end(), 0);
  std::shuffle(idx.begin(), idx.end(), rng);
  f.x_true = Point::Zero(c);
  std::uniform_real_distribution<double> mag(1.0, 2.0);
  for (std::size_t k = 0; k < std::min<std::size_t>(5, cols); ++k) {
    const double sign = (rng() & 1) ? 1.0 : -1.0;
    f.x_true[static_cast<Eigen::Index>(idx[k])] = sign * mag(rng);
  }
  Point noise(r);
  for (Eigen::Index i = 0; i < r; ++i) noise[i] = 0.01 * normal(rng);
  f.b = f.a * f.x_true + noise;
  f.beta = 1.0 / largest_eigenvalue_gram(f.a);
  return f;
}

Point lasso_baseline(const LassoFixture& f, std::size_t iterations) {
  const Point atb = f.a.transpose() * f.b;
  const Matrix gram = f.a.transpose() * f.a;
  const double gamma = f.beta;
  Point x = Point::Zero(f.a.cols());
  for (std::size_t n = 0; n < iterations; ++n) {
    Point next = prox_l1(x - gamma * (gram * x - atb), gamma * f.tau);
    if (next == x) break;
    x = std::move(next);
  }
  return x;
}

InclusionProblem MonotoneLinearFixture::problem() const {
  InclusionProblem p;
  p.dimension = m.dimension();
  const MonotoneLinear mm = m;
  p.resolvent = [mm](double gamma, const Point& y) { return resolvent_linear(mm, gamma, y); };
  const Point c = target;
  p.cocoercive = [c](const Point& x) -> Point { return x - c; };
  p.beta = 1.0;
  return p;
}

MonotoneLinearFixture monotone_linear_fixture(const Matrix& m, const Point& target) {
  MonotoneLinear mm(m);
  if (static_cast<std::size_t>(target.size()) != mm.dimension()) {
    throw ValidationError("dimension", "target dimension differs from the matrix",
                          static_cast<double>(target.size()), static_cast<double>(mm.dimension()));
  }
  const Matrix shifted = m + Matrix::Identity(m.rows(), m.cols());
  Point solution = shifted.partialPivLu().solve(target);
  return MonotoneLinearFixture{std::move(mm), target, std::move(solution)};
}

namespace {

Point random_unit(std::mt19937_64& rng, Eigen::Index n) {
  std::normal_distribution<double> normal(0.0, 1.0);
  Point u(n);
  do {
    for (Eigen::Index i = 0; i < n; ++i) u[i] = normal(rng);
  } while (u.norm() < 1e-8);
  return u.normalized();
}

}  // namespace

FeasibilityFixture feasibility_fixture(std::size_t dimension, std::uint64_t seed) {
  if (dimension == 0) throw ValidationError("dimension", "feasibility fixture needs dimension > 0");
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  const auto n = static_cast<Eigen::Index>(dimension);
  FeasibilityFixture f;
  f.interior.resize(n);
  for (Eigen::Index i = 0; i < n; ++i) f.interior[i] = normal(rng);
  const Point u1 = random_unit(rng, n);
  const Point u2 = random_unit(rng, n);
  f.sets.push_back(ConvexSet::halfspace(u1, u1.dot(f.interior) + 0.25));
  f.sets.push_back(ConvexSet::halfspace(u2, u2.dot(f.interior) + 0.25));
  f.sets.push_back(ConvexSet::ball(f.interior + 0.5 * random_unit(rng, n), 1.0));
  f.x0 = f.interior + 5.0 * u1;
  f.strings = {{0, 1}, {2}};
  f.weights = {0.5, 0.5};
  return f;
}

std::vector<std::vector<AveragedMap>> projection_strings(
    const std::vector<ConvexSet>& sets, const std::vector<std::vector<std::size_t>>& strings) {
  std::vector<std::vector<AveragedMap>> out;
  out.reserve(strings.size());
  for (const auto& s : strings) {
    if (s.empty()) throw ValidationError("strings", "empty string");
    std::vector<AveragedMap> maps;
    for (std::size_t i : s) {
      if (i >= sets.size()) {
        throw ValidationError("strings", "string references a missing set",
                              static_cast<double>(i), static_cast<double>(sets.size()));
      }
      maps.push_back(projection_map(sets[i]));
    }
    out.push_back(std::move(maps));
  }
  return out;
}

}  // namespace opsplit
