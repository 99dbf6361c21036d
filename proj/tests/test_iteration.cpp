#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "opsplit/errors.hpp"
#include "opsplit/fixtures.hpp"
#include "opsplit/iteration.hpp"

using namespace opsplit;

namespace {

Point P(std::initializer_list<double> v) {
  Point p(static_cast<Eigen::Index>(v.size()));
  Eigen::Index i = 0;
  for (double x : v) p[i++] = x;
  return p;
}

AveragedMap halving() {
  return AveragedMap(1, Alpha(0.5), [](const Point& x) -> Point { return 0.5 * x; });
}

AveragedMap line_projection(double angle, const Point& through) {
  Matrix basis(2, 1);
  basis << std::cos(angle), std::sin(angle);
  return projection_map(ConvexSet::affine(basis, through));
}

StopRule cap(std::size_t n, double tol = 0.0) { return StopRule{n, tol, std::nullopt, 0.0}; }

bool same_bits(const IterationTrace& a, const IterationTrace& b) {
  if (a.records.size() != b.records.size()) return false;
  for (std::size_t i = 0; i < a.records.size(); ++i) {
    const auto& x = a.records[i];
    const auto& y = b.records[i];
    if (x.index != y.index || x.residual != y.residual || x.lambda != y.lambda ||
        x.alpha != y.alpha || x.error_norm != y.error_norm || x.running_sum != y.running_sum ||
        x.dist_to_ref != y.dist_to_ref) {
      return false;
    }
    if (x.iterate.has_value() != y.iterate.has_value()) return false;
    if (x.iterate && *x.iterate != *y.iterate) return false;
  }
  return a.final_iterate == b.final_iterate && a.iterations == b.iterations;
}

}  // namespace

TEST_SUITE("iteration") {
  TEST_CASE("sequence rules") {
    CHECK(SequenceRule::constant(1.3).at(17) == 1.3);
    CHECK(SequenceRule::harmonic(2.0).at(3) == 0.5);
    const auto t = SequenceRule::table({1.0, 1.2, 1.4});
    CHECK(t.at(1) == 1.2);
    CHECK(t.at(10) == 1.4);
    CHECK_FALSE(t.extrapolated(2));
    CHECK(t.extrapolated(3));
    CHECK(t.limit() == 1.4);
    const auto c = SequenceRule::cycle({0.5, 1.5});
    CHECK(c.at(4) == 0.5);
    CHECK(c.at(5) == 1.5);
    CHECK_FALSE(c.limit().has_value());
    CHECK_THROWS_AS(SequenceRule::table({}), ValidationError);
    CHECK_THROWS_AS(SequenceRule::harmonic(0.0), ValidationError);
    CHECK_THROWS_AS(SequenceRule::constant(INFINITY), ValidationError);
  }

  TEST_CASE("relaxation checks honor open and closed ends") {
    const Alpha a(2.0 / 3.0);
    const auto classical = Schedule::classical(SequenceRule::constant(1.0));
    CHECK_NOTHROW(check_relaxation(classical, 0, 1.49, a));
    CHECK_THROWS_AS(check_relaxation(classical, 0, 1.5, a), ScheduleViolation);
    CHECK_THROWS_AS(check_relaxation(classical, 0, 0.0, a), ScheduleViolation);

    const auto extended = Schedule::extended(SequenceRule::constant(1.0), Epsilon(0.1));
    CHECK_NOTHROW(check_relaxation(extended, 0, 0.1, a));
    CHECK_NOTHROW(check_relaxation(extended, 0, relaxation_ranges(a, Epsilon(0.1)).extended.value, a));
    CHECK_THROWS_AS(check_relaxation(extended, 0, 0.0999, a), ScheduleViolation);
    try {
      check_relaxation(extended, 7, 1.45, a);
      FAIL("expected a violation");
    } catch (const ScheduleViolation& e) {
      CHECK(e.index() == 7);
      CHECK(e.bound() == "lambda_upper");
      CHECK(e.lower() == 0.1);
      CHECK(std::abs(e.upper() - 1.44) < 1e-12);
    }
  }

  TEST_CASE("identity keeps the start point") {
    const auto t = km_run(identity_map(2), Schedule::classical(SequenceRule::constant(1.7)),
                          ErrorInjector::none(), P({3, -1}), cap(50));
    CHECK(t.iterations == 0);
    CHECK(t.stop_reason == StopReason::residual);
    CHECK(t.final_iterate == P({3, -1}));
  }

  TEST_CASE("projection onto the unit ball lands in one step") {
    RunOptions o;
    o.store_iterates = true;
    const auto t = km_run(projection_map(ConvexSet::ball(P({0, 0}), 1.0)),
                          Schedule::classical(SequenceRule::constant(1.0)), ErrorInjector::none(),
                          P({3, 4}), cap(10), o);
    CHECK(t.iterations == 1);
    CHECK((t.final_iterate - P({0.6, 0.8})).norm() < 1e-15);
    CHECK(t.final_residual == 0.0);
    CHECK(t.records.front().residual == doctest::Approx(4.0));
  }

  TEST_CASE("halving map matches the closed form") {
    for (double lambda : {1.0, 0.5, 1.8}) {
      RunOptions o;
      o.store_iterates = true;
      o.reference = P({0});
      const auto t = km_run(halving(), Schedule::classical(SequenceRule::constant(lambda)),
                            ErrorInjector::none(), P({1}), cap(40), o);
      REQUIRE(t.records.size() == 40);
      for (const auto& r : t.records) {
        const double expected = std::pow(1.0 - lambda / 2.0, static_cast<double>(r.index));
        CHECK(std::abs((*r.iterate)[0] - expected) <= 1e-12);
      }
      CHECK(t.fejer_violations == 0);
      CHECK(t.descent_violations == 0);
    }
    // lambda = 1: running sum of (2^-n-1)^2 is (1 - 4^-N) / 3.
    const auto t = km_run(halving(), Schedule::classical(SequenceRule::constant(1.0)),
                          ErrorInjector::none(), P({1}), cap(30));
    CHECK(std::abs(t.running_sum - (1.0 - std::pow(4.0, -30)) / 3.0) < 1e-15);
    double prev = 0.0;
    for (const auto& r : t.records) {
      CHECK(r.running_sum >= prev);
      prev = r.running_sum;
    }
  }

  TEST_CASE("schedule violations abort with the index and both bounds") {
    const auto sched = Schedule::classical(SequenceRule::table({1.0, 1.5, 1.9, 2.1}));
    try {
      km_run(halving(), sched, ErrorInjector::none(), P({1}), cap(10));
      FAIL("expected a violation");
    } catch (const ScheduleViolation& e) {
      CHECK(e.index() == 3);
      CHECK(e.value() == 2.1);
      CHECK(e.lower() == 0.0);
      CHECK(e.upper() == 2.0);
    }
    CHECK_THROWS_AS(km_run(identity_map(2), Schedule::classical(SequenceRule::constant(1.0)),
                           ErrorInjector::none(), P({1, 2, 3}), cap(5)),
                    ValidationError);
    CHECK_THROWS_AS(km_run(halving(), Schedule::classical(SequenceRule::constant(1.0)),
                           ErrorInjector::none(), P({1}), cap(0)),
                    ValidationError);
  }

  TEST_CASE("exhausted tables repeat and annotate") {
    const auto t = km_run(halving(), Schedule::classical(SequenceRule::table({1.0, 1.2})),
                          ErrorInjector::none(), P({1}), cap(6));
    CHECK(t.records.back().lambda == 1.2);
    REQUIRE(t.annotations.size() == 1);
    CHECK(t.annotations[0].find("exhausted") != std::string::npos);
  }

  TEST_CASE("thinning") {
    RunOptions o;
    o.thinning = 4;
    const auto t = km_run(halving(), Schedule::classical(SequenceRule::constant(1.0)),
                          ErrorInjector::none(), P({1}), cap(20), o);
    CHECK(t.records.size() == 5);
    CHECK(t.records[1].index == 4);
    const auto big = km_run(halving(), Schedule::classical(SequenceRule::constant(0.01)),
                            ErrorInjector::none(), P({1}), cap(20000));
    CHECK(big.thinning == 10);
    CHECK(big.records.size() == 2000);
  }

  TEST_CASE("composed run on two halfspaces") {
    const std::vector<ConvexSet> sets = {ConvexSet::halfspace(P({1, 1}), 1.0),
                                         ConvexSet::halfspace(P({-1, 2}), 0.5)};
    const std::vector<AveragedMap> factors = {projection_map(sets[0]), projection_map(sets[1])};
    RunOptions o;
    o.sets = sets;
    o.reference = P({0, 0});
    const auto t = composed_run(factors, Schedule::extended(SequenceRule::constant(1.4), Epsilon(0.1)),
                                ErrorInjector::none(), P({10, 7}), cap(2000, 1e-14), o);
    CHECK(t.stop_reason == StopReason::residual);
    for (double d : t.final_set_distances) CHECK(d < 1e-8);
    CHECK(std::abs(t.records.front().alpha - 2.0 / 3.0) < 1e-15);
    CHECK(t.fejer_violations == 0);
    CHECK(t.descent_violations == 0);
    REQUIRE(t.factor_displacement_sums.size() == 2);

    CHECK_THROWS_AS(composed_run(factors, Schedule::classical(SequenceRule::constant(1.0)),
                                 ErrorInjector::none(), P({1, 1}), cap(5)),
                    ValidationError);
    CHECK_THROWS_AS(composed_run(factors, Schedule::extended(SequenceRule::constant(1.0), Epsilon(0.1)),
                                 ErrorInjector::decaying(2, 3, 1.0, 2.0, 0), P({1, 1}), cap(5)),
                    ValidationError);
    CHECK_THROWS_AS(composed_run(factors, Schedule::extended(SequenceRule::constant(1.45), Epsilon(0.1)),
                                 ErrorInjector::none(), P({10, 7}), cap(5)),
                    ScheduleViolation);
  }

  TEST_CASE("a single factor reproduces km_run bit for bit") {
    const auto t = projection_map(ConvexSet::ball(P({1, 2}), 0.5));
    const auto sched = Schedule::extended(SequenceRule::cycle({0.3, 1.2, 1.5}), Epsilon(0.2));
    RunOptions o;
    o.store_iterates = true;
    o.reference = P({1, 2});
    const auto errors = ErrorInjector::decaying(2, 1, 0.5, 1.5, 42);
    const auto a = km_run(t, sched, errors, P({-4, 9}), cap(300), o);
    const auto b = composed_run(std::vector<AveragedMap>{t}, sched, errors, P({-4, 9}), cap(300), o);
    CHECK(same_bits(a, b));
  }

  TEST_CASE("summable per-factor errors keep the limit") {
    const Point meet = P({1, -2});
    const std::vector<AveragedMap> factors = {line_projection(0.4, meet), line_projection(1.9, meet)};
    const double lambda = 1.3;
    const auto sched = Schedule::extended(SequenceRule::constant(lambda), Epsilon(0.1));
    RunOptions o;
    o.reference = meet;
    const auto clean = composed_run(factors, sched, ErrorInjector::none(), P({5, 5}), cap(4000), o);
    const auto noisy = composed_run(factors, sched, ErrorInjector::decaying(2, 2, 1.0, 2.0, 0),
                                    P({5, 5}), cap(4000), o);
    CHECK((clean.final_iterate - noisy.final_iterate).norm() < 1e-4);
    REQUIRE(noisy.factor_error_sums.size() == 2);
    for (double s : noisy.factor_error_sums) CHECK(s <= lambda * std::numbers::pi * std::numbers::pi / 6.0);
    CHECK(noisy.error_bound_violations == 0);
    CHECK(noisy.fejer_violations == 0);
    CHECK(noisy.descent_violations == 0);
  }

  TEST_CASE("string averaging") {
    const auto ball = projection_map(ConvexSet::ball(P({0, 0}), 1.0));
    const auto x0 = P({3, 4});
    const auto sched = Schedule::classical(SequenceRule::constant(1.0));
    const auto s = string_run({{ball}}, Weights({1.0}), sched, x0, cap(10));
    const auto k = km_run(ball, sched, ErrorInjector::none(), x0, cap(10));
    CHECK(s.final_iterate == k.final_iterate);
    CHECK(s.iterations == k.iterations);

    const std::vector<ConvexSet> halves = {ConvexSet::halfspace(P({1, 0}), 0.0),
                                           ConvexSet::halfspace(P({1, 1}), -1.0)};
    RunOptions o;
    o.sets = halves;
    const auto avg = string_run({{projection_map(halves[0])}, {projection_map(halves[1])}},
                                Weights({0.5, 0.5}), sched, P({4, 3}), cap(5000, 1e-13), o);
    for (double d : avg.final_set_distances) CHECK(d < 1e-8);

    const auto f = feasibility_fixture(2, 0);
    const auto strings = projection_strings(f.sets, f.strings);
    const Weights w(f.weights);
    CHECK(std::abs(string_operator(strings, w).alpha().value() - 7.0 / 12.0) < 1e-15);
    RunOptions fo;
    fo.sets = f.sets;
    fo.reference = f.interior;
    const auto enlarged = string_run(strings, w, Schedule::classical(SequenceRule::constant(1.6)), f.x0,
                                     cap(5000, 1e-12), fo);
    CHECK(enlarged.stop_reason == StopReason::residual);
    for (double d : enlarged.final_set_distances) CHECK(d < 1e-8);
    CHECK(enlarged.fejer_violations == 0);
    CHECK_THROWS_AS(string_run(strings, w, Schedule::classical(SequenceRule::constant(1.75)), f.x0,
                               cap(10), fo),
                    ScheduleViolation);
  }

  TEST_CASE("string averaging flags a relaxation limit at the range end") {
    const auto f = feasibility_fixture(2, 0);
    const auto strings = projection_strings(f.sets, f.strings);
    const double edge = std::nextafter(12.0 / 7.0, 0.0);
    const auto t = string_run(strings, Weights(f.weights), Schedule::classical(SequenceRule::constant(edge)),
                              f.x0, cap(20));
    bool flagged = false;
    for (const auto& a : t.annotations) flagged = flagged || a.find("not guaranteed") != std::string::npos;
    CHECK(flagged);
  }

  TEST_CASE("quasi-Fejer checker") {
    std::vector<double> v, d, p;
    for (int n = 0; n < 40; ++n) {
      v.push_back(std::pow(2.0, -n));
      d.push_back(std::pow(2.0, -n - 1));
      p.push_back(0.0);
    }
    const auto ok = quasi_fejer_check(v, d, p);
    CHECK(ok.holds);
    CHECK(std::abs(ok.max_excess) < 1e-15);
    CHECK(ok.convergent);

    const std::vector<double> up = {1.0, 1.5, 2.0, 2.5};
    const std::vector<double> zero(3, 0.0);
    const auto bad = quasi_fejer_check(up, zero, zero);
    CHECK_FALSE(bad.holds);
    REQUIRE(bad.first_violation.has_value());
    CHECK(*bad.first_violation == 0);
  }

  TEST_CASE("the squared ledger holds on a perturbed run") {
    const Point meet = P({1, -2});
    const std::vector<AveragedMap> factors = {line_projection(0.4, meet), line_projection(1.9, meet)};
    const auto sched = Schedule::extended(SequenceRule::constant(1.3), Epsilon(0.1));
    RunOptions o;
    o.reference = meet;
    o.store_iterates = true;
    const auto t = composed_run(factors, sched, ErrorInjector::decaying(2, 2, 1.0, 2.0, 3), P({5, 5}),
                                cap(500), o);
    REQUIRE(t.nu.has_value());
    std::vector<double> values, decrements, perturbations;
    for (const auto& r : t.records) {
      values.push_back((*r.iterate - meet).squaredNorm());
      decrements.push_back(r.lambda * (1.0 / r.alpha - r.lambda) * r.residual * r.residual);
      perturbations.push_back(*t.nu * r.lambda * r.error_norm);
    }
    values.push_back((t.final_iterate - meet).squaredNorm());
    const auto q = quasi_fejer_check(values, decrements, perturbations, 1e-9);
    CHECK(q.holds);
    CHECK(q.convergent);
    CHECK(std::abs(q.decrement_sum - t.running_sum) <= 1e-9 * t.running_sum);
  }

  TEST_CASE("property: ledgers hold on seeded random instances") {
    std::mt19937_64 rng(2024);
    std::uniform_real_distribution<double> u(-3, 3), unit(0.0, 1.0);
    for (int k = 0; k < 40; ++k) {
      const Point c = P({u(rng), u(rng)});
      const std::vector<ConvexSet> sets = {ConvexSet::ball(c, 1.0 + unit(rng)),
                                           ConvexSet::halfspace(P({u(rng), u(rng)}).normalized(), 0.0),
                                           ConvexSet::box((c.array() - 0.5).matrix(), (c.array() + 2.0).matrix())};
      // Shift the halfspace so that c is strictly inside.
      const auto& h = std::get<HalfspaceSet>(sets[1].variant());
      const std::vector<ConvexSet> shifted = {sets[0], ConvexSet::halfspace(h.normal, h.normal.dot(c) + 0.2), sets[2]};
      std::vector<AveragedMap> factors;
      for (const auto& s : shifted) factors.push_back(projection_map(s));
      const Epsilon eps(0.05 + 0.4 * unit(rng));
      const double cap_value = relaxation_ranges(Alpha(0.75), eps).extended.value;
      const double lambda = eps.value() + (cap_value - eps.value()) * unit(rng);
      RunOptions o;
      o.reference = c;
      o.sets = shifted;
      const auto t = composed_run(factors, Schedule::extended(SequenceRule::constant(lambda), eps),
                                  ErrorInjector::decaying(2, 3, 0.3, 1.5, k), P({u(rng) * 5, u(rng) * 5}),
                                  cap(800), o);
      CHECK(t.fejer_violations == 0);
      CHECK(t.descent_violations == 0);
      CHECK(t.error_bound_violations == 0);
    }
  }

  TEST_CASE("identical inputs give identical traces") {
    const auto f = feasibility_fixture(3, 5);
    std::vector<AveragedMap> factors;
    for (const auto& s : f.sets) factors.push_back(projection_map(s));
    RunOptions o;
    o.store_iterates = true;
    o.reference = f.interior;
    auto run = [&] {
      return composed_run(factors, Schedule::extended(SequenceRule::cycle({1.0, 1.2}), Epsilon(0.1)),
                          ErrorInjector::decaying(3, 3, 0.1, 2.0, 9), f.x0, cap(200), o);
    };
    CHECK(same_bits(run(), run()));
  }
}
