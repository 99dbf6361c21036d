#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>
#include <vector>

#include "opsplit/calculus.hpp"
#include "opsplit/errors.hpp"

using namespace opsplit;

namespace {

std::vector<Alpha> A(std::initializer_list<double> v) {
  std::vector<double> d(v);
  return make_alphas(d);
}

// Seeded tuples with m in {2..8}, entries in [0.01, 0.99].
std::vector<std::vector<Alpha>> random_tuples(std::size_t count, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<int> size(2, 8);
  std::uniform_real_distribution<double> value(0.01, 0.99);
  std::vector<std::vector<Alpha>> out;
  for (std::size_t k = 0; k < count; ++k) {
    std::vector<Alpha> t;
    const int m = size(rng);
    for (int i = 0; i < m; ++i) t.emplace_back(value(rng));
    out.push_back(std::move(t));
  }
  return out;
}

double max_of(const std::vector<Alpha>& a) {
  double m = 0.0;
  for (auto x : a) m = std::max(m, x.value());
  return m;
}

}  // namespace

TEST_SUITE("calculus") {
  TEST_CASE("domain types reject out-of-range values") {
    CHECK_THROWS_AS(Alpha(0.0), ValidationError);
    CHECK_THROWS_AS(Alpha(1.0), ValidationError);
    CHECK_THROWS_AS(Alpha(-0.2), ValidationError);
    CHECK_THROWS_AS(Alpha(std::nan("")), ValidationError);
    CHECK(Alpha(0.3).value() == 0.3);

    CHECK_THROWS_AS(Epsilon(0.0), ValidationError);
    CHECK_THROWS_AS(Epsilon(0.5), ValidationError);
    CHECK(Epsilon(0.1).value() == 0.1);

    CHECK_THROWS_AS(Weights({0.5, 0.6}), ValidationError);
    CHECK_THROWS_AS(Weights({1.5, -0.5}), ValidationError);
    CHECK_THROWS_AS(Weights({}), ValidationError);
    CHECK_NOTHROW(Weights({0.25, 0.75}));
    const Weights u = Weights::uniform(3);
    double s = 0.0;
    for (double w : u.entries()) s += w;
    CHECK(std::abs(s - 1.0) <= 1e-15);
  }

  TEST_CASE("compose2 oracle values") {
    CHECK(compose2(Alpha(0.75), Alpha(0.125)).value() == doctest::Approx(22.0 / 29.0).epsilon(1e-12));
    CHECK(std::abs(compose2(Alpha(0.75), Alpha(0.125)).value() - (7.0 / 8 - 3.0 / 16) / (29.0 / 32)) < 1e-15);
    CHECK(std::abs(compose2(Alpha(0.5), Alpha(0.5)).value() - 2.0 / 3.0) < 1e-15);
    CHECK(std::abs(compose2(Alpha(0.3), Alpha(0.3)).value() - 6.0 / 13.0) < 1e-15);
  }

  TEST_CASE("closed and recursive forms") {
    CHECK(std::abs(compose_many_closed(A({0.75, 0.125})).value() - 22.0 / 29.0) < 1e-15);
    CHECK(std::abs(compose_many_closed(A({0.5, 0.5, 0.5})).value() - 0.75) < 1e-15);
    CHECK(compose_many_closed(A({0.5})).value() == 0.5);
    CHECK(compose_many_closed(A({0.37})).value() == 0.37);
    CHECK_THROWS_AS(compose_many_closed({}), ValidationError);

    CHECK(std::abs(compose_many_recursive(A({0.75, 0.125})).value() - 22.0 / 29.0) < 1e-15);
    CHECK(std::abs(compose_many_recursive(A({0.5, 0.5, 0.5})).value() - 0.75) < 1e-15);
    CHECK_THROWS_AS(compose_many_recursive({}), ValidationError);

    auto p = A({0.2, 0.4, 0.6});
    const double ref = compose_many_recursive(p).value();
    std::sort(p.begin(), p.end(), [](Alpha a, Alpha b) { return a.value() < b.value(); });
    do {
      CHECK(std::abs(compose_many_recursive(p).value() - ref) < 1e-15);
      CHECK(std::abs(compose_many_closed(p).value() - ref) < 1e-15);
    } while (std::next_permutation(p.begin(), p.end(),
                                   [](Alpha a, Alpha b) { return a.value() < b.value(); }));
  }

  TEST_CASE("elementary symmetric polynomials") {
    const auto s2 = elementary_symmetric(A({0.75, 0.125}));
    REQUIRE(s2.size() == 2);
    CHECK(s2[0] == 0.875);
    CHECK(s2[1] == 0.09375);
    const auto s3 = elementary_symmetric(A({0.5, 0.5, 0.5}));
    REQUIRE(s3.size() == 3);
    CHECK(s3[0] == 1.5);
    CHECK(s3[1] == 0.75);
    CHECK(s3[2] == 0.125);
    CHECK(elementary_symmetric(A({0.3})) == std::vector<double>{0.3});
    CHECK_THROWS_AS(elementary_symmetric({}), ValidationError);
  }

  TEST_CASE("symmetric-polynomial form") {
    CHECK(std::abs(compose_many_symmetric(A({0.75, 0.125})).value() - 22.0 / 29.0) < 1e-14);
    CHECK(std::abs(compose_many_symmetric(A({0.5, 0.5, 0.5})).value() - 0.75) < 1e-14);
    CHECK(std::abs(compose_many_symmetric(A({0.9, 0.9})).value() - 18.0 / 19.0) < 1e-14);
    CHECK_THROWS_AS(compose_many_symmetric(A({0.5})), ValidationError);
    CHECK_THROWS_AS(compose_many_symmetric({}), ValidationError);
  }

  TEST_CASE("series form") {
    const auto one = compose_many_series(A({0.5, 0.5}), 1);
    CHECK(one.value == 0.5);
    const auto thirty = compose_many_series(A({0.5, 0.5}), 30);
    CHECK(std::abs(thirty.value - 2.0 / 3.0) < 1e-8);
    CHECK(thirty.value <= 2.0 / 3.0);
    CHECK(2.0 / 3.0 - thirty.value <= thirty.tail_bound);
    const auto single = compose_many_series(A({0.4}), 200);
    CHECK(std::abs(single.value - 0.4) < 1e-12);
    CHECK_THROWS_AS(compose_many_series(A({0.5}), 0), ValidationError);

    // Monotone upward in depth.
    double prev = 0.0;
    for (std::size_t d = 1; d <= 50; ++d) {
      const double v = compose_many_series(A({0.6, 0.3, 0.8}), d).value;
      CHECK(v >= prev);
      prev = v;
    }
  }

  TEST_CASE("convex combination") {
    CHECK(convex_combination_constant(Weights({1.0}), A({0.4})).value() == 0.4);
    CHECK(convex_combination_constant(Weights({0.5, 0.5}), A({0.5, 0.5})).value() == 0.5);
    CHECK(std::abs(convex_combination_constant(Weights({0.25, 0.75}), A({0.5, 0.25})).value() -
                   5.0 / 16.0) < 1e-15);
    CHECK_THROWS_AS(convex_combination_constant(Weights({1.0}), A({0.5, 0.5})), ValidationError);
  }

  TEST_CASE("older constants") {
    CHECK(phi_tilde(A({0.75, 0.125})).value() == 6.0 / 7.0);
    CHECK(std::abs(phi_tilde(A({0.5, 0.5})).value() - 2.0 / 3.0) < 1e-15);
    CHECK(phi_tilde(A({0.3})).value() == 0.3);
    CHECK_THROWS_AS(phi_tilde({}), ValidationError);

    CHECK(phi_hat(Alpha(0.75), Alpha(0.125)).value() == 25.0 / 32.0);
    CHECK(phi_hat(Alpha(0.5), Alpha(0.5)).value() == 0.75);
    CHECK(std::abs(phi_hat(Alpha(1e-6), Alpha(1e-6)).value() - 2e-6) < 1e-11);

    // Neither older bound dominates the other.
    CHECK(phi_hat(Alpha(0.75), Alpha(0.125)).value() < phi_tilde(A({0.75, 0.125})).value());
    CHECK(phi_hat(Alpha(0.5), Alpha(0.5)).value() > phi_tilde(A({0.5, 0.5})).value());
  }

  TEST_CASE("string averaging constants") {
    const std::vector<std::vector<Alpha>> strings = {A({0.5, 0.5}), A({0.5})};
    const Weights w({0.5, 0.5});
    CHECK(std::abs(string_averaging_constant(strings, w).value() - 7.0 / 12.0) < 1e-15);
    CHECK(std::abs(string_averaging_constant_legacy(strings, w).value() - 2.0 / 3.0) < 1e-15);

    const std::vector<std::vector<Alpha>> one = {A({0.75, 0.125})};
    CHECK(std::abs(string_averaging_constant(one, Weights({1.0})).value() - 22.0 / 29.0) < 1e-15);
    CHECK(std::abs(string_averaging_constant_legacy(one, Weights({1.0})).value() - 6.0 / 7.0) < 1e-15);

    const std::vector<std::vector<Alpha>> singletons = {A({0.5}), A({0.25})};
    const Weights w2({0.25, 0.75});
    CHECK(string_averaging_constant(singletons, w2).value() ==
          doctest::Approx(convex_combination_constant(w2, A({0.5, 0.25})).value()).epsilon(1e-15));
    const std::vector<std::vector<Alpha>> lone = {A({0.3})};
    CHECK(string_averaging_constant_legacy(lone, Weights({1.0})).value() ==
          doctest::Approx(0.3).epsilon(1e-15));

    CHECK_THROWS_AS(string_averaging_constant(strings, Weights({1.0})), ValidationError);
    const std::vector<std::vector<Alpha>> with_empty = {A({0.5}), {}};
    CHECK_THROWS_AS(string_averaging_constant(with_empty, w), ValidationError);
    CHECK_THROWS_AS(string_averaging_constant_legacy(with_empty, w), ValidationError);
  }

  TEST_CASE("relaxation ranges") {
    const auto r = relaxation_ranges(Alpha(2.0 / 3.0), Epsilon(0.1));
    CHECK(std::abs(r.km.value - 1.5) < 1e-15);
    CHECK_FALSE(r.km.inclusive);
    CHECK(std::abs(r.extended.value - 1.44) < 1e-14);
    CHECK(r.extended.inclusive);
    CHECK(r.extended.value < r.km.value);
    CHECK_FALSE(r.km.admits(1.5));
    CHECK(r.extended.admits(r.extended.value));
    CHECK(relaxation_ranges(Alpha(0.5), Epsilon(0.3)).km.value == 2.0);
    CHECK(relaxation_ranges(Alpha(2.0 / 3.0), Epsilon(1e-9)).extended.value ==
          doctest::Approx(1.5).epsilon(1e-8));
  }

  TEST_CASE("forward-backward parameters") {
    const auto p = fb_parameters(1.0, 1.0, Epsilon(0.1));
    CHECK(std::abs(p.phi.value() - 2.0 / 3.0) < 1e-15);
    CHECK(std::abs(p.lambda_sup - 1.44) < 1e-14);

    const double g = 2.0 / 1.1;
    const auto b = fb_parameters(1.0, g, Epsilon(0.1));
    CHECK(std::abs(b.phi.value() - 2.0 / (4.0 - g)) < 1e-15);
    CHECK(std::abs(b.lambda_sup - 0.9 * (2.1 - 1.0 / 1.1)) < 1e-14);
    const double phi = b.phi.value();
    CHECK(std::abs(b.lambda_sup - 0.9 * (1.0 + 0.1 * phi) / phi) < 1e-12);

    CHECK(fb_parameters(1.0, 0.1, Epsilon(0.1)).phi.value() < fb_parameters(1.0, 1.0, Epsilon(0.1)).phi.value());
    CHECK(std::abs(fb_parameters(100.0, 0.1, Epsilon(0.1)).phi.value() - 0.5) < 1e-3);

    try {
      fb_parameters(1.0, 1.9, Epsilon(0.1));
      FAIL("expected a range violation");
    } catch (const ValidationError& e) {
      CHECK(e.bound() == "gamma_upper");
      CHECK(e.limit() == doctest::Approx(20.0 / 11.0));
    }
    try {
      fb_parameters(1.0, 0.05, Epsilon(0.1));
      FAIL("expected a range violation");
    } catch (const ValidationError& e) {
      CHECK(e.bound() == "gamma_lower");
    }
    CHECK_THROWS_AS(fb_parameters(0.05, 0.06, Epsilon(0.1)), ValidationError);
  }

  TEST_CASE("property: the four forms agree on seeded tuples") {
    const auto tuples = random_tuples(1000, 7);
    double worst_rec = 0.0, worst_sym = 0.0;
    for (const auto& t : tuples) {
      const double closed = compose_many_closed(t).value();
      const double rec = compose_many_recursive(t).value();
      const double sym = compose_many_symmetric(t).value();
      const auto series = compose_many_series(t, 200);
      worst_rec = std::max(worst_rec, std::abs(closed - rec));
      worst_sym = std::max(worst_sym, std::abs(closed - sym));
      CHECK(closed - series.value <= series.tail_bound + 1e-15);
      CHECK(series.value <= closed + 1e-15);
    }
    CHECK(worst_rec <= 1e-10);
    CHECK(worst_sym <= 1e-10);
  }

  TEST_CASE("property: domination and ordering") {
    const auto tuples = random_tuples(1000, 11);
    for (const auto& t : tuples) {
      const double phi = compose_many_closed(t).value();
      CHECK(phi > max_of(t));
      CHECK(phi <= phi_tilde(t).value() + 1e-15);
      std::vector<Alpha> equal(t.size(), t.front());
      CHECK(std::abs(compose_many_closed(equal).value() - phi_tilde(equal).value()) < 1e-14);
      const double a1 = t[0].value(), a2 = t[1].value();
      const double gap = phi_hat(t[0], t[1]).value() - compose2(t[0], t[1]).value();
      CHECK(gap > 0.0);
      CHECK(std::abs(gap - a1 * a2 * (1 - a1) * (1 - a2) / (1 - a1 * a2)) < 1e-12);
    }
  }

  TEST_CASE("property: monotone in each argument") {
    const auto tuples = random_tuples(200, 13);
    for (const auto& t : tuples) {
      const double phi = compose_many_closed(t).value();
      for (std::size_t i = 0; i < t.size(); ++i) {
        auto up = t;
        up[i] = Alpha(std::min(0.999, t[i].value() + 1e-3));
        CHECK(compose_many_closed(up).value() > phi);
      }
    }
  }

  TEST_CASE("property: sharp string constant never exceeds the legacy one") {
    std::mt19937_64 rng(17);
    std::uniform_int_distribution<int> strings(1, 5), length(1, 4);
    std::uniform_real_distribution<double> value(0.01, 0.99), weight(0.1, 1.0);
    for (int k = 0; k < 1000; ++k) {
      const int p = strings(rng);
      std::vector<std::vector<Alpha>> s;
      std::vector<double> w;
      for (int i = 0; i < p; ++i) {
        std::vector<Alpha> str;
        const int m = length(rng);
        for (int j = 0; j < m; ++j) str.emplace_back(value(rng));
        s.push_back(std::move(str));
        w.push_back(weight(rng));
      }
      double total = 0.0;
      for (double x : w) total += x;
      for (double& x : w) x /= total;
      w.back() = 1.0;
      for (std::size_t i = 0; i + 1 < w.size(); ++i) w.back() -= w[i];
      const Weights weights(w);
      CHECK(string_averaging_constant(s, weights).value() <=
            string_averaging_constant_legacy(s, weights).value() + 1e-15);
    }
  }
}
