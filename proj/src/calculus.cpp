#include "opsplit/calculus.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "opsplit/errors.hpp"

namespace opsplit {

namespace {

constexpr double kWeightSumTolerance = 1e-12;

void require_nonempty(std::span<const Alpha> alphas, const char* what) {
  if (alphas.empty()) {
    throw ValidationError("alphas", std::string(what) + ": empty list of constants");
  }
}

double max_value(std::span<const Alpha> alphas) {
  double m = 0.0;
  for (Alpha a : alphas) m = std::max(m, a.value());
  return m;
}

// sum a_i / (1 - a_i)
double odds_sum(std::span<const Alpha> alphas) {
  double s = 0.0;
  for (Alpha a : alphas) s += a.value() / (1.0 - a.value());
  return s;
}

// Unevaluated sum hi + lo with |lo| <= ulp(hi)/2. The alternating sums of the
// symmetric form cancel down to prod(1 - a_i), which can be far below the size
// of the individual terms, so they are accumulated in double-double.
struct DoubleDouble {
  double hi = 0.0;
  double lo = 0.0;
};

DoubleDouble two_sum(double a, double b) {
  const double s = a + b;
  const double bb = s - a;
  const double err = (a - (s - bb)) + (b - bb);
  return {s, err};
}

DoubleDouble quick_two_sum(double a, double b) {
  const double s = a + b;
  return {s, b - (s - a)};
}

DoubleDouble operator+(DoubleDouble x, DoubleDouble y) {
  DoubleDouble s = two_sum(x.hi, y.hi);
  s.lo += x.lo + y.lo;
  return quick_two_sum(s.hi, s.lo);
}

DoubleDouble operator*(DoubleDouble x, double y) {
  const double p = x.hi * y;
  const double err = std::fma(x.hi, y, -p);
  return quick_two_sum(p, err + x.lo * y);
}

DoubleDouble operator-(DoubleDouble x) { return {-x.hi, -x.lo}; }

std::vector<DoubleDouble> symmetric_polynomials_dd(std::span<const Alpha> alphas) {
  const std::size_t m = alphas.size();
  // s[j] holds s_j(k) after processing k variables; s[0] = 1.
  std::vector<DoubleDouble> s(m + 1);
  s[0] = {1.0, 0.0};
  for (std::size_t k = 0; k < m; ++k) {
    const double a = alphas[k].value();
    for (std::size_t j = k + 1; j >= 1; --j) s[j] = s[j] + s[j - 1] * a;
  }
  return s;
}

}  // namespace

Alpha::Alpha(double value) : value_(value) {
  if (!(value > 0.0 && value < 1.0)) {
    throw ValidationError("alpha", "averagedness constant must lie in ]0,1[, got " +
                                       std::to_string(value),
                          value, value <= 0.0 ? 0.0 : 1.0);
  }
}

Weights::Weights(std::vector<double> entries) : entries_(std::move(entries)) {
  if (entries_.empty()) throw ValidationError("weights", "weights must be nonempty");
  double sum = 0.0;
  for (double w : entries_) {
    if (!(w > 0.0 && w <= 1.0)) {
      throw ValidationError("weights", "weight outside ]0,1]: " + std::to_string(w), w, 1.0);
    }
    sum += w;
  }
  if (std::abs(sum - 1.0) > kWeightSumTolerance) {
    throw ValidationError("weights", "weights must sum to 1, got " + std::to_string(sum), sum,
                          1.0);
  }
}

Weights Weights::uniform(std::size_t count) {
  if (count == 0) throw ValidationError("weights", "weights must be nonempty");
  std::vector<double> w(count, 1.0 / static_cast<double>(count));
  // Absorb the rounding of 1/count into the last entry so the sum is exact-ish.
  double head = 0.0;
  for (std::size_t i = 0; i + 1 < count; ++i) head += w[i];
  w.back() = 1.0 - head;
  return Weights(std::move(w));
}

Epsilon::Epsilon(double value) : value_(value) {
  if (!(value > 0.0 && value < 0.5)) {
    throw ValidationError("eps", "epsilon must lie in ]0,1/2[, got " + std::to_string(value),
                          value, value <= 0.0 ? 0.0 : 0.5);
  }
}

std::vector<Alpha> make_alphas(std::span<const double> values) {
  std::vector<Alpha> out;
  out.reserve(values.size());
  for (double v : values) out.emplace_back(v);
  return out;
}

Alpha compose2(Alpha a1, Alpha a2) {
  const double x = a1.value();
  const double y = a2.value();
  return Alpha((x + y - 2.0 * x * y) / (1.0 - x * y));
}

Alpha compose_many_closed(std::span<const Alpha> alphas) {
  require_nonempty(alphas, "compose_many_closed");
  if (alphas.size() == 1) return alphas.front();
  const double s = odds_sum(alphas);
  return Alpha(1.0 / (1.0 + 1.0 / s));
}

Alpha compose_many_recursive(std::span<const Alpha> alphas) {
  require_nonempty(alphas, "compose_many_recursive");
  Alpha beta = alphas.front();
  for (std::size_t k = 1; k < alphas.size(); ++k) {
    const double a = alphas[k].value();
    const double b = beta.value();
    beta = Alpha((a + b - 2.0 * a * b) / (1.0 - a * b));
  }
  return beta;
}

std::vector<double> elementary_symmetric(std::span<const Alpha> alphas) {
  require_nonempty(alphas, "elementary_symmetric");
  const auto s = symmetric_polynomials_dd(alphas);
  std::vector<double> sigma(alphas.size());
  for (std::size_t j = 1; j < s.size(); ++j) sigma[j - 1] = s[j].hi + s[j].lo;
  return sigma;
}

Alpha compose_many_symmetric(std::span<const Alpha> alphas) {
  if (alphas.size() < 2) {
    throw ValidationError("alphas", "compose_many_symmetric needs at least two constants",
                          static_cast<double>(alphas.size()), 2.0);
  }
  const auto s = symmetric_polynomials_dd(alphas);
  const std::size_t m = alphas.size();
  DoubleDouble num;
  DoubleDouble den{1.0, 0.0};
  for (std::size_t j = 1; j <= m; ++j) {
    const double sign = (j % 2 == 1) ? 1.0 : -1.0;
    num = num + s[j] * (sign * static_cast<double>(j));
    if (j >= 2) den = den + s[j] * (sign * static_cast<double>(j - 1));
  }
  // hi/lo division to double accuracy.
  const double q = num.hi / den.hi;
  const DoubleDouble r = num + -(den * q);
  return Alpha(q + (r.hi + r.lo) / den.hi);
}

SeriesEstimate compose_many_series(std::span<const Alpha> alphas, std::size_t depth) {
  require_nonempty(alphas, "compose_many_series");
  if (depth == 0) throw ValidationError("depth", "series depth must be positive", 0.0, 1.0);
  double s = 0.0;
  for (Alpha a : alphas) {
    double power = 1.0;
    double partial = 0.0;
    for (std::size_t l = 1; l <= depth; ++l) {
      power *= a.value();
      partial += power;
    }
    s += partial;
  }
  // Missing tail of sum_i sum_{l>d} a_i^l, pushed through s -> s/(1+s) whose
  // increment over [S_d, S] is (S - S_d) / ((1+S)(1+S_d)) <= tail / (1+S_d)^2.
  const double a_max = max_value(alphas);
  const double m = static_cast<double>(alphas.size());
  const double tail = m * std::pow(a_max, static_cast<double>(depth + 1)) / (1.0 - a_max);
  return {s / (1.0 + s), tail / ((1.0 + s) * (1.0 + s))};
}

Alpha convex_combination_constant(const Weights& w, std::span<const Alpha> alphas) {
  if (w.size() != alphas.size()) {
    throw ValidationError("weights", "weights and constants differ in length",
                          static_cast<double>(w.size()), static_cast<double>(alphas.size()));
  }
  double a = 0.0;
  for (std::size_t i = 0; i < alphas.size(); ++i) a += w[i] * alphas[i].value();
  return Alpha(a);
}

Alpha phi_tilde(std::span<const Alpha> alphas) {
  require_nonempty(alphas, "phi_tilde");
  const double m = static_cast<double>(alphas.size());
  const double a = max_value(alphas);
  return Alpha(m * a / ((m - 1.0) * a + 1.0));
}

Alpha phi_hat(Alpha a1, Alpha a2) {
  return Alpha(a1.value() + a2.value() - a1.value() * a2.value());
}

namespace {

void check_strings(std::span<const std::vector<Alpha>> strings, const Weights& w) {
  if (strings.size() != w.size()) {
    throw ValidationError("weights", "number of strings differs from number of weights",
                          static_cast<double>(strings.size()), static_cast<double>(w.size()));
  }
  for (const auto& s : strings) {
    if (s.empty()) throw ValidationError("strings", "string averaging: empty string");
  }
}

}  // namespace

Alpha string_averaging_constant(std::span<const std::vector<Alpha>> strings, const Weights& w) {
  check_strings(strings, w);
  double a = 0.0;
  for (std::size_t k = 0; k < strings.size(); ++k) {
    a += w[k] * compose_many_closed(strings[k]).value();
  }
  return Alpha(a);
}

Alpha string_averaging_constant_legacy(std::span<const std::vector<Alpha>> strings,
                                       const Weights& w) {
  check_strings(strings, w);
  double rho_max = 0.0;
  for (const auto& s : strings) {
    const double m = static_cast<double>(s.size());
    rho_max = std::max(rho_max, m / (m - 1.0 + 1.0 / max_value(s)));
  }
  return Alpha(rho_max);
}

RelaxationRanges relaxation_ranges(Alpha alpha, Epsilon eps) {
  const double a = alpha.value();
  const double e = eps.value();
  return {Bound{1.0 / a, false}, Bound{(1.0 - e) * (1.0 + e * a) / a, true}};
}

FbParameters fb_parameters(double beta, double gamma, Epsilon eps) {
  const double e = eps.value();
  if (!(beta > 0.0) || !std::isfinite(beta)) {
    throw ValidationError("beta", "cocoercivity constant must be positive", beta, 0.0);
  }
  if (!(e < beta)) {
    throw ValidationError("eps_beta", "epsilon must be below min(1/2, beta)", e, beta);
  }
  const double gamma_hi = 2.0 * beta / (1.0 + e);
  if (!(gamma >= e)) {
    throw ValidationError("gamma_lower", "step size below epsilon", gamma, e);
  }
  if (!(gamma <= gamma_hi)) {
    throw ValidationError("gamma_upper", "step size above 2*beta/(1+eps)", gamma, gamma_hi);
  }
  return {Alpha(2.0 * beta / (4.0 * beta - gamma)),
          (1.0 - e) * (2.0 + e - gamma / (2.0 * beta))};
}

}  // namespace opsplit
