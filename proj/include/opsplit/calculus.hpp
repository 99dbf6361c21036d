#pragma once

// Scalar calculus of averagedness constants.
//
// An operator T is alpha-averaged when T = (1 - alpha) Id + alpha R for some
// nonexpansive R. The functions here compute the constants that compositions,
// convex combinations and relaxations inherit from their factors, together with
// the relaxation ranges those constants admit in fixed-point iterations.
//
// All arithmetic is double precision. Closed forms are exact up to rounding;
// the alternative forms (recursive, symmetric-polynomial, series) exist as
// independent cross-checks of the closed form.

#include <cstddef>
#include <span>
#include <vector>

namespace opsplit {

/// An averagedness constant in the open interval ]0,1[.
class Alpha {
 public:
  explicit Alpha(double value);
  double value() const noexcept { return value_; }
  friend bool operator==(Alpha, Alpha) = default;

 private:
  double value_;
};

/// Convex-combination weights: entries in ]0,1], summing to one within 1e-12.
class Weights {
 public:
  explicit Weights(std::vector<double> entries);
  static Weights uniform(std::size_t count);

  std::span<const double> entries() const noexcept { return entries_; }
  std::size_t size() const noexcept { return entries_.size(); }
  double operator[](std::size_t i) const { return entries_[i]; }

 private:
  std::vector<double> entries_;
};

/// Safety margin of the extended relaxation ranges, in ]0,1/2[.
class Epsilon {
 public:
  explicit Epsilon(double value);
  double value() const noexcept { return value_; }

 private:
  double value_;
};

std::vector<Alpha> make_alphas(std::span<const double> values);

/// Upper end of an admissible relaxation interval.
struct Bound {
  double value;
  bool inclusive;

  bool admits(double x, double slack = 0.0) const noexcept {
    return inclusive ? x <= value + slack : x < value;
  }
};

struct RelaxationRanges {
  Bound km;        ///< ]0, 1/alpha[
  Bound extended;  ///< [eps, (1-eps)(1+eps*alpha)/alpha]
};

struct SeriesEstimate {
  double value;
  /// Upper bound on closed_form - value; value approaches from below.
  double tail_bound;
};

struct FbParameters {
  Alpha phi;
  double lambda_sup;
};

// Two-fold composition: (a1 + a2 - 2 a1 a2) / (1 - a1 a2).
Alpha compose2(Alpha a1, Alpha a2);

// phi(a_1..a_m) = 1 / (1 + 1 / sum a_i/(1-a_i)). A single constant is returned unchanged.
Alpha compose_many_closed(std::span<const Alpha> alphas);

// Left fold of compose2.
Alpha compose_many_recursive(std::span<const Alpha> alphas);

/// (sigma_1, ..., sigma_m), built one variable at a time via
/// s_{j+1}(k+1) = s_{j+1}(k) + a_{k+1} s_j(k).
std::vector<double> elementary_symmetric(std::span<const Alpha> alphas);

/// [sum (-1)^{j-1} j sigma_j] / [1 + sum_{j>=2} (-1)^{j-1} (j-1) sigma_j]; needs m >= 2.
Alpha compose_many_symmetric(std::span<const Alpha> alphas);

/// S_d / (1 + S_d) with S_d = sum_{l=1}^{depth} sum_i a_i^l.
SeriesEstimate compose_many_series(std::span<const Alpha> alphas, std::size_t depth);

Alpha convex_combination_constant(const Weights& w, std::span<const Alpha> alphas);

/// m max(a) / ((m-1) max(a) + 1): the older, coarser composition constant.
Alpha phi_tilde(std::span<const Alpha> alphas);

/// a1 + a2 - a1 a2: another older two-fold constant.
Alpha phi_hat(Alpha a1, Alpha a2);

/// sum_k w_k phi(string_k).
Alpha string_averaging_constant(std::span<const std::vector<Alpha>> strings, const Weights& w);

/// max_k m_k / (m_k - 1 + 1/max(string_k)).
Alpha string_averaging_constant_legacy(std::span<const std::vector<Alpha>> strings,
                                       const Weights& w);

RelaxationRanges relaxation_ranges(Alpha alpha, Epsilon eps);

/// Constants of J_{gamma A} o (Id - gamma B) for beta-cocoercive B.
/// Requires eps < min(1/2, beta) and gamma in [eps, 2 beta / (1 + eps)].
FbParameters fb_parameters(double beta, double gamma, Epsilon eps);

}  // namespace opsplit
