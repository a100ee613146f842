#pragma once

// Scalar kernels for the standard normal distribution, truncated-normal
// moments, adaptive quadrature and bracketed root finding.
//
// Every function here is pure; none keeps state between calls.

#include <compare>
#include <functional>
#include <limits>
#include <optional>
#include <string>
#include <string_view>

#include "condest/errors.hpp"

namespace condest {

inline constexpr double kInf = std::numeric_limits<double>::infinity();
inline constexpr double kDefaultQuadTol = 1e-10;
inline constexpr double kDefaultRootTol = 1e-10;

/// A real number or one of the two infinities. NaN is rejected.
class ExtendedReal {
 public:
  constexpr ExtendedReal() = default;
  ExtendedReal(double v);  // NOLINT(google-explicit-constructor)

  static ExtendedReal neg_inf() { return ExtendedReal(-kInf); }
  static ExtendedReal pos_inf() { return ExtendedReal(kInf); }

  /// Accepts "inf", "+inf", "-inf" (any case) or a decimal literal.
  static ExtendedReal parse(std::string_view text);

  constexpr double value() const { return value_; }
  bool is_finite() const;
  std::string to_string() const;

  friend constexpr auto operator<=>(ExtendedReal a, ExtendedReal b) {
    return a.value_ <=> b.value_;
  }
  friend constexpr bool operator==(ExtendedReal a, ExtendedReal b) {
    return a.value_ == b.value_;
  }

 private:
  double value_ = 0.0;
};

// ---------------------------------------------------------------------------
// Standard normal

/// Density; 0 at either infinity.
double phi(double x);
/// Distribution function; Phi(-inf) = 0, Phi(+inf) = 1.
double Phi(double x);
/// Quantile; throws std::invalid_argument unless 0 < p < 1.
double Phi_inv(double p);

/// log Phi(x), finite for every finite x.
double log_Phi(double x);
/// Phi(hi) - Phi(lo) for hi > lo, computed on whichever tail avoids 1 - 1.
double Phi_diff(double hi, double lo);
/// log(Phi(hi) - Phi(lo)) for hi > lo without underflow.
double log_Phi_diff(double hi, double lo);

/// Upper-tail ratio (1 - Phi(t)) / phi(t).
double upper_tail_ratio(double t);

/// Inverse Mills ratio phi(x) / Phi(x).
double mills(double x);

/// (phi(z1) - phi(z2)) / (Phi(z1) - Phi(z2)) for z1 > z2; either may be infinite.
double ratio_dd(double z1, double z2);

/// Raw moments E[T], E[T^2], E[T^3] of a standard normal truncated to [lo, hi].
struct TruncatedMoments {
  double m1 = 0.0;
  double m2 = 1.0;
  double m3 = 0.0;

  double variance() const { return m2 - m1 * m1; }
};
TruncatedMoments truncated_moments(double lo, double hi);

/// Variance of a standard normal truncated to [b1, b2]; in (0, 1].
double trunc_norm_var_factor(ExtendedReal b1, ExtendedReal b2);

// ---------------------------------------------------------------------------
// Quadrature

/// Location and scale of the Gaussian factor of an integrand. Infinite limits
/// are replaced by center +/- 10 * scale when a support hint is given.
struct GaussianSupport {
  double center = 0.0;
  double scale = 1.0;
};

using ScalarFunction = std::function<double(double)>;

struct QuadratureResult {
  double value = 0.0;
  double error = 0.0;
  int intervals = 0;
};

/// Adaptive Gauss-Kronrod (7/15) quadrature with an absolute error target.
/// Throws NumericalError if the target is not met within the interval budget.
QuadratureResult integrate_detailed(const ScalarFunction& f, ExtendedReal a, ExtendedReal b,
                                    double tol = kDefaultQuadTol,
                                    std::optional<GaussianSupport> support = std::nullopt);

inline double integrate(const ScalarFunction& f, ExtendedReal a, ExtendedReal b,
                        double tol = kDefaultQuadTol,
                        std::optional<GaussianSupport> support = std::nullopt) {
  return integrate_detailed(f, a, b, tol, support).value;
}

// ---------------------------------------------------------------------------
// Root finding

struct Bracket {
  double lo = 0.0;
  double hi = 0.0;
};

struct RootResult {
  double root = 0.0;
  double residual = 0.0;  // f(root)
  int iterations = 0;
  Bracket bracket;        // final enclosing bracket
};

/// Bracketed root of f (TOMS 748: bisection safeguarded inverse-cubic and
/// secant steps). Requires f(lo) * f(hi) <= 0; stops when the bracket is
/// narrower than tol. Returns whichever final endpoint has the smaller |f|.
RootResult solve_root(const ScalarFunction& f, Bracket bracket, double tol = kDefaultRootTol,
                      int max_iterations = 200);

/// Symmetric bracket search around center: half-width starts at initial and
/// doubles until f changes sign or the half-width exceeds limit.
std::optional<Bracket> expand_bracket(const ScalarFunction& f, double center, double initial,
                                      double limit);

}  // namespace condest
