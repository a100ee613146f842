#include "condest/numkernel.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <numbers>
#include <queue>
#include <stdexcept>
#include <vector>

#include <boost/math/quadrature/gauss.hpp>
#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <boost/math/special_functions/erf.hpp>
#include <boost/math/tools/roots.hpp>
#include <boost/math/tools/toms748_solve.hpp>

namespace condest {

namespace {

constexpr double kInvSqrt2Pi = 0.3989422804014326779399460599343818684758586311649;
constexpr double kLogSqrt2Pi = 0.9189385332046727417803297364056176398613974736378;
constexpr double kInvSqrt2 = 0.7071067811865475244008443621048490392848359376885;

// Below this argument the inverse Mills ratio switches to the continued fraction.
constexpr double kMillsSwitch = -30.0;

// Continued fraction 1 / (t + 1/(t + 2/(t + 3/(t + ...)))) for t >= 30,
// evaluated backwards from a fixed depth.
double upper_tail_ratio_cf(double t) {
  double tail = t;
  for (int k = 60; k >= 1; --k) tail = t + k / tail;
  return 1.0 / tail;
}

double x_phi(double x) { return std::isinf(x) ? 0.0 : x * phi(x); }
double x2p2_phi(double x) { return std::isinf(x) ? 0.0 : (x * x + 2.0) * phi(x); }

}  // namespace

// ---------------------------------------------------------------------------
// ExtendedReal

ExtendedReal::ExtendedReal(double v) : value_(v) {
  if (std::isnan(v)) throw std::invalid_argument("ExtendedReal: NaN is not an extended real");
}

bool ExtendedReal::is_finite() const { return std::isfinite(value_); }

ExtendedReal ExtendedReal::parse(std::string_view text) {
  std::string lowered;
  for (char c : text) {
    if (!std::isspace(static_cast<unsigned char>(c)))
      lowered.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
  }
  if (lowered == "inf" || lowered == "+inf") return pos_inf();
  if (lowered == "-inf") return neg_inf();
  double v = 0.0;
  const char* first = lowered.data();
  const char* last = first + lowered.size();
  if (!lowered.empty() && *first == '+') ++first;
  auto [ptr, ec] = std::from_chars(first, last, v);
  if (ec != std::errc() || ptr != last || !std::isfinite(v))
    throw std::invalid_argument("not a number or +/-inf: '" + std::string(text) + "'");
  return ExtendedReal(v);
}

std::string ExtendedReal::to_string() const {
  if (value_ == kInf) return "inf";
  if (value_ == -kInf) return "-inf";
  char buf[32];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, value_);
  return std::string(buf, ptr);
}

// ---------------------------------------------------------------------------
// Standard normal

double phi(double x) {
  if (std::isinf(x)) return 0.0;
  return kInvSqrt2Pi * std::exp(-0.5 * x * x);
}

double Phi(double x) { return 0.5 * std::erfc(-x * kInvSqrt2); }

double Phi_inv(double p) {
  if (!(p > 0.0 && p < 1.0)) throw std::invalid_argument("Phi_inv: p must lie in (0, 1)");
  return -std::numbers::sqrt2 * boost::math::erfc_inv(2.0 * p);
}

double upper_tail_ratio(double t) {
  if (t == kInf) return 0.0;
  if (t > -kMillsSwitch) return upper_tail_ratio_cf(t);
  return Phi(-t) / phi(t);
}

double log_Phi(double x) {
  if (x == -kInf) return -kInf;
  if (x < kMillsSwitch) return -0.5 * x * x - kLogSqrt2Pi + std::log(upper_tail_ratio_cf(-x));
  if (x > 5.0) return std::log1p(-Phi(-x));
  return std::log(Phi(x));
}

double Phi_diff(double hi, double lo) {
  // Work on the tail that keeps both terms small.
  if (lo + hi > 0.0) return Phi(-lo) - Phi(-hi);
  return Phi(hi) - Phi(lo);
}

double log_Phi_diff(double hi, double lo) {
  if (!(hi > lo)) throw std::invalid_argument("log_Phi_diff: requires hi > lo");
  if (lo == -kInf) return log_Phi(hi);
  if (hi == kInf) return log_Phi(-lo);
  const double direct = Phi_diff(hi, lo);
  if (direct > 1e-280) return std::log(direct);
  // Both ends deep in one tail: log Phi(u) + log(1 - Phi(l)/Phi(u)) on the lower side.
  const double u = (lo + hi > 0.0) ? -lo : hi;
  const double l = (lo + hi > 0.0) ? -hi : lo;
  const double log_u = log_Phi(u);
  const double log_l = log_Phi(l);
  return log_u + std::log(-std::expm1(log_l - log_u));
}

double mills(double x) {
  if (std::isnan(x)) throw std::invalid_argument("mills: NaN argument");
  if (x == kInf) return 0.0;
  if (x < kMillsSwitch) return 1.0 / upper_tail_ratio_cf(-x);
  return phi(x) / Phi(x);
}

TruncatedMoments truncated_moments(double lo, double hi) {
  if (std::isnan(lo) || std::isnan(hi) || !(lo < hi))
    throw std::invalid_argument("truncated_moments: requires lo < hi");
  if (lo == -kInf && hi == kInf) return {0.0, 1.0, 0.0};
  if (lo + hi < 0.0) {
    const TruncatedMoments m = truncated_moments(-hi, -lo);
    return {-m.m1, m.m2, -m.m3};
  }
  if (lo >= 0.0) {
    // Factor phi(lo) out of the mass and of every moment numerator.
    const bool open = (hi == kInf);
    const double e = open ? 0.0 : std::exp(-0.5 * (hi - lo) * (hi + lo));
    const double one_minus_e = open ? 1.0 : -std::expm1(-0.5 * (hi - lo) * (hi + lo));
    const double den = upper_tail_ratio(lo) - (open ? 0.0 : e * upper_tail_ratio(hi));
    TruncatedMoments m;
    m.m1 = one_minus_e / den;
    m.m2 = 1.0 + (lo - (open ? 0.0 : hi * e)) / den;
    m.m3 = ((lo * lo + 2.0) - (open ? 0.0 : (hi * hi + 2.0) * e)) / den;
    return m;
  }
  // lo < 0 < hi: the mass is bounded away from zero unless the interval is tiny.
  const double mass = Phi_diff(hi, lo);
  TruncatedMoments m;
  m.m1 = (phi(lo) - phi(hi)) / mass;
  m.m2 = 1.0 + (x_phi(lo) - x_phi(hi)) / mass;
  m.m3 = (x2p2_phi(lo) - x2p2_phi(hi)) / mass;
  return m;
}

double ratio_dd(double z1, double z2) {
  if (std::isnan(z1) || std::isnan(z2) || !(z1 > z2))
    throw std::invalid_argument("ratio_dd: requires z1 > z2");
  return -truncated_moments(z2, z1).m1;
}

double trunc_norm_var_factor(ExtendedReal b1, ExtendedReal b2) {
  if (!(b1 < b2)) throw std::invalid_argument("trunc_norm_var_factor: requires b1 < b2");
  const TruncatedMoments m = truncated_moments(b1.value(), b2.value());
  return std::clamp(m.variance(), std::numeric_limits<double>::min(), 1.0);
}

// ---------------------------------------------------------------------------
// Quadrature

namespace {

using Kronrod = boost::math::quadrature::gauss_kronrod<double, 15>;
using Gauss = boost::math::quadrature::gauss<double, 7>;

struct Panel {
  double a;
  double b;
  double value;
  double error;
  bool operator<(const Panel& other) const { return error < other.error; }
};

Panel apply_rule(const ScalarFunction& g, double a, double b) {
  const auto& x = Kronrod::abscissa();
  const auto& wk = Kronrod::weights();
  const auto& wg = Gauss::weights();
  const double mid = 0.5 * (a + b);
  const double half = 0.5 * (b - a);
  const double f0 = g(mid);
  double kronrod = f0 * wk[0];
  double gauss = f0 * wg[0];
  for (std::size_t i = 1; i < x.size(); ++i) {
    const double s = g(mid + half * x[i]) + g(mid - half * x[i]);
    kronrod += s * wk[i];
    if (i % 2 == 0) gauss += s * wg[i / 2];
  }
  kronrod *= half;
  gauss *= half;
  const double err = std::max(std::abs(kronrod - gauss), 4.0 * std::numeric_limits<double>::epsilon() * std::abs(kronrod));
  return {a, b, kronrod, err};
}

}  // namespace

QuadratureResult integrate_detailed(const ScalarFunction& f, ExtendedReal a_ext, ExtendedReal b_ext,
                                    double tol, std::optional<GaussianSupport> support) {
  if (!(tol > 0.0)) throw std::invalid_argument("integrate: tol must be positive");
  double a = a_ext.value();
  double b = b_ext.value();
  double sign = 1.0;
  if (a == b) return {};
  if (a > b) {
    std::swap(a, b);
    sign = -1.0;
  }

  if (support && (std::isinf(a) || std::isinf(b))) {
    const double width = 10.0 * support->scale;
    if (a == -kInf) a = std::min(support->center - width, b);
    if (b == kInf) b = std::max(support->center + width, a);
    if (a >= b) return {};
  }

  // Map any remaining infinite limit onto a finite interval.
  ScalarFunction g;
  double lo = a;
  double hi = b;
  if (std::isinf(a) && std::isinf(b)) {
    g = [&f](double t) {
      const double d = 1.0 - t * t;
      return f(t / d) * (1.0 + t * t) / (d * d);
    };
    lo = -1.0;
    hi = 1.0;
  } else if (std::isinf(b)) {
    g = [&f, a](double t) {
      const double d = 1.0 - t;
      return f(a + t / d) / (d * d);
    };
    lo = 0.0;
    hi = 1.0;
  } else if (std::isinf(a)) {
    g = [&f, b](double t) {
      const double d = 1.0 - t;
      return f(b - t / d) / (d * d);
    };
    lo = 0.0;
    hi = 1.0;
  } else {
    g = f;
  }

  constexpr int kMaxPanels = 4000;
  std::priority_queue<Panel> panels;
  Panel first = apply_rule(g, lo, hi);
  double total = first.value;
  double total_error = first.error;
  panels.push(first);
  while (total_error > tol) {
    if (static_cast<int>(panels.size()) >= kMaxPanels)
      throw NumericalError("integrate: no convergence after " + std::to_string(kMaxPanels) +
                           " panels (error estimate " + std::to_string(total_error) + ")");
    const Panel worst = panels.top();
    const double mid = 0.5 * (worst.a + worst.b);
    if (!(mid > worst.a && mid < worst.b)) {
      throw NumericalError("integrate: panel width below machine resolution");
    }
    panels.pop();
    const Panel left = apply_rule(g, worst.a, mid);
    const Panel right = apply_rule(g, mid, worst.b);
    total += left.value + right.value - worst.value;
    total_error += left.error + right.error - worst.error;
    panels.push(left);
    panels.push(right);
    if (total_error <= tol) {
      // Re-sum to shed the drift of the running totals before accepting.
      auto copy = panels;
      total = 0.0;
      total_error = 0.0;
      while (!copy.empty()) {
        total += copy.top().value;
        total_error += copy.top().error;
        copy.pop();
      }
    }
  }
  if (!std::isfinite(total)) throw NumericalError("integrate: non-finite integrand");
  return {sign * total, total_error, static_cast<int>(panels.size())};
}

// ---------------------------------------------------------------------------
// Root finding

RootResult solve_root(const ScalarFunction& f, Bracket bracket, double tol, int max_iterations) {
  if (!(bracket.lo < bracket.hi)) throw std::invalid_argument("solve_root: requires lo < hi");
  if (!(tol > 0.0)) throw std::invalid_argument("solve_root: tol must be positive");
  const double flo = f(bracket.lo);
  const double fhi = f(bracket.hi);
  if (std::isnan(flo) || std::isnan(fhi)) throw NumericalError("solve_root: NaN at bracket ends");
  if (flo == 0.0) return {bracket.lo, 0.0, 0, bracket};
  if (fhi == 0.0) return {bracket.hi, 0.0, 0, bracket};
  if ((flo > 0.0) == (fhi > 0.0))
    throw std::invalid_argument("solve_root: bracket does not change sign");

  boost::uintmax_t iterations = static_cast<boost::uintmax_t>(max_iterations);
  auto done = [tol](double lo, double hi) { return std::abs(hi - lo) <= tol; };
  auto wrapped = [&f](double x) {
    const double v = f(x);
    if (std::isnan(v)) throw NumericalError("solve_root: NaN during iteration");
    return v;
  };
  const auto [lo, hi] = boost::math::tools::toms748_solve(wrapped, bracket.lo, bracket.hi, flo, fhi,
                                                          done, iterations);
  if (static_cast<int>(iterations) >= max_iterations && !done(lo, hi))
    throw NumericalError("solve_root: iteration cap reached");
  const double f_lo = (lo == bracket.lo) ? flo : f(lo);
  const double f_hi = (hi == bracket.hi) ? fhi : f(hi);
  RootResult out;
  out.iterations = static_cast<int>(iterations);
  out.bracket = {lo, hi};
  if (std::abs(f_lo) <= std::abs(f_hi)) {
    out.root = lo;
    out.residual = f_lo;
  } else {
    out.root = hi;
    out.residual = f_hi;
  }
  return out;
}

std::optional<Bracket> expand_bracket(const ScalarFunction& f, double center, double initial,
                                      double limit) {
  if (!(initial > 0.0) || !(limit >= initial))
    throw std::invalid_argument("expand_bracket: requires 0 < initial <= limit");
  const double fc = f(center);
  if (fc == 0.0) return Bracket{center - initial, center + initial};
  for (double w = initial;; w = std::min(2.0 * w, limit)) {
    const double fl = f(center - w);
    if ((fl > 0.0) != (fc > 0.0) || fl == 0.0) return Bracket{center - w, center};
    const double fr = f(center + w);
    if ((fr > 0.0) != (fc > 0.0) || fr == 0.0) return Bracket{center, center + w};
    if (w >= limit) return std::nullopt;
  }
}

}  // namespace condest
