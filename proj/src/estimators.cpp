#include "condest/estimators.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <stdexcept>

#include <fmt/format.h>

#include "condest/analytics.hpp"

namespace condest {

namespace {

constexpr double kLogSqrt2Pi = 0.9189385332046727417803297364056176398613974736378;

// Pooled means this far inside the conditioning region (in units of sigma1)
// carry a conditional correction below double precision.
constexpr double kFarInside = 40.0;

// Bracket search limits, in units of sigma0.
constexpr double kInitialHalfWidth = 3.0;
constexpr double kCmuLimit = 20.0;
constexpr double kWideLimit = 1e4;

bool far_inside(const CondContext& ctx, double y) {
  const double s1 = ctx.sigmas.sigma1;
  return (y - ctx.interval.lo) / s1 > kFarInside && (ctx.interval.hi - y) / s1 > kFarInside;
}

void check_stats(const CondContext& ctx, const SufficientStats& stats) {
  stats.validate();
  if (stats.n1 != ctx.design.n1 || stats.n_total != ctx.n_total())
    throw std::invalid_argument(fmt::format(
        "stats sizes (n1={}, N={}) do not match the design decision (n1={}, N={})", stats.n1,
        stats.n_total, ctx.design.n1, ctx.n_total()));
  if (decide(ctx.design, stats.y1).r != ctx.r())
    throw std::invalid_argument(fmt::format("y1={} is inconsistent with decision R={}", stats.y1,
                                            to_int(ctx.r())));
}

Estimate passthrough(Method m, const CondContext& ctx, const SufficientStats& stats) {
  Estimate e;
  e.method = m;
  e.point = stats.y;
  e.se = ctx.sigmas.sigma0;
  e.diagnostics["correction_below_precision"] = 1.0;
  e.notes.push_back("correction below machine precision; conditional estimate equals ML");
  return e;
}

// Conditional law of the pooled mean for one value of mu.
class CondLaw {
 public:
  CondLaw(double mu, const CondContext& ctx) : mu_(mu), ctx_(ctx) {
    const double s1 = ctx.sigmas.sigma1;
    const double a_hi = (ctx.interval.hi - mu) / s1;
    const double a_lo = (ctx.interval.lo - mu) / s1;
    log_mass_ = log_Phi_diff(a_hi, a_lo);
    if (!std::isfinite(log_mass_))
      throw NumericalError("conditional density: unsupported region (conditioning probability is zero)");
    mass_ = std::exp(log_mass_);
    hazard_ = ratio_dd(a_hi, a_lo) / s1;
    center_ = mu + ml_cond_bias(mu, ctx);
  }

  double density(double y) const {
    const double s0 = ctx_.sigmas.sigma0;
    const double sa = ctx_.sigmas.sigmaA;
    const double u = (y - mu_) / s0;
    const double h_hi = (ctx_.interval.hi - y) / sa;
    const double h_lo = (ctx_.interval.lo - y) / sa;
    if (mass_ > 1e-280) return Phi_diff(h_hi, h_lo) * phi(u) / (s0 * mass_);
    if (!(h_hi > h_lo)) return 0.0;
    return std::exp(log_Phi_diff(h_hi, h_lo) - log_mass_ - 0.5 * u * u - kLogSqrt2Pi) / s0;
  }

  // d/dmu log f(y | mu)
  double score(double y) const {
    const double s0 = ctx_.sigmas.sigma0;
    return (y - mu_) / (s0 * s0) + hazard_;
  }

  GaussianSupport support() const { return {center_, ctx_.sigmas.sigma0}; }
  double center() const { return center_; }

 private:
  double mu_;
  const CondContext& ctx_;
  double log_mass_ = 0.0;
  double mass_ = 1.0;
  double hazard_ = 0.0;
  double center_ = 0.0;
};

double loglik_bias_correction(double mu, const CondContext& ctx) {
  const LogLikCurvature c = cml_curvature(mu, ctx);
  return c.d3 / (2.0 * c.d2 * c.d2);
}

void check_level(double level) {
  if (!(level > 0.0 && level < 1.0)) throw std::invalid_argument("confidence level must lie in (0, 1)");
}

}  // namespace

// ---------------------------------------------------------------------------

std::string_view method_name(Method m) {
  switch (m) {
    case Method::ML: return "ML";
    case Method::RB: return "RB";
    case Method::CMU: return "CMU";
    case Method::CML: return "CML";
    case Method::CMLc: return "CMLc";
    case Method::WM_FIXED: return "WM_FIXED";
    case Method::LH: return "LH";
  }
  return "?";
}

Method parse_method(std::string_view name) {
  std::string upper;
  for (char c : name) upper.push_back(static_cast<char>(std::toupper(static_cast<unsigned char>(c))));
  for (Method m : {Method::ML, Method::RB, Method::CMU, Method::CML, Method::CMLc, Method::WM_FIXED,
                   Method::LH}) {
    std::string candidate(method_name(m));
    for (char& c : candidate) c = static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
    if (candidate == upper) return m;
  }
  throw std::invalid_argument(fmt::format("unknown estimator '{}'", name));
}

SufficientStats SufficientStats::from_stage_means(int n1, double y1, int n2, double y2) {
  SufficientStats s;
  s.n1 = n1;
  s.n2 = n2;
  s.n_total = n1 + n2;
  s.y1 = y1;
  s.y2 = y2;
  s.y = n2 > 0 ? (n1 * y1 + n2 * y2) / s.n_total : y1;
  s.validate();
  return s;
}

SufficientStats SufficientStats::from_pooled(int n1, double y1, int n_total, double y) {
  SufficientStats s;
  s.n1 = n1;
  s.n_total = n_total;
  s.n2 = n_total - n1;
  s.y1 = y1;
  s.y = y;
  if (s.n2 > 0) {
    s.y2 = (n_total * y - n1 * y1) / s.n2;
  } else {
    s.y2 = y1;
  }
  s.validate();
  return s;
}

void SufficientStats::validate() const {
  if (n1 < 1) throw std::invalid_argument("stats: n1 must be >= 1");
  if (n2 < 0) throw std::invalid_argument("stats: n2 must be >= 0");
  if (n_total != n1 + n2) throw std::invalid_argument("stats: n_total must equal n1 + n2");
  if (!std::isfinite(y1) || !std::isfinite(y2) || !std::isfinite(y))
    throw std::invalid_argument("stats: means must be finite");
  const double lhs = n1 * y1 + n2 * y2;
  const double rhs = n_total * y;
  if (std::abs(lhs - rhs) > 1e-10 * std::max(1.0, std::abs(rhs)))
    throw std::invalid_argument("stats: n1*y1 + n2*y2 must equal N*y");
}

CondContext CondContext::make(const TwoStageDesign& design, Outcome r) {
  if (r == Outcome::futility)
    throw ScopeError("conditional estimators are defined only for R=1 and R=2");
  design.validate();
  CondContext ctx;
  ctx.design = design;
  ctx.decision = decision_for(design, r);
  ctx.sigmas = stage_sigmas(design, ctx.decision);
  ctx.interval = conditioning_interval(design, r);
  if (!(ctx.interval.lo < ctx.interval.hi))
    throw std::invalid_argument("conditioning interval is empty");
  return ctx;
}

// ---------------------------------------------------------------------------
// Unconditional

Estimate ml(const SufficientStats& stats, double sigma) {
  stats.validate();
  Estimate e;
  e.method = Method::ML;
  e.point = stats.y;
  e.se = sigma / std::sqrt(static_cast<double>(stats.n_total));
  return e;
}

Estimate wm_fixed(const SufficientStats& stats, const TwoStageDesign& design) {
  stats.validate();
  if (stats.n2 <= 0) throw std::invalid_argument("wm_fixed: requires stage-2 data");
  const double w1 = 2.0 * design.n1 / static_cast<double>(design.n0 + design.nmax);
  Estimate e;
  e.method = Method::WM_FIXED;
  e.point = w1 * stats.y1 + (1.0 - w1) * stats.y2;
  e.diagnostics["w1"] = w1;
  if (design.c1.is_finite())
    e.notes.push_back("design allows a futility stop; fixed weights are not unbiased");
  return e;
}

Estimate lawrence_hung(const SufficientStats& stats, const TwoStageDesign& design) {
  stats.validate();
  const double w1 = std::sqrt(design.n1 / static_cast<double>(design.n0));
  const double w2 = std::sqrt(std::max(0.0, 1.0 - w1 * w1));
  const double a = w1 * std::sqrt(static_cast<double>(stats.n1));
  const double b = w2 * std::sqrt(static_cast<double>(stats.n2));
  Estimate e;
  e.method = Method::LH;
  e.point = (a * stats.y1 + b * stats.y2) / (a + b);
  e.diagnostics["w1"] = w1;
  e.diagnostics["w2"] = w2;
  return e;
}

// ---------------------------------------------------------------------------
// Rao-Blackwell

double rb_of_pooled(const CondContext& ctx, double y) {
  const double sa = ctx.sigmas.sigmaA;
  const double z_lo = (y - ctx.interval.lo) / sa;
  const double z_hi = (y - ctx.interval.hi) / sa;
  return y - ctx.sigmas.sigmaB * ratio_dd(z_lo, z_hi);
}

double rb_derivative(const CondContext& ctx, double y) {
  const double sa = ctx.sigmas.sigmaA;
  const double z_lo = (y - ctx.interval.lo) / sa;
  const double z_hi = (y - ctx.interval.hi) / sa;
  const double v = truncated_moments(z_hi, z_lo).variance();
  return 1.0 + ctx.sigmas.sigmaB / sa * (1.0 - v);
}

Estimate rb(const CondContext& ctx, const SufficientStats& stats, const EstimatorOptions& opts) {
  check_stats(ctx, stats);
  if (far_inside(ctx, stats.y)) return passthrough(Method::RB, ctx, stats);
  Estimate e;
  e.method = Method::RB;
  e.point = rb_of_pooled(ctx, stats.y);
  e.diagnostics["correction"] = e.point - stats.y;
  if (opts.with_se) {
    const double g = rb_derivative(ctx, e.point);
    e.se = std::abs(g) * std::sqrt(ml_cond_var(e.point, ctx));
  }
  return e;
}

// ---------------------------------------------------------------------------
// Conditional distribution

double cond_density(double y, double mu, const CondContext& ctx) {
  return CondLaw(mu, ctx).density(y);
}

double cond_mean(double mu, const CondContext& ctx) { return mu + ml_cond_bias(mu, ctx); }

double cond_cdf(double x, double mu, const CondContext& ctx, double tol) {
  if (x == kInf) return 1.0;
  if (x == -kInf) return 0.0;
  const CondLaw law(mu, ctx);
  auto f = [&law](double y) { return law.density(y); };
  double value;
  if (x <= law.center()) {
    value = integrate(f, ExtendedReal::neg_inf(), x, tol, law.support());
  } else {
    value = 1.0 - integrate(f, x, ExtendedReal::pos_inf(), tol, law.support());
  }
  return std::clamp(value, 0.0, 1.0);
}

double cond_cdf_dmu(double x, double mu, const CondContext& ctx, double tol) {
  if (std::isinf(x)) return 0.0;
  const CondLaw law(mu, ctx);
  auto f = [&law](double y) { return law.density(y) * law.score(y); };
  // The weighted density integrates to zero over the line.
  if (x <= law.center()) return integrate(f, ExtendedReal::neg_inf(), x, tol, law.support());
  return -integrate(f, x, ExtendedReal::pos_inf(), tol, law.support());
}

// ---------------------------------------------------------------------------
// CMU

Estimate cmu(const CondContext& ctx, const SufficientStats& stats, double q,
             const EstimatorOptions& opts) {
  if (!(q > 0.0 && q < 1.0)) throw std::invalid_argument("cmu: q must lie in (0, 1)");
  check_stats(ctx, stats);
  if (far_inside(ctx, stats.y) && q == 0.5) return passthrough(Method::CMU, ctx, stats);

  const double y = stats.y;
  const double s0 = ctx.sigmas.sigma0;
  auto f = [&](double mu) { return cond_cdf(y, mu, ctx, opts.quad_tol) - q; };
  const auto bracket = expand_bracket(f, y, kInitialHalfWidth * s0, kCmuLimit * s0);
  if (!bracket)
    throw NumericalError(fmt::format("cmu: no sign change within y +/- {} sigma0", kCmuLimit));
  const RootResult root = solve_root(f, *bracket, opts.root_tol);

  Estimate e;
  e.method = Method::CMU;
  e.point = root.root;
  e.diagnostics["residual"] = root.residual;
  e.diagnostics["iterations"] = root.iterations;
  e.diagnostics["bracket_lo"] = bracket->lo;
  e.diagnostics["bracket_hi"] = bracket->hi;
  if (opts.with_se) {
    e.se = std::sqrt(cmu_var_approx(e.point, ctx, opts.quad_tol));
    e.notes.push_back("standard error is a delta-method approximation known to be inaccurate");
  }
  return e;
}

ConfidenceInterval cmu_ci(const CondContext& ctx, const SufficientStats& stats, double level,
                          const EstimatorOptions& opts) {
  check_level(level);
  EstimatorOptions inner = opts;
  inner.with_se = false;
  const double q_lo = 0.5 * (1.0 - level);
  const double q_hi = 0.5 * (1.0 + level);
  // The CDF falls in mu, so the larger quantile gives the lower end.
  const double lower = cmu(ctx, stats, q_hi, inner).point;
  const double upper = cmu(ctx, stats, q_lo, inner).point;
  return {std::min(lower, upper), std::max(lower, upper)};
}

// ---------------------------------------------------------------------------
// CML

double cml_loglik(double mu, const CondContext& ctx, const SufficientStats& stats) {
  const double sigma = ctx.design.sigma;
  const double s1 = ctx.sigmas.sigma1;
  const double d = stats.y - mu;
  const double log_mass = log_Phi_diff((ctx.interval.hi - mu) / s1, (ctx.interval.lo - mu) / s1);
  return -stats.n_total * d * d / (2.0 * sigma * sigma) - log_mass;
}

double cml_score(double mu, const CondContext& ctx, const SufficientStats& stats) {
  const double sigma = ctx.design.sigma;
  const double s1 = ctx.sigmas.sigma1;
  const double b_hi = (ctx.interval.hi - mu) / s1;
  const double b_lo = (ctx.interval.lo - mu) / s1;
  return stats.n_total * (stats.y - mu) / (sigma * sigma) + ratio_dd(b_hi, b_lo) / s1;
}

LogLikCurvature cml_curvature(double mu, const CondContext& ctx) {
  const double sigma = ctx.design.sigma;
  const double s = ctx.sigmas.sigma1;
  const TruncatedMoments m = truncated_moments((ctx.interval.lo - mu) / s, (ctx.interval.hi - mu) / s);
  const double kappa2 = m.variance();
  const double kappa3 = m.m3 - 3.0 * m.m1 * m.m2 + 2.0 * m.m1 * m.m1 * m.m1;
  LogLikCurvature c;
  c.d2 = -ctx.n_total() / (sigma * sigma) + (1.0 - kappa2) / (s * s);
  c.d3 = -kappa3 / (s * s * s);
  return c;
}

Estimate cml(const CondContext& ctx, const SufficientStats& stats, const EstimatorOptions& opts) {
  check_stats(ctx, stats);
  if (far_inside(ctx, stats.y)) return passthrough(Method::CML, ctx, stats);

  const double y = stats.y;
  const double s0 = ctx.sigmas.sigma0;
  // Score scaled by sigma^2 / N, i.e. in outcome units; decreasing in mu.
  auto score = [&](double mu) { return y - mu - ml_cond_bias(mu, ctx); };
  const auto bracket = expand_bracket(score, y, kInitialHalfWidth * s0, kWideLimit * s0);
  if (!bracket) throw NumericalError("cml: score has no root in the expanded bracket");
  const RootResult root = solve_root(score, *bracket, opts.root_tol);

  Estimate e;
  e.method = Method::CML;
  e.point = root.root;
  e.diagnostics["residual"] = root.residual;
  e.diagnostics["iterations"] = root.iterations;
  e.diagnostics["bracket_lo"] = bracket->lo;
  e.diagnostics["bracket_hi"] = bracket->hi;
  if (opts.with_se) {
    const double j = cml_curvature(e.point, ctx).d2;
    if (!(j < 0.0)) throw NumericalError("cml: observed information is not positive");
    e.se = std::sqrt(-1.0 / j);
  }
  return e;
}

ConfidenceInterval cml_lr_ci(const CondContext& ctx, const SufficientStats& stats, double level,
                             const EstimatorOptions& opts) {
  check_level(level);
  EstimatorOptions inner = opts;
  inner.with_se = false;
  const double mle = cml(ctx, stats, inner).point;
  const double z = Phi_inv(0.5 * (1.0 + level));
  const double crit = z * z;
  const double top = cml_loglik(mle, ctx, stats);
  auto g = [&](double mu) { return 2.0 * (top - cml_loglik(mu, ctx, stats)) - crit; };

  const double step = z * ctx.sigmas.sigma0;
  auto side = [&](double direction) {
    double w = step;
    for (int i = 0; i < 60; ++i, w *= 2.0) {
      const double edge = mle + direction * w;
      if (g(edge) > 0.0) {
        Bracket b = direction > 0 ? Bracket{mle, edge} : Bracket{edge, mle};
        return solve_root(g, b, opts.root_tol).root;
      }
    }
    throw NumericalError("cml_lr_ci: likelihood-ratio bound not bracketed");
  };
  return {side(-1.0), side(1.0)};
}

Estimate cmlc(const CondContext& ctx, const SufficientStats& stats, const EstimatorOptions& opts) {
  check_stats(ctx, stats);
  if (far_inside(ctx, stats.y)) return passthrough(Method::CMLc, ctx, stats);

  EstimatorOptions inner = opts;
  inner.with_se = false;
  const Estimate base = cml(ctx, stats, inner);
  const double target = base.point;
  const double s0 = ctx.sigmas.sigma0;
  auto h = [&](double mu) { return mu + loglik_bias_correction(mu, ctx) - target; };
  const auto bracket = expand_bracket(h, target, kInitialHalfWidth * s0, kWideLimit * s0);
  if (!bracket) throw NumericalError("cmlc: bias equation has no root in the expanded bracket");
  const RootResult root = solve_root(h, *bracket, opts.root_tol);

  Estimate e;
  e.method = Method::CMLc;
  e.point = root.root;
  e.diagnostics["residual"] = root.residual;
  e.diagnostics["iterations"] = root.iterations;
  e.diagnostics["cml"] = target;
  e.diagnostics["plugin_alternative"] = target - loglik_bias_correction(target, ctx);
  if (opts.with_se) {
    const double j = cml_curvature(e.point, ctx).d2;
    if (j < 0.0) e.se = std::sqrt(-1.0 / j);
  }
  return e;
}

Estimate estimate(Method m, const TwoStageDesign& design, const InterimDecision& decision,
                  const SufficientStats& stats, const EstimatorOptions& opts) {
  switch (m) {
    case Method::ML: return ml(stats, design.sigma);
    case Method::WM_FIXED: return wm_fixed(stats, design);
    case Method::LH: return lawrence_hung(stats, design);
    default: break;
  }
  const CondContext ctx = CondContext::make(design, decision.r);
  switch (m) {
    case Method::RB: return rb(ctx, stats, opts);
    case Method::CMU: return cmu(ctx, stats, 0.5, opts);
    case Method::CML: return cml(ctx, stats, opts);
    case Method::CMLc: return cmlc(ctx, stats, opts);
    default: break;
  }
  throw std::logic_error("unhandled estimator");
}

}  // namespace condest
