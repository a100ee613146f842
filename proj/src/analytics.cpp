#include "condest/analytics.hpp"

#include <cctype>
#include <cmath>
#include <stdexcept>
#include <string>

#include <fmt/format.h>

#include "condest/estimators.hpp"

namespace condest {

namespace {

struct QuantityInfo {
  CurveQuantity quantity;
  std::string_view name;
};

constexpr QuantityInfo kQuantities[] = {
    {CurveQuantity::WM_BIAS, "WM_BIAS"},         {CurveQuantity::ML_BIAS_R1, "ML_BIAS_R1"},
    {CurveQuantity::ML_BIAS_R2, "ML_BIAS_R2"},   {CurveQuantity::CML_BIAS_R1, "CML_BIAS_R1"},
    {CurveQuantity::CML_BIAS_R2, "CML_BIAS_R2"}, {CurveQuantity::CMU_BIAS_R1, "CMU_BIAS_R1"},
    {CurveQuantity::CMU_BIAS_R2, "CMU_BIAS_R2"}, {CurveQuantity::VAR_ML_R1, "VAR_ML_R1"},
    {CurveQuantity::VAR_ML_R2, "VAR_ML_R2"},     {CurveQuantity::CMU_VAR_R1, "CMU_VAR_R1"},
    {CurveQuantity::CMU_VAR_R2, "CMU_VAR_R2"},
};

double ml_cond_bias_impl(double mu, double sigma1, int n1, int n_total, ConditioningInterval iv) {
  const double weight = sigma1 * n1 / static_cast<double>(n_total);
  return weight * ratio_dd((mu - iv.lo) / sigma1, (mu - iv.hi) / sigma1);
}

double ml_cond_var_impl(double mu, double sigma, double sigma1, int n1, int n_total,
                        ConditioningInterval iv) {
  const double v1 = trunc_norm_var_factor((iv.lo - mu) / sigma1, (iv.hi - mu) / sigma1);
  const double n = static_cast<double>(n_total);
  const double n2 = static_cast<double>(n_total - n1);
  return (static_cast<double>(n1) * n1 * sigma1 * sigma1 * v1 + n2 * sigma * sigma) / (n * n);
}

// (0.5 - F(x | mu)) / dF/dmu(x | mu)
double cmu_linearised_offset(double x, double mu, const CondContext& ctx, double tol) {
  return (0.5 - cond_cdf(x, mu, ctx, tol)) / cond_cdf_dmu(x, mu, ctx, tol);
}

}  // namespace

std::string_view quantity_name(CurveQuantity q) {
  for (const auto& info : kQuantities)
    if (info.quantity == q) return info.name;
  return "?";
}

CurveQuantity parse_quantity(std::string_view name) {
  std::string upper;
  for (char c : name) upper.push_back(static_cast<char>(std::toupper(static_cast<unsigned char>(c))));
  for (const auto& info : kQuantities)
    if (info.name == upper) return info.quantity;
  throw std::invalid_argument(fmt::format("unknown curve quantity '{}'", name));
}

std::vector<CurveQuantity> all_quantities() {
  std::vector<CurveQuantity> out;
  for (const auto& info : kQuantities) out.push_back(info.quantity);
  return out;
}

double wm_bias(double mu, const TwoStageDesign& d) {
  const double s1 = d.sigma1();
  const double p1 = phi((d.c1.value() - mu) / s1);
  const double p2 = phi((d.c2.value() - mu) / s1);
  return d.n1 * s1 * (-p1 / d.nf - (p2 - p1) / d.nmax + p2 / d.n0);
}

double outcome_probability(double mu, Outcome r, const TwoStageDesign& d) {
  const ConditioningInterval iv = conditioning_interval(d, r);
  const double s1 = d.sigma1();
  return Phi_diff((iv.hi - mu) / s1, (iv.lo - mu) / s1);
}

double ml_cond_bias(double mu, Outcome r, const TwoStageDesign& d) {
  return ml_cond_bias_impl(mu, d.sigma1(), d.n1, d.final_size(r), conditioning_interval(d, r));
}

double ml_cond_bias(double mu, const CondContext& ctx) {
  return ml_cond_bias_impl(mu, ctx.sigmas.sigma1, ctx.design.n1, ctx.n_total(), ctx.interval);
}

double ml_cond_var(double mu, Outcome r, const TwoStageDesign& d) {
  return ml_cond_var_impl(mu, d.sigma, d.sigma1(), d.n1, d.final_size(r), conditioning_interval(d, r));
}

double ml_cond_var(double mu, const CondContext& ctx) {
  return ml_cond_var_impl(mu, ctx.design.sigma, ctx.sigmas.sigma1, ctx.design.n1, ctx.n_total(),
                          ctx.interval);
}

double cml_bias(double mu, const CondContext& ctx) {
  const LogLikCurvature c = cml_curvature(mu, ctx);
  return c.d3 / (2.0 * c.d2 * c.d2);
}

double cml_bias(double mu, Outcome r, const TwoStageDesign& d) {
  return cml_bias(mu, CondContext::make(d, r));
}

double cmu_bias_approx(double mu, Outcome r, const TwoStageDesign& d, double tol) {
  const CondContext ctx = CondContext::make(d, r);
  return cmu_linearised_offset(cond_mean(mu, ctx), mu, ctx, tol);
}

double cmu_var_approx(double mu, const CondContext& ctx, double tol) {
  const double x = cond_mean(mu, ctx);
  const double h = 1e-4 * ctx.sigmas.sigma0;
  const double slope =
      (cmu_linearised_offset(x + h, mu, ctx, tol) - cmu_linearised_offset(x - h, mu, ctx, tol)) / (2.0 * h);
  return slope * slope * ml_cond_var(mu, ctx);
}

double cmu_var_approx(double mu, Outcome r, const TwoStageDesign& d, double tol) {
  return cmu_var_approx(mu, CondContext::make(d, r), tol);
}

CurveGrid default_grid(const TwoStageDesign& d) {
  const double s1 = d.sigma1();
  const double c1 = d.c1.value();
  const double c2 = d.c2.value();
  CurveGrid g;
  if (d.c1.is_finite() && d.c2.is_finite()) {
    g.lo = c1 - 3.0 * s1;
    g.hi = c2 + 3.0 * s1;
  } else if (d.c1.is_finite()) {
    g.lo = c1 - 6.0 * s1;
    g.hi = c1 + 6.0 * s1;
  } else if (d.c2.is_finite()) {
    g.lo = c2 - 6.0 * s1;
    g.hi = c2 + 6.0 * s1;
  } else {
    g.lo = -6.0 * s1;
    g.hi = 6.0 * s1;
  }
  return g;
}

std::vector<BiasCurvePoint> bias_curve(const TwoStageDesign& design,
                                       const std::vector<CurveQuantity>& quantities,
                                       const CurveGrid& grid, double tol) {
  design.validate();
  if (grid.points < 1 || !std::isfinite(grid.lo) || !std::isfinite(grid.hi) || grid.hi < grid.lo)
    throw std::invalid_argument("bias_curve: grid must be finite with lo <= hi and >= 1 point");

  auto value = [&](CurveQuantity q, double mu) {
    switch (q) {
      case CurveQuantity::WM_BIAS: return wm_bias(mu, design);
      case CurveQuantity::ML_BIAS_R1: return ml_cond_bias(mu, Outcome::increase, design);
      case CurveQuantity::ML_BIAS_R2: return ml_cond_bias(mu, Outcome::original, design);
      case CurveQuantity::CML_BIAS_R1: return cml_bias(mu, Outcome::increase, design);
      case CurveQuantity::CML_BIAS_R2: return cml_bias(mu, Outcome::original, design);
      case CurveQuantity::CMU_BIAS_R1: return cmu_bias_approx(mu, Outcome::increase, design, tol);
      case CurveQuantity::CMU_BIAS_R2: return cmu_bias_approx(mu, Outcome::original, design, tol);
      case CurveQuantity::VAR_ML_R1: return ml_cond_var(mu, Outcome::increase, design);
      case CurveQuantity::VAR_ML_R2: return ml_cond_var(mu, Outcome::original, design);
      case CurveQuantity::CMU_VAR_R1: return cmu_var_approx(mu, Outcome::increase, design, tol);
      case CurveQuantity::CMU_VAR_R2: return cmu_var_approx(mu, Outcome::original, design, tol);
    }
    return 0.0;
  };

  std::vector<BiasCurvePoint> out;
  out.reserve(quantities.size() * static_cast<std::size_t>(grid.points));
  for (CurveQuantity q : quantities) {
    for (int i = 0; i < grid.points; ++i) {
      const double mu =
          grid.points == 1 ? grid.lo : grid.lo + (grid.hi - grid.lo) * i / (grid.points - 1.0);
      out.push_back({q, mu, value(q, mu)});
    }
  }
  return out;
}

}  // namespace condest
