#pragma once

// Bias and variance of the estimators as functions of the true effect.

#include <string_view>
#include <vector>

#include "condest/design.hpp"
#include "condest/numkernel.hpp"

namespace condest {

struct CondContext;

enum class CurveQuantity {
  WM_BIAS,
  ML_BIAS_R1,
  ML_BIAS_R2,
  CML_BIAS_R1,
  CML_BIAS_R2,
  CMU_BIAS_R1,
  CMU_BIAS_R2,
  VAR_ML_R1,
  VAR_ML_R2,
  CMU_VAR_R1,  // delta-method approximation, known to be inaccurate
  CMU_VAR_R2,
};

std::string_view quantity_name(CurveQuantity q);
CurveQuantity parse_quantity(std::string_view name);
std::vector<CurveQuantity> all_quantities();

struct BiasCurvePoint {
  CurveQuantity quantity = CurveQuantity::WM_BIAS;
  double mu = 0.0;
  double value = 0.0;
};

/// Unconditional bias of the equally weighted mean sum(X) / N.
double wm_bias(double mu, const TwoStageDesign& design);

/// P(R = r) under mu.
double outcome_probability(double mu, Outcome r, const TwoStageDesign& design);

double ml_cond_bias(double mu, Outcome r, const TwoStageDesign& design);
double ml_cond_bias(double mu, const CondContext& ctx);

double ml_cond_var(double mu, Outcome r, const TwoStageDesign& design);
double ml_cond_var(double mu, const CondContext& ctx);

/// Second-order bias of the conditional MLE.
double cml_bias(double mu, Outcome r, const TwoStageDesign& design);
double cml_bias(double mu, const CondContext& ctx);

/// First-order approximation to the CMU bias.
double cmu_bias_approx(double mu, Outcome r, const TwoStageDesign& design,
                       double tol = kDefaultQuadTol);
/// Delta-method variance of the CMU estimator (approximate, known inaccurate).
double cmu_var_approx(double mu, Outcome r, const TwoStageDesign& design,
                      double tol = kDefaultQuadTol);
double cmu_var_approx(double mu, const CondContext& ctx, double tol = kDefaultQuadTol);

struct CurveGrid {
  double lo = 0.0;
  double hi = 1.0;
  int points = 201;
};

/// 201 points over [c1 - 3 sigma1, c2 + 3 sigma1]; an infinite cut is replaced
/// by the finite one shifted 6 sigma1 outward.
CurveGrid default_grid(const TwoStageDesign& design);

std::vector<BiasCurvePoint> bias_curve(const TwoStageDesign& design,
                                       const std::vector<CurveQuantity>& quantities,
                                       const CurveGrid& grid, double tol = kDefaultQuadTol);

}  // namespace condest
