#pragma once

#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "condest/design.hpp"

namespace condest {

enum class Method { ML, RB, CMU, CML, CMLc, WM_FIXED, LH };

std::string_view method_name(Method m);
/// Accepts the names printed by method_name (case-insensitive).
Method parse_method(std::string_view name);

/// Stage means and sizes. Every estimator works from these summaries.
struct SufficientStats {
  double y1 = 0.0;
  double y2 = 0.0;
  double y = 0.0;  // pooled mean, the unconditional MLE
  int n1 = 1;
  int n2 = 0;
  int n_total = 1;

  static SufficientStats from_stage_means(int n1, double y1, int n2, double y2);
  /// Derives y2 from the pooled mean; with n2 = 0 the pooled mean must equal y1.
  static SufficientStats from_pooled(int n1, double y1, int n_total, double y);

  void validate() const;
};

struct Estimate {
  Method method = Method::ML;
  double point = 0.0;
  std::optional<double> se;
  std::map<std::string, double> diagnostics;
  std::vector<std::string> notes;
};

struct EstimatorOptions {
  double quad_tol = kDefaultQuadTol;
  double root_tol = kDefaultRootTol;
  bool with_se = true;
};

struct ConfidenceInterval {
  double lower = 0.0;
  double upper = 0.0;
};

/// Everything the conditional estimators need about a continuing decision.
struct CondContext {
  TwoStageDesign design;
  InterimDecision decision;
  StageSigmas sigmas;
  ConditioningInterval interval;  // range of Y1 producing the decision

  /// Throws ScopeError for the futility stop.
  static CondContext make(const TwoStageDesign& design, Outcome r);
  Outcome r() const { return decision.r; }
  int n_total() const { return decision.n_total; }
};

// --- unconditional -----------------------------------------------------------

Estimate ml(const SufficientStats& stats, double sigma);
/// Fixed weights 2 n1 / (n0 + nmax); unbiased only when the trial cannot stop early.
Estimate wm_fixed(const SufficientStats& stats, const TwoStageDesign& design);
Estimate lawrence_hung(const SufficientStats& stats, const TwoStageDesign& design);

// --- Rao-Blackwell -----------------------------------------------------------

Estimate rb(const CondContext& ctx, const SufficientStats& stats, const EstimatorOptions& opts = {});
/// The RB estimate as a function of the pooled mean, and its derivative.
double rb_of_pooled(const CondContext& ctx, double y);
double rb_derivative(const CondContext& ctx, double y);

// --- conditional distribution of the pooled mean ----------------------------

/// Density of the pooled mean given the decision.
double cond_density(double y, double mu, const CondContext& ctx);
/// Conditional CDF by quadrature of cond_density.
double cond_cdf(double x, double mu, const CondContext& ctx, double tol = kDefaultQuadTol);
/// d/dmu of cond_cdf, by quadrature of the score-weighted density.
double cond_cdf_dmu(double x, double mu, const CondContext& ctx, double tol = kDefaultQuadTol);
/// E[Y | R] under mu.
double cond_mean(double mu, const CondContext& ctx);

// --- conditional median unbiased --------------------------------------------

Estimate cmu(const CondContext& ctx, const SufficientStats& stats, double q = 0.5,
             const EstimatorOptions& opts = {});
ConfidenceInterval cmu_ci(const CondContext& ctx, const SufficientStats& stats, double level,
                          const EstimatorOptions& opts = {});

// --- conditional maximum likelihood -----------------------------------------

/// Conditional log-likelihood up to a data-dependent constant.
double cml_loglik(double mu, const CondContext& ctx, const SufficientStats& stats);
/// First derivative of cml_loglik.
double cml_score(double mu, const CondContext& ctx, const SufficientStats& stats);

/// Second and third derivatives of the conditional log-likelihood; both are
/// free of the data.
struct LogLikCurvature {
  double d2 = 0.0;
  double d3 = 0.0;
};
LogLikCurvature cml_curvature(double mu, const CondContext& ctx);

Estimate cml(const CondContext& ctx, const SufficientStats& stats, const EstimatorOptions& opts = {});
ConfidenceInterval cml_lr_ci(const CondContext& ctx, const SufficientStats& stats, double level,
                             const EstimatorOptions& opts = {});
/// Bias-corrected CML: root of  cml = mu + bias_cml(mu).
Estimate cmlc(const CondContext& ctx, const SufficientStats& stats, const EstimatorOptions& opts = {});

/// Dispatch by tag. Conditional methods need a continuing decision.
Estimate estimate(Method m, const TwoStageDesign& design, const InterimDecision& decision,
                  const SufficientStats& stats, const EstimatorOptions& opts = {});

}  // namespace condest
