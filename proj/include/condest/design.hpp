#pragma once

#include <string>

#include "condest/numkernel.hpp"

namespace condest {

/// Interim decision after stage 1.
enum class Outcome : int {
  futility = 0,   // stop, final size nf
  increase = 1,   // promising: continue to nmax
  original = 2,   // very promising: continue to n0
};

inline int to_int(Outcome r) { return static_cast<int>(r); }
Outcome outcome_from_int(int r);

/// Two-stage design with sample-size recalculation:
///   N = nf    if Y1 <= c1
///   N = nmax  if c1 < Y1 <= c2
///   N = n0    if Y1 > c2
struct TwoStageDesign {
  int n1 = 1;
  int nf = 1;
  int n0 = 1;
  int nmax = 2;
  ExtendedReal c1 = ExtendedReal::neg_inf();
  ExtendedReal c2 = ExtendedReal::pos_inf();
  double sigma = 1.0;

  /// Throws std::invalid_argument naming the first violated constraint.
  void validate() const;

  /// Stage-1 standard error sigma / sqrt(n1).
  double sigma1() const;
  int final_size(Outcome r) const;
};

struct InterimDecision {
  Outcome r = Outcome::futility;
  int n_total = 0;
  int n2 = 0;
};

/// Derived standard deviations for a continuing decision.
struct StageSigmas {
  double sigma0 = 0.0;  // sigma / sqrt(N)
  double sigma1 = 0.0;  // sigma / sqrt(n1)
  double sigma2 = 0.0;  // sigma / sqrt(N2)
  double sigmaA = 0.0;  // sigma1^2 / sqrt(sigma1^2 + sigma2^2)
  double sigmaB = 0.0;  // sigma2^2 / sqrt(sigma1^2 + sigma2^2)
};

/// Range of Y1 that produces a given decision: (lo, hi].
struct ConditioningInterval {
  double lo = -kInf;
  double hi = kInf;
};

InterimDecision decide(const TwoStageDesign& design, double y1);
InterimDecision decision_for(const TwoStageDesign& design, Outcome r);

/// Throws std::invalid_argument when N2 = 0 (sigma2 undefined).
StageSigmas stage_sigmas(const TwoStageDesign& design, const InterimDecision& decision);

ConditioningInterval conditioning_interval(const TwoStageDesign& design, Outcome r);

std::string describe(const TwoStageDesign& design);

}  // namespace condest
