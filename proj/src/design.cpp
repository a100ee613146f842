#include "condest/design.hpp"

#include <cmath>
#include <stdexcept>

#include <fmt/format.h>

namespace condest {

Outcome outcome_from_int(int r) {
  switch (r) {
    case 0: return Outcome::futility;
    case 1: return Outcome::increase;
    case 2: return Outcome::original;
    default: throw std::invalid_argument(fmt::format("decision must be 0, 1 or 2 (got {})", r));
  }
}

void TwoStageDesign::validate() const {
  if (n1 < 1) throw std::invalid_argument("design: n1 must be >= 1");
  if (nf < n1) throw std::invalid_argument("design: nf must be >= n1");
  if (n0 < n1) throw std::invalid_argument("design: n0 must be >= n1");
  if (!(n0 < nmax)) throw std::invalid_argument("design: n0 must be < nmax");
  if (!(c1 < c2)) throw std::invalid_argument("design: c1 must be < c2");
  if (!(sigma > 0.0) || !std::isfinite(sigma)) throw std::invalid_argument("design: sigma must be > 0");
}

double TwoStageDesign::sigma1() const { return sigma / std::sqrt(static_cast<double>(n1)); }

int TwoStageDesign::final_size(Outcome r) const {
  switch (r) {
    case Outcome::futility: return nf;
    case Outcome::increase: return nmax;
    case Outcome::original: return n0;
  }
  return nf;
}

InterimDecision decision_for(const TwoStageDesign& design, Outcome r) {
  const int n = design.final_size(r);
  return {r, n, n - design.n1};
}

InterimDecision decide(const TwoStageDesign& design, double y1) {
  if (y1 <= design.c1.value()) return decision_for(design, Outcome::futility);
  if (y1 <= design.c2.value()) return decision_for(design, Outcome::increase);
  return decision_for(design, Outcome::original);
}

StageSigmas stage_sigmas(const TwoStageDesign& design, const InterimDecision& decision) {
  if (decision.n2 <= 0)
    throw std::invalid_argument("stage_sigmas: no stage-2 observations, sigma2 undefined");
  StageSigmas s;
  s.sigma0 = design.sigma / std::sqrt(static_cast<double>(decision.n_total));
  s.sigma1 = design.sigma1();
  s.sigma2 = design.sigma / std::sqrt(static_cast<double>(decision.n2));
  const double v1 = s.sigma1 * s.sigma1;
  const double v2 = s.sigma2 * s.sigma2;
  const double root = std::sqrt(v1 + v2);
  s.sigmaA = v1 / root;
  s.sigmaB = v2 / root;
  return s;
}

ConditioningInterval conditioning_interval(const TwoStageDesign& design, Outcome r) {
  switch (r) {
    case Outcome::futility: return {-kInf, design.c1.value()};
    case Outcome::increase: return {design.c1.value(), design.c2.value()};
    case Outcome::original: return {design.c2.value(), kInf};
  }
  return {};
}

std::string describe(const TwoStageDesign& d) {
  return fmt::format("n1={} nf={} n0={} nmax={} c1={} c2={} sigma={}", d.n1, d.nf, d.n0, d.nmax,
                     d.c1.to_string(), d.c2.to_string(), d.sigma);
}

}  // namespace condest
