#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "condest/design.hpp"
#include "condest/estimators.hpp"
#include "condest/philox.hpp"

namespace condest {

struct ScenarioConfig {
  std::string id = "scenario";
  double mu = 0.0;
  TwoStageDesign design;
  std::uint64_t n_reps = 100000;
  std::uint64_t seed = 20240101;
  std::vector<Method> methods = {Method::ML, Method::RB, Method::CMU, Method::CML, Method::CMLc};

  /// Throws std::invalid_argument.
  void validate() const;
};

struct TrialDraw {
  InterimDecision decision;
  SufficientStats stats;
};

/// One trial: stage means drawn directly, Y2 drawn whenever N2 > 0.
TrialDraw simulate_trial(double mu, const TwoStageDesign& design, NormalStream& rng);

/// Error statistics of one (method, R) cell. Variance and MSE use the
/// divisor count; variance is absent for fewer than two replications.
struct CellStats {
  Method method = Method::ML;
  Outcome r = Outcome::increase;
  std::uint64_t count = 0;
  double bias = 0.0;
  std::optional<double> var;
  std::optional<double> mse;
  double frac_at_or_above = 0.0;  // share of estimates >= mu
  std::uint64_t failures = 0;

  /// Monte Carlo standard error of the bias.
  double bias_se() const;
};

struct ScenarioReport {
  ScenarioConfig config;
  std::array<std::uint64_t, 3> counts{};  // replications per decision 0, 1, 2
  std::vector<CellStats> cells;           // method-major, then R = 1, 2
  double wall_seconds = 0.0;
  unsigned workers = 1;

  const CellStats& cell(Method m, Outcome r) const;
};

struct SimulationOptions {
  unsigned workers = 0;  // 0: hardware concurrency
  double quad_tol = kDefaultQuadTol;
  double root_tol = kDefaultRootTol;
  double max_failure_rate = 1e-4;
};

inline constexpr std::uint64_t kChunkSize = 1024;

/// Deterministic for a given config whatever the worker count. Throws
/// SimulationQualityError when any method fails on more than
/// max_failure_rate of the replications.
ScenarioReport run_scenario(const ScenarioConfig& config, const SimulationOptions& opts = {});

/// The four built-in reference scenarios; scenario i uses seed + i.
std::vector<ScenarioConfig> table1_scenarios(std::uint64_t n_reps = 100000,
                                             std::uint64_t seed = 20240101);
std::vector<ScenarioReport> run_table1(std::uint64_t n_reps = 100000, std::uint64_t seed = 20240101,
                                       const SimulationOptions& opts = {});

}  // namespace condest
