#pragma once

// Scenario files and report rendering.
//
// Scenario file: key = value lines, '#' or ';' comments. Keys before the
// first [section] are defaults; each [section] is one scenario named after
// it. Without sections the file holds a single scenario.
//
//   keys: mu n1 nf n0 nmax c1 c2 sigma n_reps seed methods
//   c1/c2 accept "inf"/"-inf"; nf defaults to n1, sigma to 1;
//   methods is a comma list of ML, RB, CMU, CML, CMLc.

#include <filesystem>
#include <istream>
#include <ostream>
#include <string>
#include <string_view>
#include <vector>

#include "condest/simulator.hpp"

namespace condest {

/// Malformed scenario file; the message names the source and line.
class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

std::vector<ScenarioConfig> parse_scenarios(std::istream& in, std::string_view source = "<input>");
std::vector<ScenarioConfig> load_scenarios(const std::filesystem::path& path);

/// Fixed-point text with `precision` significant digits (no exponent);
/// infinities print as "inf" / "-inf".
std::string format_number(double x, int precision = 6);

/// Columns: scenario_id,r,method,count,bias,var,mse. R = 0 rows carry only
/// the count (method "ALL"); an undefined variance leaves var and mse empty.
void write_csv(std::ostream& out, const std::vector<ScenarioReport>& reports, int precision = 6);
/// The CSV content plus metadata (seed, n_reps, design, failures, timing).
void write_json(std::ostream& out, const std::vector<ScenarioReport>& reports, int precision = 6);
/// Table-1-style layout for people.
void write_text(std::ostream& out, const std::vector<ScenarioReport>& reports, int precision = 6);

}  // namespace condest
