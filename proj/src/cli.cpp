#include "condest/cli.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <optional>
#include <sstream>

#include <fmt/format.h>

#include "CLI11.hpp"
#include "json.hpp"

#include "condest/analytics.hpp"
#include "condest/estimators.hpp"
#include "condest/report_io.hpp"
#include "condest/simulator.hpp"

namespace condest::cli {

namespace {

using nlohmann::json;

/// Bad flag values found after parsing; maps to the usage exit code.
class UsageError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

enum class Format { text, csv, json };

struct CommonFlags {
  std::string format = "text";
  int precision = 6;
  double quad_tol = kDefaultQuadTol;
  double root_tol = kDefaultRootTol;

  Format fmt() const {
    if (format == "text") return Format::text;
    if (format == "csv") return Format::csv;
    return Format::json;
  }
  std::string num(double x) const { return format_number(x, precision); }
  EstimatorOptions estimator_options() const {
    EstimatorOptions o;
    o.quad_tol = quad_tol;
    o.root_tol = root_tol;
    return o;
  }
};

void add_common(CLI::App* cmd, CommonFlags& c) {
  cmd->add_option("--format", c.format, "Output format")
      ->check(CLI::IsMember({"text", "csv", "json"}))
      ->capture_default_str();
  cmd->add_option("--precision", c.precision, "Significant digits of numeric output")
      ->check(CLI::Range(1, 17))
      ->capture_default_str();
  cmd->add_option("--quad-tol", c.quad_tol, "Absolute quadrature tolerance")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  cmd->add_option("--root-tol", c.root_tol, "Root bracket tolerance")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
}

struct DesignFlags {
  std::optional<int> n1, nf, n0, nmax;
  std::optional<std::string> c1, c2;
  std::optional<double> boundary_p;
  std::optional<double> sigma;
  bool log_hr = false;
};

void add_design(CLI::App* cmd, DesignFlags& d) {
  cmd->add_option("--n1", d.n1, "Stage-1 sample size")->required();
  cmd->add_option("--nf", d.nf, "Final size after a futility stop (default n1)");
  cmd->add_option("--n0", d.n0, "Final size when Y1 > c2")->required();
  cmd->add_option("--nmax", d.nmax, "Final size when c1 < Y1 <= c2")->required();
  cmd->add_option("--c1", d.c1, "Lower cut point (number, inf or -inf)");
  cmd->add_option("--c2", d.c2, "Upper cut point (number, inf or -inf)");
  cmd->add_option("--boundary-p", d.boundary_p,
                  "Two-sided interim p-value boundary: c2 = sigma1 * Phi^-1(1 - p/2), c1 = -c2 unless given");
  cmd->add_option("--sigma", d.sigma, "Outcome standard deviation (default 1, or 2 with --log-hr)");
  cmd->add_flag("--log-hr", d.log_hr,
                "Inputs are hazard ratios: effect = -log HR with sigma = 2; outputs are back-transformed");
}

ExtendedReal parse_cut(const std::string& text, const char* name) {
  try {
    return ExtendedReal::parse(text);
  } catch (const std::exception&) {
    throw UsageError(fmt::format("{} must be a number, inf or -inf (got '{}')", name, text));
  }
}

TwoStageDesign make_design(const DesignFlags& f) {
  TwoStageDesign d;
  d.n1 = *f.n1;
  d.nf = f.nf.value_or(d.n1);
  d.n0 = *f.n0;
  d.nmax = *f.nmax;
  d.sigma = f.sigma.value_or(f.log_hr ? 2.0 : 1.0);
  if (!(d.sigma > 0.0)) throw UsageError("--sigma must be positive");
  if (d.n1 < 1) throw UsageError("--n1 must be >= 1");
  if (f.boundary_p) {
    const double p = *f.boundary_p;
    if (!(p > 0.0 && p < 1.0)) throw UsageError("--boundary-p must lie in (0, 1)");
    if (f.c2) throw UsageError("--c2 and --boundary-p are mutually exclusive");
    const double c2 = d.sigma1() * Phi_inv(1.0 - p / 2.0);
    d.c2 = c2;
    d.c1 = f.c1 ? parse_cut(*f.c1, "--c1") : ExtendedReal(-c2);
  } else {
    if (!f.c1 || !f.c2) throw UsageError("--c1 and --c2 are required unless --boundary-p is given");
    d.c1 = parse_cut(*f.c1, "--c1");
    d.c2 = parse_cut(*f.c2, "--c2");
  }
  try {
    d.validate();
  } catch (const std::invalid_argument& e) {
    throw UsageError(e.what());
  }
  return d;
}

std::string exact(double x) {
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  return fmt::format("{}", x);
}

json design_json(const TwoStageDesign& d) {
  return {{"n1", d.n1}, {"nf", d.nf}, {"n0", d.n0}, {"nmax", d.nmax},
          {"c1", exact(d.c1.value())}, {"c2", exact(d.c2.value())}, {"sigma", d.sigma}};
}

std::vector<Method> parse_method_list(const std::string& text) {
  std::vector<Method> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item.empty()) continue;
    try {
      const Method m = parse_method(item);
      if (std::find(out.begin(), out.end(), m) == out.end()) out.push_back(m);
    } catch (const std::exception&) {
      throw UsageError(fmt::format("unknown method '{}'", item));
    }
  }
  if (out.empty()) throw UsageError("empty method list");
  return out;
}

bool is_conditional(Method m) {
  return m == Method::RB || m == Method::CMU || m == Method::CML || m == Method::CMLc;
}

double to_effect(double x, bool log_hr, const char* name) {
  if (!std::isfinite(x)) throw UsageError(fmt::format("{} must be finite", name));
  if (!log_hr) return x;
  if (!(x > 0.0)) throw UsageError(fmt::format("{} must be a positive hazard ratio", name));
  return -std::log(x);
}

double hr(double effect) { return std::exp(-effect); }

// ---------------------------------------------------------------------------
// estimate

struct EstimateFlags {
  CommonFlags common;
  DesignFlags design;
  std::optional<double> y1, y, y2;
  std::optional<double> ci;
  std::string methods = "ML,RB,CMU,CML,CMLc";
};

struct EstimateRow {
  Estimate est;
  std::optional<ConfidenceInterval> ci;
};

std::vector<EstimateRow> compute_estimates(const TwoStageDesign& design, const InterimDecision& dec,
                                           const SufficientStats& stats, const std::vector<Method>& methods,
                                           std::optional<double> level, const EstimatorOptions& opts,
                                           std::vector<std::string>& notes) {
  std::vector<EstimateRow> rows;
  bool skipped = false;
  for (Method m : methods) {
    if (is_conditional(m) && (dec.r == Outcome::futility || dec.n2 == 0)) {
      skipped = true;
      continue;
    }
    EstimateRow row{estimate(m, design, dec, stats, opts), std::nullopt};
    if (level) {
      if (m == Method::CMU || m == Method::CML) {
        const CondContext ctx = CondContext::make(design, dec.r);
        row.ci = m == Method::CMU ? cmu_ci(ctx, stats, *level, opts) : cml_lr_ci(ctx, stats, *level, opts);
      } else if (m == Method::ML) {
        const double z = Phi_inv(0.5 + *level / 2.0);
        const double se = design.sigma / std::sqrt(static_cast<double>(stats.n_total));
        row.ci = ConfidenceInterval{stats.y - z * se, stats.y + z * se};
      }
    }
    for (const auto& n : row.est.notes) notes.push_back(fmt::format("{}: {}", method_name(m), n));
    rows.push_back(std::move(row));
  }
  if (skipped) {
    notes.push_back(dec.r == Outcome::futility
                        ? "futility stop (R=0): conditional estimators are not defined, only ML is reported"
                        : "no stage-2 observations: conditional estimators are not defined");
  }
  return rows;
}

std::vector<std::string> canonical_args(const EstimateFlags& f, const TwoStageDesign& d) {
  std::vector<std::string> a = {"estimate",
                                "--n1=" + std::to_string(d.n1),
                                "--nf=" + std::to_string(d.nf),
                                "--n0=" + std::to_string(d.n0),
                                "--nmax=" + std::to_string(d.nmax),
                                "--c1=" + exact(d.c1.value()),
                                "--c2=" + exact(d.c2.value()),
                                "--sigma=" + exact(d.sigma),
                                "--y1=" + exact(*f.y1)};
  if (f.y) a.push_back("--y=" + exact(*f.y));
  if (f.y2) a.push_back("--y2=" + exact(*f.y2));
  if (f.design.log_hr) a.push_back("--log-hr");
  std::string methods;
  for (Method m : parse_method_list(f.methods))
    methods += (methods.empty() ? "" : ",") + std::string(method_name(m));
  a.push_back("--methods=" + methods);
  if (f.ci) a.push_back("--ci=" + exact(*f.ci));
  a.push_back("--precision=" + std::to_string(f.common.precision));
  a.push_back("--quad-tol=" + exact(f.common.quad_tol));
  a.push_back("--root-tol=" + exact(f.common.root_tol));
  a.push_back("--format=json");
  return a;
}

int cmd_estimate(const EstimateFlags& f, std::ostream& out, std::ostream& err) {
  const TwoStageDesign design = make_design(f.design);
  if (f.y.has_value() == f.y2.has_value()) throw UsageError("give exactly one of --y and --y2");
  if (f.ci && !(*f.ci > 0.0 && *f.ci < 1.0)) throw UsageError("--ci must lie in (0, 1)");
  const bool log_hr = f.design.log_hr;
  const double y1 = to_effect(*f.y1, log_hr, "--y1");
  const InterimDecision dec = decide(design, y1);
  SufficientStats stats;
  if (f.y) {
    stats = SufficientStats::from_pooled(design.n1, y1, dec.n_total, to_effect(*f.y, log_hr, "--y"));
  } else {
    if (dec.n2 == 0) throw UsageError("--y2 given but the decision has no stage-2 observations");
    stats = SufficientStats::from_stage_means(design.n1, y1, dec.n2, to_effect(*f.y2, log_hr, "--y2"));
  }
  const std::vector<Method> methods = parse_method_list(f.methods);
  std::vector<std::string> notes;
  const auto rows =
      compute_estimates(design, dec, stats, methods, f.ci, f.common.estimator_options(), notes);
  for (const auto& n : notes) err << "note: " << n << '\n';

  const CommonFlags& c = f.common;
  auto opt = [&](const std::optional<double>& v) { return v ? c.num(*v) : std::string(); };
  switch (c.fmt()) {
    case Format::text: {
      out << "design    " << describe(design) << '\n';
      out << fmt::format("decision  R={} N={} N2={}\n", to_int(dec.r), dec.n_total, dec.n2);
      out << fmt::format("data      y1={} y2={} y={}\n", c.num(stats.y1), c.num(stats.y2), c.num(stats.y));
      std::string header = fmt::format("{:<9}{:>13}{:>13}", "method", "estimate", "se");
      if (f.ci) header += fmt::format("{:>13}{:>13}", "ci_lower", "ci_upper");
      if (log_hr) header += fmt::format("{:>13}", "hr");
      if (log_hr && f.ci) header += fmt::format("{:>13}{:>13}", "hr_lower", "hr_upper");
      out << header << '\n';
      for (const auto& row : rows) {
        std::string line = fmt::format("{:<9}{:>13}{:>13}", method_name(row.est.method),
                                       c.num(row.est.point), row.est.se ? c.num(*row.est.se) : "-");
        if (f.ci)
          line += row.ci ? fmt::format("{:>13}{:>13}", c.num(row.ci->lower), c.num(row.ci->upper))
                         : fmt::format("{:>13}{:>13}", "-", "-");
        if (log_hr) line += fmt::format("{:>13}", c.num(hr(row.est.point)));
        if (log_hr && f.ci)
          line += row.ci ? fmt::format("{:>13}{:>13}", c.num(hr(row.ci->upper)), c.num(hr(row.ci->lower)))
                         : fmt::format("{:>13}{:>13}", "-", "-");
        out << line << '\n';
      }
      break;
    }
    case Format::csv: {
      out << "method,estimate,se,ci_lower,ci_upper";
      if (log_hr) out << ",hr,hr_lower,hr_upper";
      out << '\n';
      for (const auto& row : rows) {
        out << method_name(row.est.method) << ',' << c.num(row.est.point) << ',' << opt(row.est.se) << ','
            << (row.ci ? c.num(row.ci->lower) : "") << ',' << (row.ci ? c.num(row.ci->upper) : "");
        if (log_hr)
          out << ',' << c.num(hr(row.est.point)) << ',' << (row.ci ? c.num(hr(row.ci->upper)) : "") << ','
              << (row.ci ? c.num(hr(row.ci->lower)) : "");
        out << '\n';
      }
      break;
    }
    case Format::json: {
      json doc;
      doc["input"] = {{"args", canonical_args(f, design)}};
      doc["design"] = design_json(design);
      doc["log_hr"] = log_hr;
      doc["decision"] = {{"r", to_int(dec.r)}, {"n_total", dec.n_total}, {"n2", dec.n2}};
      doc["stats"] = {{"y1", c.num(stats.y1)}, {"y2", c.num(stats.y2)}, {"y", c.num(stats.y)}};
      doc["estimates"] = json::array();
      for (const auto& row : rows) {
        json e;
        e["method"] = std::string(method_name(row.est.method));
        e["estimate"] = c.num(row.est.point);
        e["se"] = row.est.se ? json(c.num(*row.est.se)) : json();
        if (row.ci) e["ci"] = {c.num(row.ci->lower), c.num(row.ci->upper)};
        if (log_hr) {
          e["hr"] = c.num(hr(row.est.point));
          if (row.ci) e["hr_ci"] = {c.num(hr(row.ci->upper)), c.num(hr(row.ci->lower))};
        }
        e["notes"] = row.est.notes;
        doc["estimates"].push_back(e);
      }
      doc["notes"] = notes;
      out << doc.dump(2) << '\n';
      break;
    }
  }
  return kOk;
}

// ---------------------------------------------------------------------------
// simulate

struct SimulateFlags {
  CommonFlags common;
  std::optional<std::string> scenario_file;
  bool table1 = false;
  std::optional<std::uint64_t> n_reps, seed;
  std::optional<std::string> methods;
  unsigned workers = 0;
  std::optional<std::string> csv_path, json_path;
};

int cmd_simulate(const SimulateFlags& f, std::ostream& out, std::ostream& err) {
  if (f.scenario_file.has_value() == f.table1)
    throw UsageError("give exactly one of a scenario file or --table1");
  std::vector<ScenarioConfig> configs =
      f.table1 ? table1_scenarios(f.n_reps.value_or(100000), f.seed.value_or(20240101))
               : load_scenarios(*f.scenario_file);
  for (auto& cfg : configs) {
    if (f.n_reps) cfg.n_reps = *f.n_reps;
    if (f.seed && !f.table1) cfg.seed = *f.seed;
    if (f.methods) cfg.methods = parse_method_list(*f.methods);
    try {
      cfg.validate();
    } catch (const std::invalid_argument& e) {
      throw UsageError(e.what());
    }
  }

  SimulationOptions opts;
  opts.workers = f.workers;
  opts.quad_tol = f.common.quad_tol;
  opts.root_tol = f.common.root_tol;
  std::vector<ScenarioReport> reports;
  for (const auto& cfg : configs) {
    reports.push_back(run_scenario(cfg, opts));
    err << fmt::format("scenario {}: {} replications in {:.1f} s\n", cfg.id, cfg.n_reps,
                       reports.back().wall_seconds);
  }

  const int p = f.common.precision;
  auto write_file = [&](const std::string& path, auto writer) {
    std::ofstream file(path);
    if (!file) throw UsageError(fmt::format("cannot write '{}'", path));
    writer(file, reports, p);
  };
  if (f.csv_path) write_file(*f.csv_path, write_csv);
  if (f.json_path) write_file(*f.json_path, write_json);
  switch (f.common.fmt()) {
    case Format::text: write_text(out, reports, p); break;
    case Format::csv: write_csv(out, reports, p); break;
    case Format::json: write_json(out, reports, p); break;
  }
  return kOk;
}

// ---------------------------------------------------------------------------
// curves

struct GridFlags {
  std::optional<double> lo, hi;
  int points = 201;
};

CurveGrid make_grid(const GridFlags& g, const TwoStageDesign& design) {
  CurveGrid grid = default_grid(design);
  if (g.lo) grid.lo = *g.lo;
  if (g.hi) grid.hi = *g.hi;
  grid.points = g.points;
  if (!std::isfinite(grid.lo) || !std::isfinite(grid.hi) || !(grid.lo <= grid.hi) || grid.points < 1)
    throw UsageError("grid must be finite with min <= max and at least one point");
  if (grid.points > 1 && grid.lo == grid.hi)
    throw UsageError("grid with several points needs min < max");
  return grid;
}

double grid_at(const CurveGrid& g, int i) {
  return g.points == 1 ? g.lo : g.lo + (g.hi - g.lo) * i / (g.points - 1.0);
}

// Whether the continuing decision r has stage-2 data and positive probability.
bool decision_usable(const TwoStageDesign& d, Outcome r) {
  if (decision_for(d, r).n2 <= 0) return false;
  const ConditioningInterval iv = conditioning_interval(d, r);
  return iv.lo < iv.hi;
}

struct BiasCurveFlags {
  CommonFlags common;
  DesignFlags design;
  GridFlags grid;
  std::optional<std::string> quantities;
};

bool quantity_usable(CurveQuantity q, const TwoStageDesign& d) {
  switch (q) {
    case CurveQuantity::WM_BIAS: return true;
    case CurveQuantity::ML_BIAS_R1:
    case CurveQuantity::VAR_ML_R1: return d.c1 < d.c2;
    case CurveQuantity::ML_BIAS_R2:
    case CurveQuantity::VAR_ML_R2: return d.c2.is_finite();
    case CurveQuantity::CML_BIAS_R1:
    case CurveQuantity::CMU_BIAS_R1:
    case CurveQuantity::CMU_VAR_R1: return decision_usable(d, Outcome::increase);
    case CurveQuantity::CML_BIAS_R2:
    case CurveQuantity::CMU_BIAS_R2:
    case CurveQuantity::CMU_VAR_R2: return decision_usable(d, Outcome::original) && d.c2.is_finite();
  }
  return false;
}

int cmd_bias_curve(const BiasCurveFlags& f, std::ostream& out, std::ostream& err) {
  const TwoStageDesign design = make_design(f.design);
  const CurveGrid grid = make_grid(f.grid, design);
  std::vector<CurveQuantity> qs;
  if (f.quantities) {
    std::stringstream ss(*f.quantities);
    std::string item;
    while (std::getline(ss, item, ',')) {
      if (item.empty()) continue;
      CurveQuantity q;
      try {
        q = parse_quantity(item);
      } catch (const std::exception& e) {
        throw UsageError(e.what());
      }
      if (!quantity_usable(q, design))
        throw UsageError(fmt::format("{} is not defined for this design", quantity_name(q)));
      qs.push_back(q);
    }
    if (qs.empty()) throw UsageError("empty quantity list");
  } else {
    for (CurveQuantity q : all_quantities()) {
      if (quantity_usable(q, design))
        qs.push_back(q);
      else
        err << "note: skipping " << quantity_name(q) << ", not defined for this design\n";
    }
  }
  const auto points = bias_curve(design, qs, grid, f.common.quad_tol);
  const CommonFlags& c = f.common;
  switch (c.fmt()) {
    case Format::text:
      out << fmt::format("{:<12}{:>13}{:>15}\n", "quantity", "mu", "value");
      for (const auto& p : points)
        out << fmt::format("{:<12}{:>13}{:>15}\n", quantity_name(p.quantity), c.num(p.mu), c.num(p.value));
      break;
    case Format::csv:
      out << "quantity,mu,value\n";
      for (const auto& p : points)
        out << quantity_name(p.quantity) << ',' << c.num(p.mu) << ',' << c.num(p.value) << '\n';
      break;
    case Format::json: {
      json doc;
      doc["design"] = design_json(design);
      doc["points"] = json::array();
      for (const auto& p : points)
        doc["points"].push_back({{"quantity", std::string(quantity_name(p.quantity))},
                                 {"mu", c.num(p.mu)},
                                 {"value", c.num(p.value)}});
      out << doc.dump(2) << '\n';
      break;
    }
  }
  return kOk;
}

struct DiffCurveFlags {
  CommonFlags common;
  DesignFlags design;
  GridFlags grid;
  std::string reference = "ML";
  std::optional<std::string> methods;
  std::optional<int> r;
};

struct DiffRow {
  int r;
  double y;
  Method method;
  double estimate;
  double diff;
};

int cmd_diff_curve(const DiffCurveFlags& f, std::ostream& out, std::ostream&) {
  const TwoStageDesign design = make_design(f.design);
  const CurveGrid grid = make_grid(f.grid, design);
  Method reference;
  try {
    reference = parse_method(f.reference);
  } catch (const std::exception&) {
    throw UsageError("--reference must be ML or RB");
  }
  if (reference != Method::ML && reference != Method::RB) throw UsageError("--reference must be ML or RB");
  std::vector<Method> methods;
  if (f.methods) {
    methods = parse_method_list(*f.methods);
  } else {
    for (Method m : {Method::RB, Method::CMU, Method::CML, Method::CMLc})
      if (m != reference) methods.push_back(m);
  }
  for (Method m : methods)
    if (!is_conditional(m) && m != Method::ML)
      throw UsageError(fmt::format("diff-curve supports ML, RB, CMU, CML and CMLc, not {}", method_name(m)));

  std::vector<Outcome> outcomes;
  if (f.r) {
    if (*f.r != 1 && *f.r != 2) throw UsageError("--r must be 1 or 2");
    outcomes.push_back(outcome_from_int(*f.r));
  } else {
    outcomes = {Outcome::increase, Outcome::original};
  }

  EstimatorOptions opts = f.common.estimator_options();
  opts.with_se = false;
  std::vector<DiffRow> rows;
  for (Outcome r : outcomes) {
    if (!decision_usable(design, r)) {
      if (f.r) throw UsageError(fmt::format("R={} is not reachable with stage-2 data for this design", to_int(r)));
      continue;
    }
    const CondContext ctx = CondContext::make(design, r);
    const double s1 = design.sigma1();
    const ConditioningInterval iv = ctx.interval;
    // Any interim mean producing r will do: the estimators depend on the pooled mean only.
    double y1 = std::isfinite(iv.lo) && std::isfinite(iv.hi) ? 0.5 * (iv.lo + iv.hi)
                : std::isfinite(iv.lo)                        ? iv.lo + s1
                                                              : iv.hi - s1;
    for (int i = 0; i < grid.points; ++i) {
      const double y = grid_at(grid, i);
      const auto stats = SufficientStats::from_pooled(design.n1, y1, ctx.n_total(), y);
      const double ref = estimate(reference, design, ctx.decision, stats, opts).point;
      for (Method m : methods) {
        const double e = estimate(m, design, ctx.decision, stats, opts).point;
        rows.push_back({to_int(r), y, m, e, e - ref});
      }
    }
  }

  const CommonFlags& c = f.common;
  const std::string ref_name(method_name(reference));
  switch (c.fmt()) {
    case Format::text:
      out << fmt::format("{:<3}{:>13}{:>8}{:>13}{:>15}\n", "r", "y_ml", "method", "estimate",
                         "diff_vs_" + ref_name);
      for (const auto& row : rows)
        out << fmt::format("{:<3}{:>13}{:>8}{:>13}{:>15}\n", row.r, c.num(row.y), method_name(row.method),
                           c.num(row.estimate), c.num(row.diff));
      break;
    case Format::csv:
      out << "r,y_ml,method,estimate,reference,diff\n";
      for (const auto& row : rows)
        out << row.r << ',' << c.num(row.y) << ',' << method_name(row.method) << ',' << c.num(row.estimate)
            << ',' << ref_name << ',' << c.num(row.diff) << '\n';
      break;
    case Format::json: {
      json doc;
      doc["design"] = design_json(design);
      doc["reference"] = ref_name;
      doc["rows"] = json::array();
      for (const auto& row : rows)
        doc["rows"].push_back({{"r", row.r},
                               {"y_ml", c.num(row.y)},
                               {"method", std::string(method_name(row.method))},
                               {"estimate", c.num(row.estimate)},
                               {"diff", c.num(row.diff)}});
      out << doc.dump(2) << '\n';
      break;
    }
  }
  return kOk;
}

// ---------------------------------------------------------------------------
// example

struct ExampleCase {
  std::string name;
  InterimDecision decision;
  SufficientStats stats;
  std::vector<Estimate> estimates;
};

int cmd_example(const CommonFlags& c, std::ostream& out, std::ostream&) {
  constexpr double kBoundaryP = 0.004455;
  TwoStageDesign design{45, 61, 61, 90, 0.0, 1.0, 2.0};
  const double c2 = design.sigma1() * Phi_inv(1.0 - kBoundaryP / 2.0);
  design.c1 = -c2;
  design.c2 = c2;
  design.validate();
  const EstimatorOptions opts = c.estimator_options();

  auto run_case = [&](std::string name, double y1, double y) {
    ExampleCase ex;
    ex.name = std::move(name);
    ex.decision = decide(design, y1);
    ex.stats = SufficientStats::from_pooled(design.n1, y1, ex.decision.n_total, y);
    for (Method m : {Method::ML, Method::RB, Method::CMU, Method::CML, Method::CMLc})
      ex.estimates.push_back(estimate(m, design, ex.decision, ex.stats, opts));
    return ex;
  };
  // -log of the reported hazard ratios 0.16 and 0.13, rounded as published
  const ExampleCase real = run_case("observed", 1.83, 2.04);
  const ExampleCase hypo = run_case("hypothetical", 0.87, 0.87);
  const StageSigmas s = stage_sigmas(design, real.decision);
  const double rb_correction = real.estimates[1].point - real.stats.y;

  switch (c.fmt()) {
    case Format::text: {
      out << "Schizophrenia trial, time to relapse (Cox model, normal approximation)\n";
      out << "  effect = -log HR, sigma^2 = 4, relapses as sample size\n";
      out << fmt::format("  n1 = {}, n0 = nf = {}, nmax = {}\n", design.n1, design.n0, design.nmax);
      out << fmt::format("  interim two-sided p boundary {}: c2 = sigma1 * Phi^-1(1 - p/2)\n", kBoundaryP);
      out << fmt::format("  c2 = {:.3f}, c1 = {:.3f}   ({})\n", c2, -c2, c.num(c2));
      out << fmt::format("  sigma1 = {}, sigma2 = {}\n", c.num(s.sigma1), c.num(s.sigma2));
      out << fmt::format("  sigmaA^2 = {:.4f}, sigmaB^2 = {:.4f}\n", s.sigmaA * s.sigmaA, s.sigmaB * s.sigmaB);
      for (const ExampleCase* ex : {&real, &hypo}) {
        out << fmt::format("\n{} outcome: Y1 = {}, ML = {} -> R = {}, N = {}\n", ex->name, c.num(ex->stats.y1),
                           c.num(ex->stats.y), to_int(ex->decision.r), ex->decision.n_total);
        if (ex == &real) out << fmt::format("  RB - ML = {:.3g}\n", rb_correction);
        out << fmt::format("  {:<6}{:>13}{:>13}{:>8}\n", "method", "estimate", "se", "HR");
        for (const auto& e : ex->estimates)
          out << fmt::format("  {:<6}{:>13}{:>13}{:>8.2f}\n", method_name(e.method), c.num(e.point),
                             e.se ? c.num(*e.se) : "-", hr(e.point));
      }
      break;
    }
    case Format::csv:
      out << "case,method,estimate,se,hr\n";
      for (const ExampleCase* ex : {&real, &hypo})
        for (const auto& e : ex->estimates)
          out << ex->name << ',' << method_name(e.method) << ',' << c.num(e.point) << ','
              << (e.se ? c.num(*e.se) : "") << ',' << c.num(hr(e.point)) << '\n';
      break;
    case Format::json: {
      json doc;
      doc["design"] = design_json(design);
      doc["c2"] = c.num(c2);
      doc["sigmaA2"] = c.num(s.sigmaA * s.sigmaA);
      doc["sigmaB2"] = c.num(s.sigmaB * s.sigmaB);
      doc["cases"] = json::array();
      for (const ExampleCase* ex : {&real, &hypo}) {
        json jc;
        jc["case"] = ex->name;
        jc["y1"] = c.num(ex->stats.y1);
        jc["y"] = c.num(ex->stats.y);
        jc["r"] = to_int(ex->decision.r);
        jc["estimates"] = json::array();
        for (const auto& e : ex->estimates)
          jc["estimates"].push_back({{"method", std::string(method_name(e.method))},
                                     {"estimate", c.num(e.point)},
                                     {"hr", c.num(hr(e.point))}});
        doc["cases"].push_back(jc);
      }
      doc["rb_correction_observed"] = rb_correction;
      out << doc.dump(2) << '\n';
      break;
    }
  }
  return kOk;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Conditional and unconditional estimation after a two-stage design with sample-size recalculation",
               "condest"};
  app.require_subcommand(1);

  EstimateFlags est;
  auto* c_est = app.add_subcommand("estimate", "Estimate the effect from one trial");
  add_common(c_est, est.common);
  add_design(c_est, est.design);
  c_est->add_option("--y1", est.y1, "Interim (stage-1) mean")->required();
  c_est->add_option("--y", est.y, "Final pooled mean");
  c_est->add_option("--y2", est.y2, "Stage-2 mean");
  c_est->add_option("--ci", est.ci, "Confidence level for CMU, CML and ML intervals");
  c_est->add_option("--methods", est.methods, "Comma list of ML, RB, CMU, CML, CMLc, WM_FIXED, LH")
      ->capture_default_str();

  SimulateFlags sim;
  auto* c_sim = app.add_subcommand("simulate", "Monte Carlo study of the conditional estimators");
  add_common(c_sim, sim.common);
  c_sim->add_option("scenario_file", sim.scenario_file, "Scenario file");
  c_sim->add_flag("--table1", sim.table1, "Run the four built-in scenarios");
  c_sim->add_option("--n-reps", sim.n_reps, "Override the number of replications")->check(CLI::PositiveNumber);
  c_sim->add_option("--seed", sim.seed, "Override the seed (with --table1: base seed, scenario i uses seed + i)");
  c_sim->add_option("--methods", sim.methods, "Override the method list");
  c_sim->add_option("--workers", sim.workers, "Worker threads (0: all cores)")->capture_default_str();
  c_sim->add_option("--csv", sim.csv_path, "Also write the CSV report here");
  c_sim->add_option("--json", sim.json_path, "Also write the JSON report here");

  BiasCurveFlags bc;
  auto* c_bc = app.add_subcommand("bias-curve", "Analytic bias and variance curves over mu");
  add_common(c_bc, bc.common);
  add_design(c_bc, bc.design);
  c_bc->add_option("--mu-min", bc.grid.lo, "Grid start (default c1 - 3 sigma1)");
  c_bc->add_option("--mu-max", bc.grid.hi, "Grid end (default c2 + 3 sigma1)");
  c_bc->add_option("--points", bc.grid.points, "Grid size")->capture_default_str();
  c_bc->add_option("--quantities", bc.quantities, "Comma list of curve quantities (default all)");

  DiffCurveFlags dc;
  auto* c_dc = app.add_subcommand("diff-curve", "Estimator minus reference over the ML estimate");
  add_common(c_dc, dc.common);
  add_design(c_dc, dc.design);
  c_dc->add_option("--y-min", dc.grid.lo, "Grid start (default c1 - 3 sigma1)");
  c_dc->add_option("--y-max", dc.grid.hi, "Grid end (default c2 + 3 sigma1)");
  c_dc->add_option("--points", dc.grid.points, "Grid size")->capture_default_str();
  c_dc->add_option("--reference", dc.reference, "ML or RB")->capture_default_str();
  c_dc->add_option("--methods", dc.methods, "Comma list of estimators (default RB,CMU,CML,CMLc)");
  c_dc->add_option("--r", dc.r, "Only this decision (1 or 2)");

  CommonFlags ex;
  auto* c_ex = app.add_subcommand("example", "Worked example: schizophrenia trial");
  add_common(c_ex, ex);

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kOk : kUsage;
  }

  try {
    if (c_est->parsed()) return cmd_estimate(est, out, err);
    if (c_sim->parsed()) return cmd_simulate(sim, out, err);
    if (c_bc->parsed()) return cmd_bias_curve(bc, out, err);
    if (c_dc->parsed()) return cmd_diff_curve(dc, out, err);
    if (c_ex->parsed()) return cmd_example(ex, out, err);
  } catch (const SimulationQualityError& e) {
    err << "error: " << e.what() << '\n';
    return kSimulationQuality;
  } catch (const NumericalError& e) {
    err << "error: numerical failure: " << e.what() << '\n';
    return kNumerical;
  } catch (const std::invalid_argument& e) {
    err << "error: " << e.what() << '\n';
    return kUsage;
  } catch (const ScopeError& e) {
    err << "error: " << e.what() << '\n';
    return kUsage;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return 1;
  }
  return kUsage;
}

}  // namespace condest::cli
