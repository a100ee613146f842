#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "doctest.h"

#include "condest/cli.hpp"
#include "condest/report_io.hpp"

using json = nlohmann::json;
namespace fs = std::filesystem;

namespace {

struct Result {
  int code;
  std::string out;
  std::string err;
};

Result run(std::vector<std::string> args) {
  std::ostringstream out, err;
  const int code = condest::cli::run(args, out, err);
  return {code, out.str(), err.str()};
}

const std::vector<std::string> kStandard = {"--n1", "50", "--n0", "100", "--nmax", "150", "--c1", "0.9", "--c2", "1.2"};
const std::vector<std::string> kSchizo = {"--n1",    "45",    "--n0",     "61",    "--nmax", "90",
                                          "--sigma", "2",     "--c1",     "-0.848", "--c2",  "0.848"};

std::vector<std::string> cat(std::vector<std::string> a, const std::vector<std::string>& b) {
  a.insert(a.end(), b.begin(), b.end());
  return a;
}

std::map<std::string, double> estimates(const std::string& json_text) {
  std::map<std::string, double> m;
  const json doc = json::parse(json_text);
  for (const auto& e : doc["estimates"])
    m[e["method"].get<std::string>()] = std::stod(e["estimate"].get<std::string>());
  return m;
}

fs::path temp_dir() {
  const fs::path p = fs::temp_directory_path() / "condest_cli_test";
  fs::create_directories(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream s;
  s << in.rdbuf();
  return s.str();
}

std::string write_temp(const std::string& name, const std::string& text) {
  const fs::path p = temp_dir() / name;
  std::ofstream(p) << text;
  return p.string();
}

}  // namespace

TEST_CASE("estimate: schizophrenia trial") {
  auto r = run(cat(cat({"estimate"}, kSchizo), {"--y1", "1.83", "--y", "2.04", "--format", "json"}));
  REQUIRE(r.code == 0);
  const auto doc = json::parse(r.out);
  CHECK(doc["decision"]["r"] == 2);
  CHECK(doc["decision"]["n_total"] == 61);
  auto est = estimates(r.out);
  CHECK(est["ML"] == doctest::Approx(2.04));
  CHECK(std::abs(est["RB"] - 2.04) < 1e-5);

  r = run(cat(cat({"estimate"}, kSchizo), {"--y1", "0.87", "--y", "0.87", "--format", "json"}));
  REQUIRE(r.code == 0);
  est = estimates(r.out);
  CHECK(std::abs(est["RB"] - 0.566) < 0.001);
  auto hr2 = [](double x) { return std::round(std::exp(-x) * 100.0) / 100.0; };
  CHECK(hr2(est["RB"]) == doctest::Approx(0.57));
  CHECK(hr2(est["CMU"]) == doctest::Approx(0.59));
  CHECK(hr2(est["CML"]) == doctest::Approx(0.60));
  CHECK(hr2(est["CMLc"]) == doctest::Approx(0.57));
}

TEST_CASE("estimate: hazard-ratio mode") {
  const auto r = run({"estimate", "--n1", "45", "--n0", "61", "--nmax", "90", "--boundary-p", "0.004455", "--log-hr",
                      "--y1", "0.42", "--y", "0.42", "--format", "json"});
  REQUIRE(r.code == 0);
  const auto doc = json::parse(r.out);
  CHECK(doc["design"]["sigma"] == 2.0);
  CHECK(doc["decision"]["r"] == 2);
  for (const auto& e : doc["estimates"]) {
    const double hr = std::stod(e["hr"].get<std::string>());
    CHECK(hr == doctest::Approx(std::exp(-std::stod(e["estimate"].get<std::string>()))).epsilon(1e-5));
    if (e["method"] == "RB") CHECK(std::round(hr * 100) / 100 == doctest::Approx(0.57));
  }
}

TEST_CASE("estimate: futility stop and flag errors") {
  auto r = run(cat(cat({"estimate"}, kStandard), {"--y1", "0.5", "--y", "0.5"}));
  CHECK(r.code == 0);
  CHECK(r.out.find("R=0") != std::string::npos);
  CHECK(r.out.find("ML") != std::string::npos);
  CHECK(r.out.find("RB") == std::string::npos);
  CHECK(r.err.find("note:") != std::string::npos);

  CHECK(run(cat(cat({"estimate"}, kStandard), {"--y1", "1.0"})).code == 2);
  CHECK(run(cat(cat({"estimate"}, kStandard), {"--y1", "1.0", "--y", "1", "--y2", "1"})).code == 2);
  CHECK(run(cat(cat({"estimate"}, kStandard), {"--y1", "1.0", "--y", "1", "--methods", "XX"})).code == 2);
  CHECK(run(cat(cat({"estimate"}, kStandard), {"--y1", "1.0", "--y", "1", "--ci", "1.5"})).code == 2);
  CHECK(run(cat(cat({"estimate"}, kStandard), {"--y1", "1.0", "--y", "1", "--format", "xml"})).code == 2);
  CHECK(run({"estimate", "--n1", "50", "--n0", "40", "--nmax", "150", "--y1", "1", "--y", "1"}).code == 2);
  CHECK(run({"bogus"}).code == 2);
  CHECK(run({}).code == 2);
  // y2 form gives the same pooled mean
  const auto a = run(cat(cat({"estimate"}, kStandard), {"--y1", "1.0", "--y2", "0.7", "--format", "json"}));
  CHECK(estimates(a.out)["ML"] == doctest::Approx(0.8));
  // far inside the R = 2 region the conditional estimate equals ML
  const auto far = run(cat(cat({"estimate"}, kStandard), {"--y1", "1e6", "--y", "1e6", "--methods", "CMU", "--format", "json"}));
  CHECK(far.code == 0);
  CHECK(estimates(far.out)["CMU"] == 1e6);
  // an unattainable quadrature tolerance is a numerical failure
  const auto bad = run(cat(cat({"estimate"}, kStandard), {"--y1", "1.0", "--y", "1.1", "--methods", "CMU", "--quad-tol", "1e-30"}));
  CHECK(bad.code == 3);
  CHECK(bad.err.find("numerical failure") != std::string::npos);
}

TEST_CASE("estimate: intervals and infinite cuts") {
  const auto r = run(cat(cat({"estimate"}, kStandard), {"--y1", "1.0", "--y", "1.1", "--ci", "0.95", "--format", "json"}));
  REQUIRE(r.code == 0);
  const json doc = json::parse(r.out);
  for (const auto& e : doc["estimates"]) {
    if (!e.contains("ci")) continue;
    const double lo = std::stod(e["ci"][0].get<std::string>());
    const double hi = std::stod(e["ci"][1].get<std::string>());
    const double pt = std::stod(e["estimate"].get<std::string>());
    CHECK(lo < pt);
    CHECK(pt < hi);
  }
  const auto open = run({"estimate", "--n1", "50", "--n0", "100", "--nmax", "150", "--c1", "-inf", "--c2", "inf",
                         "--y1", "0.3", "--y", "0.4", "--format", "json"});
  REQUIRE(open.code == 0);
  for (const auto& [m, v] : estimates(open.out)) CHECK(v == doctest::Approx(0.4).epsilon(1e-6));
}

TEST_CASE("estimate: JSON round trip") {
  const auto first = run(cat(cat({"estimate"}, kStandard), {"--y1", "1.0", "--y", "1.13", "--ci", "0.9", "--format", "json"}));
  REQUIRE(first.code == 0);
  const auto args = json::parse(first.out)["input"]["args"].get<std::vector<std::string>>();
  const auto second = run(args);
  REQUIRE(second.code == 0);
  CHECK(json::parse(second.out)["estimates"] == json::parse(first.out)["estimates"]);
  CHECK(json::parse(second.out)["input"] == json::parse(first.out)["input"]);
}

TEST_CASE("estimate: output formats") {
  const auto text = run(cat(cat({"estimate"}, kStandard), {"--y1", "1.0", "--y", "1.1"}));
  CHECK(text.out.find("decision  R=1 N=150 N2=100") != std::string::npos);
  const auto csv = run(cat(cat({"estimate"}, kStandard), {"--y1", "1.0", "--y", "1.1", "--format", "csv"}));
  CHECK(csv.out.rfind("method,estimate,se,ci_lower,ci_upper\n", 0) == 0);
  CHECK(csv.out.find("\nML,1.10000,0.0816497,,\n") != std::string::npos);
  const auto p3 = run(cat(cat({"estimate"}, kStandard), {"--y1", "1.0", "--y", "1.1", "--format", "csv", "--precision", "3"}));
  CHECK(p3.out.find("\nML,1.10,0.0816,,\n") != std::string::npos);
  CHECK(run(cat(cat({"estimate"}, kStandard), {"--y1", "1.0", "--y", "1.1", "--precision", "0"})).code == 2);
}

TEST_CASE("number formatting") {
  using condest::format_number;
  CHECK(format_number(1.1) == "1.10000");
  CHECK(format_number(0.0816497) == "0.0816497");
  CHECK(format_number(-0.043) == "-0.0430000");
  CHECK(format_number(123456.7) == "123457");
  CHECK(format_number(1e-12) == "0.00000000000100000");
  CHECK(format_number(0.0) == "0");
  CHECK(format_number(INFINITY) == "inf");
  CHECK(format_number(-INFINITY) == "-inf");
  CHECK(format_number(2.5, 2) == "2.5");
}

TEST_CASE("simulate") {
  const std::string cfg = write_temp("one.cfg",
                                     "# test scenario\n"
                                     "n_reps = 1\nseed = 5\n"
                                     "[one]\nmu = 1.0\nn1 = 50\nn0 = 100\nnmax = 150\nc1 = 0.9\nc2 = 1.2\n");
  const auto dir = temp_dir();
  const auto a = run({"simulate", cfg, "--csv", (dir / "a.csv").string(), "--json", (dir / "a.json").string()});
  const auto b = run({"simulate", cfg, "--csv", (dir / "b.csv").string(), "--json", (dir / "b.json").string()});
  REQUIRE(a.code == 0);
  REQUIRE(b.code == 0);
  CHECK(a.out == b.out);
  CHECK(slurp(dir / "a.csv") == slurp(dir / "b.csv"));
  CHECK(slurp(dir / "a.csv").rfind("scenario_id,r,method,count,bias,var,mse\n", 0) == 0);
  auto ja = json::parse(slurp(dir / "a.json"));
  auto jb = json::parse(slurp(dir / "b.json"));
  for (auto* j : {&ja, &jb})
    for (auto& s : (*j)["scenarios"]) s.erase("wall_seconds");
  CHECK(ja == jb);

  const auto ml = run({"simulate", cfg, "--methods", "ML", "--n-reps", "50", "--format", "csv"});
  REQUIRE(ml.code == 0);
  CHECK(ml.out.find(",RB,") == std::string::npos);
  CHECK(ml.out.find(",ML,") != std::string::npos);

  const auto w1 = run({"simulate", cfg, "--n-reps", "300", "--workers", "1", "--format", "csv"});
  const auto w3 = run({"simulate", cfg, "--n-reps", "300", "--workers", "3", "--format", "csv"});
  CHECK(w1.out == w3.out);

  CHECK(run({"simulate"}).code == 2);
  CHECK(run({"simulate", cfg, "--table1"}).code == 2);
  CHECK(run({"simulate", cfg, "--methods", "LH"}).code == 2);
  CHECK(run({"simulate", (dir / "missing.cfg").string()}).code == 2);
  CHECK(run({"simulate", cfg, "--n-reps", "200", "--quad-tol", "1e-30", "--methods", "CMU"}).code == 4);
}

TEST_CASE("simulate: bundled reference scenarios") {
  const fs::path cfg = fs::path(CONDEST_DATA_DIR) / "table1.cfg";
  const auto list = condest::load_scenarios(cfg);
  REQUIRE(list.size() == 4);
  const auto builtin = condest::table1_scenarios();
  for (std::size_t i = 0; i < 4; ++i) {
    CHECK(list[i].mu == builtin[i].mu);
    CHECK(list[i].seed == builtin[i].seed);
    CHECK(list[i].n_reps == builtin[i].n_reps);
    CHECK(condest::describe(list[i].design) == condest::describe(builtin[i].design));
  }
  const auto a = run({"simulate", cfg.string(), "--n-reps", "2000", "--methods", "ML,RB", "--format", "csv"});
  const auto b = run({"simulate", "--table1", "--n-reps", "2000", "--methods", "ML,RB", "--format", "csv"});
  REQUIRE(a.code == 0);
  CHECK(a.out == b.out);
  const auto text = run({"simulate", "--table1", "--n-reps", "500", "--methods", "ML"});
  CHECK(text.code == 0);
  CHECK(text.out.find("ML") != std::string::npos);
}

TEST_CASE("scenario file errors") {
  auto parse = [](const std::string& text) {
    std::istringstream in(text);
    return condest::parse_scenarios(in, "x.cfg");
  };
  const std::string base = "[s]\nmu = 1\nn1 = 50\nn0 = 100\nnmax = 150\nc1 = 0.9\nc2 = 1.2\n";
  CHECK(parse(base).size() == 1);
  CHECK(parse(base)[0].design.nf == 50);
  CHECK(parse(base)[0].design.sigma == 1.0);
  CHECK(parse("c1 = -inf\n[s]\nmu = 1\nn1 = 50\nn0 = 100\nnmax = 150\nc2 = 1.2\n")[0].design.c1.value() == -INFINITY);
  CHECK_THROWS_WITH_AS(parse(base + "colour = red\n"), doctest::Contains("x.cfg:8"), condest::ConfigError);
  CHECK_THROWS_AS(parse(base + "mu = 2\n"), condest::ConfigError);
  CHECK_THROWS_AS(parse("[s]\nmu = abc\n"), condest::ConfigError);
  CHECK_THROWS_AS(parse("[s]\nmu = 1\n"), condest::ConfigError);
  CHECK_THROWS_AS(parse("mu 1\n"), condest::ConfigError);
  CHECK_THROWS_AS(parse(""), condest::ConfigError);
  CHECK_THROWS_AS(parse(base + "[s]\n" + base.substr(4)), condest::ConfigError);
  CHECK(run({"simulate", write_temp("bad.cfg", "[s]\nmu = 1\n")}).code == 2);
}

TEST_CASE("bias-curve") {
  const auto r = run(cat(cat({"bias-curve"}, kStandard), {"--points", "5", "--quantities", "WM_BIAS,ML_BIAS_R2", "--format", "csv"}));
  REQUIRE(r.code == 0);
  std::istringstream in(r.out);
  std::string line;
  std::getline(in, line);
  CHECK(line == "quantity,mu,value");
  int rows = 0;
  while (std::getline(in, line)) ++rows;
  CHECK(rows == 10);

  const auto upper_right = run({"bias-curve", "--n1", "50", "--n0", "100", "--nmax", "150", "--c1", "0", "--c2",
                                "1.2", "--quantities", "WM_BIAS", "--mu-min", "0", "--mu-max", "1.2", "--points",
                                "2", "--format", "json"});
  REQUIRE(upper_right.code == 0);
  const auto doc = json::parse(upper_right.out);
  const auto& pts = doc["points"];
  REQUIRE(pts.size() == 2);
  CHECK(std::stod(pts[0]["value"].get<std::string>()) < 0.0);
  CHECK(std::stod(pts[1]["value"].get<std::string>()) > 0.0);

  // a design without a lower cut has no R = 0 region but all curves still exist;
  // without any cut the conditional curves coincide with the plain ones
  const auto open = run({"bias-curve", "--n1", "50", "--n0", "100", "--nmax", "150", "--c1", "-inf", "--c2", "0",
                         "--points", "3", "--format", "csv"});
  CHECK(open.code == 0);

  CHECK(run(cat(cat({"bias-curve"}, kStandard), {"--mu-min", "2", "--mu-max", "1"})).code == 2);
  CHECK(run(cat(cat({"bias-curve"}, kStandard), {"--points", "0"})).code == 2);
  CHECK(run(cat(cat({"bias-curve"}, kStandard), {"--mu-min", "nan"})).code == 2);
  CHECK(run(cat(cat({"bias-curve"}, kStandard), {"--quantities", "NOPE"})).code == 2);
}

TEST_CASE("diff-curve") {
  const auto r = run(cat(cat({"diff-curve"}, kStandard), {"--r", "1", "--methods", "RB", "--y-min", "1.0", "--y-max",
                                                      "1.1", "--points", "11", "--format", "csv"}));
  REQUIRE(r.code == 0);
  CHECK(r.out.rfind("r,y_ml,method,estimate,reference,diff\n", 0) == 0);
  CHECK(r.out.find("1,1.04000,RB,") != std::string::npos);
  std::istringstream in(r.out);
  std::string line;
  std::getline(in, line);
  double prev_y = 0, prev_d = 0;
  double crossing = NAN;
  while (std::getline(in, line)) {
    std::vector<std::string> f;
    std::stringstream ls(line);
    for (std::string cell; std::getline(ls, cell, ',');) f.push_back(cell);
    const double y = std::stod(f[1]), d = std::stod(f[5]);
    if (d == 0.0) crossing = y;
    if (prev_d < 0.0 && d > 0.0) crossing = prev_y - prev_d * (y - prev_y) / (d - prev_d);
    prev_y = y;
    prev_d = d;
  }
  CHECK(crossing == doctest::Approx(1.05).epsilon(1e-6));

  const auto diff = run(cat(cat({"diff-curve"}, kStandard), {"--r", "2", "--reference", "RB", "--methods", "CMU",
                                                         "--points", "401", "--format", "json"}));
  REQUIRE(diff.code == 0);
  double worst = 0, at = 0;
  const json rows = json::parse(diff.out)["rows"];
  for (const auto& row : rows) {
    const double d = std::stod(row["diff"].get<std::string>());
    if (std::abs(d) > std::abs(worst)) {
      worst = d;
      at = std::stod(row["y_ml"].get<std::string>());
    }
  }
  CHECK(std::abs(std::abs(worst) - 0.0066) <= 0.001);
  CHECK(std::abs(at - 1.32) <= 0.02);

  CHECK(run(cat(cat({"diff-curve"}, kStandard), {"--reference", "CMU"})).code == 2);
  CHECK(run(cat(cat({"diff-curve"}, kStandard), {"--r", "0"})).code == 2);
  CHECK(run(cat(cat({"diff-curve"}, kStandard), {"--y-min", "2", "--y-max", "1"})).code == 2);
}

TEST_CASE("example") {
  const auto r = run({"example"});
  REQUIRE(r.code == 0);
  CHECK(r.out.find("c2 = 0.848") != std::string::npos);
  CHECK(r.out.find("sigmaA^2 = 0.0233, sigmaB^2 = 0.1844") != std::string::npos);
  const auto hyp = r.out.substr(r.out.find("hypothetical"));
  for (const auto& [m, hr] : std::vector<std::pair<std::string, std::string>>{
           {"RB", "0.57"}, {"CMU", "0.59"}, {"CML", "0.60"}, {"CMLc", "0.57"}}) {
    const auto pos = hyp.find("\n  " + m + " ");
    REQUIRE(pos != std::string::npos);
    const auto eol = hyp.find('\n', pos + 1);
    CHECK(hyp.substr(pos, eol - pos).find(hr) != std::string::npos);
  }
  const auto csv = run({"example", "--format", "csv"});
  CHECK(csv.code == 0);
  CHECK(csv.out.rfind("case,method,estimate,se,hr\n", 0) == 0);
  const auto js = run({"example", "--format", "json"});
  CHECK(js.code == 0);
  CHECK(json::parse(js.out).is_object());
}
