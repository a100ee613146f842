#include "condest/report_io.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>

#include <fmt/format.h>

#include "json.hpp"

namespace condest {

namespace {

std::string trim(std::string_view s) {
  auto is_space = [](unsigned char c) { return std::isspace(c) != 0; };
  while (!s.empty() && is_space(s.front())) s.remove_prefix(1);
  while (!s.empty() && is_space(s.back())) s.remove_suffix(1);
  return std::string(s);
}

struct Section {
  std::string name;
  int line = 0;
  std::map<std::string, std::pair<std::string, int>> values;  // key -> (value, line)
};

class Reader {
 public:
  Reader(std::string_view source, const Section& defaults, const Section& section)
      : source_(source), defaults_(defaults), section_(section) {}

  std::optional<std::pair<std::string, int>> find(const std::string& key) const {
    if (auto it = section_.values.find(key); it != section_.values.end()) return it->second;
    if (auto it = defaults_.values.find(key); it != defaults_.values.end()) return it->second;
    return std::nullopt;
  }

  [[noreturn]] void fail(int line, const std::string& msg) const {
    throw ConfigError(fmt::format("{}:{}: {}", source_, line, msg));
  }

  std::pair<std::string, int> require(const std::string& key) const {
    auto v = find(key);
    if (!v) fail(section_.line, fmt::format("scenario '{}' is missing key '{}'", section_.name, key));
    return *v;
  }

  double real(const std::string& key) const {
    auto [text, line] = require(key);
    return parse_real(text, line, key);
  }

  ExtendedReal extended(const std::string& key) const {
    auto [text, line] = require(key);
    try {
      return ExtendedReal::parse(text);
    } catch (const std::exception&) {
      fail(line, fmt::format("'{}' is not a number or +-inf: '{}'", key, text));
    }
  }

  std::uint64_t unsigned_int(const std::string& key, std::uint64_t fallback) const {
    auto v = find(key);
    if (!v) return fallback;
    std::uint64_t out = 0;
    const auto& [text, line] = *v;
    auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), out);
    if (ec != std::errc() || ptr != text.data() + text.size())
      fail(line, fmt::format("'{}' must be a non-negative integer, got '{}'", key, text));
    return out;
  }

  int size(const std::string& key) const {
    const std::uint64_t v = unsigned_int(key, 0);
    if (!find(key)) require(key);
    if (v > 100000000) fail(require(key).second, fmt::format("'{}' is too large", key));
    return static_cast<int>(v);
  }

 private:
  double parse_real(const std::string& text, int line, const std::string& key) const {
    std::istringstream is(text);
    is.imbue(std::locale::classic());
    double v = 0.0;
    is >> v;
    if (is.fail() || !is.eof() || !std::isfinite(v))
      fail(line, fmt::format("'{}' must be a finite number, got '{}'", key, text));
    return v;
  }

  std::string_view source_;
  const Section& defaults_;
  const Section& section_;
};

std::vector<Method> parse_methods(const std::string& text, const Reader& reader, int line) {
  std::vector<Method> out;
  std::string item;
  std::istringstream is(text);
  while (std::getline(is, item, ',')) {
    item = trim(item);
    if (item.empty()) continue;
    try {
      const Method m = parse_method(item);
      if (std::find(out.begin(), out.end(), m) == out.end()) out.push_back(m);
    } catch (const std::exception&) {
      reader.fail(line, fmt::format("unknown method '{}'", item));
    }
  }
  if (out.empty()) reader.fail(line, "methods list is empty");
  return out;
}

ScenarioConfig build(std::string_view source, const Section& defaults, const Section& section) {
  static const char* const kKnown[] = {"mu", "n1", "nf", "n0", "nmax", "c1", "c2", "sigma", "n_reps", "seed", "methods"};
  Reader reader(source, defaults, section);
  for (const Section* s : {&defaults, &section}) {
    for (const auto& [key, value] : s->values) {
      if (std::find(std::begin(kKnown), std::end(kKnown), key) == std::end(kKnown))
        reader.fail(value.second, fmt::format("unknown key '{}'", key));
    }
  }

  ScenarioConfig cfg;
  cfg.id = section.name;
  cfg.mu = reader.real("mu");
  cfg.design.n1 = reader.size("n1");
  cfg.design.nf = reader.find("nf") ? reader.size("nf") : cfg.design.n1;
  cfg.design.n0 = reader.size("n0");
  cfg.design.nmax = reader.size("nmax");
  cfg.design.c1 = reader.extended("c1");
  cfg.design.c2 = reader.extended("c2");
  cfg.design.sigma = reader.find("sigma") ? reader.real("sigma") : 1.0;
  cfg.n_reps = reader.unsigned_int("n_reps", cfg.n_reps);
  cfg.seed = reader.unsigned_int("seed", cfg.seed);
  if (auto m = reader.find("methods")) cfg.methods = parse_methods(m->first, reader, m->second);
  try {
    cfg.validate();
  } catch (const std::invalid_argument& e) {
    reader.fail(section.line, fmt::format("scenario '{}': {}", section.name, e.what()));
  }
  return cfg;
}

std::string method_label(const CellStats& c) { return std::string(method_name(c.method)); }

// Round-trips through the printed text so JSON carries the same digits as CSV.
nlohmann::json json_number(double x, int precision) {
  if (!std::isfinite(x)) return format_number(x, precision);
  return std::stod(format_number(x, precision));
}

}  // namespace

std::vector<ScenarioConfig> parse_scenarios(std::istream& in, std::string_view source) {
  Section defaults{"scenario", 1, {}};
  std::vector<Section> sections;
  std::string raw;
  int line_no = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    std::string line = trim(raw);
    if (line.empty() || line[0] == '#' || line[0] == ';') continue;
    if (line.front() == '[') {
      if (line.back() != ']' || line.size() < 3)
        throw ConfigError(fmt::format("{}:{}: malformed section header '{}'", source, line_no, line));
      const std::string name = trim(std::string_view(line).substr(1, line.size() - 2));
      for (const auto& s : sections)
        if (s.name == name)
          throw ConfigError(fmt::format("{}:{}: duplicate scenario '{}'", source, line_no, name));
      sections.push_back({name, line_no, {}});
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError(fmt::format("{}:{}: expected key = value, got '{}'", source, line_no, line));
    std::string key = trim(std::string_view(line).substr(0, eq));
    std::transform(key.begin(), key.end(), key.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    const std::string value = trim(std::string_view(line).substr(eq + 1));
    if (key.empty() || value.empty())
      throw ConfigError(fmt::format("{}:{}: empty key or value", source, line_no));
    Section& target = sections.empty() ? defaults : sections.back();
    if (!target.values.emplace(key, std::make_pair(value, line_no)).second)
      throw ConfigError(fmt::format("{}:{}: duplicate key '{}'", source, line_no, key));
  }

  std::vector<ScenarioConfig> out;
  if (sections.empty()) {
    if (defaults.values.empty()) throw ConfigError(fmt::format("{}: no scenario defined", source));
    out.push_back(build(source, Section{}, defaults));
  } else {
    for (const auto& s : sections) out.push_back(build(source, defaults, s));
  }
  return out;
}

std::vector<ScenarioConfig> load_scenarios(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError(fmt::format("cannot read scenario file '{}'", path.string()));
  return parse_scenarios(in, path.string());
}

std::string format_number(double x, int precision) {
  if (std::isnan(x)) return "nan";
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  if (x == 0.0) return "0";
  precision = std::clamp(precision, 1, 17);
  const int magnitude = static_cast<int>(std::floor(std::log10(std::fabs(x))));
  const int decimals = std::clamp(precision - 1 - magnitude, 0, 20);
  std::string s = fmt::format("{:.{}f}", x, decimals);
  // rounding can carry into a new leading digit (9.999995 -> 10.00000)
  const int kept = std::clamp(precision - 2 - magnitude, 0, 20);
  const double rounded = std::stod(s);
  if (std::fabs(rounded) >= std::pow(10.0, magnitude + 1) && kept < decimals)
    s = fmt::format("{:.{}f}", x, kept);
  if (s == "-0" || s.find_first_not_of("-0.") == std::string::npos) s = "0";
  return s;
}

void write_csv(std::ostream& out, const std::vector<ScenarioReport>& reports, int precision) {
  out << "scenario_id,r,method,count,bias,var,mse\n";
  for (const auto& rep : reports) {
    out << rep.config.id << ",0,ALL," << rep.counts[0] << ",,,\n";
    for (int r = 1; r <= 2; ++r) {
      for (const auto& c : rep.cells) {
        if (to_int(c.r) != r) continue;
        out << rep.config.id << ',' << r << ',' << method_label(c) << ',' << c.count << ',';
        if (c.count > 0) out << format_number(c.bias, precision);
        out << ',';
        if (c.var) out << format_number(*c.var, precision);
        out << ',';
        if (c.mse) out << format_number(*c.mse, precision);
        out << '\n';
      }
    }
  }
}

void write_json(std::ostream& out, const std::vector<ScenarioReport>& reports, int precision) {
  nlohmann::json doc;
  doc["columns"] = {"scenario_id", "r", "method", "count", "bias", "var", "mse"};
  doc["scenarios"] = nlohmann::json::array();
  for (const auto& rep : reports) {
    const auto& cfg = rep.config;
    nlohmann::json s;
    s["scenario_id"] = cfg.id;
    s["mu"] = cfg.mu;
    s["design"] = {{"n1", cfg.design.n1},
                   {"nf", cfg.design.nf},
                   {"n0", cfg.design.n0},
                   {"nmax", cfg.design.nmax},
                   {"c1", cfg.design.c1.to_string()},
                   {"c2", cfg.design.c2.to_string()},
                   {"sigma", cfg.design.sigma}};
    s["n_reps"] = cfg.n_reps;
    s["seed"] = cfg.seed;
    s["methods"] = nlohmann::json::array();
    for (Method m : cfg.methods) s["methods"].push_back(std::string(method_name(m)));
    s["counts"] = {{"0", rep.counts[0]}, {"1", rep.counts[1]}, {"2", rep.counts[2]}};
    s["wall_seconds"] = json_number(rep.wall_seconds, 3);
    s["workers"] = rep.workers;
    s["rows"] = nlohmann::json::array();
    for (const auto& c : rep.cells) {
      nlohmann::json row;
      row["r"] = to_int(c.r);
      row["method"] = method_label(c);
      row["count"] = c.count;
      row["bias"] = c.count > 0 ? json_number(c.bias, precision) : nlohmann::json();
      row["var"] = c.var ? json_number(*c.var, precision) : nlohmann::json();
      row["mse"] = c.mse ? json_number(*c.mse, precision) : nlohmann::json();
      row["failures"] = c.failures;
      row["frac_at_or_above_mu"] = json_number(c.frac_at_or_above, precision);
      s["rows"].push_back(row);
    }
    doc["scenarios"].push_back(s);
  }
  out << doc.dump(2) << '\n';
}

void write_text(std::ostream& out, const std::vector<ScenarioReport>& reports, int precision) {
  for (const auto& rep : reports) {
    const auto& cfg = rep.config;
    out << fmt::format("scenario {}: mu={} {}\n", cfg.id, format_number(cfg.mu, precision),
                       describe(cfg.design));
    out << fmt::format("  n_reps={} seed={}  R=0: {}  R=1: {}  R=2: {}\n", cfg.n_reps, cfg.seed,
                       rep.counts[0], rep.counts[1], rep.counts[2]);
    out << fmt::format("  {:<4} {:<6} {:>12} {:>12} {:>12} {:>9}\n", "R", "method", "bias", "var",
                       "mse", "failures");
    for (int r = 1; r <= 2; ++r) {
      for (const auto& c : rep.cells) {
        if (to_int(c.r) != r) continue;
        auto opt = [&](const std::optional<double>& v) {
          return v ? format_number(*v, precision) : std::string("-");
        };
        out << fmt::format("  {:<4} {:<6} {:>12} {:>12} {:>12} {:>9}\n", r, method_label(c),
                           c.count > 0 ? format_number(c.bias, precision) : std::string("-"),
                           opt(c.var), opt(c.mse), c.failures);
      }
    }
  }
}

}  // namespace condest
