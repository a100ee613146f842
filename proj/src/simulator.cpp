#include "condest/simulator.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <numbers>
#include <stdexcept>
#include <thread>

#include <fmt/format.h>

namespace condest {

double NormalStream::next() {
  if (has_spare_) {
    has_spare_ = false;
    return spare_;
  }
  const auto out = Philox4x32::block(
      {static_cast<std::uint32_t>(index_), static_cast<std::uint32_t>(index_ >> 32), block_++, 0u}, key_);
  constexpr double kTwo53 = 1.0 / 9007199254740992.0;
  const std::uint64_t a = (static_cast<std::uint64_t>(out[0]) << 32 | out[1]) >> 11;
  const std::uint64_t b = (static_cast<std::uint64_t>(out[2]) << 32 | out[3]) >> 11;
  const double u1 = (static_cast<double>(a) + 1.0) * kTwo53;  // (0, 1]
  const double u2 = static_cast<double>(b) * kTwo53;          // [0, 1)
  const double radius = std::sqrt(-2.0 * std::log(u1));
  const double angle = 2.0 * std::numbers::pi * u2;
  spare_ = radius * std::sin(angle);
  has_spare_ = true;
  return radius * std::cos(angle);
}

void ScenarioConfig::validate() const {
  design.validate();
  if (!std::isfinite(mu)) throw std::invalid_argument("scenario: mu must be finite");
  if (n_reps < 1) throw std::invalid_argument("scenario: n_reps must be >= 1");
  if (methods.empty()) throw std::invalid_argument("scenario: no methods requested");
  for (Method m : methods) {
    if (m == Method::WM_FIXED || m == Method::LH)
      throw std::invalid_argument(
          fmt::format("scenario: method {} is not a conditional estimator", method_name(m)));
  }
}

TrialDraw simulate_trial(double mu, const TwoStageDesign& design, NormalStream& rng) {
  const double z1 = rng.next();
  const double z2 = rng.next();
  const double y1 = mu + design.sigma1() * z1;
  const InterimDecision dec = decide(design, y1);
  double y2 = 0.0;
  if (dec.n2 > 0) y2 = mu + design.sigma / std::sqrt(static_cast<double>(dec.n2)) * z2;
  return {dec, SufficientStats::from_stage_means(design.n1, y1, dec.n2, y2)};
}

double CellStats::bias_se() const {
  if (!var || count == 0) return kInf;
  return std::sqrt(*var / static_cast<double>(count));
}

const CellStats& ScenarioReport::cell(Method m, Outcome r) const {
  for (const auto& c : cells)
    if (c.method == m && c.r == r) return c;
  throw std::out_of_range(fmt::format("report has no cell for {} / R={}", method_name(m), to_int(r)));
}

namespace {

// Errors e = estimate - mu, combined with Chan's pairwise update.
struct Accumulator {
  std::uint64_t n = 0;
  double mean = 0.0;
  double m2 = 0.0;
  double sum_sq = 0.0;
  std::uint64_t at_or_above = 0;
  std::uint64_t failures = 0;

  void add(double e) {
    ++n;
    const double delta = e - mean;
    mean += delta / static_cast<double>(n);
    m2 += delta * (e - mean);
    sum_sq += e * e;
    if (e >= 0.0) ++at_or_above;
  }

  void merge(const Accumulator& o) {
    failures += o.failures;
    if (o.n == 0) return;
    if (n == 0) {
      const auto f = failures;
      *this = o;
      failures = f;
      return;
    }
    const double na = static_cast<double>(n);
    const double nb = static_cast<double>(o.n);
    const double total = na + nb;
    const double delta = o.mean - mean;
    mean += delta * nb / total;
    m2 += o.m2 + delta * delta * na * nb / total;
    sum_sq += o.sum_sq;
    at_or_above += o.at_or_above;
    n += o.n;
  }
};

struct ChunkResult {
  std::array<std::uint64_t, 3> counts{};
  std::vector<Accumulator> cells;  // method-major, R = 1, 2
};

double apply(Method m, const CondContext& ctx, const SufficientStats& stats, double sigma,
             const EstimatorOptions& eo) {
  switch (m) {
    case Method::ML: return ml(stats, sigma).point;
    case Method::RB: return rb(ctx, stats, eo).point;
    case Method::CMU: return cmu(ctx, stats, 0.5, eo).point;
    case Method::CML: return cml(ctx, stats, eo).point;
    case Method::CMLc: return cmlc(ctx, stats, eo).point;
    default: break;
  }
  throw std::invalid_argument("unsupported simulation method");
}

}  // namespace

ScenarioReport run_scenario(const ScenarioConfig& config, const SimulationOptions& opts) {
  config.validate();
  const auto start = std::chrono::steady_clock::now();

  const TwoStageDesign& design = config.design;
  const std::size_t n_methods = config.methods.size();
  // Conditional contexts exist only when stage 2 has observations.
  std::array<std::optional<CondContext>, 2> contexts;
  for (int k = 0; k < 2; ++k) {
    const Outcome r = outcome_from_int(k + 1);
    if (decision_for(design, r).n2 > 0) contexts[k] = CondContext::make(design, r);
  }
  EstimatorOptions eo;
  eo.quad_tol = opts.quad_tol;
  eo.root_tol = opts.root_tol;
  eo.with_se = false;

  const std::uint64_t n_chunks = (config.n_reps + kChunkSize - 1) / kChunkSize;
  std::vector<ChunkResult> chunks(n_chunks);

  auto run_chunk = [&](std::uint64_t c) {
    ChunkResult res;
    res.cells.resize(n_methods * 2);
    const std::uint64_t first = c * kChunkSize;
    const std::uint64_t last = std::min(config.n_reps, first + kChunkSize);
    for (std::uint64_t i = first; i < last; ++i) {
      NormalStream rng(config.seed, i);
      const TrialDraw draw = simulate_trial(config.mu, design, rng);
      const int r = to_int(draw.decision.r);
      ++res.counts[r];
      if (r == 0) continue;
      for (std::size_t m = 0; m < n_methods; ++m) {
        Accumulator& acc = res.cells[m * 2 + (r - 1)];
        const Method method = config.methods[m];
        try {
          if (!contexts[r - 1]) {
            if (method != Method::ML) throw NumericalError("no stage-2 data");
            acc.add(draw.stats.y - config.mu);
            continue;
          }
          acc.add(apply(method, *contexts[r - 1], draw.stats, design.sigma, eo) - config.mu);
        } catch (const NumericalError&) {
          ++acc.failures;
        }
      }
    }
    chunks[c] = std::move(res);
  };

  unsigned workers = opts.workers ? opts.workers : std::max(1u, std::thread::hardware_concurrency());
  workers = static_cast<unsigned>(std::min<std::uint64_t>(workers, n_chunks));
  if (workers <= 1) {
    for (std::uint64_t c = 0; c < n_chunks; ++c) run_chunk(c);
  } else {
    std::atomic<std::uint64_t> next{0};
    std::exception_ptr error;
    std::atomic<bool> failed{false};
    std::vector<std::thread> pool;
    for (unsigned w = 0; w < workers; ++w) {
      pool.emplace_back([&] {
        for (std::uint64_t c = next++; c < n_chunks && !failed; c = next++) {
          try {
            run_chunk(c);
          } catch (...) {
            if (!failed.exchange(true)) error = std::current_exception();
          }
        }
      });
    }
    for (auto& t : pool) t.join();
    if (error) std::rethrow_exception(error);
  }

  ScenarioReport report;
  report.config = config;
  report.workers = std::max(1u, workers);
  std::vector<Accumulator> total(n_methods * 2);
  for (const auto& ch : chunks) {
    for (int r = 0; r < 3; ++r) report.counts[r] += ch.counts[r];
    for (std::size_t k = 0; k < total.size(); ++k) total[k].merge(ch.cells[k]);
  }

  for (std::size_t m = 0; m < n_methods; ++m) {
    for (int k = 0; k < 2; ++k) {
      const Accumulator& acc = total[m * 2 + k];
      CellStats cell;
      cell.method = config.methods[m];
      cell.r = outcome_from_int(k + 1);
      cell.count = acc.n;
      cell.failures = acc.failures;
      if (acc.n > 0) {
        const double n = static_cast<double>(acc.n);
        cell.bias = acc.mean;
        cell.frac_at_or_above = static_cast<double>(acc.at_or_above) / n;
        if (acc.n >= 2) {
          cell.var = acc.m2 / n;
          cell.mse = acc.sum_sq / n;
        }
      }
      report.cells.push_back(cell);
    }
  }
  report.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();

  for (const auto& cell : report.cells) {
    const double rate = static_cast<double>(cell.failures) / static_cast<double>(config.n_reps);
    if (rate > opts.max_failure_rate)
      throw SimulationQualityError(fmt::format(
          "scenario {}: {} failed on {} of {} replications (R={}), above the {:g} limit", config.id,
          method_name(cell.method), cell.failures, config.n_reps, to_int(cell.r), opts.max_failure_rate));
  }
  return report;
}

std::vector<ScenarioConfig> table1_scenarios(std::uint64_t n_reps, std::uint64_t seed) {
  struct Row {
    double mu;
    int n1;
    double c2;
  };
  constexpr Row rows[] = {{1.0, 50, 1.2}, {1.2, 70, 1.2}, {1.4, 50, 1.3}, {0.9, 50, 1.2}};
  std::vector<ScenarioConfig> out;
  for (std::size_t i = 0; i < std::size(rows); ++i) {
    ScenarioConfig cfg;
    cfg.id = fmt::format("table1_s{}", i + 1);
    cfg.mu = rows[i].mu;
    cfg.design = TwoStageDesign{rows[i].n1, rows[i].n1, rows[i].n1 + 50, 150, 0.9, rows[i].c2, 1.0};
    cfg.n_reps = n_reps;
    cfg.seed = seed + i;
    out.push_back(cfg);
  }
  return out;
}

std::vector<ScenarioReport> run_table1(std::uint64_t n_reps, std::uint64_t seed,
                                       const SimulationOptions& opts) {
  std::vector<ScenarioReport> out;
  for (const auto& cfg : table1_scenarios(n_reps, seed)) out.push_back(run_scenario(cfg, opts));
  return out;
}

}  // namespace condest
