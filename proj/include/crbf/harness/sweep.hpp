#pragma once

// Seeded Monte Carlo sweeps and convergence traces.
//
// Per-trial seeds come from a counter-based mix of
// (master seed, value index, trial index, stream), so any subset of trials
// can be re-run on its own and reproduces the same channels. Stream 0 draws
// the channels, stream 1 the CSI errors.

#include "crbf/baselines.hpp"
#include "crbf/harness/config.hpp"
#include "crbf/harness/stats.hpp"

#include <chrono>
#include <cstdint>
#include <cstring>
#include <limits>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace crbf::harness {

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

inline std::uint64_t derive_seed(std::uint64_t master, std::uint64_t value_index, std::uint64_t trial_index,
                                 std::uint64_t stream = 0) {
  std::uint64_t h = splitmix64(master);
  h = splitmix64(h ^ value_index);
  h = splitmix64(h ^ trial_index);
  return splitmix64(h ^ stream);
}

/// FNV-1a over the raw bytes of every channel coefficient.
inline std::uint64_t channel_hash(const ChannelSet& ch) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  auto feed = [&](const ComplexMatrix& m) {
    for (Index i = 0; i < m.size(); ++i) {
      const double parts[2] = {m.data()[i].real(), m.data()[i].imag()};
      unsigned char bytes[sizeof(parts)];
      std::memcpy(bytes, parts, sizeof(parts));
      for (unsigned char b : bytes) {
        h ^= b;
        h *= 0x100000001b3ULL;
      }
    }
  };
  feed(ch.su());
  feed(ch.pu());
  return h;
}

struct TrialRecord {
  std::size_t value_index = 0;
  std::string sweep_value;
  int trial = 0;
  std::uint64_t seed = 0;
  std::uint64_t channel_hash = 0;
  DesignId design = DesignId::JbfasImproved;
  bool feasible = false;
  Status status = Status::Infeasible;
  double sum_rate_bps = 0.0;
  std::vector<double> per_user_rates_bps;
  int iterations = 0;
  double wall_time_ms = 0.0;
  // CSI sweeps only: the rate the design expected on the estimate, and the
  // worst relative PU-cap excess and rate-floor shortfall on the true channels.
  std::optional<double> nominal_sum_rate_bps;
  double interference_excess = 0.0;
  double rate_shortfall_bps = 0.0;
  std::string message;
};

struct DesignOutcome {
  SolveResult result;
  double wall_time_ms = 0.0;
};

/// Solves one design on one channel draw. Rounded variants reuse the
/// matching relaxed-selection solution from the cache when present.
class DesignRunner {
 public:
  DesignRunner(const ChannelSet& ch, const ProblemConfig& cfg, SolveOptions base)
      : ch_(ch), cfg_(cfg), base_(std::move(base)) {}

  const DesignOutcome& run(DesignId id) {
    auto it = cache_.find(id);
    if (it != cache_.end()) return it->second;
    const auto start = std::chrono::steady_clock::now();
    DesignOutcome out;
    out.result = solve(id);
    out.wall_time_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
    if (id == DesignId::JbfasRelaxedRounded) out.wall_time_ms += run(DesignId::JbfasRelaxed).wall_time_ms;
    if (id == DesignId::JbfasImprovedRounded) out.wall_time_ms += run(DesignId::JbfasImproved).wall_time_ms;
    return cache_.emplace(id, std::move(out)).first->second;
  }

 private:
  SolveResult solve(DesignId id) {
    SolveOptions opts = base_;
    switch (id) {
      case DesignId::JbfasRelaxed:
        opts.mode = Mode::Relaxed;
        return solve_jbfas(ch_, cfg_, opts);
      case DesignId::JbfasImproved:
        opts.mode = Mode::Improved;
        return solve_jbfas(ch_, cfg_, opts);
      case DesignId::JbfasFixedAlpha1:
        opts.fix_selection = true;
        return solve_jbfas(ch_, cfg_, opts);
      case DesignId::JbfasRelaxedRounded:
      case DesignId::JbfasImprovedRounded: {
        const DesignId parent =
            id == DesignId::JbfasRelaxedRounded ? DesignId::JbfasRelaxed : DesignId::JbfasImproved;
        const SolveResult& relaxed = run(parent).result;
        if (relaxed.status == Status::Infeasible || relaxed.status == Status::NumericalFailure) return relaxed;
        return round_and_polish(ch_, cfg_, relaxed, opts);
      }
      case DesignId::Spc:
        return solve_spc(ch_, cfg_, opts);
      case DesignId::Papc:
        return solve_papc(ch_, cfg_, opts);
      case DesignId::ZfPapc:
        return solve_zf_papc(ch_, cfg_, opts);
      case DesignId::Oracle: {
        OracleOptions o;
        o.solve = opts;
        OracleResult r = exhaustive_selection_oracle(ch_, cfg_, o);
        SolveResult best = std::move(r.best);
        best.status = r.status;
        return best;
      }
    }
    throw std::logic_error("unhandled design");
  }

  const ChannelSet& ch_;
  const ProblemConfig& cfg_;
  SolveOptions base_;
  std::map<DesignId, DesignOutcome> cache_;
};

inline bool usable(Status s) { return s == Status::Converged || s == Status::IterationLimit; }

inline SolveOptions solve_options(const SweepConfig& sweep) {
  SolveOptions opts;
  opts.rel_tol = sweep.rel_tol;
  opts.max_outer_iter = sweep.max_outer_iter;
  return opts;
}

/// Records for every (value, trial, design), ordered by value index, then
/// trial index, then the order of sweep.designs. Failures are recorded, not
/// thrown.
inline std::vector<TrialRecord> run_sweep(const SweepConfig& sweep) {
  sweep.validate();
  const SolveOptions opts = solve_options(sweep);
  std::vector<TrialRecord> records;
  for (std::size_t v = 0; v < sweep.sweep_values.size(); ++v) {
    const ProblemConfig cfg = sweep.problem_at(v);
    std::optional<EpsilonPair> eps;
    if (sweep.sweep_variable == SweepVariable::EpsilonPair) eps = parse_epsilon_pair(sweep.sweep_values[v]);
    for (int t = 0; t < sweep.n_trials; ++t) {
      const std::uint64_t seed = derive_seed(sweep.seed, v, static_cast<std::uint64_t>(t), 0);
      const ChannelSet estimate = generate_channels(cfg, seed);
      const std::uint64_t hash = channel_hash(estimate);
      std::optional<ChannelSet> truth;
      if (eps) truth = perturb_channels(estimate, eps->su, eps->pu, derive_seed(sweep.seed, v, t, 1));
      DesignRunner runner(estimate, cfg, opts);
      for (DesignId id : sweep.designs) {
        TrialRecord rec;
        rec.value_index = v;
        rec.sweep_value = sweep.sweep_values[v];
        rec.trial = t;
        rec.seed = seed;
        rec.channel_hash = hash;
        rec.design = id;
        try {
          const DesignOutcome& out = runner.run(id);
          const SolveResult& r = out.result;
          rec.status = r.status;
          rec.feasible = usable(r.status);
          rec.iterations = r.outer_iterations;
          rec.wall_time_ms = out.wall_time_ms;
          rec.message = r.message;
          RealVector rates = r.rates;
          if (truth && rec.feasible) {
            rec.nominal_sum_rate_bps = to_bps(r.sum_rate);
            rates = user_rates(*truth, r.w, cfg);
            for (Index m = 0; m < truth->n_pus(); ++m) {
              const double cap = cfg.interference_cap(m);
              rec.interference_excess =
                  std::max(rec.interference_excess, (interference_at_pu(*truth, r.w, m) - cap) / cap);
            }
            for (Index k = 0; k < rates.size(); ++k) {
              rec.rate_shortfall_bps = std::max(rec.rate_shortfall_bps, to_bps(cfg.rate_floor(k) - rates(k)));
            }
          }
          if (rec.feasible) {
            rec.sum_rate_bps = to_bps(rates.sum());
            for (Index k = 0; k < rates.size(); ++k) rec.per_user_rates_bps.push_back(to_bps(rates(k)));
          }
        } catch (const std::exception& e) {
          rec.status = Status::NumericalFailure;
          rec.feasible = false;
          rec.message = e.what();
        }
        records.push_back(std::move(rec));
      }
    }
  }
  return records;
}

struct AggregateRow {
  std::size_t value_index = 0;
  std::string sweep_value;
  DesignId design = DesignId::JbfasImproved;
  int n_feasible = 0;
  int n_total = 0;
  Summary sum_rate;
  double mean_iterations = std::numeric_limits<double>::quiet_NaN();
  double mean_wall_time_ms = std::numeric_limits<double>::quiet_NaN();
};

/// Means over feasible trials, one row per (value, design) in first-seen order.
inline std::vector<AggregateRow> aggregate(const std::vector<TrialRecord>& records) {
  std::vector<AggregateRow> rows;
  std::map<std::pair<std::size_t, DesignId>, std::size_t> index;
  std::vector<std::vector<double>> rates, iterations, times;
  for (const auto& r : records) {
    const auto key = std::make_pair(r.value_index, r.design);
    auto it = index.find(key);
    if (it == index.end()) {
      it = index.emplace(key, rows.size()).first;
      AggregateRow row;
      row.value_index = r.value_index;
      row.sweep_value = r.sweep_value;
      row.design = r.design;
      rows.push_back(row);
      rates.emplace_back();
      iterations.emplace_back();
      times.emplace_back();
    }
    const std::size_t i = it->second;
    ++rows[i].n_total;
    if (!r.feasible) continue;
    ++rows[i].n_feasible;
    rates[i].push_back(r.sum_rate_bps);
    iterations[i].push_back(static_cast<double>(r.iterations));
    times[i].push_back(r.wall_time_ms);
  }
  for (std::size_t i = 0; i < rows.size(); ++i) {
    rows[i].sum_rate = summarize(rates[i]);
    if (!rates[i].empty()) {
      rows[i].mean_iterations = mean(iterations[i]);
      rows[i].mean_wall_time_ms = mean(times[i]);
    }
  }
  return rows;
}

struct TraceRow {
  Index n_antennas = 0;
  int trial = 0;
  std::uint64_t seed = 0;
  DesignId design = DesignId::JbfasImproved;
  Status status = Status::Infeasible;
  int iteration = 0;  // 0 is the feasible start point
  double sum_rate_bps = 0.0;
};

/// Main-phase objective per outer iteration for each design, antenna count
/// and trial. Channels for trial t use derive_seed(seed, 0, t).
inline std::vector<TraceRow> run_convergence_trace(const ProblemConfig& base, std::uint64_t seed, int n_trials,
                                                   const std::vector<Index>& antenna_counts,
                                                   const std::vector<DesignId>& designs,
                                                   const SolveOptions& opts = {}) {
  if (n_trials < 1) throw std::invalid_argument("run_convergence_trace: n_trials must be at least 1");
  std::vector<TraceRow> rows;
  for (Index nt : antenna_counts) {
    ProblemConfig cfg = base;
    cfg.n_antennas = nt;
    cfg.validate();
    for (int t = 0; t < n_trials; ++t) {
      const std::uint64_t s = derive_seed(seed, 0, static_cast<std::uint64_t>(t), 0);
      const ChannelSet ch = generate_channels(cfg, s);
      DesignRunner runner(ch, cfg, opts);
      for (DesignId id : designs) {
        const SolveResult& r = runner.run(id).result;
        for (std::size_t i = 0; i < r.trace.size(); ++i) {
          rows.push_back({nt, t, s, id, r.status, static_cast<int>(i), to_bps(r.trace[i])});
        }
        if (r.trace.empty()) rows.push_back({nt, t, s, id, r.status, 0, 0.0});
      }
    }
  }
  return rows;
}

}  // namespace crbf::harness
