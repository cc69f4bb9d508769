// crbf: experiment driver.
//
//   crbf sweep --config configs/power.cfg [--seed N] [--trials N] [--out DIR] [--designs A,B] [--timing]
//   crbf converge [--config FILE] [--antennas 6,8] [--trials N] [--mode relaxed|improved]
//   crbf oracle-check [--config FILE] [--trials N] [--mode relaxed|improved]

#include "crbf/harness/report.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <iostream>
#include <optional>

namespace {

using namespace crbf;
using namespace crbf::harness;

struct Common {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<int> trials;
  std::optional<std::string> out;
  std::string designs;
  std::string mode = "improved";
  bool timing = false;
};

void add_common(CLI::App* cmd, Common& c, bool config_required) {
  auto* opt = cmd->add_option("--config", c.config, "key = value configuration file");
  if (config_required) opt->required();
  opt->check(CLI::ExistingFile);
  cmd->add_option("--seed", c.seed, "master seed (overrides the config)");
  cmd->add_option("--trials", c.trials, "trials per point (overrides the config)")->check(CLI::PositiveNumber);
  cmd->add_option("--out", c.out, "output directory (overrides the config)");
  cmd->add_option("--designs", c.designs, "comma-separated design list (overrides the config)");
  cmd->add_option("--mode", c.mode, "selection constraint set for JBFAS")
      ->check(CLI::IsMember({"relaxed", "improved"}));
  cmd->add_flag("--timing", c.timing, "write wall times instead of NA");
}

SweepConfig load(const Common& c, bool sweep_keys) {
  SweepConfig cfg;
  if (!c.config.empty()) cfg = load_sweep_config(c.config, sweep_keys);
  if (c.seed) cfg.seed = *c.seed;
  if (c.trials) cfg.n_trials = *c.trials;
  if (c.out) cfg.output_dir = *c.out;
  if (!c.designs.empty()) {
    cfg.designs.clear();
    for (const auto& d : harness::detail::split_list(c.designs)) cfg.designs.push_back(parse_design(d));
  }
  return cfg;
}

Mode parse_mode(const std::string& s) { return s == "relaxed" ? Mode::Relaxed : Mode::Improved; }

int run_sweep_command(const Common& c) {
  const SweepConfig cfg = load(c, true);
  const auto records = run_sweep(cfg);
  const auto rows = emit_outputs(cfg.output_dir, cfg.sweep_variable, records, {c.timing});
  for (const auto& r : rows) {
    std::printf("%-8s %-24s %3d/%-3d %s bps/Hz\n", r.sweep_value.c_str(), to_string(r.design), r.n_feasible,
                r.n_total, harness::detail::fmt(r.sum_rate.mean, 4).c_str());
  }
  std::printf("wrote %s/{trials.csv,aggregate.csv,sweep.svg}\n", cfg.output_dir.c_str());
  return 0;
}

int run_converge_command(const Common& c, const std::string& antennas) {
  SweepConfig cfg = load(c, false);
  if (!c.trials) cfg.n_trials = 1;
  std::vector<Index> counts;
  for (const auto& a : harness::detail::split_list(antennas)) {
    counts.push_back(harness::detail::parse_integer("--antennas", a));
  }
  std::vector<DesignId> designs{parse_mode(c.mode) == Mode::Relaxed ? DesignId::JbfasRelaxed
                                                                     : DesignId::JbfasImproved,
                                DesignId::JbfasFixedAlpha1};
  if (!c.designs.empty()) designs = cfg.designs;
  const auto rows = run_convergence_trace(cfg.base, cfg.seed, cfg.n_trials, counts, designs, solve_options(cfg));
  emit_trace(cfg.output_dir, rows);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const bool last = i + 1 == rows.size() || rows[i + 1].iteration == 0;
    if (!last) continue;
    std::printf("N_t=%ld trial %d %-20s %-15s %d iterations, %s bps/Hz\n", static_cast<long>(rows[i].n_antennas),
                rows[i].trial, to_string(rows[i].design), to_string(rows[i].status), rows[i].iteration,
                harness::detail::fmt(rows[i].sum_rate_bps, 4).c_str());
  }
  std::printf("wrote %s/{trace.csv,trace.svg}\n", cfg.output_dir.c_str());
  return 0;
}

int run_oracle_command(const Common& c) {
  SweepConfig cfg = load(c, false);
  if (c.config.empty()) {
    cfg.base = ProblemConfig::uniform(4, 2, 1, from_db(20.0), from_db(1.0), from_bps(0.5));
    if (!c.trials) cfg.n_trials = 50;
  }
  SolveOptions opts = solve_options(cfg);
  opts.mode = parse_mode(c.mode);
  std::ostringstream csv;
  csv << "trial,seed,status,jbfas_rounded_bps,oracle_bps,oracle_mask,relative_gap\n";
  int compared = 0, within = 0, above = 0;
  for (int t = 0; t < cfg.n_trials; ++t) {
    const std::uint64_t seed = derive_seed(cfg.seed, 0, static_cast<std::uint64_t>(t), 0);
    const ChannelSet ch = generate_channels(cfg.base, seed);
    const SolveResult relaxed = solve_jbfas(ch, cfg.base, opts);
    const OracleResult oracle = exhaustive_selection_oracle(ch, cfg.base, {255, opts});
    std::string status = "ok";
    double rounded_bps = NAN, oracle_bps = NAN, gap = NAN;
    if (!usable(relaxed.status)) {
      status = std::string("jbfas_") + to_string(relaxed.status);
    } else if (oracle.status != Status::Converged) {
      status = "oracle_infeasible";
    } else {
      const SolveResult rounded = round_and_polish(ch, cfg.base, relaxed, opts);
      if (!usable(rounded.status)) {
        status = std::string("rounded_") + to_string(rounded.status);
      } else {
        rounded_bps = to_bps(rounded.sum_rate);
        oracle_bps = to_bps(oracle.best.sum_rate);
        gap = (oracle_bps - rounded_bps) / oracle_bps;
        ++compared;
        if (gap <= 0.02) ++within;
        if (-gap > opts.rel_tol) ++above;
      }
    }
    csv << t << ',' << seed << ',' << status << ',' << harness::detail::fmt(rounded_bps, 10) << ','
        << harness::detail::fmt(oracle_bps, 10) << ',' << oracle.best_mask << ','
        << harness::detail::fmt(gap, 10) << '\n';
  }
  harness::detail::write_file(std::filesystem::path(cfg.output_dir) / "oracle.csv", csv.str());
  std::printf("compared %d/%d trials: %d within 2%% of the oracle, %d above it by more than rel_tol=%g\n", compared,
              cfg.n_trials, within, above, opts.rel_tol);
  std::printf("wrote %s/oracle.csv\n", cfg.output_dir.c_str());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Joint beamforming and antenna selection experiments"};
  app.require_subcommand(1);

  Common sweep_opts, converge_opts, oracle_opts;
  std::string antennas = "6,8";
  auto* sweep = app.add_subcommand("sweep", "Monte Carlo sweep over one parameter");
  add_common(sweep, sweep_opts, true);
  auto* converge = app.add_subcommand("converge", "objective per outer iteration");
  add_common(converge, converge_opts, false);
  converge->add_option("--antennas", antennas, "comma-separated transmit antenna counts");
  auto* oracle = app.add_subcommand("oracle-check", "rounded selection against exhaustive subset search");
  add_common(oracle, oracle_opts, false);

  CLI11_PARSE(app, argc, argv);
  try {
    if (*sweep) return run_sweep_command(sweep_opts);
    if (*converge) return run_converge_command(converge_opts, antennas);
    if (*oracle) return run_oracle_command(oracle_opts);
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
