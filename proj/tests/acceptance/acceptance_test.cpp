// One test per acceptance criterion. Each prints a single
//   PASS|FAIL C<n> <name>: <measured values>
// line and then asserts the same condition.

#include "crbf/conic/certificate.hpp"
#include "crbf/conic/solver.hpp"
#include "crbf/harness/report.hpp"
#include "crbf/surrogate.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

namespace crbf {
namespace {

bool Report(int id, const char* name, bool pass, const std::string& detail) {
  std::printf("%s C%d %s: %s\n", pass ? "PASS" : "FAIL", id, name, detail.c_str());
  std::fflush(stdout);
  return pass;
}

std::string Format(const char* fmt, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof(buf), fmt, args...);
  return buf;
}

// Operating point for the trend checks: N_t = 6, K = M = 3, I = 1 dB, 0.5 bps/Hz floors.
ProblemConfig OperatingPoint(double power_db) {
  return ProblemConfig::uniform(6, 3, 3, from_db(power_db), from_db(1.0), from_bps(0.5));
}

BeamformingMatrix AlignedPoint(const ChannelSet& ch, std::mt19937_64& rng) {
  BeamformingMatrix w = detail::complex_normal_matrix(ch.n_antennas(), ch.n_sus(), rng);
  for (Index k = 0; k < ch.n_sus(); ++k) w.col(k) += 0.5 * ch.h(k) / ch.h(k).norm();
  return phase_align(ch, w);
}

TEST(Acceptance, C1_SurrogateCorrectness) {
  const auto cfg = ProblemConfig::uniform(6, 3, 0, 10.0, 1.0, 0.0);
  std::mt19937_64 rng(101);

  double worst_tight = 0.0;
  for (int p = 0; p < 200; ++p) {
    const auto ch = generate_channels(cfg, 5000 + static_cast<std::uint64_t>(p));
    const auto w = AlignedPoint(ch, rng);
    for (Index k = 0; k < 3; ++k) {
      const double exact = achievable_rate(ch, w, k, 1.0);
      worst_tight = std::max(worst_tight, std::abs(surrogate_rate(ch, w, w, k, 1.0) - exact) / exact);
    }
  }

  double worst_excess = -INFINITY;
  int sampled = 0;
  const auto ch = generate_channels(cfg, 6000);
  const auto w_prev = AlignedPoint(ch, rng);
  while (sampled < 1000) {
    const BeamformingMatrix w = w_prev + 0.7 * detail::complex_normal_matrix(6, 3, rng);
    const Index k = sampled % 3;
    if (trust_region_value(ch, w_prev, w, k) <= 0.0) continue;
    worst_excess = std::max(worst_excess, surrogate_rate(ch, w_prev, w, k, 1.0) - achievable_rate(ch, w, k, 1.0));
    ++sampled;
  }

  double worst_grad = 0.0;
  const RealVector x = to_real(w_prev);
  const double step = 1e-5;
  for (Index k = 0; k < 3; ++k) {
    const RealVector grad = surrogate_rate_gradient(ch, w_prev, w_prev, k, 1.0);
    RealVector fd(x.size());
    for (Index i = 0; i < x.size(); ++i) {
      RealVector up = x, down = x;
      up(i) += step;
      down(i) -= step;
      fd(i) = (achievable_rate(ch, from_real(up, 6, 3), k, 1.0) - achievable_rate(ch, from_real(down, 6, 3), k, 1.0)) /
              (2.0 * step);
    }
    worst_grad = std::max(worst_grad, (grad - fd).norm() / fd.norm());
  }

  const bool pass = worst_tight <= 1e-10 && worst_excess <= 1e-10 && worst_grad <= 1e-4;
  Report(1, "surrogate correctness", pass,
         Format("tightness %.2e (<=1e-10), max surrogate-exact %.2e over %d points (<=1e-10), gradient %.2e (<=1e-4)",
                worst_tight, worst_excess, sampled, worst_grad));
  EXPECT_TRUE(pass);
}

TEST(Acceptance, C2_ChiBoundDominance) {
  std::mt19937_64 rng(102);
  std::uniform_real_distribution<double> u(0.01, 10.0);
  double worst_below = INFINITY, worst_tight = 0.0;
  for (int e = 0; e < 20; ++e) {
    const double a0 = u(rng), r0 = u(rng);
    worst_tight = std::max(worst_tight, std::abs(chi_bound(a0, r0, a0, r0) - a0 * r0));
    for (int i = 1; i <= 20; ++i) {
      for (int j = 1; j <= 20; ++j) {
        const double a = 0.05 * i, r = 0.5 * j;
        worst_below = std::min(worst_below, chi_bound(a, r, a0, r0) - a * r);
      }
    }
  }
  const bool pass = worst_below >= -1e-12 && worst_tight <= 1e-12;
  Report(2, "chi-bound dominance", pass,
         Format("min(chi - alpha rho) %.2e (>=-1e-12), expansion-point error %.2e (<=1e-12)", worst_below,
                worst_tight));
  EXPECT_TRUE(pass);
}

TEST(Acceptance, C3_MonotoneConvergence) {
  const auto cfg = OperatingPoint(20.0);
  SolveOptions opts;
  const double drop_tol = 10.0 * opts.solver.tol;
  int instances = 0, fast = 0, monotone = 0, feasible = 0;
  double worst_drop = 0.0, worst_violation = 0.0;
  for (Mode mode : {Mode::Relaxed, Mode::Improved}) {
    opts.mode = mode;
    for (std::uint64_t seed = 0; seed < 50; ++seed) {
      const auto ch = generate_channels(cfg, 7000 + seed);
      const auto r = solve_jbfas(ch, cfg, opts);
      ++instances;
      if (r.status == Status::Converged && r.outer_iterations <= 20) ++fast;
      bool ok = !r.trace.empty();
      for (std::size_t i = 1; i < r.trace.size(); ++i) {
        const double drop = (r.trace[i - 1] - r.trace[i]) / (1.0 + std::abs(r.trace[i - 1]));
        worst_drop = std::max(worst_drop, drop);
        if (drop > drop_tol) ok = false;
      }
      monotone += ok;
      if (r.status == Status::Converged || r.status == Status::IterationLimit) {
        worst_violation = std::max(worst_violation, r.feasibility.worst());
        feasible += r.feasibility.holds(1e-6);
      }
    }
  }
  const bool pass = monotone == instances && fast >= 0.9 * instances && feasible == instances;
  Report(3, "monotone convergence", pass,
         Format("%d/%d traces non-decreasing (worst relative drop %.2e, tol %.0e), %d/%d converged within 20 "
                "iterations (>=90%%), %d/%d terminal points feasible (worst %.2e, tol 1e-6)",
                monotone, instances, worst_drop, drop_tol, fast, instances, feasible, instances, worst_violation));
  EXPECT_TRUE(pass);
}

TEST(Acceptance, C4_AnalyticOracles) {
  ComplexMatrix su(2, 1);
  su << 1.0, 0.0;
  const ChannelSet ch(su, ComplexMatrix(2, 0));
  const auto cfg = ProblemConfig::uniform(2, 1, 0, 10.0, 1.0, 0.0);
  SolveOptions relaxed, improved;
  relaxed.mode = Mode::Relaxed;
  improved.mode = Mode::Improved;
  const double e_rel = std::abs(solve_jbfas(ch, cfg, relaxed).sum_rate - std::log(11.0));
  const double e_imp = std::abs(solve_jbfas(ch, cfg, improved).sum_rate - std::log(11.0));
  const double e_spc = std::abs(solve_spc(ch, cfg).sum_rate - std::log(11.0));
  const double e_papc = std::abs(solve_papc(ch, cfg).sum_rate - std::log(6.0));
  const bool pass = std::max({e_rel, e_imp, e_spc, e_papc}) <= 1e-3;
  Report(4, "analytic oracles", pass,
         Format("|JBFAS relaxed - ln 11| %.2e, |JBFAS improved - ln 11| %.2e, |SPC - ln 11| %.2e, |PAPC - ln 6| %.2e "
                "(<=1e-3 nats)",
                e_rel, e_imp, e_spc, e_papc));
  EXPECT_TRUE(pass);
}

TEST(Acceptance, C5_ExhaustiveOracle) {
  const auto cfg = ProblemConfig::uniform(4, 2, 1, from_db(20.0), from_db(1.0), from_bps(0.5));
  SolveOptions opts;
  opts.mode = Mode::Improved;
  int compared = 0, within = 0, above = 0;
  double worst_above = 0.0;
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    const auto ch = generate_channels(cfg, harness::derive_seed(8000, 0, seed, 0));
    const auto relaxed = solve_jbfas(ch, cfg, opts);
    const auto oracle = exhaustive_selection_oracle(ch, cfg, {255, opts});
    if (!harness::usable(relaxed.status) || oracle.status != Status::Converged) continue;
    const auto rounded = round_and_polish(ch, cfg, relaxed, opts);
    if (!harness::usable(rounded.status)) {
      ++compared;  // an unusable rounding counts as a miss
      continue;
    }
    ++compared;
    const double gap = (oracle.best.sum_rate - rounded.sum_rate) / oracle.best.sum_rate;
    within += gap <= 0.02;
    above += -gap > opts.rel_tol;
    worst_above = std::max(worst_above, -gap);
  }
  const bool pass = compared > 0 && within >= 0.9 * compared && above <= 0.05 * compared;
  Report(5, "exhaustive-oracle cross-check", pass,
         Format("%d/%d within 2%% of the oracle (>=90%%), %d above it by more than rel_tol %.0e (<=5%%), largest "
                "excess %.2e relative",
                within, compared, above, opts.rel_tol, worst_above));
  EXPECT_TRUE(pass);
}

// Sum rates (bps/Hz) of each design over paired trials; NaN where a design
// has no usable solution.
std::vector<std::vector<double>> PairedRates(double power_db, const std::vector<harness::DesignId>& designs,
                                             int trials, std::vector<double>* alphas = nullptr) {
  const auto cfg = OperatingPoint(power_db);
  std::vector<std::vector<double>> out(designs.size());
  for (int t = 0; t < trials; ++t) {
    const auto ch = generate_channels(cfg, harness::derive_seed(9000, 0, static_cast<std::uint64_t>(t), 0));
    harness::DesignRunner runner(ch, cfg, SolveOptions{});
    for (std::size_t d = 0; d < designs.size(); ++d) {
      const SolveResult& r = runner.run(designs[d]).result;
      out[d].push_back(harness::usable(r.status) ? to_bps(r.sum_rate) : NAN);
      if (alphas && designs[d] == harness::DesignId::JbfasImproved && harness::usable(r.status)) {
        for (Index n = 0; n < r.alpha.size(); ++n) alphas->push_back(r.alpha(n));
      }
    }
  }
  return out;
}

// Differences a - b over trials where both are usable.
std::vector<double> Paired(const std::vector<double>& a, const std::vector<double>& b) {
  std::vector<double> d;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (!std::isnan(a[i]) && !std::isnan(b[i])) d.push_back(a[i] - b[i]);
  }
  return d;
}

TEST(Acceptance, C6_OrderingTrends) {
  using harness::DesignId;
  const std::vector<DesignId> order{DesignId::JbfasImproved, DesignId::JbfasRelaxed, DesignId::Spc, DesignId::Papc,
                                    DesignId::ZfPapc};
  const auto rates = PairedRates(20.0, order, 100);
  bool pass = true;
  std::string detail = "at 20 dB:";
  for (std::size_t i = 0; i + 1 < order.size(); ++i) {
    const auto d = Paired(rates[i], rates[i + 1]);
    const double lcb = harness::lower_confidence_bound(d);
    const bool ok = lcb >= 0.0;
    pass = pass && ok;
    detail += Format(" %s-%s mean %.4f lcb95 %.2e (n=%zu)%s;", to_string(order[i]), to_string(order[i + 1]),
                     harness::mean(d), lcb, d.size(), ok ? "" : " FAIL");
  }
  const std::vector<DesignId> pair{DesignId::JbfasImproved, DesignId::Spc};
  const auto at10 = PairedRates(10.0, pair, 100);
  const double gap10 = harness::mean(Paired(at10[0], at10[1]));
  const auto at30 = PairedRates(30.0, pair, 100);
  const double gap30 = harness::mean(Paired(at30[0], at30[1]));
  pass = pass && gap30 > gap10;
  detail += Format(" JBFAS-SPC gap %.2e at 30 dB vs %.2e at 10 dB", gap30, gap10);
  Report(6, "ordering trends", pass, detail);
  EXPECT_TRUE(pass);
}

TEST(Acceptance, C7_NearBinarySelection) {
  std::vector<double> alphas;
  PairedRates(20.0, {harness::DesignId::JbfasImproved}, 100, &alphas);
  int near = 0;
  for (double a : alphas) near += std::min(std::abs(a), std::abs(1.0 - a)) <= 0.01;
  const double fraction = alphas.empty() ? 0.0 : static_cast<double>(near) / static_cast<double>(alphas.size());
  const bool pass = fraction >= 0.95;
  Report(7, "near-binary selection", pass,
         Format("%.3f of %zu alpha entries within 0.01 of {0,1} (>=0.95)", fraction, alphas.size()));
  EXPECT_TRUE(pass);
}

conic::ConicProgram Lp() {
  // maximize x + y s.t. x + 2y <= 4, 3x + y <= 6, x, y >= 0: optimum 2.8 at (1.6, 1.2).
  conic::ConicProgram p;
  const auto v = p.add_variables("v", 2);
  p.maximize(v(0) + v(1));
  p.add_less_equal(v(0) + 2.0 * v(1), 4.0);
  p.add_less_equal(3.0 * v(0) + v(1), 6.0);
  p.add_nonnegative(v(0));
  p.add_nonnegative(v(1));
  return p;
}

conic::ConicProgram Soc() {
  // maximize x + y s.t. ||(x, y)|| <= 1: optimum sqrt 2.
  conic::ConicProgram p;
  const auto v = p.add_variables("v", 2);
  p.maximize(v(0) + v(1));
  p.add_second_order_cone(conic::AffineExpr(1.0), {v(0), v(1)});
  return p;
}

conic::ConicProgram Rsoc() {
  // minimize s + t s.t. 1 <= 2 s t: optimum sqrt 2 at s = t = 1/sqrt 2.
  conic::ConicProgram p;
  const auto v = p.add_variables("v", 2);
  p.maximize(-v(0) - v(1));
  p.add_rotated_cone(v(0), v(1), {conic::AffineExpr(1.0)});
  return p;
}

conic::ConicProgram Hyperbolic(double balance) {
  // minimize g s.t. 1 <= g y, y = 1e4: optimum -1e-4.
  conic::ConicProgram p;
  const auto g = p.add_variables("g", 1);
  const auto y = p.add_variables("y", 1);
  p.maximize(-g(0));
  p.add_equality(y(0) - 1e4);
  p.add_hyperbolic(g(0), y(0), {conic::AffineExpr(1.0)}, "hyper", balance);
  return p;
}

conic::ConicProgram LeastSquares() {
  // minimize ||A x - b|| for A = [1 0; 0 1; 1 1], b = (1, 2, 4): x = (4/3, 7/3), residual 1/sqrt 3.
  conic::ConicProgram p;
  const auto x = p.add_variables("x", 2);
  const auto t = p.add_variables("t", 1);
  p.maximize(-t(0));
  p.add_second_order_cone(t(0), {x(0) - 1.0, x(1) - 2.0, x(0) + x(1) - 4.0});
  return p;
}

TEST(Acceptance, C8_ConicCertification) {
  struct Case {
    const char* name;
    conic::ConicProgram prog;
    double optimum;
  };
  std::vector<Case> cases{{"lp", Lp(), 2.8},
                          {"soc", Soc(), std::sqrt(2.0)},
                          {"rsoc", Rsoc(), -std::sqrt(2.0)},
                          {"hyperbolic", Hyperbolic(1.0), -1e-4},
                          {"hyperbolic-balanced", Hyperbolic(conic::ConicProgram::hyperbolic_balance(1e-4, 1e4)),
                           -1e-4},
                          {"least-squares", LeastSquares(), -1.0 / std::sqrt(3.0)}};
  bool pass = true;
  std::string detail;
  for (const auto& c : cases) {
    const auto sol = conic::solve(c.prog);
    const double residual = sol.x.size() ? conic::validate_certificate(c.prog, sol.x).max_violation : INFINITY;
    const double obj_err = std::abs(sol.objective - c.optimum);
    const bool ok = sol.status == conic::SolveStatus::Optimal && residual <= 1e-8 && obj_err <= 1e-6;
    pass = pass && ok;
    detail += Format("%s %s residual %.1e objective error %.1e; ", c.name, conic::to_string(sol.status), residual,
                     obj_err);
  }
  conic::ConicProgram infeasible;
  const auto x = infeasible.add_variables("x", 1);
  infeasible.maximize(x(0));
  infeasible.add_less_equal(1.0, x(0));
  infeasible.add_second_order_cone(0.5, {x(0)});
  const auto status = conic::solve(infeasible).status;
  pass = pass && status == conic::SolveStatus::PrimalInfeasible;
  detail += Format("infeasible program labeled %s", conic::to_string(status));
  Report(8, "conic solver certification", pass, detail);
  EXPECT_TRUE(pass);
}

TEST(Acceptance, C9_CsiSensitivity) {
  harness::SweepConfig sweep;
  sweep.base = ProblemConfig::uniform(8, 2, 2, from_db(30.0), from_db(2.0), from_bps(1.0));
  sweep.sweep_variable = harness::SweepVariable::EpsilonPair;
  sweep.sweep_values = {"0.04:0", "0:0.04"};
  sweep.n_trials = 50;
  sweep.seed = 9100;
  sweep.designs = {harness::DesignId::JbfasImproved};
  const auto records = harness::run_sweep(sweep);
  std::vector<double> loss[2];
  for (const auto& r : records) {
    if (r.feasible) loss[r.value_index].push_back(*r.nominal_sum_rate_bps - r.sum_rate_bps);
  }
  const double su = harness::mean(loss[0]), pu = harness::mean(loss[1]);
  const bool pass = su > pu;
  Report(9, "CSI sensitivity trend", pass,
         Format("mean degradation %.4f bps/Hz for SU errors (n=%zu) vs %.4f for PU errors (n=%zu)", su, loss[0].size(),
                pu, loss[1].size()));
  EXPECT_TRUE(pass);
}

TEST(Acceptance, C10_Determinism) {
  const auto root = std::filesystem::temp_directory_path() / "crbf_acceptance_determinism";
  std::filesystem::remove_all(root);
  auto run = [&](const char* sub) {
    const std::string cmd = std::string("\"") + CRBF_CLI + "\" sweep --config \"" + CRBF_SOURCE_DIR +
                            "/configs/smoke.cfg\" --out \"" + (root / sub).string() + "\" > /dev/null";
    return std::system(cmd.c_str());
  };
  const int rc1 = run("a"), rc2 = run("b");
  auto slurp = [](const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
  };
  bool identical = true;
  std::size_t bytes = 0;
  for (const char* f : {"trials.csv", "aggregate.csv"}) {
    const std::string a = slurp(root / "a" / f);
    identical = identical && !a.empty() && a == slurp(root / "b" / f);
    bytes += a.size();
  }
  const bool pass = rc1 == 0 && rc2 == 0 && identical;
  Report(10, "determinism", pass,
         Format("exit codes %d/%d, trials.csv and aggregate.csv %s (%zu bytes)", rc1, rc2,
                identical ? "byte-identical" : "differ", bytes));
  std::filesystem::remove_all(root);
  EXPECT_TRUE(pass);
}

}  // namespace
}  // namespace crbf
