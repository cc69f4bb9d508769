#include "crbf/conic/certificate.hpp"
#include "crbf/sca.hpp"

#include <gtest/gtest.h>

#include <cmath>

namespace crbf {
namespace {

ProblemConfig OperatingPoint() {
  return ProblemConfig::uniform(6, 3, 3, from_db(20.0), from_db(1.0), from_bps(0.5));
}

ChannelSet SingleUserTwoAntennas() {
  ComplexMatrix su(2, 1);
  su << 1.0, 0.0;
  return ChannelSet(su, ComplexMatrix(2, 0));
}

// Packs (w, alpha, rho, gamma) of a state into the program's variable vector.
Eigen::VectorXd PackState(const conic::ConicProgram& prog, const ScaState& s) {
  Eigen::VectorXd x = Eigen::VectorXd::Zero(prog.n_variables());
  const auto& w = prog.block("w");
  x.segment(w.offset, w.size) = to_real(s.w);
  const auto& a = prog.block("alpha");
  x.segment(a.offset, a.size) = s.selection.alpha;
  const auto& r = prog.block("rho");
  x.segment(r.offset, r.size) = s.selection.rho;
  const auto& g = prog.block("gamma");
  x.segment(g.offset, g.size) = s.gamma;
  return x;
}

TEST(Subproblem, DimensionsAndConstraintCounts) {
  const auto cfg = OperatingPoint();
  const auto ch = generate_channels(cfg, 1);
  const auto state = initialize_state(ch, cfg);
  const Index nt = 6, k = 3, m = 3;
  const auto relaxed = build_relaxed_subproblem(ch, cfg, state);
  EXPECT_EQ(relaxed.n_variables(), 2 * nt * k + 2 * nt + k);
  EXPECT_EQ(static_cast<Index>(relaxed.constraints().size()), m + 3 * nt + 3 * k + 1);
  const auto improved = build_improved_subproblem(ch, cfg, state);
  EXPECT_EQ(static_cast<Index>(improved.constraints().size()), m + 4 * nt + 3 * k + 1);
  const auto phase_one = build_feasibility_subproblem(ch, cfg, state);
  EXPECT_EQ(phase_one.n_variables(), relaxed.n_variables() + 1);
  EXPECT_EQ(phase_one.constraints().size(), relaxed.constraints().size());

  const std::string text = relaxed.dump();
  for (const char* label : {"soc [pu0]", "rsoc [antenna5]", "rsoc [rate2]", "nonneg [trust0]", "nonneg [qos1]",
                            "soc [power]"}) {
    EXPECT_NE(text.find(label), std::string::npos) << label;
  }
}

TEST(Subproblem, InitialStateIsFeasibleAndObjectiveIsTight) {
  const auto cfg = OperatingPoint();
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const auto ch = generate_channels(cfg, seed);
    const auto state = initialize_state(ch, cfg);
    EXPECT_LE(total_power(state.w), 0.9 * cfg.power_budget + 1e-9);
    for (Index m = 0; m < 3; ++m) EXPECT_LE(interference_at_pu(ch, state.w, m), 0.9 * cfg.interference_cap(m) + 1e-12);
    EXPECT_NEAR((state.selection.alpha.array() * state.selection.rho.array()).sum(), cfg.power_budget, 1e-9);

    const auto prog = build_feasibility_subproblem(ch, cfg, state);
    Eigen::VectorXd x = PackState(prog, state);
    const auto rates = user_rates(ch, state.w, cfg);
    x(prog.block("margin").offset) = (rates.array() - cfg.rate_floors[0]).minCoeff();
    EXPECT_LE(conic::validate_certificate(prog, x).max_violation, 1e-9);

    const auto main = build_relaxed_subproblem(ch, cfg, state);
    const Eigen::VectorXd xm = PackState(main, state);
    EXPECT_NEAR(main.objective().evaluate(xm), rates.sum(), 1e-10 * rates.sum());
  }
}

TEST(PhaseOne, FindsFeasiblePointAtOperatingPoint) {
  const auto cfg = OperatingPoint();
  int ok = 0;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const auto ch = generate_channels(cfg, seed);
    const auto fp = find_feasible_point(ch, cfg);
    if (fp.status != Status::Converged) continue;
    ++ok;
    const auto rates = user_rates(ch, fp.state.w, cfg);
    EXPECT_GE(rates.minCoeff(), cfg.rate_floors[0] - 1e-9);
  }
  EXPECT_GE(ok, 19);
}

TEST(PhaseOne, ReportsInfeasibleFloors) {
  // 20 bps/Hz per user at 20 dB is beyond single-user capacity.
  auto cfg = ProblemConfig::uniform(4, 2, 1, from_db(20.0), from_db(1.0), from_bps(20.0));
  const auto ch = generate_channels(cfg, 3);
  const auto fp = find_feasible_point(ch, cfg);
  EXPECT_EQ(fp.status, Status::Infeasible);
  EXPECT_EQ(fp.iterations, 0);
  const auto r = solve_jbfas(ch, cfg);
  EXPECT_EQ(r.status, Status::Infeasible);
  EXPECT_FALSE(r.message.empty());
}

TEST(PhaseOne, StallsOnInterferenceLimitedFloors) {
  // Floors below capacity but unreachable under a tiny PU cap on a PU
  // aligned with every SU.
  ComplexMatrix su(2, 2);
  su << 1.0, 1.0, 0.0, 0.1;
  ComplexMatrix pu(2, 1);
  pu << 1.0, 0.0;
  const ChannelSet ch(su, pu);
  auto cfg = ProblemConfig::uniform(2, 2, 1, 100.0, 1e-3, from_bps(3.0));
  const auto r = solve_jbfas(ch, cfg);
  EXPECT_EQ(r.status, Status::Infeasible);
}

TEST(SolveJbfas, SingleUserMatchedFilter) {
  const auto ch = SingleUserTwoAntennas();
  const auto cfg = ProblemConfig::uniform(2, 1, 0, 10.0, 1.0, 0.0);
  for (Mode mode : {Mode::Relaxed, Mode::Improved}) {
    SolveOptions opts;
    opts.mode = mode;
    const auto r = solve_jbfas(ch, cfg, opts);
    ASSERT_EQ(r.status, Status::Converged);
    EXPECT_NEAR(r.sum_rate, std::log(11.0), 1e-3);
    const auto rounded = round_and_polish(ch, cfg, r, opts);
    EXPECT_EQ(rounded.alpha(0), 1.0);
    EXPECT_EQ(rounded.alpha(1), 0.0);
    EXPECT_EQ(rounded.w(1, 0), Complex(0.0, 0.0));
    EXPECT_NEAR(rounded.sum_rate, std::log(11.0), 1e-3);
  }
}

TEST(SolveJbfas, MonotoneTracesAndFeasibleTerminalPoints) {
  const auto cfg = OperatingPoint();
  SolveOptions opts;
  for (Mode mode : {Mode::Relaxed, Mode::Improved}) {
    opts.mode = mode;
    for (std::uint64_t seed = 0; seed < 6; ++seed) {
      const auto ch = generate_channels(cfg, seed);
      const auto r = solve_jbfas(ch, cfg, opts);
      ASSERT_EQ(r.status, Status::Converged) << r.message;
      ASSERT_GE(r.trace.size(), 2u);
      for (size_t i = 1; i < r.trace.size(); ++i) {
        EXPECT_GE(r.trace[i], r.trace[i - 1] - 10 * opts.solver.tol * (1.0 + std::abs(r.trace[i - 1])));
      }
      // Each subproblem optimum lower-bounds the true rate at its solution.
      EXPECT_LE(r.max_bound_gap, 1e-6);
      EXPECT_TRUE(r.feasibility.holds(1e-6)) << r.feasibility.worst();
      EXPECT_NEAR(r.sum_rate, r.trace.back(), 1e-12);
      EXPECT_LE(r.outer_iterations, 20);
      EXPECT_EQ(r.stats.model_constraints, 3 + 2 * 6 + 3 * 3 + 1);
      EXPECT_EQ(r.stats.model_variables, 6 * (3 + 2) + 3);
    }
  }
}

TEST(SolveJbfas, HighPowerRegimeConverges) {
  // 30 dB with 8 antennas: SINRs near 10^3 make the rate cones lopsided.
  const auto cfg = ProblemConfig::uniform(8, 2, 2, from_db(30.0), from_db(2.0), from_bps(1.0));
  SolveOptions opts;
  for (Mode mode : {Mode::Relaxed, Mode::Improved}) {
    opts.mode = mode;
    for (std::uint64_t seed = 0; seed < 8; ++seed) {
      const auto ch = generate_channels(cfg, 300 + seed);
      const auto r = solve_jbfas(ch, cfg, opts);
      EXPECT_EQ(r.status, Status::Converged) << r.message;
      EXPECT_TRUE(r.feasibility.holds(1e-6)) << r.feasibility.worst();
    }
  }
}

TEST(SolveJbfas, UserWithoutChannelOnActiveAntennasIsInfeasible) {
  ComplexMatrix su(2, 2);
  su << 1.0, 0.0, 0.0, 1.0;  // user 1 is only reachable from antenna 1
  const ChannelSet ch(su, ComplexMatrix(2, 0));
  Design d;
  d.power = PowerModel::SumPower;
  d.active = {true, false};
  const auto r = detail::run_design(ch, ProblemConfig::uniform(2, 2, 0, 10.0, 1.0, 0.0), d, SolveOptions{});
  EXPECT_EQ(r.status, Status::Infeasible);
  EXPECT_NE(r.message.find("user 1"), std::string::npos);
  EXPECT_EQ(r.sum_rate, 0.0);
}

TEST(SolveJbfas, FixedSelectionVariant) {
  const auto cfg = OperatingPoint();
  const auto ch = generate_channels(cfg, 4);
  SolveOptions opts;
  opts.fix_selection = true;
  const auto r = solve_jbfas(ch, cfg, opts);
  ASSERT_EQ(r.status, Status::Converged);
  EXPECT_TRUE((r.alpha.array() == 1.0).all());
  EXPECT_TRUE(r.feasibility.holds(1e-6));
  EXPECT_LE(total_power(r.w), cfg.power_budget * (1.0 + 1e-6));
}

TEST(SolveJbfas, Deterministic) {
  const auto cfg = OperatingPoint();
  const auto ch = generate_channels(cfg, 8);
  const auto a = solve_jbfas(ch, cfg);
  const auto b = solve_jbfas(ch, cfg);
  EXPECT_TRUE(a.w == b.w);
  EXPECT_EQ(a.trace, b.trace);
}

TEST(RoundAndPolish, BinarySelectionIsKept) {
  const auto cfg = OperatingPoint();
  const auto ch = generate_channels(cfg, 9);
  auto r = solve_jbfas(ch, cfg);
  ASSERT_EQ(r.status, Status::Converged);
  const auto rounded = round_and_polish(ch, cfg, r);
  for (Index n = 0; n < 6; ++n) {
    EXPECT_TRUE(rounded.alpha(n) == 0.0 || rounded.alpha(n) == 1.0);
    if (rounded.alpha(n) == 0.0) EXPECT_EQ(antenna_power(rounded.w, n), 0.0);
  }
  if (rounded.status != Status::Infeasible) EXPECT_TRUE(rounded.feasibility.holds(1e-6));
  // Already binary input with zero deselected power comes back unchanged.
  const auto again = round_and_polish(ch, cfg, rounded);
  EXPECT_TRUE(again.w == rounded.w);
  EXPECT_EQ(again.sum_rate, rounded.sum_rate);
}

TEST(RoundAndPolish, RespectsThreshold) {
  const auto cfg = OperatingPoint();
  const auto ch = generate_channels(cfg, 10);
  auto r = solve_jbfas(ch, cfg);
  ASSERT_EQ(r.status, Status::Converged);
  r.alpha << 0.9, 0.2, 0.6, 0.49, 1.0, 0.5;
  const auto rounded = round_and_polish(ch, cfg, r);
  RealVector expected(6);
  expected << 1, 0, 1, 0, 1, 1;
  EXPECT_TRUE(rounded.alpha == expected);
  EXPECT_EQ(antenna_power(rounded.w, 1), 0.0);
  EXPECT_EQ(antenna_power(rounded.w, 3), 0.0);
}

TEST(Feasibility, ReportFlagsViolations) {
  const auto ch = SingleUserTwoAntennas();
  auto cfg = ProblemConfig::uniform(2, 1, 0, 10.0, 1.0, 1.0);
  BeamformingMatrix w(2, 1);
  w << 4.0, 0.0;  // power 16 > 10, rate ln 17 > 1
  const RealVector alpha = RealVector::Ones(2);
  RealVector rho(2);
  rho << 16.0, 0.0;
  const auto rep = evaluate_feasibility(ch, cfg, Design{}, w, alpha, rho);
  EXPECT_NEAR(rep.power, 0.6, 1e-12);
  EXPECT_EQ(rep.rate_floor, 0.0);
  EXPECT_FALSE(rep.holds(1e-6));
}

}  // namespace
}  // namespace crbf
