#pragma once

// Reference designs without antenna selection, a zero-forcing design and an
// exhaustive search over antenna subsets. All of them enforce the rate
// floors and the PU interference caps of the joint problem.

#include "crbf/sca.hpp"

#include <Eigen/SVD>

#include <chrono>
#include <cstdint>
#include <stdexcept>
#include <vector>

namespace crbf {

/// Sum power constraint sum_k ||w_k||^2 <= P_bs.
inline SolveResult solve_spc(const ChannelSet& ch, const ProblemConfig& cfg, const SolveOptions& opts = {}) {
  Design d;
  d.power = PowerModel::SumPower;
  return detail::run_design(ch, cfg, d, opts);
}

/// Per-antenna constraints ||w~_n||^2 <= P_bs / N_t.
inline SolveResult solve_papc(const ChannelSet& ch, const ProblemConfig& cfg, const SolveOptions& opts = {}) {
  Design d;
  d.power = PowerModel::PerAntenna;
  return detail::run_design(ch, cfg, d, opts);
}

/// Sum-power design restricted to the antennas with active[n] set.
inline SolveResult solve_subset(const ChannelSet& ch, const ProblemConfig& cfg, const std::vector<bool>& active,
                                const SolveOptions& opts = {}) {
  if (static_cast<Index>(active.size()) != ch.n_antennas()) {
    throw std::invalid_argument("solve_subset: mask length must equal the number of antennas");
  }
  Design d;
  d.power = PowerModel::SumPower;
  d.active = active;
  return detail::run_design(ch, cfg, d, opts);
}

/// Zero-forcing directions H^H (H H^H)^-1 with per-antenna power caps; the
/// stream powers p_k are optimized by the same minorant with phi = sigma^2/p.
/// Requires K <= N_t; a rank-deficient SU channel matrix reports Infeasible.
inline SolveResult solve_zf_papc(const ChannelSet& ch, const ProblemConfig& cfg, const SolveOptions& opts = {}) {
  cfg.check_matches(ch);
  const Index nt = ch.n_antennas();
  const Index nk = ch.n_sus();
  if (nk > nt) throw std::invalid_argument("solve_zf_papc: zero forcing needs K <= N_t");

  SolveResult result;
  result.alpha = RealVector::Ones(nt);
  result.rho = RealVector::Zero(nt);
  const ComplexMatrix h_rows = ch.su().adjoint();  // K x N_t, row k = h_k^H
  Eigen::JacobiSVD<ComplexMatrix> svd(h_rows);
  const RealVector sv = svd.singularValues();
  const double p = cfg.power_budget;
  auto finish = [&](const BeamformingMatrix& w) {
    result.w = w;
    for (Index n = 0; n < nt; ++n) result.rho(n) = antenna_power(w, n);
    result.rates = user_rates(ch, w, cfg);
    result.sum_rate = result.rates.sum();
    result.interference = pu_interference(ch, w);
    Design d;
    d.power = PowerModel::PerAntenna;
    result.feasibility = evaluate_feasibility(ch, cfg, d, w, result.alpha, result.rho);
    return result;
  };
  if (sv(nk - 1) <= 1e-10 * sv(0)) {
    result.status = Status::Infeasible;
    result.message = "SU channel matrix is rank deficient";
    return finish(BeamformingMatrix::Zero(nt, nk));
  }
  const ComplexMatrix dir = h_rows.adjoint() * (h_rows * h_rows.adjoint()).inverse();  // N_t x K

  // Power of stream k on antenna n and at PU m per unit p_k.
  RealVector floor_power(nk);
  for (Index k = 0; k < nk; ++k) floor_power(k) = cfg.noise_power(k) * std::expm1(cfg.rate_floor(k));

  RealVector pk(nk);
  {
    // Equal powers at 90 % of the tightest constraint.
    double c = std::numeric_limits<double>::infinity();
    for (Index n = 0; n < nt; ++n) c = std::min(c, 0.9 * p / static_cast<double>(nt) / dir.row(n).squaredNorm());
    for (Index m = 0; m < ch.n_pus(); ++m) {
      c = std::min(c, 0.9 * cfg.interference_cap(m) / (ch.g(m).adjoint() * dir).squaredNorm());
    }
    pk.setConstant(c);
  }

  std::vector<double> trace{0.0};
  for (Index k = 0; k < nk; ++k) trace.back() += std::log1p(pk(k) / cfg.noise_power(k));
  result.status = Status::IterationLimit;
  for (int it = 1; it <= opts.max_outer_iter; ++it) {
    conic::ConicProgram prog;
    const auto pv = prog.add_variables("p", nk);
    const auto gv = prog.add_variables("gamma", nk);
    conic::AffineExpr objective;
    for (Index k = 0; k < nk; ++k) {
      const double phi = cfg.noise_power(k) / pk(k);
      const double a = std::log1p(1.0 / phi) + 1.0 / (1.0 + phi);
      const double b = 1.0 / (phi * phi + phi);
      objective += conic::AffineExpr(a) - gv(k) * b;
      // sigma^2 / p_k <= gamma_k
      prog.add_hyperbolic(gv(k), pv(k), {conic::AffineExpr(std::sqrt(cfg.noise_power(k)))}, "rate" + std::to_string(k),
                          conic::ConicProgram::hyperbolic_balance(phi, pk(k)));
      prog.add_less_equal(floor_power(k), pv(k), "qos" + std::to_string(k));
    }
    prog.maximize(objective);
    for (Index n = 0; n < nt; ++n) {
      conic::AffineExpr load;
      for (Index k = 0; k < nk; ++k) load += pv(k) * std::norm(dir(n, k));
      prog.add_less_equal(load, p / static_cast<double>(nt), "power" + std::to_string(n));
    }
    for (Index m = 0; m < ch.n_pus(); ++m) {
      conic::AffineExpr leak;
      const ComplexVector gd = dir.adjoint() * ch.g(m);
      for (Index k = 0; k < nk; ++k) leak += pv(k) * std::norm(gd(k));
      prog.add_less_equal(leak, cfg.interference_cap(m), "pu" + std::to_string(m));
    }
    if (it == 1) {
      result.stats.variables = prog.n_variables();
      result.stats.constraints = static_cast<Index>(prog.constraints().size());
    }
    const auto sol = conic::solve(prog, opts.solver);
    ++result.stats.solves;
    result.stats.solver_iterations += sol.iterations;
    if (sol.status == conic::SolveStatus::PrimalInfeasible) {
      result.status = Status::Infeasible;
      result.message = "zero-forcing power allocation is infeasible";
      break;
    }
    if (sol.status != conic::SolveStatus::Optimal) {
      result.status = Status::NumericalFailure;
      result.message = std::string("power allocation returned ") + conic::to_string(sol.status);
      break;
    }
    pk = sol.values(pv).cwiseMax(1e-300);
    result.subproblem_values.push_back(sol.objective);
    double value = 0.0;
    for (Index k = 0; k < nk; ++k) value += std::log1p(pk(k) / cfg.noise_power(k));
    const double previous = trace.back();
    trace.push_back(value);
    result.outer_iterations = it;
    if (std::abs(value - previous) <= opts.rel_tol * std::max(std::abs(value), 1e-12)) {
      result.status = Status::Converged;
      break;
    }
  }
  result.trace = trace;
  if (result.status == Status::Infeasible) return finish(BeamformingMatrix::Zero(nt, nk));
  BeamformingMatrix w(nt, nk);
  for (Index k = 0; k < nk; ++k) w.col(k) = dir.col(k) * std::sqrt(pk(k));
  return finish(w);
}

struct OracleOptions {
  int max_subsets = 255;
  SolveOptions solve{};
};

struct SubsetOutcome {
  std::uint32_t mask = 0;  // bit n set when antenna n is active
  Status status = Status::Infeasible;
  double sum_rate = 0.0;
};

struct OracleResult {
  SolveResult best;
  std::uint32_t best_mask = 0;
  Status status = Status::Infeasible;
  std::vector<SubsetOutcome> subsets;
  double wall_time_ms = 0.0;
};

/// Best sum-power design over all nonempty antenna subsets (N_t <= 8).
/// Each subset is solved by the same inner-approximation engine that
/// polishes rounded selections, so values are comparable.
inline OracleResult exhaustive_selection_oracle(const ChannelSet& ch, const ProblemConfig& cfg,
                                                const OracleOptions& opts = {}) {
  const Index nt = ch.n_antennas();
  if (nt > 8) throw std::invalid_argument("exhaustive_selection_oracle: at most 8 antennas");
  const long n_subsets = (1L << nt) - 1;
  if (n_subsets > opts.max_subsets) {
    throw std::invalid_argument("exhaustive_selection_oracle: " + std::to_string(n_subsets) +
                                " subsets exceed max_subsets=" + std::to_string(opts.max_subsets));
  }
  const auto start = std::chrono::steady_clock::now();
  OracleResult out;
  bool have = false;
  for (std::uint32_t mask = 1; mask <= static_cast<std::uint32_t>(n_subsets); ++mask) {
    std::vector<bool> active(static_cast<size_t>(nt));
    for (Index n = 0; n < nt; ++n) active[static_cast<size_t>(n)] = (mask >> n) & 1U;
    SolveResult r = solve_subset(ch, cfg, active, opts.solve);
    out.subsets.push_back({mask, r.status, r.sum_rate});
    const bool usable = r.status == Status::Converged || r.status == Status::IterationLimit;
    if (usable && (!have || r.sum_rate > out.best.sum_rate)) {
      out.best = std::move(r);
      out.best_mask = mask;
      have = true;
    }
  }
  out.status = have ? Status::Converged : Status::Infeasible;
  out.wall_time_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
  return out;
}

}  // namespace crbf
