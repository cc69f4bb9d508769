#pragma once

// Inner-approximation driver for joint beamforming and antenna selection.
//
// Each outer iteration replaces the nonconcave rates by the concave
// minorants of surrogate.hpp, the bilinear per-antenna powers alpha_n rho_n by
// their convex majorants, and solves the resulting cone program. A phase-one
// loop (maximize the worst rate margin) produces the first feasible point.
//
// The same engine runs the sum-power, per-antenna and fixed-subset designs
// used as baselines; only the power constraints of the subproblem differ.

#include "crbf/conic/solver.hpp"
#include "crbf/model.hpp"
#include "crbf/surrogate.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <optional>
#include <string>
#include <vector>

namespace crbf {

enum class Mode { Relaxed, Improved };

enum class Status { Converged, IterationLimit, Infeasible, NumericalFailure };

inline const char* to_string(Status s) {
  switch (s) {
    case Status::Converged: return "Converged";
    case Status::IterationLimit: return "IterationLimit";
    case Status::Infeasible: return "Infeasible";
    case Status::NumericalFailure: return "NumericalFailure";
  }
  return "?";
}

inline const char* to_string(Mode m) { return m == Mode::Relaxed ? "relaxed" : "improved"; }

/// How the transmit power is constrained in the subproblem.
enum class PowerModel {
  JointSelection,  // ||w~_n||^2 <= alpha_n rho_n, sum alpha_n rho_n <= P
  SumPower,        // sum ||w_k||^2 <= P
  PerAntenna,      // ||w~_n||^2 <= P / N_t
};

struct Design {
  PowerModel power = PowerModel::JointSelection;
  Mode mode = Mode::Improved;
  bool fix_selection = false;  // JointSelection with alpha_n = 1 for all n
  std::vector<bool> active;    // antennas allowed to radiate; empty means all

  bool is_active(Index n) const {
    return active.empty() || active.at(static_cast<size_t>(n));
  }
  bool uses_selection() const { return power == PowerModel::JointSelection && !fix_selection; }
};

struct SolveOptions {
  Mode mode = Mode::Improved;
  double rel_tol = 1e-4;
  int max_outer_iter = 50;
  int feasibility_max_iter = 30;
  double rounding_threshold = 0.5;
  bool fix_selection = false;
  conic::SolverSettings solver{};
};

inline constexpr double kTrustMargin = 1e-6;      // t_k >= this instead of t_k > 0
inline constexpr double kExpansionFloor = 1e-9;   // floor on alpha, rho in alpha/rho
inline constexpr double kReinitThreshold = 1e-9;  // Re{h^H w} below this re-initializes w_k

struct ScaState {
  BeamformingMatrix w;
  SelectionState selection;
  RealVector gamma;
  int iteration = 0;
  std::vector<double> objective_trace;  // true sum rate (nats) per accepted iterate
};

struct SubproblemStats {
  Index variables = 0;
  Index constraints = 0;
  Index model_variables = 0;    // N_t (K + 2) + K, complex weights counted once
  Index model_constraints = 0;  // M + 2 N_t + 3 K + 1
  long solver_iterations = 0;
  int solves = 0;
};

/// Relative violations of the original problem's constraints at a point.
struct FeasibilityReport {
  double rate_floor = 0.0;
  double interference = 0.0;
  double power = 0.0;
  double selection_box = 0.0;

  double worst() const { return std::max({rate_floor, interference, power, selection_box}); }
  bool holds(double tol) const { return worst() <= tol; }
};

struct SolveResult {
  BeamformingMatrix w;
  RealVector alpha;
  RealVector rho;
  RealVector rates;  // nats
  double sum_rate = 0.0;
  RealVector interference;
  Status status = Status::Infeasible;
  std::vector<double> trace;              // true sum rate per main-phase iterate, start point first
  std::vector<double> subproblem_values;  // optimum of each main-phase subproblem
  int outer_iterations = 0;
  int feasibility_iterations = 0;
  SubproblemStats stats;
  FeasibilityReport feasibility;
  double max_monotonicity_drop = 0.0;  // largest decrease between consecutive subproblem optima
  double max_bound_gap = 0.0;          // largest (subproblem optimum - true sum rate at its solution)
  std::string message;
};

// ---------------------------------------------------------------------------
// Exact checks

inline FeasibilityReport evaluate_feasibility(const ChannelSet& ch, const ProblemConfig& cfg,
                                              const Design& design, const BeamformingMatrix& w,
                                              const RealVector& alpha, const RealVector& rho) {
  FeasibilityReport r;
  const RealVector rates = user_rates(ch, w, cfg);
  for (Index k = 0; k < ch.n_sus(); ++k) {
    const double floor = cfg.rate_floor(k);
    if (floor > 0.0) r.rate_floor = std::max(r.rate_floor, (floor - rates(k)) / floor);
  }
  for (Index m = 0; m < ch.n_pus(); ++m) {
    const double cap = cfg.interference_cap(m);
    r.interference = std::max(r.interference, (interference_at_pu(ch, w, m) - cap) / cap);
  }
  const double p = cfg.power_budget;
  const Index nt = ch.n_antennas();
  switch (design.power) {
    case PowerModel::JointSelection: {
      double budget = 0.0;
      for (Index n = 0; n < nt; ++n) {
        budget += alpha(n) * rho(n);
        r.power = std::max(r.power, (antenna_power(w, n) - alpha(n) * rho(n)) / p);
        r.selection_box = std::max({r.selection_box, -alpha(n), alpha(n) - 1.0});
      }
      r.power = std::max(r.power, (budget - p) / p);
      break;
    }
    case PowerModel::SumPower:
      r.power = (total_power(w) - p) / p;
      break;
    case PowerModel::PerAntenna: {
      const double cap = p / static_cast<double>(nt);
      for (Index n = 0; n < nt; ++n) r.power = std::max(r.power, (antenna_power(w, n) - cap) / cap);
      break;
    }
  }
  for (Index n = 0; n < nt; ++n) {
    if (!design.is_active(n) && antenna_power(w, n) > 0.0) r.power = std::max(r.power, antenna_power(w, n) / p);
  }
  r.rate_floor = std::max(r.rate_floor, 0.0);
  r.interference = std::max(r.interference, 0.0);
  r.power = std::max(r.power, 0.0);
  r.selection_box = std::max(r.selection_box, 0.0);
  return r;
}

// ---------------------------------------------------------------------------
// Subproblem construction

namespace detail {

using conic::AffineExpr;
using conic::ConicProgram;
using conic::VariableBlock;

// Re{f^H w_j} and Im{f^H w_j} as affine expressions of the real layout.
inline AffineExpr re_inner(const ComplexVector& f, const VariableBlock& w, Index nt, Index j) {
  AffineExpr e;
  for (Index n = 0; n < nt; ++n) {
    const Index i = w.offset + real_index(nt, j, n);
    e.add_term(i, f(n).real());
    e.add_term(i + 1, f(n).imag());
  }
  return e;
}

inline AffineExpr im_inner(const ComplexVector& f, const VariableBlock& w, Index nt, Index j) {
  AffineExpr e;
  for (Index n = 0; n < nt; ++n) {
    const Index i = w.offset + real_index(nt, j, n);
    e.add_term(i, -f(n).imag());
    e.add_term(i + 1, f(n).real());
  }
  return e;
}

enum class Phase { Feasibility, Main };

struct BuiltProgram {
  ConicProgram program;
  VariableBlock w;
  std::optional<VariableBlock> alpha;
  std::optional<VariableBlock> rho;
  VariableBlock gamma;
  std::optional<VariableBlock> margin;
};

inline BuiltProgram build_subproblem(const ChannelSet& ch, const ProblemConfig& cfg,
                                     const Design& design, const ScaState& state, Phase phase) {
  const Index nt = ch.n_antennas();
  const Index nk = ch.n_sus();
  const Index nm = ch.n_pus();
  BuiltProgram out;
  ConicProgram& prog = out.program;
  out.w = prog.add_variables("w", 2 * nt * nk);
  const bool joint = design.power == PowerModel::JointSelection;
  if (joint && !design.fix_selection) out.alpha = prog.add_variables("alpha", nt);
  if (joint) out.rho = prog.add_variables("rho", nt);
  out.gamma = prog.add_variables("gamma", nk);
  if (phase == Phase::Feasibility) out.margin = prog.add_variables("margin", 1);

  auto w_re = [&](Index k, Index n) { return AffineExpr::variable(out.w.offset + real_index(nt, k, n)); };
  auto w_im = [&](Index k, Index n) { return AffineExpr::variable(out.w.offset + real_index(nt, k, n) + 1); };

  // Interference caps at the PUs.
  for (Index m = 0; m < nm; ++m) {
    const ComplexVector g = ch.g(m);
    std::vector<AffineExpr> u;
    for (Index k = 0; k < nk; ++k) {
      u.push_back(re_inner(g, out.w, nt, k));
      u.push_back(im_inner(g, out.w, nt, k));
    }
    prog.add_second_order_cone(std::sqrt(cfg.interference_cap(m)), std::move(u), "pu" + std::to_string(m));
  }

  // Per-antenna power coupling and antenna selection box.
  if (joint) {
    for (Index n = 0; n < nt; ++n) {
      std::vector<AffineExpr> u;
      for (Index k = 0; k < nk; ++k) {
        u.push_back(w_re(k, n));
        u.push_back(w_im(k, n));
      }
      const AffineExpr a = out.alpha ? (*out.alpha)(n) : AffineExpr(1.0);
      const double a_ref = out.alpha ? state.selection.alpha(n) : 1.0;
      prog.add_hyperbolic(a, (*out.rho)(n), std::move(u), "antenna" + std::to_string(n),
                          ConicProgram::hyperbolic_balance(a_ref, state.selection.rho(n)));
    }
    if (out.alpha) {
      for (Index n = 0; n < nt; ++n) {
        prog.add_nonnegative((*out.alpha)(n), "alpha_lo" + std::to_string(n));
        prog.add_less_equal((*out.alpha)(n), 1.0, "alpha_hi" + std::to_string(n));
      }
    }
  }

  // Trust region and epigraph of the rate surrogates.
  std::vector<SurrogateCoefficients> coeffs;
  std::vector<AffineExpr> linearized_signal;
  for (Index k = 0; k < nk; ++k) {
    coeffs.push_back(surrogate_coeffs(ch, state.w, k, cfg.noise_power(k)));
    const double t_ref = coeffs.back().t_ref;
    linearized_signal.push_back(re_inner(ch.h(k), out.w, nt, k) * (2.0 * t_ref) + AffineExpr(-t_ref * t_ref));
  }
  for (Index k = 0; k < nk; ++k) {
    prog.add_less_equal(kTrustMargin, linearized_signal[k], "trust" + std::to_string(k));
  }
  for (Index k = 0; k < nk; ++k) {
    const ComplexVector h = ch.h(k);
    std::vector<AffineExpr> u;
    for (Index j = 0; j < nk; ++j) {
      if (j == k) continue;
      u.push_back(re_inner(h, out.w, nt, j));
      u.push_back(im_inner(h, out.w, nt, j));
    }
    u.emplace_back(std::sqrt(cfg.noise_power(k)));
    // At the expansion point gamma = phi and the linearized signal is t_ref^2.
    const double balance = ConicProgram::hyperbolic_balance(coeffs[k].phi, coeffs[k].t_ref * coeffs[k].t_ref);
    prog.add_hyperbolic(out.gamma(k), linearized_signal[k], std::move(u), "rate" + std::to_string(k), balance);
  }

  // Rate floors (main phase) or rate margins (phase one).
  AffineExpr objective;
  for (Index k = 0; k < nk; ++k) {
    const AffineExpr rate_lb = AffineExpr(coeffs[k].a) - out.gamma(k) * coeffs[k].b;
    if (phase == Phase::Main) {
      prog.add_less_equal(cfg.rate_floor(k), rate_lb, "qos" + std::to_string(k));
      objective += rate_lb;
    } else {
      prog.add_less_equal((*out.margin)(0) + cfg.rate_floor(k), rate_lb, "margin" + std::to_string(k));
    }
  }
  if (phase == Phase::Feasibility) objective = (*out.margin)(0);
  prog.maximize(objective);

  // Transmit power.
  const double p = cfg.power_budget;
  switch (design.power) {
    case PowerModel::JointSelection: {
      if (design.fix_selection) {
        AffineExpr total;
        for (Index n = 0; n < nt; ++n) total += (*out.rho)(n);
        prog.add_less_equal(total, p, "power");
      } else {
        std::vector<AffineExpr> u;
        for (Index n = 0; n < nt; ++n) {
          const double r = std::max(state.selection.alpha(n), kExpansionFloor) /
                           std::max(state.selection.rho(n), kExpansionFloor);
          u.push_back((*out.alpha)(n) * (1.0 / std::sqrt(2.0 * r)));
          u.push_back((*out.rho)(n) * std::sqrt(0.5 * r));
        }
        prog.add_second_order_cone(std::sqrt(p), std::move(u), "power");
      }
      break;
    }
    case PowerModel::SumPower: {
      std::vector<AffineExpr> u;
      for (Index k = 0; k < nk; ++k) {
        for (Index n = 0; n < nt; ++n) {
          if (!design.is_active(n)) continue;
          u.push_back(w_re(k, n));
          u.push_back(w_im(k, n));
        }
      }
      prog.add_second_order_cone(std::sqrt(p), std::move(u), "power");
      break;
    }
    case PowerModel::PerAntenna: {
      const double cap = std::sqrt(p / static_cast<double>(nt));
      for (Index n = 0; n < nt; ++n) {
        if (!design.is_active(n)) continue;
        std::vector<AffineExpr> u;
        for (Index k = 0; k < nk; ++k) {
          u.push_back(w_re(k, n));
          u.push_back(w_im(k, n));
        }
        prog.add_second_order_cone(cap, std::move(u), "power" + std::to_string(n));
      }
      break;
    }
  }

  if (design.uses_selection() && design.mode == Mode::Improved) {
    for (Index n = 0; n < nt; ++n) {
      prog.add_less_equal((*out.alpha)(n), (*out.rho)(n) * cfg.omega, "select" + std::to_string(n));
    }
  }

  for (Index n = 0; n < nt; ++n) {
    if (design.is_active(n)) continue;
    for (Index k = 0; k < nk; ++k) {
      prog.add_equality(w_re(k, n), "off" + std::to_string(n));
      prog.add_equality(w_im(k, n), "off" + std::to_string(n));
    }
  }
  return out;
}

inline SubproblemStats describe(const ChannelSet& ch, const conic::ConicProgram& prog) {
  SubproblemStats s;
  const Index nt = ch.n_antennas(), nk = ch.n_sus(), nm = ch.n_pus();
  s.variables = prog.n_variables();
  s.constraints = static_cast<Index>(prog.constraints().size());
  s.model_variables = nt * (nk + 2) + nk;
  s.model_constraints = nm + 2 * nt + 3 * nk + 1;
  return s;
}

// Matched-filter start restricted to the active antennas, scaled so the
// design's power constraints and every PU cap hold with a 10 % margin.
inline ScaState initial_state(const ChannelSet& ch, const ProblemConfig& cfg, const Design& design) {
  cfg.check_matches(ch);
  const Index nt = ch.n_antennas();
  const Index nk = ch.n_sus();
  BeamformingMatrix dir = BeamformingMatrix::Zero(nt, nk);
  for (Index k = 0; k < nk; ++k) {
    ComplexVector h = ch.h(k);
    for (Index n = 0; n < nt; ++n) {
      if (!design.is_active(n)) h(n) = 0.0;
    }
    const double norm = h.norm();
    if (norm > 0.0) dir.col(k) = h / norm;
  }
  // Largest c^2 such that every constraint scales within 90 % of its cap.
  double c2 = std::numeric_limits<double>::infinity();
  const double p = cfg.power_budget;
  if (design.power == PowerModel::PerAntenna) {
    for (Index n = 0; n < nt; ++n) {
      const double pw = antenna_power(dir, n);
      if (pw > 0.0) c2 = std::min(c2, 0.9 * p / static_cast<double>(nt) / pw);
    }
  } else {
    c2 = std::min(c2, 0.9 * p / std::max(total_power(dir), 1e-300));
  }
  for (Index m = 0; m < ch.n_pus(); ++m) {
    const double leak = interference_at_pu(ch, dir, m);
    if (leak > 0.0) c2 = std::min(c2, 0.9 * cfg.interference_cap(m) / leak);
  }
  ScaState state;
  state.w = phase_align(ch, dir * std::sqrt(c2));
  state.selection.alpha = RealVector::Ones(nt);
  state.selection.rho.resize(nt);
  const double spare = (p - total_power(state.w)) / static_cast<double>(nt);
  for (Index n = 0; n < nt; ++n) {
    state.selection.rho(n) = antenna_power(state.w, n) + (design.is_active(n) ? spare : 0.0);
  }
  if (design.power != PowerModel::JointSelection) {
    for (Index n = 0; n < nt; ++n) state.selection.rho(n) = antenna_power(state.w, n);
  }
  state.gamma.resize(nk);
  for (Index k = 0; k < nk; ++k) {
    const double re = ch.h(k).dot(state.w.col(k)).real();
    state.gamma(k) = re > 0.0 ? varphi(ch, state.w, k, cfg.noise_power(k)) : 0.0;
  }
  return state;
}

// Users whose aligned signal amplitude collapsed get a small matched-filter
// beamformer back so the next expansion point is well defined.
inline void reinitialize_collapsed_users(const ChannelSet& ch, const Design& design, ScaState& state) {
  for (Index k = 0; k < ch.n_sus(); ++k) {
    if (ch.h(k).dot(state.w.col(k)).real() >= kReinitThreshold) continue;
    ComplexVector h = ch.h(k);
    for (Index n = 0; n < ch.n_antennas(); ++n) {
      if (!design.is_active(n)) h(n) = 0.0;
    }
    if (h.norm() > 0.0) state.w.col(k) = 1e-6 * h / h.norm();
  }
}

inline void apply_solution(const ChannelSet& ch, const ProblemConfig& cfg, const Design& design,
                           const BuiltProgram& built, const conic::ConeSolution& sol, ScaState& state) {
  const Index nt = ch.n_antennas();
  BeamformingMatrix w = from_real(sol.values(built.w), nt, ch.n_sus());
  for (Index n = 0; n < nt; ++n) {
    if (!design.is_active(n)) w.row(n).setZero();
  }
  state.w = phase_align(ch, w);
  reinitialize_collapsed_users(ch, design, state);
  if (built.alpha) {
    state.selection.alpha = sol.values(*built.alpha).cwiseMax(0.0).cwiseMin(1.0);
  } else {
    state.selection.alpha = RealVector::Ones(nt);
    for (Index n = 0; n < nt; ++n) {
      if (!design.is_active(n)) state.selection.alpha(n) = 0.0;
    }
  }
  if (built.rho) {
    state.selection.rho = sol.values(*built.rho).cwiseMax(0.0);
  } else {
    for (Index n = 0; n < nt; ++n) state.selection.rho(n) = antenna_power(state.w, n);
  }
  state.gamma = sol.values(built.gamma);
  (void)cfg;
}

// Sufficient infeasibility test: even without interference no user can
// exceed ln(1 + P ||h_k||^2 / sigma_k^2).
inline std::optional<Index> user_exceeding_capacity(const ChannelSet& ch, const ProblemConfig& cfg) {
  for (Index k = 0; k < ch.n_sus(); ++k) {
    const double cap = std::log1p(cfg.power_budget * ch.h(k).squaredNorm() / cfg.noise_power(k));
    if (cfg.rate_floor(k) > cap) return k;
  }
  return std::nullopt;
}

struct PhaseOneOutcome {
  ScaState state;
  Status status = Status::Infeasible;
  int iterations = 0;
  std::string message;
};

inline double min_margin(const ChannelSet& ch, const ProblemConfig& cfg, const BeamformingMatrix& w) {
  const RealVector rates = user_rates(ch, w, cfg);
  double worst = std::numeric_limits<double>::infinity();
  for (Index k = 0; k < ch.n_sus(); ++k) worst = std::min(worst, rates(k) - cfg.rate_floor(k));
  return worst;
}

inline PhaseOneOutcome run_phase_one(const ChannelSet& ch, const ProblemConfig& cfg, const Design& design,
                                     const SolveOptions& opts, ScaState start, SubproblemStats& stats) {
  PhaseOneOutcome out;
  out.state = std::move(start);
  if (const auto k = user_exceeding_capacity(ch, cfg)) {
    out.message = "rate floor of user " + std::to_string(*k) + " exceeds its single-user capacity";
    return out;
  }
  std::vector<double> margins{min_margin(ch, cfg, out.state.w)};
  for (int it = 0;; ++it) {
    if (margins.back() >= 0.0) {
      out.status = Status::Converged;
      out.iterations = it;
      return out;
    }
    if (it >= opts.feasibility_max_iter) {
      out.iterations = it;
      out.message = "phase one hit its iteration cap with worst margin " + std::to_string(margins.back());
      return out;
    }
    const BuiltProgram built = build_subproblem(ch, cfg, design, out.state, Phase::Feasibility);
    const auto sol = conic::solve(built.program, opts.solver);
    ++stats.solves;
    stats.solver_iterations += sol.iterations;
    if (sol.status != conic::SolveStatus::Optimal) {
      out.status = sol.status == conic::SolveStatus::PrimalInfeasible ? Status::Infeasible : Status::NumericalFailure;
      out.iterations = it + 1;
      out.message = std::string("phase-one subproblem returned ") + conic::to_string(sol.status);
      return out;
    }
    apply_solution(ch, cfg, design, built, sol, out.state);
    margins.push_back(min_margin(ch, cfg, out.state.w));
    const size_t n = margins.size();
    if (n > 5 && margins.back() < 0.0) {
      const double gain = margins.back() - margins[n - 6];
      if (gain <= opts.rel_tol * std::max(1.0, std::abs(margins.back()))) {
        out.iterations = it + 1;
        out.message = "worst rate margin stalled below zero at " + std::to_string(margins.back());
        return out;
      }
    }
  }
}

inline SolveResult finalize(const ChannelSet& ch, const ProblemConfig& cfg, const Design& design,
                            const ScaState& state, SolveResult result) {
  result.w = state.w;
  result.alpha = state.selection.alpha;
  result.rho = state.selection.rho;
  result.rates = user_rates(ch, state.w, cfg);
  result.sum_rate = result.rates.sum();
  result.interference = pu_interference(ch, state.w);
  result.feasibility = evaluate_feasibility(ch, cfg, design, result.w, result.alpha, result.rho);
  return result;
}

inline SolveResult run_design(const ChannelSet& ch, const ProblemConfig& cfg, const Design& design,
                              const SolveOptions& opts, std::optional<ScaState> start = std::nullopt) {
  cfg.check_matches(ch);
  SolveResult result;
  // A user with no channel on the active antennas has rate 0 for every
  // beamformer and the rate surrogate is undefined there.
  for (Index k = 0; k < ch.n_sus(); ++k) {
    double gain = 0.0;
    for (Index n = 0; n < ch.n_antennas(); ++n) {
      if (design.is_active(n)) gain += std::norm(ch.su()(n, k));
    }
    if (gain == 0.0) {
      ScaState silent;
      silent.w = BeamformingMatrix::Zero(ch.n_antennas(), ch.n_sus());
      silent.selection.alpha = RealVector::Zero(ch.n_antennas());
      silent.selection.rho = RealVector::Zero(ch.n_antennas());
      result.status = Status::Infeasible;
      result.message = "user " + std::to_string(k) + " has no channel on the active antennas";
      return finalize(ch, cfg, design, silent, std::move(result));
    }
  }
  {
    ScaState probe = initial_state(ch, cfg, design);
    result.stats = describe(ch, build_subproblem(ch, cfg, design, probe, Phase::Main).program);
    if (!start) start = std::move(probe);
  }
  PhaseOneOutcome phase_one = run_phase_one(ch, cfg, design, opts, std::move(*start), result.stats);
  result.feasibility_iterations = phase_one.iterations;
  ScaState state = std::move(phase_one.state);
  if (phase_one.status != Status::Converged) {
    result.status = phase_one.status;
    result.message = phase_one.message;
    return finalize(ch, cfg, design, state, std::move(result));
  }

  // The phase-one solution carries its own gamma; restart the epigraph at
  // the exact value so the first main subproblem is tight at the start.
  for (Index k = 0; k < ch.n_sus(); ++k) state.gamma(k) = varphi(ch, state.w, k, cfg.noise_power(k));
  state.objective_trace = {sum_rate(ch, state.w, cfg)};
  result.status = Status::IterationLimit;
  for (int it = 1; it <= opts.max_outer_iter; ++it) {
    const BuiltProgram built = build_subproblem(ch, cfg, design, state, Phase::Main);
    const auto sol = conic::solve(built.program, opts.solver);
    ++result.stats.solves;
    result.stats.solver_iterations += sol.iterations;
    if (sol.status != conic::SolveStatus::Optimal) {
      result.status = Status::NumericalFailure;
      result.message = std::string("main subproblem returned ") + conic::to_string(sol.status) +
                       " at outer iteration " + std::to_string(it);
      break;
    }
    apply_solution(ch, cfg, design, built, sol, state);
    state.iteration = it;
    const double value = sum_rate(ch, state.w, cfg);
    if (!result.subproblem_values.empty()) {
      result.max_monotonicity_drop =
          std::max(result.max_monotonicity_drop, result.subproblem_values.back() - sol.objective);
    }
    result.max_bound_gap = std::max(result.max_bound_gap, sol.objective - value);
    result.subproblem_values.push_back(sol.objective);
    const double previous = state.objective_trace.back();
    state.objective_trace.push_back(value);
    result.outer_iterations = it;
    if (std::abs(value - previous) <= opts.rel_tol * std::max(std::abs(value), 1e-12)) {
      result.status = Status::Converged;
      break;
    }
  }
  result.trace = state.objective_trace;
  return finalize(ch, cfg, design, state, std::move(result));
}

inline Design joint_design(const SolveOptions& opts) {
  Design d;
  d.power = PowerModel::JointSelection;
  d.mode = opts.mode;
  d.fix_selection = opts.fix_selection;
  return d;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Public interface

/// Scaled matched-filter start: w_k = c h_k / ||h_k||, alpha = 1, rho_n the
/// antenna power plus an equal share of the unused budget.
inline ScaState initialize_state(const ChannelSet& ch, const ProblemConfig& cfg) {
  return detail::initial_state(ch, cfg, Design{});
}

/// Phase-one program: maximize the worst surrogate rate margin over the
/// relaxed feasible set (rate floors only in the objective).
inline conic::ConicProgram build_feasibility_subproblem(const ChannelSet& ch, const ProblemConfig& cfg,
                                                        const ScaState& state) {
  Design d;
  d.mode = Mode::Relaxed;
  return detail::build_subproblem(ch, cfg, d, state, detail::Phase::Feasibility).program;
}

inline conic::ConicProgram build_relaxed_subproblem(const ChannelSet& ch, const ProblemConfig& cfg,
                                                    const ScaState& state) {
  Design d;
  d.mode = Mode::Relaxed;
  return detail::build_subproblem(ch, cfg, d, state, detail::Phase::Main).program;
}

/// Relaxed subproblem plus alpha_n <= omega rho_n.
inline conic::ConicProgram build_improved_subproblem(const ChannelSet& ch, const ProblemConfig& cfg,
                                                     const ScaState& state) {
  Design d;
  d.mode = Mode::Improved;
  return detail::build_subproblem(ch, cfg, d, state, detail::Phase::Main).program;
}

struct FeasiblePoint {
  ScaState state;
  Status status = Status::Infeasible;
  int iterations = 0;
  std::string message;
};

inline FeasiblePoint find_feasible_point(const ChannelSet& ch, const ProblemConfig& cfg,
                                         const SolveOptions& opts = {}) {
  const Design d = detail::joint_design(opts);
  SubproblemStats stats;
  auto out = detail::run_phase_one(ch, cfg, d, opts, detail::initial_state(ch, cfg, d), stats);
  return {std::move(out.state), out.status, out.iterations, std::move(out.message)};
}

/// Full inner-approximation run. The returned alpha is the relaxed selection;
/// see round_and_polish for a binary one.
inline SolveResult solve_jbfas(const ChannelSet& ch, const ProblemConfig& cfg, const SolveOptions& opts = {}) {
  return detail::run_design(ch, cfg, detail::joint_design(opts), opts);
}

/// Rounds alpha at opts.rounding_threshold, zeroes the deselected antennas
/// and re-optimizes the beamformers on the selected subset (alpha fixed,
/// rho free, which is a sum-power constraint on that subset).
inline SolveResult round_and_polish(const ChannelSet& ch, const ProblemConfig& cfg, const SolveResult& relaxed,
                                    const SolveOptions& opts = {}) {
  const Index nt = ch.n_antennas();
  std::vector<bool> active(static_cast<size_t>(nt));
  bool any = false;
  bool already_binary = true;
  for (Index n = 0; n < nt; ++n) {
    const double a = relaxed.alpha(n);
    active[static_cast<size_t>(n)] = a >= opts.rounding_threshold;
    any = any || active[static_cast<size_t>(n)];
    if (a != 0.0 && a != 1.0) already_binary = false;
    if (a == 0.0 && antenna_power(relaxed.w, n) != 0.0) already_binary = false;
  }
  if (already_binary && any) return relaxed;
  if (!any) {
    Index best = 0;
    relaxed.alpha.maxCoeff(&best);
    active[static_cast<size_t>(best)] = true;
  }

  Design subset;
  subset.power = PowerModel::SumPower;
  subset.active = active;
  ScaState start;
  start.w = relaxed.w;
  for (Index n = 0; n < nt; ++n) {
    if (!subset.is_active(n)) start.w.row(n).setZero();
  }
  start.w = phase_align(ch, start.w);
  detail::reinitialize_collapsed_users(ch, subset, start);
  start.selection.alpha = RealVector::Ones(nt);
  start.selection.rho = RealVector::Zero(nt);
  start.gamma = RealVector::Zero(ch.n_sus());

  SolveResult polished = detail::run_design(ch, cfg, subset, opts, start);
  polished.alpha = RealVector::Zero(nt);
  polished.rho = RealVector::Zero(nt);
  for (Index n = 0; n < nt; ++n) {
    if (subset.is_active(n)) {
      polished.alpha(n) = 1.0;
      polished.rho(n) = antenna_power(polished.w, n);
    }
  }
  polished.feasibility = evaluate_feasibility(ch, cfg, subset, polished.w, polished.alpha, polished.rho);
  polished.outer_iterations += relaxed.outer_iterations;
  polished.stats.solves += relaxed.stats.solves;
  polished.stats.solver_iterations += relaxed.stats.solver_iterations;
  return polished;
}

}  // namespace crbf
