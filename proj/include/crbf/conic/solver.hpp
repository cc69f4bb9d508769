#pragma once

// Primal-dual interior-point solver for ConicProgram, working on the
// homogeneous self-dual embedding of
//
//   minimize c'x  s.t.  A x = b,  G x + s = h,  s in K
//   maximize -b'y - h'z  s.t.  A'y + G'z + c = 0,  z in K
//
// with Nesterov-Todd scaling and Mehrotra predictor-corrector steps. Linear
// algebra uses a sparse LDL' of the regularized quasi-definite KKT system
// with iterative refinement and a dense pivoted fallback. Problems here have tens to a few hundred
// variables.

#include "crbf/conic/cones.hpp"
#include "crbf/conic/program.hpp"

#include <Eigen/Dense>
#include <Eigen/OrderingMethods>
#include <Eigen/SparseCholesky>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <optional>
#include <string>
#include <vector>

namespace crbf::conic {

enum class SolveStatus { Optimal, PrimalInfeasible, DualInfeasible, IterationLimit, NumericalFailure };

inline const char* to_string(SolveStatus s) {
  switch (s) {
    case SolveStatus::Optimal: return "Optimal";
    case SolveStatus::PrimalInfeasible: return "PrimalInfeasible";
    case SolveStatus::DualInfeasible: return "DualInfeasible";
    case SolveStatus::IterationLimit: return "IterationLimit";
    case SolveStatus::NumericalFailure: return "NumericalFailure";
  }
  return "?";
}

struct SolverSettings {
  double tol = 1e-8;
  int max_iter = 100;
  double step_fraction = 0.99;
  double static_regularization = 1e-9;
  int refinement_steps = 10;
  // When progress breaks down (step failure, residual blow-up, iteration
  // cap), the best iterate is still reported Optimal if it meets this looser
  // tolerance; ConeSolution::reduced_accuracy is then set.
  double tol_inaccurate = 1e-6;
};

struct ConeSolution {
  SolveStatus status = SolveStatus::NumericalFailure;
  Vector x;                 // primal values of all program variables
  double objective = 0.0;   // in the program's (maximize) sense
  // For Optimal solutions: largest absolute constraint violation of x.
  // Otherwise the scaled embedding residual of the best iterate.
  double primal_residual = std::numeric_limits<double>::infinity();
  double dual_residual = std::numeric_limits<double>::infinity();
  double duality_gap = std::numeric_limits<double>::infinity();
  bool reduced_accuracy = false;
  int iterations = 0;

  double value(Index var) const { return x(var); }
  Vector values(const VariableBlock& b) const { return x.segment(b.offset, b.size); }
};

/// Standard-form data extracted from a ConicProgram. Rotated cones are
/// mapped to second-order cones via
///   ||u||^2 <= 2 s t, s, t >= 0  <=>  ||((s - t)/sqrt2, u)|| <= (s + t)/sqrt2.
struct StandardForm {
  Vector c;  // minimize c'x (negated program objective)
  double objective_constant = 0.0;
  Matrix A;
  Vector b;
  Matrix G;
  Vector h;
  ConeStructure cones;

  static StandardForm from_program(const ConicProgram& prog) {
    prog.validate();
    const Index n = prog.n_variables();
    StandardForm sf;
    sf.c = -prog.objective().dense(n).transpose();
    sf.objective_constant = prog.objective().constant();

    std::vector<const AffineExpr*> eq_rows;
    std::vector<const AffineExpr*> lin_rows;
    std::vector<std::vector<AffineExpr>> soc_blocks;
    const double r2 = std::numbers::sqrt2;
    for (const auto& con : prog.constraints()) {
      switch (con.kind) {
        case ConstraintKind::Equality: eq_rows.push_back(&con.rows[0]); break;
        case ConstraintKind::NonNegative: lin_rows.push_back(&con.rows[0]); break;
        case ConstraintKind::SecondOrderCone: soc_blocks.push_back(con.rows); break;
        case ConstraintKind::RotatedCone: {
          std::vector<AffineExpr> rows;
          rows.push_back((con.rows[0] + con.rows[1]) * (1.0 / r2));
          rows.push_back((con.rows[0] - con.rows[1]) * (1.0 / r2));
          for (size_t i = 2; i < con.rows.size(); ++i) rows.push_back(con.rows[i]);
          soc_blocks.push_back(std::move(rows));
          break;
        }
      }
    }

    const Index p = static_cast<Index>(eq_rows.size());
    sf.A = Matrix::Zero(p, n);
    sf.b = Vector::Zero(p);
    for (Index i = 0; i < p; ++i) {
      sf.A.row(i) = eq_rows[i]->dense(n);
      sf.b(i) = -eq_rows[i]->constant();
    }

    sf.cones.n_linear = static_cast<Index>(lin_rows.size());
    for (const auto& blk : soc_blocks) sf.cones.soc_dims.push_back(static_cast<Index>(blk.size()));
    const Index m = sf.cones.dim();
    sf.G = Matrix::Zero(m, n);
    sf.h = Vector::Zero(m);
    // Cone slack s = e(x) = a'x + const, so G row = -a and h = const.
    Index row = 0;
    auto put = [&](const AffineExpr& e) {
      sf.G.row(row) = -e.dense(n);
      sf.h(row) = e.constant();
      ++row;
    };
    for (const auto* e : lin_rows) put(*e);
    for (const auto& blk : soc_blocks) {
      for (const auto& e : blk) put(e);
    }
    return sf;
  }
};

namespace detail {

// Ruiz equilibration of [A; G]: x = D x~, equality rows scaled by E, cone
// rows by F with one factor per second-order cone so membership is kept.
struct Equilibration {
  Vector d, e, f;
};

inline Equilibration equilibrate(StandardForm& sf, int passes = 15) {
  const Index n = sf.G.cols();
  const Index p = sf.A.rows();
  const Index m = sf.G.rows();
  Equilibration eq{Vector::Ones(n), Vector::Ones(p), Vector::Ones(m)};
  auto clamp = [](double v) { return v < 1e-4 ? 1.0 : std::min(v, 1e4); };
  for (int pass = 0; pass < passes; ++pass) {
    Vector col(n), erow(p), frow(m);
    for (Index j = 0; j < n; ++j) {
      const double a = p ? sf.A.col(j).lpNorm<Eigen::Infinity>() : 0.0;
      const double g = m ? sf.G.col(j).lpNorm<Eigen::Infinity>() : 0.0;
      col(j) = 1.0 / std::sqrt(clamp(std::max(a, g)));
    }
    for (Index i = 0; i < p; ++i) erow(i) = 1.0 / std::sqrt(clamp(sf.A.row(i).lpNorm<Eigen::Infinity>()));
    for (Index i = 0; i < sf.cones.n_linear; ++i) frow(i) = 1.0 / std::sqrt(clamp(sf.G.row(i).lpNorm<Eigen::Infinity>()));
    sf.cones.for_each_soc([&](size_t, Index off, Index q) {
      const double v = sf.G.middleRows(off, q).lpNorm<Eigen::Infinity>();
      frow.segment(off, q).setConstant(1.0 / std::sqrt(clamp(v)));
    });
    sf.A = erow.asDiagonal() * sf.A * col.asDiagonal();
    sf.G = frow.asDiagonal() * sf.G * col.asDiagonal();
    eq.d = eq.d.cwiseProduct(col);
    eq.e = eq.e.cwiseProduct(erow);
    eq.f = eq.f.cwiseProduct(frow);
  }
  sf.b = sf.b.cwiseProduct(eq.e);
  sf.h = sf.h.cwiseProduct(eq.f);
  sf.c = sf.c.cwiseProduct(eq.d);
  return eq;
}

// Sparse LDL' factorization of the quasi-definite KKT matrix
//
//   [ d I   A'    G'        ]
//   [ A    -d I   0         ]
//   [ G     0    -W^2 - d I ]
//
// with static regularization d, followed by iterative refinement against the
// unregularized system. The sparsity pattern is fixed across iterations, so
// the fill-reducing ordering is computed once. LDL' without pivoting can lose
// all accuracy once W^2 spans many orders of magnitude; when refinement does
// not reach kDenseFallbackError the current system is refactored with a
// dense partial-pivot LU of the unregularized matrix instead.
class KktSystem {
 public:
  static constexpr double kDenseFallbackError = 1e-10;

  KktSystem(const StandardForm& sf, const SolverSettings& settings) : sf_(sf), settings_(settings) {
    const Index n = sf.G.cols();
    const Index p = sf.A.rows();
    for (Index j = 0; j < n; ++j) {
      for (Index i = 0; i < p; ++i) {
        if (sf.A(i, j) != 0.0) fixed_.emplace_back(static_cast<int>(n + i), static_cast<int>(j), sf.A(i, j));
      }
      for (Index i = 0; i < sf.G.rows(); ++i) {
        if (sf.G(i, j) != 0.0) fixed_.emplace_back(static_cast<int>(n + p + i), static_cast<int>(j), sf.G(i, j));
      }
    }
    const double d = settings.static_regularization;
    for (Index i = 0; i < n; ++i) fixed_.emplace_back(static_cast<int>(i), static_cast<int>(i), d);
    for (Index i = 0; i < p; ++i) fixed_.emplace_back(static_cast<int>(n + i), static_cast<int>(n + i), -d);
    dim_ = n + p + sf.G.rows();
  }

  /// Factors the system for scaling W (identity when null).
  bool factor(const NtScaling* scaling) {
    scaling_ = scaling;
    dense_.reset();
    const Index off = sf_.G.cols() + sf_.A.rows();
    const double d = settings_.static_regularization;
    std::vector<Eigen::Triplet<double>> trips = fixed_;
    const ConeStructure& cones = sf_.cones;
    for (Index i = 0; i < cones.n_linear; ++i) {
      const double w = scaling ? scaling->linear_scale()(i) : 1.0;
      trips.emplace_back(static_cast<int>(off + i), static_cast<int>(off + i), -w * w - d);
    }
    cones.for_each_soc([&](size_t k, Index start, Index q) {
      const Matrix w2 = scaling ? Matrix(scaling->soc_blocks()[k] * scaling->soc_blocks()[k])
                                : Matrix(Matrix::Identity(q, q));
      for (Index c = 0; c < q; ++c) {
        for (Index r = c; r < q; ++r) {
          const double v = -w2(r, c) - (r == c ? d : 0.0);
          trips.emplace_back(static_cast<int>(off + start + r), static_cast<int>(off + start + c), v);
        }
      }
    });
    Eigen::SparseMatrix<double> kkt(dim_, dim_);
    kkt.setFromTriplets(trips.begin(), trips.end());
    if (!analyzed_) {
      ldlt_.analyzePattern(kkt);
      analyzed_ = true;
    }
    ldlt_.factorize(kkt);
    sparse_ok_ = ldlt_.info() == Eigen::Success;
    if (!sparse_ok_) factor_dense();
    return sparse_ok_ || dense_.has_value();
  }

  struct Solution {
    Vector x, y, z;
  };

  Solution solve(const Vector& r1, const Vector& r2, const Vector& r3) {
    const Index n = sf_.G.cols();
    const Index p = sf_.A.rows();
    const Index m = sf_.G.rows();
    Vector rhs(dim_);
    rhs << r1, r2, r3;
    const double ref = 1.0 + inf(rhs);
    Vector sol;
    if (!dense_) {
      double error = 0.0;
      sol = refine([&](const Vector& v) { return Vector(ldlt_.solve(v)); }, rhs, error);
      if (sol.allFinite() && error <= kDenseFallbackError * ref) return split(sol, n, p, m);
      factor_dense();
    }
    double error = 0.0;
    sol = refine([&](const Vector& v) { return Vector(dense_->solve(v)); }, rhs, error);
    return split(sol, n, p, m);
  }

 private:
  static double inf(const Vector& v) { return v.size() ? v.lpNorm<Eigen::Infinity>() : 0.0; }
  Vector scale_sq(const Vector& v) const { return scaling_ ? scaling_->apply(scaling_->apply(v)) : v; }

  static Solution split(const Vector& sol, Index n, Index p, Index m) {
    return {sol.head(n), sol.segment(n, p), sol.tail(m)};
  }

  // Unregularized KKT matrix times v.
  Vector multiply(const Vector& v) const {
    const Index n = sf_.G.cols();
    const Index p = sf_.A.rows();
    const Index m = sf_.G.rows();
    const Vector x = v.head(n);
    const Vector y = v.segment(n, p);
    const Vector z = v.tail(m);
    Vector out(dim_);
    out << sf_.A.transpose() * y + sf_.G.transpose() * z, sf_.A * x, sf_.G * x - scale_sq(z);
    return out;
  }

  // Iterative refinement; stops early once the residual stops shrinking and
  // returns the best iterate seen.
  template <class Solver>
  Vector refine(const Solver& apply, const Vector& rhs, double& error) const {
    Vector sol = apply(rhs);
    Vector err = rhs - multiply(sol);
    error = sol.allFinite() ? inf(err) : std::numeric_limits<double>::infinity();
    const double ref = 1.0 + inf(rhs);
    for (int it = 0; it < settings_.refinement_steps && error > 1e-14 * ref; ++it) {
      const Vector candidate = sol + apply(err);
      const Vector cand_err = rhs - multiply(candidate);
      const double e = candidate.allFinite() ? inf(cand_err) : std::numeric_limits<double>::infinity();
      if (!(e < error)) break;
      sol = candidate;
      err = cand_err;
      error = e;
    }
    return sol;
  }

  void factor_dense() {
    if (dense_) return;
    const Index n = sf_.G.cols();
    const Index p = sf_.A.rows();
    const Index m = sf_.G.rows();
    Matrix k = Matrix::Zero(dim_, dim_);
    k.block(0, n, n, p) = sf_.A.transpose();
    k.block(0, n + p, n, m) = sf_.G.transpose();
    k.block(n, 0, p, n) = sf_.A;
    k.block(n + p, 0, m, n) = sf_.G;
    const ConeStructure& cones = sf_.cones;
    for (Index i = 0; i < cones.n_linear; ++i) {
      const double w = scaling_ ? scaling_->linear_scale()(i) : 1.0;
      k(n + p + i, n + p + i) = -w * w;
    }
    cones.for_each_soc([&](size_t b, Index start, Index q) {
      k.block(n + p + start, n + p + start, q, q) =
          scaling_ ? Matrix(-scaling_->soc_blocks()[b] * scaling_->soc_blocks()[b]) : Matrix(-Matrix::Identity(q, q));
    });
    dense_.emplace(k);
  }

  const StandardForm& sf_;
  const SolverSettings& settings_;
  const NtScaling* scaling_ = nullptr;
  std::vector<Eigen::Triplet<double>> fixed_;
  Index dim_ = 0;
  bool analyzed_ = false;
  bool sparse_ok_ = false;
  Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>, Eigen::Lower, Eigen::AMDOrdering<int>> ldlt_;
  std::optional<Eigen::PartialPivLU<Matrix>> dense_;
};

inline double inf_norm(const Vector& v) { return v.size() ? v.lpNorm<Eigen::Infinity>() : 0.0; }

// Largest absolute violation of A x = b and h - G x in K at a point.
inline double point_violation(const StandardForm& sf, const Vector& x) {
  double worst = inf_norm(sf.A * x - sf.b);
  const Vector slack = sf.h - sf.G * x;
  for (Index i = 0; i < sf.cones.n_linear; ++i) worst = std::max(worst, -slack(i));
  sf.cones.for_each_soc([&](size_t, Index off, Index q) {
    worst = std::max(worst, slack.segment(off + 1, q - 1).norm() - slack(off));
  });
  return std::max(worst, 0.0);
}

}  // namespace detail

/// Solves `prog` to relative accuracy `settings.tol`. Throws
/// std::invalid_argument for malformed programs. Deterministic.
inline ConeSolution solve(const ConicProgram& prog, const SolverSettings& settings = {}) {
  if (!(settings.tol > 0.0) || settings.max_iter < 1) {
    throw std::invalid_argument("solve: tol must be positive and max_iter >= 1");
  }
  const StandardForm original = StandardForm::from_program(prog);
  StandardForm sf = original;
  const detail::Equilibration scaling_factors = detail::equilibrate(sf);
  const Vector& col_scale = scaling_factors.d;
  const ConeStructure& cones = sf.cones;
  const Index n = sf.G.cols();
  const Index p = sf.A.rows();
  const Vector e = cone_identity(cones);
  const double degree = static_cast<double>(cones.degree());

  const double b_norm = detail::inf_norm(sf.b);
  const double h_norm = detail::inf_norm(sf.h);
  const double c_norm = detail::inf_norm(sf.c);

  ConeSolution best;
  best.x = Vector::Zero(n);
  double best_merit = std::numeric_limits<double>::infinity();
  auto stop = [&](SolveStatus status, int iter) {
    if (best_merit <= settings.tol_inaccurate) {
      best.status = SolveStatus::Optimal;
      best.reduced_accuracy = true;
      best.primal_residual = detail::point_violation(original, best.x);
    } else {
      best.status = status;
      best.iterations = iter;
    }
    return best;
  };

  // Initial point from two least-squares problems with W = I.
  detail::KktSystem kkt(sf, settings);
  Vector x, y, s, z;
  double tau = 1.0, kappa = 1.0;
  {
    if (!kkt.factor(nullptr)) {
      best.status = SolveStatus::NumericalFailure;
      return best;
    }
    auto primal = kkt.solve(Vector::Zero(n), sf.b, sf.h);
    x = primal.x;
    s = -primal.z;
    const double ap = cone_shift_needed(cones, s);
    if (ap >= -1e-8) s += (1.0 + ap) * e;
    auto dual = kkt.solve(-sf.c, Vector::Zero(p), Vector::Zero(cones.dim()));
    y = dual.y;
    z = dual.z;
    const double ad = cone_shift_needed(cones, z);
    if (ad >= -1e-8) z += (1.0 + ad) * e;
  }

  for (int iter = 0; iter <= settings.max_iter; ++iter) {
    // Residuals of the embedding.
    const Vector aty_gtz = sf.A.transpose() * y + sf.G.transpose() * z;
    const Vector ax = sf.A * x;
    const Vector gx_s = sf.G * x + s;
    const double cx = sf.c.dot(x);
    const double by = sf.b.dot(y);
    const double hz = sf.h.dot(z);
    const Vector r1 = aty_gtz + tau * sf.c;
    const Vector r2 = -ax + tau * sf.b;
    const Vector r3 = -gx_s + tau * sf.h;
    const double r4 = -cx - by - hz - kappa;

    const double pres = std::max(detail::inf_norm(ax / tau - sf.b), detail::inf_norm(gx_s / tau - sf.h)) /
                        (1.0 + std::max(b_norm, h_norm));
    const double dres = detail::inf_norm(aty_gtz / tau + sf.c) / (1.0 + c_norm);
    const double gap = s.dot(z) / (tau * tau);
    const double pcost = cx / tau;
    const double dcost = -(by + hz) / tau;
    const double gap_scale = 1.0 + std::min(std::abs(pcost), std::abs(dcost));

    const double merit = std::max({pres, dres, gap / gap_scale});
    if (std::isfinite(merit) && merit < best_merit) {
      best_merit = merit;
      best.x = col_scale.cwiseProduct(x) / tau;
      best.objective = -pcost + sf.objective_constant;
      best.primal_residual = pres;
      best.dual_residual = dres;
      best.duality_gap = gap;
      best.iterations = iter;
    }

    if (pres <= settings.tol && dres <= settings.tol && gap <= settings.tol * gap_scale) {
      best.x = col_scale.cwiseProduct(x) / tau;
      best.objective = -pcost + sf.objective_constant;
      best.primal_residual = detail::point_violation(original, best.x);
      best.dual_residual = dres;
      best.duality_gap = gap;
      best.iterations = iter;
      best.status = SolveStatus::Optimal;
      return best;
    }
    // Infeasibility certificates, normalized by the certificate's own scale.
    if (tau < kappa) {
      if (by + hz < 0.0 && detail::inf_norm(aty_gtz) <= settings.tol * -(by + hz)) {
        best.status = SolveStatus::PrimalInfeasible;
        best.iterations = iter;
        return best;
      }
      if (cx < 0.0 && std::max(detail::inf_norm(ax), detail::inf_norm(gx_s)) <= settings.tol * -cx) {
        best.status = SolveStatus::DualInfeasible;
        best.iterations = iter;
        return best;
      }
    }
    if (iter == settings.max_iter) break;
    // Residuals growing by orders of magnitude past a good iterate signal
    // lost accuracy in the scaled system.
    if (best_merit <= settings.tol_inaccurate && merit > 100.0 * best_merit) {
      return stop(SolveStatus::NumericalFailure, iter);
    }

    const auto scaling = NtScaling::compute(cones, s, z);
    if (!scaling) {
      return stop(SolveStatus::NumericalFailure, iter);
    }
    if (!kkt.factor(&*scaling)) {
      return stop(SolveStatus::NumericalFailure, iter);
    }
    const Vector& lambda = scaling->lambda();
    const double mu = (s.dot(z) + tau * kappa) / (degree + 1.0);

    // Direction for the tau column.
    const auto base = kkt.solve(-sf.c, sf.b, sf.h);
    const double base_denominator_part = sf.c.dot(base.x) + sf.b.dot(base.y) + sf.h.dot(base.z);

    struct Direction {
      Vector dx, dy, dz, ds;
      double dtau = 0.0, dkappa = 0.0;
    };
    auto direction = [&](double eta, const Vector& d_s, double d_kappa) -> std::optional<Direction> {
      const Vector w_ldiv = scaling->apply(jordan_divide(cones, lambda, d_s));
      const auto sol = kkt.solve(-eta * r1, eta * r2, eta * r3 - w_ldiv);
      const double denom = kappa / tau - base_denominator_part;
      if (!(std::abs(denom) > 0.0)) return std::nullopt;
      Direction d;
      d.dtau = (-eta * r4 + d_kappa / tau + sf.c.dot(sol.x) + sf.b.dot(sol.y) + sf.h.dot(sol.z)) / denom;
      d.dx = sol.x + d.dtau * base.x;
      d.dy = sol.y + d.dtau * base.y;
      d.dz = sol.z + d.dtau * base.z;
      d.ds = w_ldiv - scaling->apply(scaling->apply(d.dz));
      d.dkappa = (d_kappa - kappa * d.dtau) / tau;
      if (!d.dx.allFinite() || !d.dz.allFinite() || !d.ds.allFinite() || !std::isfinite(d.dtau)) {
        return std::nullopt;
      }
      return d;
    };
    auto step_length = [&](const Direction& d, double cap) {
      double a = std::min(max_step(cones, s, d.ds, cap), max_step(cones, z, d.dz, cap));
      if (d.dtau < 0.0) a = std::min(a, -tau / d.dtau);
      if (d.dkappa < 0.0) a = std::min(a, -kappa / d.dkappa);
      return a;
    };

    // Predictor.
    const Vector lambda_sq = jordan_product(cones, lambda, lambda);
    const auto affine = direction(1.0, -lambda_sq, -tau * kappa);
    if (!affine) {
      return stop(SolveStatus::NumericalFailure, iter);
    }
    const double alpha_aff = step_length(*affine, 1.0);
    const double sigma = std::clamp(std::pow(1.0 - alpha_aff, 3), 1e-8, 1.0);

    // Corrector.
    const Vector corr = jordan_product(cones, scaling->apply_inverse(affine->ds), scaling->apply(affine->dz));
    const Vector d_s = -lambda_sq - corr + sigma * mu * e;
    const double d_kappa = -tau * kappa - affine->dtau * affine->dkappa + sigma * mu;
    const auto combined = direction(1.0 - sigma, d_s, d_kappa);
    if (!combined) {
      return stop(SolveStatus::NumericalFailure, iter);
    }
    const double alpha = settings.step_fraction * step_length(*combined, 1.0 / settings.step_fraction);
    const double step = std::min(alpha, 1.0);
    if (!(step > 1e-14)) {
      return stop(SolveStatus::NumericalFailure, iter);
    }
    x += step * combined->dx;
    y += step * combined->dy;
    z += step * combined->dz;
    s += step * combined->ds;
    tau += step * combined->dtau;
    kappa += step * combined->dkappa;
  }
  return stop(SolveStatus::IterationLimit, settings.max_iter);
}

}  // namespace crbf::conic
