#pragma once

// Recomputes constraint violations of a candidate point directly from the
// modeling-layer constraints. Shares no code with the solver's standard
// form; rotated cones are checked in their hyperbolic form.

#include "crbf/conic/program.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

namespace crbf::conic {

struct CertificateReport {
  double max_violation = 0.0;
  Index worst_constraint = -1;
  std::vector<double> violations;  // one per constraint, >= 0
  double objective = 0.0;
};

inline double constraint_violation(const Constraint& con, const Eigen::VectorXd& x) {
  std::vector<double> v;
  v.reserve(con.rows.size());
  for (const auto& e : con.rows) v.push_back(e.evaluate(x));
  auto tail_norm = [&](size_t from) {
    double sq = 0.0;
    for (size_t i = from; i < v.size(); ++i) sq += v[i] * v[i];
    return std::sqrt(sq);
  };
  switch (con.kind) {
    case ConstraintKind::Equality:
      return std::abs(v[0]);
    case ConstraintKind::NonNegative:
      return std::max(0.0, -v[0]);
    case ConstraintKind::SecondOrderCone:
      return std::max(0.0, tail_norm(1) - v[0]);
    case ConstraintKind::RotatedCone: {
      const double s = v[0];
      const double t = v[1];
      const double hyper = tail_norm(2) - std::sqrt(2.0 * std::max(s, 0.0) * std::max(t, 0.0));
      return std::max({0.0, -s, -t, hyper});
    }
  }
  return 0.0;
}

inline CertificateReport validate_certificate(const ConicProgram& prog, const Eigen::VectorXd& x) {
  CertificateReport report;
  report.objective = prog.objective().evaluate(x);
  const auto& cons = prog.constraints();
  report.violations.reserve(cons.size());
  for (size_t i = 0; i < cons.size(); ++i) {
    const double v = constraint_violation(cons[i], x);
    report.violations.push_back(v);
    if (v > report.max_violation) {
      report.max_violation = v;
      report.worst_constraint = static_cast<Index>(i);
    }
  }
  return report;
}

}  // namespace crbf::conic
