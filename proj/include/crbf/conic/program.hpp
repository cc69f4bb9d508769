#pragma once

// A small modeling layer for cone programs over a real decision vector.
//
//   maximize    objective(x)
//   subject to  e(x) == 0                           (Equality)
//               e(x) >= 0                           (NonNegative)
//               ||(e_1(x), ..., e_p(x))|| <= e_0(x)   (SecondOrderCone)
//               ||(e_2(x), ..., e_p(x))||^2 <= 2 e_0(x) e_1(x),
//               e_0(x), e_1(x) >= 0                 (RotatedCone)
//
// where every e is an affine expression. Programs are immutable once handed
// to the solver.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <map>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace crbf::conic {

using Index = Eigen::Index;

struct Term {
  Index var;
  double coeff;
};

class AffineExpr {
 public:
  AffineExpr() = default;
  AffineExpr(double constant) : constant_(constant) {}  // NOLINT: implicit by design of the DSL

  static AffineExpr variable(Index var, double coeff = 1.0) {
    AffineExpr e;
    e.add_term(var, coeff);
    return e;
  }

  AffineExpr& add_term(Index var, double coeff) {
    if (coeff != 0.0) terms_.push_back({var, coeff});
    return *this;
  }

  AffineExpr& operator+=(const AffineExpr& other) {
    terms_.insert(terms_.end(), other.terms_.begin(), other.terms_.end());
    constant_ += other.constant_;
    return *this;
  }
  AffineExpr& operator-=(const AffineExpr& other) { return *this += other * -1.0; }
  AffineExpr& operator*=(double s) {
    for (auto& t : terms_) t.coeff *= s;
    constant_ *= s;
    return *this;
  }

  friend AffineExpr operator+(AffineExpr a, const AffineExpr& b) { return a += b; }
  friend AffineExpr operator-(AffineExpr a, const AffineExpr& b) { return a -= b; }
  friend AffineExpr operator*(AffineExpr a, double s) { return a *= s; }
  friend AffineExpr operator*(double s, AffineExpr a) { return a *= s; }
  AffineExpr operator-() const { return *this * -1.0; }

  double constant() const { return constant_; }
  const std::vector<Term>& terms() const { return terms_; }

  double evaluate(const Eigen::VectorXd& x) const {
    double v = constant_;
    for (const auto& t : terms_) v += t.coeff * x(t.var);
    return v;
  }

  /// Dense coefficient row of length n (duplicate variables accumulated).
  Eigen::RowVectorXd dense(Index n) const {
    Eigen::RowVectorXd row = Eigen::RowVectorXd::Zero(n);
    for (const auto& t : terms_) row(t.var) += t.coeff;
    return row;
  }

 private:
  std::vector<Term> terms_;
  double constant_ = 0.0;
};

enum class ConstraintKind { Equality, NonNegative, SecondOrderCone, RotatedCone };

inline const char* to_string(ConstraintKind kind) {
  switch (kind) {
    case ConstraintKind::Equality: return "eq";
    case ConstraintKind::NonNegative: return "nonneg";
    case ConstraintKind::SecondOrderCone: return "soc";
    case ConstraintKind::RotatedCone: return "rsoc";
  }
  return "?";
}

struct Constraint {
  ConstraintKind kind;
  std::vector<AffineExpr> rows;
  std::string label;
};

struct VariableBlock {
  std::string name;
  Index offset = 0;
  Index size = 0;

  Index operator[](Index i) const { return offset + i; }
  AffineExpr operator()(Index i) const { return AffineExpr::variable(offset + i); }
};

class ConicProgram {
 public:
  VariableBlock add_variables(std::string name, Index size) {
    if (size < 1) throw std::invalid_argument("ConicProgram: empty variable block " + name);
    VariableBlock block{std::move(name), n_vars_, size};
    n_vars_ += size;
    blocks_.push_back(block);
    return block;
  }

  void maximize(AffineExpr objective) { objective_ = std::move(objective); }

  void add_equality(AffineExpr e, std::string label = {}) {
    constraints_.push_back({ConstraintKind::Equality, {std::move(e)}, std::move(label)});
  }
  /// lhs <= rhs
  void add_less_equal(const AffineExpr& lhs, const AffineExpr& rhs, std::string label = {}) {
    constraints_.push_back({ConstraintKind::NonNegative, {rhs - lhs}, std::move(label)});
  }
  void add_nonnegative(AffineExpr e, std::string label = {}) {
    constraints_.push_back({ConstraintKind::NonNegative, {std::move(e)}, std::move(label)});
  }
  /// ||u|| <= t
  void add_second_order_cone(AffineExpr t, std::vector<AffineExpr> u, std::string label = {}) {
    std::vector<AffineExpr> rows;
    rows.reserve(u.size() + 1);
    rows.push_back(std::move(t));
    for (auto& e : u) rows.push_back(std::move(e));
    constraints_.push_back({ConstraintKind::SecondOrderCone, std::move(rows), std::move(label)});
  }
  /// ||u||^2 <= 2 s t with s, t >= 0
  void add_rotated_cone(AffineExpr s, AffineExpr t, std::vector<AffineExpr> u,
                        std::string label = {}) {
    std::vector<AffineExpr> rows;
    rows.reserve(u.size() + 2);
    rows.push_back(std::move(s));
    rows.push_back(std::move(t));
    for (auto& e : u) rows.push_back(std::move(e));
    constraints_.push_back({ConstraintKind::RotatedCone, std::move(rows), std::move(label)});
  }
  /// ||u||^2 <= x y with x, y >= 0, stored as a rotated cone with
  /// s = balance x, t = y / (2 balance). The set does not depend on balance;
  /// choosing it so that s and t have similar magnitude near the solution
  /// keeps the cone away from cancellation in the interior-point solver.
  void add_hyperbolic(const AffineExpr& x, const AffineExpr& y, std::vector<AffineExpr> u,
                      std::string label = {}, double balance = 1.0) {
    if (!(balance > 0.0) || !std::isfinite(balance)) {
      throw std::invalid_argument("add_hyperbolic: balance must be positive and finite");
    }
    add_rotated_cone(x * balance, y * (0.5 / balance), std::move(u), std::move(label));
  }

  /// Balance factor sqrt(y_ref / (2 x_ref)) for add_hyperbolic, with both
  /// references floored and the result clamped to [1e-6, 1e6].
  static double hyperbolic_balance(double x_ref, double y_ref) {
    const double v = std::sqrt(std::max(y_ref, 1e-12) / (2.0 * std::max(x_ref, 1e-12)));
    return std::clamp(v, 1e-6, 1e6);
  }

  Index n_variables() const { return n_vars_; }
  const std::vector<VariableBlock>& blocks() const { return blocks_; }
  const AffineExpr& objective() const { return objective_; }
  const std::vector<Constraint>& constraints() const { return constraints_; }

  const VariableBlock& block(const std::string& name) const {
    for (const auto& b : blocks_) {
      if (b.name == name) return b;
    }
    throw std::out_of_range("ConicProgram: no variable block named " + name);
  }

  std::map<ConstraintKind, Index> count_by_kind() const {
    std::map<ConstraintKind, Index> counts;
    for (const auto& c : constraints_) ++counts[c.kind];
    return counts;
  }

  /// Throws std::invalid_argument if any expression references an undeclared
  /// variable, a cone is too small, or a coefficient is not finite.
  void validate() const {
    auto check_expr = [&](const AffineExpr& e, const std::string& where) {
      if (!std::isfinite(e.constant())) {
        throw std::invalid_argument("non-finite constant in " + where);
      }
      for (const auto& t : e.terms()) {
        if (t.var < 0 || t.var >= n_vars_) {
          throw std::invalid_argument("undeclared variable " + std::to_string(t.var) +
                                      " in " + where);
        }
        if (!std::isfinite(t.coeff)) {
          throw std::invalid_argument("non-finite coefficient in " + where);
        }
      }
    };
    if (n_vars_ == 0) throw std::invalid_argument("program has no variables");
    check_expr(objective_, "objective");
    for (size_t i = 0; i < constraints_.size(); ++i) {
      const auto& c = constraints_[i];
      const std::string where = "constraint " + std::to_string(i) +
                                (c.label.empty() ? "" : " (" + c.label + ")");
      const size_t min_rows = c.kind == ConstraintKind::RotatedCone ? 3
                              : c.kind == ConstraintKind::SecondOrderCone ? 2
                                                                          : 1;
      if (c.rows.size() < min_rows) {
        throw std::invalid_argument("cone dimension too small in " + where);
      }
      if ((c.kind == ConstraintKind::Equality || c.kind == ConstraintKind::NonNegative) &&
          c.rows.size() != 1) {
        throw std::invalid_argument("linear constraint must have one row in " + where);
      }
      for (const auto& e : c.rows) check_expr(e, where);
    }
  }

  /// One line per variable block and per constraint, e.g.
  ///   var w 36 0
  ///   max 1*x3 + 0.5
  ///   soc [pu0] 1.41 | -1*x0 +2*x1 | ...
  void dump(std::ostream& os) const {
    const auto old_precision = os.precision();
    os << std::setprecision(17);
    auto write_expr = [&](const AffineExpr& e) {
      bool first = true;
      for (const auto& t : e.terms()) {
        os << (first ? "" : " ") << (t.coeff >= 0 ? "+" : "") << t.coeff << "*x" << t.var;
        first = false;
      }
      if (e.constant() != 0.0 || first) {
        os << (first ? "" : " ") << (e.constant() >= 0 ? "+" : "") << e.constant();
      }
    };
    os << "vars " << n_vars_ << "\n";
    for (const auto& b : blocks_) os << "var " << b.name << " " << b.size << " " << b.offset << "\n";
    os << "max ";
    write_expr(objective_);
    os << "\n";
    for (const auto& c : constraints_) {
      os << to_string(c.kind) << " [" << c.label << "]";
      for (const auto& e : c.rows) {
        os << " | ";
        write_expr(e);
      }
      os << "\n";
    }
    os.precision(old_precision);
  }

  std::string dump() const {
    std::ostringstream os;
    dump(os);
    return os.str();
  }

 private:
  Index n_vars_ = 0;
  std::vector<VariableBlock> blocks_;
  AffineExpr objective_;
  std::vector<Constraint> constraints_;
};

}  // namespace crbf::conic
