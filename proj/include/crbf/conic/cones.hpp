#pragma once

// Cone algebra for K = R_+^l x Q^{q_1} x ... x Q^{q_N}: membership, Jordan
// products, Nesterov-Todd scalings and step lengths to the boundary.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <vector>

namespace crbf::conic {

using Index = Eigen::Index;
using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

struct ConeStructure {
  Index n_linear = 0;
  std::vector<Index> soc_dims;

  Index dim() const {
    Index d = n_linear;
    for (Index q : soc_dims) d += q;
    return d;
  }
  /// Degree of the cone: one per orthant coordinate and one per SOC.
  Index degree() const { return n_linear + static_cast<Index>(soc_dims.size()); }

  template <class F>
  void for_each_soc(F&& f) const {
    Index offset = n_linear;
    for (size_t i = 0; i < soc_dims.size(); ++i) {
      f(i, offset, soc_dims[i]);
      offset += soc_dims[i];
    }
  }
};

/// Identity element e.
inline Vector cone_identity(const ConeStructure& cones) {
  Vector e = Vector::Zero(cones.dim());
  e.head(cones.n_linear).setOnes();
  cones.for_each_soc([&](size_t, Index off, Index) { e(off) = 1.0; });
  return e;
}

/// Smallest a with u + a e in K (negative when u is interior).
inline double cone_shift_needed(const ConeStructure& cones, const Vector& u) {
  double a = -std::numeric_limits<double>::infinity();
  for (Index i = 0; i < cones.n_linear; ++i) a = std::max(a, -u(i));
  cones.for_each_soc([&](size_t, Index off, Index q) {
    a = std::max(a, u.segment(off + 1, q - 1).norm() - u(off));
  });
  return a;
}

/// Jordan product u o v.
inline Vector jordan_product(const ConeStructure& cones, const Vector& u, const Vector& v) {
  Vector out(u.size());
  out.head(cones.n_linear) = u.head(cones.n_linear).cwiseProduct(v.head(cones.n_linear));
  cones.for_each_soc([&](size_t, Index off, Index q) {
    const auto us = u.segment(off, q);
    const auto vs = v.segment(off, q);
    out(off) = us.dot(vs);
    out.segment(off + 1, q - 1) = us(0) * vs.tail(q - 1) + vs(0) * us.tail(q - 1);
  });
  return out;
}

/// Solves lambda o x = v for x (lambda interior).
inline Vector jordan_divide(const ConeStructure& cones, const Vector& lambda, const Vector& v) {
  Vector out(v.size());
  out.head(cones.n_linear) = v.head(cones.n_linear).cwiseQuotient(lambda.head(cones.n_linear));
  cones.for_each_soc([&](size_t, Index off, Index q) {
    const auto l = lambda.segment(off, q);
    const auto vs = v.segment(off, q);
    const double l0 = l(0);
    const auto l1 = l.tail(q - 1);
    const double det = l0 * l0 - l1.squaredNorm();
    const double x0 = (l0 * vs(0) - l1.dot(vs.tail(q - 1))) / det;
    out(off) = x0;
    out.segment(off + 1, q - 1) = (vs.tail(q - 1) - x0 * l1) / l0;
  });
  return out;
}

/// Largest a >= 0 (capped at `cap`) with u + a du in K; u must be interior.
inline double max_step(const ConeStructure& cones, const Vector& u, const Vector& du,
                       double cap) {
  double step = cap;
  for (Index i = 0; i < cones.n_linear; ++i) {
    if (du(i) < 0.0) step = std::min(step, -u(i) / du(i));
  }
  cones.for_each_soc([&](size_t, Index off, Index q) {
    const double u0 = u(off);
    const double d0 = du(off);
    const auto u1 = u.segment(off + 1, q - 1);
    const auto d1 = du.segment(off + 1, q - 1);
    const double u1n = u1.norm();
    // f(a) = qa a^2 + 2 qb a + qc, qc > 0 inside the cone.
    const double qc = (u0 - u1n) * (u0 + u1n);
    const double qa = d0 * d0 - d1.squaredNorm();
    const double qb = u0 * d0 - u1.dot(d1);
    if (qc <= 0.0) {
      step = 0.0;
      return;
    }
    double root = std::numeric_limits<double>::infinity();
    const double scale = std::max({std::abs(qa), std::abs(qb), 1e-300});
    if (std::abs(qa) <= 1e-14 * scale) {
      if (qb < 0.0) root = -qc / (2.0 * qb);
    } else {
      const double disc = qb * qb - qa * qc;
      if (disc >= 0.0) {
        const double sq = std::sqrt(disc);
        const double qq = -(qb + std::copysign(sq, qb));
        const double r1 = qq / qa;
        const double r2 = qq != 0.0 ? qc / qq : std::numeric_limits<double>::infinity();
        for (double r : {r1, r2}) {
          if (r > 0.0) root = std::min(root, r);
        }
      }
    }
    step = std::min(step, root);
  });
  return std::max(step, 0.0);
}

inline bool is_interior(const ConeStructure& cones, const Vector& u) {
  for (Index i = 0; i < cones.n_linear; ++i) {
    if (!(u(i) > 0.0)) return false;
  }
  bool ok = true;
  cones.for_each_soc([&](size_t, Index off, Index q) {
    if (!(u(off) > u.segment(off + 1, q - 1).norm())) ok = false;
  });
  return ok;
}

/// Nesterov-Todd scaling W with W z = W^{-1} s = lambda. W is symmetric and
/// block diagonal; SOC blocks are stored densely.
class NtScaling {
 public:
  /// Returns std::nullopt if s or z is not strictly interior.
  static std::optional<NtScaling> compute(const ConeStructure& cones, const Vector& s,
                                          const Vector& z) {
    if (!is_interior(cones, s) || !is_interior(cones, z)) return std::nullopt;
    NtScaling w;
    w.cones_ = cones;
    const Index l = cones.n_linear;
    w.linear_ = (s.head(l).array() / z.head(l).array()).sqrt();
    bool ok = true;
    cones.for_each_soc([&](size_t, Index off, Index q) {
      const auto ss = s.segment(off, q);
      const auto zs = z.segment(off, q);
      const double s1n = ss.tail(q - 1).norm();
      const double z1n = zs.tail(q - 1).norm();
      const double sres = (ss(0) - s1n) * (ss(0) + s1n);
      const double zres = (zs(0) - z1n) * (zs(0) + z1n);
      if (!(sres > 0.0) || !(zres > 0.0)) {
        ok = false;
        return;
      }
      const Vector sb = ss / std::sqrt(sres);
      const Vector zb = zs / std::sqrt(zres);
      const double gamma = std::sqrt(0.5 * (1.0 + sb.dot(zb)));
      Vector wb(q);
      wb(0) = (sb(0) + zb(0)) / (2.0 * gamma);
      wb.tail(q - 1) = (sb.tail(q - 1) - zb.tail(q - 1)) / (2.0 * gamma);
      const double eta = std::pow(sres / zres, 0.25);

      Matrix core = Matrix::Identity(q, q);
      core(0, 0) = wb(0);
      core.block(0, 1, 1, q - 1) = wb.tail(q - 1).transpose();
      core.block(1, 0, q - 1, 1) = wb.tail(q - 1);
      core.block(1, 1, q - 1, q - 1) +=
          wb.tail(q - 1) * wb.tail(q - 1).transpose() / (1.0 + wb(0));
      Matrix core_inv = core;
      core_inv.block(0, 1, 1, q - 1) *= -1.0;
      core_inv.block(1, 0, q - 1, 1) *= -1.0;
      w.soc_.push_back(eta * core);
      w.soc_inv_.push_back(core_inv / eta);
    });
    if (!ok) return std::nullopt;
    w.lambda_ = w.apply(z);
    return w;
  }

  const Vector& lambda() const { return lambda_; }
  /// Diagonal of W on the orthant part.
  const Vector& linear_scale() const { return linear_; }
  /// Dense W block of each second-order cone.
  const std::vector<Matrix>& soc_blocks() const { return soc_; }

  Vector apply(const Vector& v) const { return apply_blocks(v, linear_, soc_, false); }
  Vector apply_inverse(const Vector& v) const { return apply_blocks(v, linear_, soc_inv_, true); }

  /// W^{-1} M, row blocks scaled cone by cone.
  Matrix apply_inverse_rows(const Matrix& m) const {
    Matrix out(m.rows(), m.cols());
    const Index l = cones_.n_linear;
    for (Index i = 0; i < l; ++i) out.row(i) = m.row(i) / linear_(i);
    cones_.for_each_soc([&](size_t i, Index off, Index q) {
      out.middleRows(off, q).noalias() = soc_inv_[i] * m.middleRows(off, q);
    });
    return out;
  }

 private:
  Vector apply_blocks(const Vector& v, const Vector& lin, const std::vector<Matrix>& blocks,
                      bool inverse) const {
    Vector out(v.size());
    const Index l = cones_.n_linear;
    if (inverse) {
      out.head(l) = v.head(l).cwiseQuotient(lin);
    } else {
      out.head(l) = v.head(l).cwiseProduct(lin);
    }
    cones_.for_each_soc([&](size_t i, Index off, Index q) {
      out.segment(off, q).noalias() = blocks[i] * v.segment(off, q);
    });
    return out;
  }

  ConeStructure cones_;
  Vector linear_;
  std::vector<Matrix> soc_;
  std::vector<Matrix> soc_inv_;
  Vector lambda_;
};

}  // namespace crbf::conic
