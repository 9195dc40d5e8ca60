#pragma once

// Independent reference computations used only by tests.

#include <Eigen/Dense>

#include <cmath>
#include <limits>
#include <optional>
#include <vector>

#include "artcal/qp.hpp"
#include "artcal/simplex.hpp"

namespace oracle {

struct VertexResult {
  artcal::LpStatus status = artcal::LpStatus::infeasible;
  double value = 0.0;
  Eigen::VectorXd x;
};

// Exhaustive vertex enumeration. Infinite bounds are replaced by a box of
// +-box and the enumeration repeated with a doubled box: a finite optimum
// does not move, an unbounded one grows with the box.
inline VertexResult enumerate_boxed(const artcal::LinearProgram<double>& lp, double box) {
  const Eigen::Index n = lp.num_variables();
  struct Row {
    Eigen::VectorXd a;
    double b;
    bool equality;
  };
  std::vector<Row> rows;
  for (Eigen::Index i = 0; i < lp.eq_rhs.size(); ++i) rows.push_back({lp.eq_matrix.row(i).transpose(), lp.eq_rhs(i), true});
  for (Eigen::Index i = 0; i < lp.ineq_rhs.size(); ++i) rows.push_back({lp.ineq_matrix.row(i).transpose(), lp.ineq_rhs(i), false});
  for (Eigen::Index j = 0; j < n; ++j) {
    Eigen::VectorXd e = Eigen::VectorXd::Zero(n);
    e(j) = 1.0;
    rows.push_back({-e, std::isfinite(lp.lower(j)) ? -lp.lower(j) : box, false});
    rows.push_back({e, std::isfinite(lp.upper(j)) ? lp.upper(j) : box, false});
  }
  const double sign = lp.sense == artcal::Sense::maximize ? -1.0 : 1.0;
  const auto feasible = [&](const Eigen::VectorXd& x) {
    for (const auto& r : rows) {
      const double lhs = r.a.dot(x);
      const double tol = 1e-9 * (1.0 + std::abs(r.b));
      if (r.equality ? std::abs(lhs - r.b) > tol : lhs > r.b + tol) return false;
    }
    return true;
  };

  // Any n independent active rows define a candidate vertex; feasibility
  // then enforces every equality, so redundant equalities are harmless.
  VertexResult best;
  double best_obj = std::numeric_limits<double>::infinity();
  std::vector<int> pick;
  auto visit = [&](auto&& self, int start) -> void {
    if (static_cast<Eigen::Index>(pick.size()) == n) {
      Eigen::MatrixXd a(n, n);
      Eigen::VectorXd b(n);
      for (Eigen::Index k = 0; k < n; ++k) {
        const auto& r = rows[static_cast<std::size_t>(pick[static_cast<std::size_t>(k)])];
        a.row(k) = r.a.transpose();
        b(k) = r.b;
      }
      Eigen::FullPivLU<Eigen::MatrixXd> lu(a);
      if (lu.rank() < n) return;
      const Eigen::VectorXd x = lu.solve(b);
      if (!feasible(x)) return;
      const double obj = sign * lp.objective.dot(x);
      if (obj < best_obj) {
        best_obj = obj;
        best.x = x;
      }
      return;
    }
    for (int i = start; i < static_cast<int>(rows.size()); ++i) {
      pick.push_back(i);
      self(self, i + 1);
      pick.pop_back();
    }
  };
  visit(visit, 0);
  if (std::isfinite(best_obj)) {
    best.status = artcal::LpStatus::optimal;
    best.value = lp.objective.dot(best.x);
  }
  return best;
}

inline VertexResult enumerate_vertices(const artcal::LinearProgram<double>& lp, double box = 1e6) {
  auto small = enumerate_boxed(lp, box);
  if (small.status != artcal::LpStatus::optimal) return small;
  const auto large = enumerate_boxed(lp, 2.0 * box);
  if (std::abs(large.value - small.value) > 1e-6 * (1.0 + std::abs(small.value)))
    small.status = artcal::LpStatus::unbounded;
  return small;
}

// Equality-constrained QP by one dense KKT solve:
//   [H A'; A 0] [x; -mu] = [-c; b]
// Returns nullopt when the KKT matrix is singular.
inline std::optional<Eigen::VectorXd> kkt_solve(const Eigen::MatrixXd& h, const Eigen::VectorXd& c,
                                                const Eigen::MatrixXd& a, const Eigen::VectorXd& b) {
  const Eigen::Index n = h.rows(), m = a.rows();
  Eigen::MatrixXd k = Eigen::MatrixXd::Zero(n + m, n + m);
  k.topLeftCorner(n, n) = h;
  k.topRightCorner(n, m) = a.transpose();
  k.bottomLeftCorner(m, n) = a;
  Eigen::VectorXd rhs(n + m);
  rhs << -c, b;
  Eigen::FullPivLU<Eigen::MatrixXd> lu(k);
  if (lu.rank() < n + m) return std::nullopt;
  return Eigen::VectorXd(lu.solve(rhs).head(n));
}

// Same KKT system solved in the least-squares sense by complete orthogonal
// decomposition, so dependent constraint rows are tolerated. The x block is
// unique whenever H is positive definite on null(A).
inline Eigen::VectorXd kkt_solve_lsq(const Eigen::MatrixXd& h, const Eigen::VectorXd& c,
                                     const Eigen::MatrixXd& a, const Eigen::VectorXd& b) {
  const Eigen::Index n = h.rows(), m = a.rows();
  Eigen::MatrixXd k = Eigen::MatrixXd::Zero(n + m, n + m);
  k.topLeftCorner(n, n) = h;
  k.topRightCorner(n, m) = a.transpose();
  k.bottomLeftCorner(m, n) = a;
  Eigen::VectorXd rhs(n + m);
  rhs << -c, b;
  return k.completeOrthogonalDecomposition().solve(rhs).head(n);
}

// Bound-constrained convex QP by enumerating every free/lower/upper pattern
// and keeping the best primal-feasible KKT stationary point. Exponential;
// meant for n <= 7. H must be positive definite on each face.
inline std::optional<double> brute_force_qp(const artcal::QuadraticProgram<double>& qp) {
  const Eigen::Index n = qp.num_variables();
  std::optional<double> best;
  std::vector<int> pattern(static_cast<std::size_t>(n), 0);
  auto visit = [&](auto&& self, Eigen::Index j) -> void {
    if (j == n) {
      std::vector<Eigen::Index> free;
      Eigen::VectorXd x = Eigen::VectorXd::Zero(n);
      for (Eigen::Index i = 0; i < n; ++i) {
        const int s = pattern[static_cast<std::size_t>(i)];
        if (s == 0) free.push_back(i);
        else x(i) = s < 0 ? qp.lower(i) : qp.upper(i);
      }
      const auto nf = static_cast<Eigen::Index>(free.size());
      Eigen::MatrixXd hf(nf, nf), af(qp.eq_rhs.size(), nf);
      Eigen::VectorXd cf(nf);
      const Eigen::VectorXd fixed_grad = qp.hessian * x + qp.linear;
      for (Eigen::Index r = 0; r < nf; ++r) {
        for (Eigen::Index c = 0; c < nf; ++c) hf(r, c) = qp.hessian(free[static_cast<std::size_t>(r)], free[static_cast<std::size_t>(c)]);
        cf(r) = fixed_grad(free[static_cast<std::size_t>(r)]);
        af.col(r) = qp.eq_matrix.col(free[static_cast<std::size_t>(r)]);
      }
      const Eigen::VectorXd bf = qp.eq_rhs - qp.eq_matrix * x;
      std::optional<Eigen::VectorXd> xf;
      if (nf == 0) {
        if (bf.size() && bf.cwiseAbs().maxCoeff() > 1e-9) return;
        xf = Eigen::VectorXd(0);
      } else {
        xf = kkt_solve(hf, cf, af, bf);
        if (!xf) return;
      }
      for (Eigen::Index r = 0; r < nf; ++r) x(free[static_cast<std::size_t>(r)]) = (*xf)(r);
      for (Eigen::Index i = 0; i < n; ++i)
        if (x(i) < qp.lower(i) - 1e-9 || x(i) > qp.upper(i) + 1e-9) return;
      if (qp.eq_rhs.size() && (qp.eq_matrix * x - qp.eq_rhs).cwiseAbs().maxCoeff() > 1e-7) return;
      const double f = qp.objective(x);
      if (!best || f < *best) best = f;
      return;
    }
    for (int s : {0, -1, 1}) {
      if (s == -1 && !std::isfinite(qp.lower(j))) continue;
      if (s == 1 && !std::isfinite(qp.upper(j))) continue;
      pattern[static_cast<std::size_t>(j)] = s;
      self(self, j + 1);
    }
    pattern[static_cast<std::size_t>(j)] = 0;
  };
  visit(visit, 0);
  return best;
}

// Link e is fixed by the others iff its coordinate vanishes in every kernel
// vector of the incidence columns of the unknown links.
inline std::vector<bool> identifiable_by_nullspace(const Eigen::MatrixXd& incidence,
                                                   const std::vector<bool>& unknown) {
  std::vector<Eigen::Index> cols;
  for (std::size_t l = 0; l < unknown.size(); ++l)
    if (unknown[l]) cols.push_back(static_cast<Eigen::Index>(l));
  std::vector<bool> out(unknown.size(), true);
  if (cols.empty()) return out;
  Eigen::MatrixXd au(incidence.rows(), static_cast<Eigen::Index>(cols.size()));
  for (std::size_t k = 0; k < cols.size(); ++k) au.col(static_cast<Eigen::Index>(k)) = incidence.col(cols[k]);
  Eigen::FullPivLU<Eigen::MatrixXd> lu(au);
  if (lu.rank() == au.cols()) return out;
  const Eigen::MatrixXd kernel = lu.kernel();
  for (std::size_t k = 0; k < cols.size(); ++k)
    out[static_cast<std::size_t>(cols[k])] = kernel.row(static_cast<Eigen::Index>(k)).cwiseAbs().maxCoeff() < 1e-9;
  return out;
}

}  // namespace oracle
