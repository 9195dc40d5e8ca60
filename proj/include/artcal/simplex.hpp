#pragma once

// Dense bounded-variable primal simplex with Bland's rule.
//
//   min / max  c'x
//   s.t.       A_eq x  = b_eq
//              A_in x <= b_in
//              lo <= x <= hi        (bounds may be infinite)
//
// The problem is mapped to  min c~'y, A~ y = b~ (b~ >= 0), 0 <= y <= u  and
// solved in two phases with one artificial per row. Problems here are small
// (tens to a few hundred columns), so a full tableau is kept and refactored
// from the basis matrix at phase boundaries.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

#include "artcal/error.hpp"

namespace artcal {

enum class Sense { minimize, maximize };
enum class LpStatus { optimal, unbounded, infeasible };

inline const char* to_string(LpStatus s) {
  switch (s) {
    case LpStatus::optimal: return "optimal";
    case LpStatus::unbounded: return "unbounded";
    case LpStatus::infeasible: return "infeasible";
  }
  return "?";
}

template <typename Scalar = double>
struct LinearProgram {
  using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
  using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

  Vector objective;
  Matrix eq_matrix;
  Vector eq_rhs;
  Matrix ineq_matrix;
  Vector ineq_rhs;
  Vector lower;
  Vector upper;
  Sense sense = Sense::minimize;

  // n nonnegative variables, no constraints yet.
  static LinearProgram nonnegative(Eigen::Index n, Sense sense = Sense::minimize) {
    LinearProgram lp;
    lp.objective = Vector::Zero(n);
    lp.eq_matrix = Matrix::Zero(0, n);
    lp.eq_rhs = Vector::Zero(0);
    lp.ineq_matrix = Matrix::Zero(0, n);
    lp.ineq_rhs = Vector::Zero(0);
    lp.lower = Vector::Zero(n);
    lp.upper = Vector::Constant(n, std::numeric_limits<Scalar>::infinity());
    lp.sense = sense;
    return lp;
  }

  Eigen::Index num_variables() const { return objective.size(); }

  void add_inequality(const Vector& row, Scalar rhs) {
    const auto m = ineq_matrix.rows();
    ineq_matrix.conservativeResize(m + 1, num_variables());
    ineq_rhs.conservativeResize(m + 1);
    ineq_matrix.row(m) = row.transpose();
    ineq_rhs(m) = rhs;
  }

  void add_equality(const Vector& row, Scalar rhs) {
    const auto m = eq_matrix.rows();
    eq_matrix.conservativeResize(m + 1, num_variables());
    eq_rhs.conservativeResize(m + 1);
    eq_matrix.row(m) = row.transpose();
    eq_rhs(m) = rhs;
  }
};

struct LpOptions {
  double tolerance = 1e-9;
  int max_iterations = 50000;
};

template <typename Scalar = double>
struct LpResult {
  using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

  LpStatus status = LpStatus::infeasible;
  Scalar value = Scalar(0);  // +-inf when unbounded
  Vector x;                  // optimal point, or the vertex a ray starts from
  Vector ray;                // unbounded: feasible improving direction
  Vector reduced_costs;      // per original variable, in the problem's sense
  Vector eq_duals;
  Vector ineq_duals;
  Vector farkas;             // infeasible: phase-1 row multipliers (eq rows, then ineq rows)
  int iterations = 0;
};

namespace detail {

// x_j = offset_j + sum_k sign_k * y_k over the standard-form columns k of j.
struct ColumnMap {
  Eigen::Index first = 0;
  Eigen::Index count = 1;  // 2 for free variables
  double sign = 1.0;       // -1 when reflected about an upper bound
};

template <typename Scalar>
class BoundedSimplex {
 public:
  using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
  using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

  BoundedSimplex(Matrix a, Vector b, Vector c, Vector upper, const LpOptions& opt)
      : a_(std::move(a)), b_(std::move(b)), c_(std::move(c)), u_(std::move(upper)), opt_(opt) {
    m_ = a_.rows();
    n_ = a_.cols();
    scale_ = std::max<Scalar>(Scalar(1), a_.size() ? a_.cwiseAbs().maxCoeff() : Scalar(1));
    bscale_ = std::max<Scalar>(Scalar(1), b_.size() ? b_.cwiseAbs().maxCoeff() : Scalar(1));
  }

  LpStatus run() {
    // Columns: n structural, then m artificials.
    const Eigen::Index total = n_ + m_;
    full_.resize(m_, total);
    full_ << a_, Matrix::Identity(m_, m_);
    ub_.resize(total);
    ub_ << u_, Vector::Constant(m_, std::numeric_limits<Scalar>::infinity());
    at_upper_.assign(static_cast<std::size_t>(total), false);
    basis_.resize(static_cast<std::size_t>(m_));
    for (Eigen::Index i = 0; i < m_; ++i) basis_[static_cast<std::size_t>(i)] = n_ + i;
    rows_.resize(static_cast<std::size_t>(m_));
    for (Eigen::Index i = 0; i < m_; ++i) rows_[static_cast<std::size_t>(i)] = i;
    tableau_ = full_;
    beta_ = b_;

    // Phase 1.
    Vector cost1 = Vector::Zero(total);
    cost1.tail(m_).setOnes();
    allowed_ = total;
    const LpStatus p1 = iterate(cost1);
    if (p1 == LpStatus::unbounded) throw_breakdown("phase 1 reported unbounded");
    refactor();
    Scalar infeasibility = 0;
    for (Eigen::Index r = 0; r < rows(); ++r)
      if (basis_[static_cast<std::size_t>(r)] >= n_) infeasibility += std::abs(beta_(r));
    if (infeasibility > feas_tol()) {
      farkas_ = Vector::Zero(m_);
      // y' = c_B' B^-1; the artificial block of the tableau holds B^-1.
      for (Eigen::Index r = 0; r < rows(); ++r) {
        if (basis_[static_cast<std::size_t>(r)] >= n_)
          farkas_ += tableau_.block(r, n_, 1, m_).transpose();
      }
      return LpStatus::infeasible;
    }
    drive_out_artificials();

    // Phase 2: artificials may no longer enter.
    Vector cost2 = Vector::Zero(total);
    cost2.head(n_) = c_;
    allowed_ = n_;
    const LpStatus p2 = iterate(cost2);
    refactor();
    check_residual();
    if (p2 == LpStatus::optimal) compute_duals(cost2);
    return p2;
  }

  Vector primal() const {
    Vector y(n_);
    for (Eigen::Index j = 0; j < n_; ++j) y(j) = at_upper_[static_cast<std::size_t>(j)] ? ub_(j) : Scalar(0);
    for (Eigen::Index r = 0; r < rows(); ++r) {
      const auto j = basis_[static_cast<std::size_t>(r)];
      if (j < n_) y(j) = beta_(r);
    }
    return y;
  }

  const Vector& ray() const { return ray_; }
  const Vector& farkas() const { return farkas_; }
  const Vector& duals() const { return duals_; }
  const Vector& reduced_costs() const { return reduced_; }
  int iterations() const { return iterations_; }

 private:
  Eigen::Index rows() const { return static_cast<Eigen::Index>(basis_.size()); }
  Scalar tol() const { return Scalar(opt_.tolerance); }
  Scalar feas_tol() const { return Scalar(opt_.tolerance) * bscale_ * Scalar(std::max<Eigen::Index>(1, m_)); }

  [[noreturn]] void throw_breakdown(const std::string& what) const {
    std::ostringstream os;
    os << "simplex numeric breakdown: " << what << " (rows " << m_ << ", cols " << n_
       << ", max |A| " << scale_ << ", iterations " << iterations_ << ")";
    throw ComputationError(os.str());
  }

  Vector reduced(const Vector& cost) const {
    Vector cb(rows());
    for (Eigen::Index r = 0; r < rows(); ++r) cb(r) = cost(basis_[static_cast<std::size_t>(r)]);
    Vector d = cost - (cb.transpose() * tableau_).transpose();
    return d;
  }

  bool is_basic(Eigen::Index j) const {
    return std::find(basis_.begin(), basis_.end(), j) != basis_.end();
  }

  LpStatus iterate(const Vector& cost) {
    while (true) {
      if (++iterations_ > opt_.max_iterations) throw_breakdown("iteration limit reached");
      const Vector d = reduced(cost);
      const Scalar dtol = tol() * std::max<Scalar>(Scalar(1), cost.cwiseAbs().maxCoeff());

      // Bland: lowest-index improving column.
      Eigen::Index enter = -1;
      Scalar dir = 0;
      for (Eigen::Index j = 0; j < allowed_; ++j) {
        if (is_basic(j) || ub_(j) <= Scalar(0)) continue;
        const bool up = at_upper_[static_cast<std::size_t>(j)];
        if (!up && d(j) < -dtol) { enter = j; dir = Scalar(1); break; }
        if (up && d(j) > dtol) { enter = j; dir = Scalar(-1); break; }
      }
      if (enter < 0) return LpStatus::optimal;

      const auto col = tableau_.col(enter);
      const Scalar ptol = tol() * scale_;
      Scalar theta = ub_(enter);  // bound flip distance
      Eigen::Index leave = -1;
      bool leave_to_upper = false;
      for (Eigen::Index r = 0; r < rows(); ++r) {
        const Scalar alpha = dir * col(r);
        const auto bj = basis_[static_cast<std::size_t>(r)];
        Scalar step;
        bool to_upper;
        if (alpha > ptol) {
          step = std::max<Scalar>(beta_(r), Scalar(0)) / alpha;
          to_upper = false;
        } else if (alpha < -ptol && std::isfinite(static_cast<double>(ub_(bj)))) {
          step = std::max<Scalar>(ub_(bj) - beta_(r), Scalar(0)) / -alpha;
          to_upper = true;
        } else {
          continue;
        }
        if (step < theta ||
            (step == theta && leave >= 0 && bj < basis_[static_cast<std::size_t>(leave)])) {
          theta = step;
          leave = r;
          leave_to_upper = to_upper;
        }
      }

      if (!std::isfinite(static_cast<double>(theta))) {
        ray_ = Vector::Zero(n_ + m_);
        ray_(enter) = dir;
        for (Eigen::Index r = 0; r < rows(); ++r) ray_(basis_[static_cast<std::size_t>(r)]) = -dir * col(r);
        return LpStatus::unbounded;
      }

      beta_ -= (dir * theta) * col;
      if (leave < 0) {
        // Entering column reaches its own opposite bound.
        at_upper_[static_cast<std::size_t>(enter)] = !at_upper_[static_cast<std::size_t>(enter)];
        continue;
      }
      const Scalar entering_value =
          (at_upper_[static_cast<std::size_t>(enter)] ? ub_(enter) : Scalar(0)) + dir * theta;
      const auto old = basis_[static_cast<std::size_t>(leave)];
      at_upper_[static_cast<std::size_t>(old)] = leave_to_upper;
      at_upper_[static_cast<std::size_t>(enter)] = false;
      pivot(leave, enter);
      beta_(leave) = entering_value;
      if (iterations_ % 64 == 0) refactor();
    }
  }

  void pivot(Eigen::Index r, Eigen::Index j) {
    const Scalar p = tableau_(r, j);
    if (std::abs(p) < std::numeric_limits<Scalar>::epsilon() * scale_) throw_breakdown("vanishing pivot");
    tableau_.row(r) /= p;
    for (Eigen::Index i = 0; i < rows(); ++i) {
      if (i == r) continue;
      const Scalar f = tableau_(i, j);
      if (f != Scalar(0)) tableau_.row(i) -= f * tableau_.row(r);
    }
    basis_[static_cast<std::size_t>(r)] = j;
  }

  // Rebuild tableau and basic values from the basis matrix.
  void refactor() {
    if (rows() == 0) return;
    Matrix a(rows(), full_.cols());
    Vector b(rows());
    for (Eigen::Index r = 0; r < rows(); ++r) {
      a.row(r) = full_.row(rows_[static_cast<std::size_t>(r)]);
      b(r) = b_(rows_[static_cast<std::size_t>(r)]);
    }
    for (Eigen::Index j = 0; j < a.cols(); ++j)
      if (at_upper_[static_cast<std::size_t>(j)] && !is_basic(j)) b -= ub_(j) * a.col(j);
    Matrix basis(rows(), rows());
    for (Eigen::Index r = 0; r < rows(); ++r) basis.col(r) = a.col(basis_[static_cast<std::size_t>(r)]);
    Eigen::FullPivLU<Matrix> lu(basis);
    if (!lu.isInvertible()) throw_breakdown("singular basis");
    tableau_ = lu.solve(a);
    beta_ = lu.solve(b);
  }

  void check_residual() const {
    const Vector y = primal();
    Vector lhs = Vector::Zero(m_);
    lhs = a_ * y;
    // Artificials are zero after phase 1 on surviving rows.
    Scalar worst = 0;
    for (Eigen::Index r = 0; r < rows(); ++r) {
      const auto row = rows_[static_cast<std::size_t>(r)];
      worst = std::max(worst, std::abs(lhs(row) - b_(row)));
    }
    if (worst > Scalar(1e3) * feas_tol()) {
      std::ostringstream os;
      os << "primal residual " << worst;
      throw_breakdown(os.str());
    }
  }

  void drive_out_artificials() {
    for (Eigen::Index r = 0; r < rows();) {
      if (basis_[static_cast<std::size_t>(r)] < n_) { ++r; continue; }
      Eigen::Index best = -1;
      Scalar best_abs = tol() * scale_;
      for (Eigen::Index j = 0; j < n_; ++j) {
        if (is_basic(j)) continue;
        if (std::abs(tableau_(r, j)) > best_abs) { best_abs = std::abs(tableau_(r, j)); best = j; }
      }
      if (best >= 0) {
        const Scalar value = at_upper_[static_cast<std::size_t>(best)] ? ub_(best) : Scalar(0);
        at_upper_[static_cast<std::size_t>(basis_[static_cast<std::size_t>(r)])] = false;
        at_upper_[static_cast<std::size_t>(best)] = false;
        pivot(r, best);
        beta_(r) = value;
        ++r;
        continue;
      }
      // Redundant row: drop it.
      const auto last = rows() - 1;
      if (r != last) {
        tableau_.row(r) = tableau_.row(last);
        beta_(r) = beta_(last);
        basis_[static_cast<std::size_t>(r)] = basis_[static_cast<std::size_t>(last)];
        rows_[static_cast<std::size_t>(r)] = rows_[static_cast<std::size_t>(last)];
      }
      basis_.pop_back();
      rows_.pop_back();
      tableau_.conservativeResize(last, Eigen::NoChange);
      beta_.conservativeResize(last);
    }
    refactor();
  }

  void compute_duals(const Vector& cost) {
    reduced_ = reduced(cost).head(n_);
    duals_ = Vector::Zero(m_);
    if (rows() == 0) return;
    Matrix basis(rows(), rows());
    Vector cb(rows());
    for (Eigen::Index r = 0; r < rows(); ++r) {
      const auto j = basis_[static_cast<std::size_t>(r)];
      for (Eigen::Index i = 0; i < rows(); ++i) basis(i, r) = full_(rows_[static_cast<std::size_t>(i)], j);
      cb(r) = cost(j);
    }
    const Vector y = basis.transpose().fullPivLu().solve(cb);
    for (Eigen::Index i = 0; i < rows(); ++i) duals_(rows_[static_cast<std::size_t>(i)]) = y(i);
  }

  Matrix a_;
  Vector b_, c_, u_;
  LpOptions opt_;
  Eigen::Index m_ = 0, n_ = 0;
  Scalar scale_ = 1, bscale_ = 1;

  Matrix full_;
  Matrix tableau_;
  Vector beta_;
  Vector ub_;
  std::vector<bool> at_upper_;
  std::vector<Eigen::Index> basis_;
  std::vector<Eigen::Index> rows_;  // original row of each tableau row
  Eigen::Index allowed_ = 0;
  int iterations_ = 0;

  Vector ray_, farkas_, duals_, reduced_;
};

}  // namespace detail

template <typename Scalar>
LpResult<Scalar> solve_lp(const LinearProgram<Scalar>& lp, const LpOptions& options = {}) {
  using Vector = typename LinearProgram<Scalar>::Vector;
  using Matrix = typename LinearProgram<Scalar>::Matrix;
  const Eigen::Index n = lp.num_variables();
  const Scalar inf = std::numeric_limits<Scalar>::infinity();

  const Matrix& aeq = lp.eq_matrix.size() ? lp.eq_matrix : Matrix(Matrix::Zero(0, n));
  const Matrix& ain = lp.ineq_matrix.size() ? lp.ineq_matrix : Matrix(Matrix::Zero(0, n));
  const Eigen::Index meq = lp.eq_rhs.size();
  const Eigen::Index min = lp.ineq_rhs.size();
  if (aeq.rows() != meq || ain.rows() != min || (meq && aeq.cols() != n) || (min && ain.cols() != n) ||
      lp.lower.size() != n || lp.upper.size() != n)
    throw InputError("linear program dimensions are inconsistent");
  for (Eigen::Index j = 0; j < n; ++j)
    if (lp.lower(j) > lp.upper(j)) throw InputError("linear program has a variable with lo > hi");

  // Column map to standard form.
  std::vector<detail::ColumnMap> map(static_cast<std::size_t>(n));
  Vector offset = Vector::Zero(n);
  std::vector<Scalar> ubs;
  Eigen::Index ny = 0;
  for (Eigen::Index j = 0; j < n; ++j) {
    auto& cm = map[static_cast<std::size_t>(j)];
    cm.first = ny;
    const Scalar lo = lp.lower(j), hi = lp.upper(j);
    if (std::isfinite(static_cast<double>(lo))) {
      offset(j) = lo;
      ubs.push_back(std::isfinite(static_cast<double>(hi)) ? hi - lo : inf);
      ny += 1;
    } else if (std::isfinite(static_cast<double>(hi))) {
      offset(j) = hi;
      cm.sign = -1.0;
      ubs.push_back(inf);
      ny += 1;
    } else {
      cm.count = 2;
      ubs.push_back(inf);
      ubs.push_back(inf);
      ny += 2;
    }
  }
  const Eigen::Index nslack = min;
  const Eigen::Index ncols = ny + nslack;
  const Eigen::Index m = meq + min;

  Matrix s = Matrix::Zero(n, ny);  // x = offset + s y
  for (Eigen::Index j = 0; j < n; ++j) {
    const auto& cm = map[static_cast<std::size_t>(j)];
    s(j, cm.first) = Scalar(cm.sign);
    if (cm.count == 2) s(j, cm.first + 1) = Scalar(-1);
  }

  Matrix a = Matrix::Zero(m, ncols);
  Vector b(m);
  if (meq) {
    a.block(0, 0, meq, ny) = aeq * s;
    b.head(meq) = lp.eq_rhs - aeq * offset;
  }
  if (min) {
    a.block(meq, 0, min, ny) = ain * s;
    a.block(meq, ny, min, nslack).setIdentity();
    b.tail(min) = lp.ineq_rhs - ain * offset;
  }
  Vector row_sign = Vector::Ones(m);
  for (Eigen::Index i = 0; i < m; ++i) {
    if (b(i) < 0) {
      a.row(i) *= Scalar(-1);
      b(i) = -b(i);
      row_sign(i) = Scalar(-1);
    }
  }
  const Scalar sense = lp.sense == Sense::maximize ? Scalar(-1) : Scalar(1);
  Vector c = Vector::Zero(ncols);
  c.head(ny) = sense * (s.transpose() * lp.objective);
  Vector u(ncols);
  for (Eigen::Index k = 0; k < ny; ++k) u(k) = ubs[static_cast<std::size_t>(k)];
  u.tail(nslack).setConstant(inf);

  detail::BoundedSimplex<Scalar> simplex(a, b, c, u, options);
  LpResult<Scalar> out;
  out.status = simplex.run();
  out.iterations = simplex.iterations();

  if (out.status == LpStatus::infeasible) {
    out.farkas = simplex.farkas().cwiseProduct(row_sign);
    out.value = std::numeric_limits<Scalar>::quiet_NaN();
    return out;
  }
  const Vector y = simplex.primal();
  out.x = offset + s * y.head(ny);
  if (out.status == LpStatus::unbounded) {
    out.ray = s * simplex.ray().head(ny);
    out.value = lp.sense == Sense::maximize ? inf : -inf;
    return out;
  }
  out.value = lp.objective.dot(out.x);

  // Reduced costs per original variable, reported in the problem's sense.
  const Vector& d = simplex.reduced_costs();
  out.reduced_costs.resize(n);
  for (Eigen::Index j = 0; j < n; ++j) {
    const auto& cm = map[static_cast<std::size_t>(j)];
    out.reduced_costs(j) = sense * Scalar(cm.sign) * d(cm.first);
  }
  const Vector duals = simplex.duals().cwiseProduct(row_sign) * sense;
  out.eq_duals = duals.head(meq);
  out.ineq_duals = duals.tail(min);
  return out;
}

}  // namespace artcal
