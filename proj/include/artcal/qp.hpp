#pragma once

// Primal active-set method for convex quadratic programs
//
//   min  1/2 x'Hx + c'x + k   s.t.  A x = b,  lo <= x <= hi
//
// Each working-set subproblem is solved in the nullspace of the free columns
// of A (rank-revealing QR of A_F'), which tolerates redundant equality rows.
// A tiny ridge term keeps every reduced Hessian positive definite so the
// iteration is well defined when H is only semidefinite; a final unridged
// step on the converged working set then removes the ridge bias and returns
// the minimum-norm minimizer within that face.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <sstream>
#include <vector>

#include "artcal/error.hpp"
#include "artcal/simplex.hpp"

namespace artcal {

template <typename Scalar = double>
struct QuadraticProgram {
  using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
  using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

  Matrix hessian;
  Vector linear;
  Scalar constant = Scalar(0);
  Matrix eq_matrix;
  Vector eq_rhs;
  Vector lower;
  Vector upper;

  Eigen::Index num_variables() const { return linear.size(); }

  Scalar objective(const Vector& x) const {
    return Scalar(0.5) * x.dot(hessian * x) + linear.dot(x) + constant;
  }
};

struct QpOptions {
  double tolerance = 1e-8;        // scaled KKT residual accepted as optimal
  double regularization = 1e-10;  // ridge on x during the active-set phase
  int max_iterations = 0;         // 0: 10 (n + m) + 100
  bool polish = true;
};

struct KktResidual {
  double stationarity = 0.0;
  double primal_equality = 0.0;
  double bound_violation = 0.0;
  double dual_sign = 0.0;
  double scale = 1.0;  // residuals are divided by this in `scaled()`

  double max() const { return std::max({stationarity, primal_equality, bound_violation, dual_sign}); }
  double scaled() const { return max() / scale; }
};

template <typename Scalar = double>
struct QpResult {
  using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

  Vector x;
  Scalar objective = Scalar(0);
  Vector eq_multipliers;     // H x + c = A' mu + nu
  Vector bound_multipliers;  // nu >= 0 at lower, <= 0 at upper, 0 when free
  KktResidual kkt;
  bool unique = true;        // reduced Hessian on the final face is nonsingular
  std::vector<signed char> working_set;  // -1 at lower, +1 at upper, 0 free
  int iterations = 0;
};

class QpIterationLimit : public ComputationError {
 public:
  QpIterationLimit(const std::string& what, Eigen::VectorXd best, double kkt_residual)
      : ComputationError(what), best_(std::move(best)), kkt_(kkt_residual) {}
  const Eigen::VectorXd& best_iterate() const { return best_; }
  double kkt_residual() const { return kkt_; }

 private:
  Eigen::VectorXd best_;
  double kkt_;
};

namespace detail {

template <typename Scalar>
class ActiveSetQp {
 public:
  using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
  using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

  ActiveSetQp(const QuadraticProgram<Scalar>& qp, const QpOptions& opt) : qp_(qp), opt_(opt) {
    n_ = qp.num_variables();
    m_ = qp.eq_rhs.size();
    if (qp.hessian.rows() != n_ || qp.hessian.cols() != n_ || qp.lower.size() != n_ ||
        qp.upper.size() != n_ || qp.eq_matrix.rows() != m_ || (m_ > 0 && qp.eq_matrix.cols() != n_))
      throw InputError("quadratic program dimensions are inconsistent");
    for (Eigen::Index j = 0; j < n_; ++j)
      if (qp.lower(j) > qp.upper(j)) throw InputError("quadratic program has a variable with lo > hi");
    a_ = m_ > 0 ? qp.eq_matrix : Matrix(Matrix::Zero(0, n_));
  }

  QpResult<Scalar> solve(std::optional<Vector> start) {
    x_ = start ? *start : feasible_start();
    state_.assign(static_cast<std::size_t>(n_), 0);
    for (Eigen::Index j = 0; j < n_; ++j) {
      if (qp_.lower(j) == qp_.upper(j)) {
        state_[static_cast<std::size_t>(j)] = -1;
        x_(j) = qp_.lower(j);
      }
    }
    const int limit = opt_.max_iterations > 0 ? opt_.max_iterations : static_cast<int>(10 * (n_ + m_) + 100);
    const Scalar lambda = Scalar(opt_.regularization);
    int it = 0;
    bool face_minimum = false;  // last step reached the face minimizer
    while (true) {
      if (++it > limit) {
        const auto res = kkt_at(x_, nullptr);
        std::ostringstream os;
        os << "active-set iteration limit (" << limit << ") reached; scaled KKT residual " << res.scaled();
        Eigen::VectorXd best = x_.template cast<double>();
        throw QpIterationLimit(os.str(), std::move(best), res.scaled());
      }
      const auto free = free_indices();
      const Vector g = qp_.hessian * x_ + qp_.linear + lambda * x_;
      Vector p = Vector::Zero(n_);
      if (!free.empty() && !face_minimum) {
        const Face face = factor(free);
        if (face.z.cols() > 0) {
          Matrix hff = sub(qp_.hessian, free);
          hff.diagonal().array() += lambda;
          const Matrix rh = face.z.transpose() * hff * face.z;
          const Vector rg = face.z.transpose() * gather(g, free);
          const Vector u = -rh.ldlt().solve(rg);
          scatter(p, free, face.z * u);
        }
      }
      const Scalar xs = std::max<Scalar>(Scalar(1), x_.size() ? x_.cwiseAbs().maxCoeff() : Scalar(1));
      if (face_minimum || p.size() == 0 || p.cwiseAbs().maxCoeff() <= Scalar(1e-13) * xs) {
        face_minimum = false;
        // Stationary on the face: check multiplier signs.
        const Vector nu = bound_multipliers(g, free);
        Eigen::Index drop = -1;
        Scalar worst = Scalar(0);
        // Multipliers within roundoff of zero never trigger a drop; acting on
        // them lets degenerate vertices cycle.
        const Scalar gs = std::max<Scalar>(Scalar(1), g.cwiseAbs().maxCoeff());
        const Scalar drop_tol = Scalar(0.1) * Scalar(opt_.tolerance) * gs;
        for (Eigen::Index j = 0; j < n_; ++j) {
          const auto s = state_[static_cast<std::size_t>(j)];
          if (s == 0 || qp_.lower(j) == qp_.upper(j)) continue;
          const Scalar wrong = s < 0 ? -nu(j) : nu(j);
          if (wrong > drop_tol && wrong > worst) {
            worst = wrong;
            drop = j;
          }
        }
        if (drop < 0) break;
        state_[static_cast<std::size_t>(drop)] = 0;
        continue;
      }
      // Ratio test along p.
      Scalar alpha = Scalar(1);
      Eigen::Index block = -1;
      signed char block_side = 0;
      for (Eigen::Index j : free) {
        if (p(j) < Scalar(0) && std::isfinite(static_cast<double>(qp_.lower(j)))) {
          const Scalar t = (qp_.lower(j) - x_(j)) / p(j);
          if (t < alpha) { alpha = std::max<Scalar>(t, Scalar(0)); block = j; block_side = -1; }
        } else if (p(j) > Scalar(0) && std::isfinite(static_cast<double>(qp_.upper(j)))) {
          const Scalar t = (qp_.upper(j) - x_(j)) / p(j);
          if (t < alpha) { alpha = std::max<Scalar>(t, Scalar(0)); block = j; block_side = 1; }
        }
      }
      x_ += alpha * p;
      face_minimum = block < 0;
      if (block >= 0) {
        state_[static_cast<std::size_t>(block)] = block_side;
        x_(block) = block_side < 0 ? qp_.lower(block) : qp_.upper(block);
      }
    }
    iterations_ = it;
    return finish();
  }

 private:
  struct Face {
    Matrix z;       // orthonormal basis of null(A_F)
    Eigen::Index rank = 0;
  };

  std::vector<Eigen::Index> free_indices() const {
    std::vector<Eigen::Index> f;
    for (Eigen::Index j = 0; j < n_; ++j)
      if (state_[static_cast<std::size_t>(j)] == 0) f.push_back(j);
    return f;
  }

  Matrix columns(const std::vector<Eigen::Index>& idx) const {
    Matrix out(m_, static_cast<Eigen::Index>(idx.size()));
    for (std::size_t k = 0; k < idx.size(); ++k) out.col(static_cast<Eigen::Index>(k)) = a_.col(idx[k]);
    return out;
  }

  static Matrix sub(const Matrix& h, const std::vector<Eigen::Index>& idx) {
    const auto k = static_cast<Eigen::Index>(idx.size());
    Matrix out(k, k);
    for (Eigen::Index r = 0; r < k; ++r)
      for (Eigen::Index c = 0; c < k; ++c) out(r, c) = h(idx[static_cast<std::size_t>(r)], idx[static_cast<std::size_t>(c)]);
    return out;
  }

  static Vector gather(const Vector& v, const std::vector<Eigen::Index>& idx) {
    Vector out(static_cast<Eigen::Index>(idx.size()));
    for (std::size_t k = 0; k < idx.size(); ++k) out(static_cast<Eigen::Index>(k)) = v(idx[k]);
    return out;
  }

  static void scatter(Vector& v, const std::vector<Eigen::Index>& idx, const Vector& part) {
    for (std::size_t k = 0; k < idx.size(); ++k) v(idx[k]) = part(static_cast<Eigen::Index>(k));
  }

  Scalar rank_threshold() const {
    const Scalar amax = a_.size() ? a_.cwiseAbs().maxCoeff() : Scalar(1);
    return Scalar(1e-10) * std::max<Scalar>(Scalar(1), amax);
  }

  Face factor(const std::vector<Eigen::Index>& free) const {
    const auto nf = static_cast<Eigen::Index>(free.size());
    Face face;
    if (m_ == 0) {
      face.z = Matrix::Identity(nf, nf);
      return face;
    }
    const Matrix aft = columns(free).transpose();  // nf x m
    Eigen::ColPivHouseholderQR<Matrix> qr(aft);
    qr.setThreshold(rank_threshold() / std::max<Scalar>(Scalar(1), aft.cwiseAbs().maxCoeff()));
    face.rank = qr.rank();
    const Matrix q = qr.householderQ() * Matrix::Identity(nf, nf);
    face.z = q.rightCols(nf - face.rank);
    return face;
  }

  // Least-squares equality multipliers from the free columns, then bound
  // multipliers from the remaining stationarity residual.
  Vector bound_multipliers(const Vector& g, const std::vector<Eigen::Index>& free, Vector* mu_out = nullptr) const {
    Vector mu = Vector::Zero(m_);
    if (m_ > 0 && !free.empty()) {
      const Matrix aft = columns(free).transpose();
      mu = aft.completeOrthogonalDecomposition().solve(gather(g, free));
    }
    Vector nu = g - a_.transpose() * mu;
    for (Eigen::Index j : free) nu(j) = Scalar(0);
    if (mu_out) *mu_out = mu;
    return nu;
  }

  Vector feasible_start() const {
    Vector x0(n_);
    for (Eigen::Index j = 0; j < n_; ++j) {
      const Scalar lo = qp_.lower(j), hi = qp_.upper(j);
      x0(j) = std::clamp<Scalar>(Scalar(0), lo, hi);
    }
    if (m_ == 0 || (a_ * x0 - qp_.eq_rhs).cwiseAbs().maxCoeff() <= Scalar(1e-12) * std::max<Scalar>(Scalar(1), qp_.eq_rhs.cwiseAbs().maxCoeff()))
      return x0;
    LinearProgram<Scalar> lp;
    lp.objective = Vector::Zero(n_);
    lp.eq_matrix = a_;
    lp.eq_rhs = qp_.eq_rhs;
    lp.ineq_matrix = Matrix::Zero(0, n_);
    lp.ineq_rhs = Vector::Zero(0);
    lp.lower = qp_.lower;
    lp.upper = qp_.upper;
    const auto r = solve_lp(lp);
    if (r.status == LpStatus::infeasible) throw ComputationError("quadratic program is infeasible");
    return r.x;
  }

  KktResidual kkt_at(const Vector& x, Vector* mu_out, Vector* nu_out = nullptr) const {
    const auto free = free_indices();
    const Vector g = qp_.hessian * x + qp_.linear;
    Vector mu;
    Vector nu = bound_multipliers(g, free, &mu);
    KktResidual r;
    const Vector stat = g - a_.transpose() * mu - nu;
    r.stationarity = static_cast<double>(stat.size() ? stat.cwiseAbs().maxCoeff() : Scalar(0));
    r.primal_equality = m_ > 0 ? static_cast<double>((a_ * x - qp_.eq_rhs).cwiseAbs().maxCoeff()) : 0.0;
    for (Eigen::Index j = 0; j < n_; ++j) {
      r.bound_violation = std::max({r.bound_violation, static_cast<double>(qp_.lower(j) - x(j)),
                                    static_cast<double>(x(j) - qp_.upper(j))});
      const auto s = state_[static_cast<std::size_t>(j)];
      if (qp_.lower(j) == qp_.upper(j)) continue;
      if (s < 0) r.dual_sign = std::max(r.dual_sign, static_cast<double>(-nu(j)));
      if (s > 0) r.dual_sign = std::max(r.dual_sign, static_cast<double>(nu(j)));
    }
    const Scalar xs = x.size() ? x.cwiseAbs().maxCoeff() : Scalar(0);
    const Scalar hs = qp_.hessian.size() ? qp_.hessian.cwiseAbs().maxCoeff() : Scalar(0);
    const Scalar cs = qp_.linear.size() ? qp_.linear.cwiseAbs().maxCoeff() : Scalar(0);
    const Scalar bs = m_ > 0 ? qp_.eq_rhs.cwiseAbs().maxCoeff() : Scalar(0);
    r.scale = static_cast<double>(std::max({Scalar(1), hs * xs, cs, bs}));
    if (mu_out) *mu_out = mu;
    if (nu_out) *nu_out = nu;
    return r;
  }

  QpResult<Scalar> finish() {
    const auto free = free_indices();
    bool unique = true;
    if (!free.empty()) {
      // Restore A x = b exactly on the free columns (min-norm correction).
      if (m_ > 0) {
        const Vector r = qp_.eq_rhs - a_ * x_;
        const Vector dx = columns(free).completeOrthogonalDecomposition().solve(r);
        Vector trial = x_;
        for (std::size_t k = 0; k < free.size(); ++k) trial(free[k]) += dx(static_cast<Eigen::Index>(k));
        if (within_bounds(trial)) x_ = trial;
      }
      const Face face = factor(free);
      if (face.z.cols() > 0) {
        const Matrix rh = face.z.transpose() * sub(qp_.hessian, free) * face.z;
        Eigen::CompleteOrthogonalDecomposition<Matrix> cod(rh);
        const Scalar hmax = rh.size() ? rh.cwiseAbs().maxCoeff() : Scalar(0);
        cod.setThreshold(Scalar(1e-9));
        unique = hmax > Scalar(0) && cod.rank() == rh.rows();
        if (opt_.polish) {
          // Newton steps on the face without the ridge, repeated as iterative
          // refinement while the reduced gradient keeps shrinking.
          auto reduced_gradient = [&](const Vector& x) -> Vector {
            return face.z.transpose() * gather(Vector(qp_.hessian * x + qp_.linear), free);
          };
          Vector rg = reduced_gradient(x_);
          for (int pass = 0; pass < 3; ++pass) {
            const Vector u = -cod.solve(rg);
            Vector trial = x_;
            scatter(trial, free, gather(x_, free) + face.z * u);
            if (!within_bounds(trial)) break;
            // Near the optimum the objective is lost in cancellation, so the
            // reduced gradient decides.
            const Vector trial_rg = reduced_gradient(trial);
            const Scalar before = qp_.objective(x_), after = qp_.objective(trial);
            const bool lower = after <= before - Scalar(1e-12) * std::max<Scalar>(Scalar(1), std::abs(before));
            if (!lower && !(trial_rg.norm() < rg.norm())) break;
            x_ = trial;
            rg = trial_rg;
          }
        }
      }
    }
    QpResult<Scalar> out;
    out.x = x_;
    out.objective = qp_.objective(x_);
    out.kkt = kkt_at(x_, &out.eq_multipliers, &out.bound_multipliers);
    out.unique = unique;
    out.working_set = state_;
    out.iterations = iterations_;
    return out;
  }

  bool within_bounds(const Vector& x) const {
    for (Eigen::Index j = 0; j < n_; ++j) {
      const Scalar tol = Scalar(1e-12) * std::max<Scalar>(Scalar(1), std::abs(x(j)));
      if (x(j) < qp_.lower(j) - tol || x(j) > qp_.upper(j) + tol) return false;
    }
    return true;
  }

  const QuadraticProgram<Scalar>& qp_;
  QpOptions opt_;
  Eigen::Index n_ = 0, m_ = 0;
  Matrix a_;
  Vector x_;
  std::vector<signed char> state_;
  int iterations_ = 0;
};

}  // namespace detail

// Throws QpIterationLimit (carrying the best iterate) when the iteration cap
// is hit, ComputationError when the feasible set is empty.
template <typename Scalar>
QpResult<Scalar> solve_qp(const QuadraticProgram<Scalar>& qp, const QpOptions& options = {},
                          std::optional<typename QuadraticProgram<Scalar>::Vector> start = std::nullopt) {
  detail::ActiveSetQp<Scalar> solver(qp, options);
  return solver.solve(std::move(start));
}

}  // namespace artcal
