#include "doctest.h"

#include <random>

#include "artcal/qp.hpp"
#include "oracles.hpp"

using artcal::QuadraticProgram;
using Mat = Eigen::MatrixXd;
using Vec = Eigen::VectorXd;

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

QuadraticProgram<double> unconstrained(const Mat& h, const Vec& c) {
  QuadraticProgram<double> qp;
  qp.hessian = h;
  qp.linear = c;
  qp.eq_matrix = Mat::Zero(0, c.size());
  qp.eq_rhs = Vec::Zero(0);
  qp.lower = Vec::Constant(c.size(), -kInf);
  qp.upper = Vec::Constant(c.size(), kInf);
  return qp;
}

}  // namespace

TEST_CASE("unconstrained quadratic") {
  const Vec c = (Vec(3) << 1.0, -2.0, 0.5).finished();
  const auto r = artcal::solve_qp(unconstrained(Mat::Identity(3, 3), c));
  CHECK((r.x + c).cwiseAbs().maxCoeff() < 1e-12);
  CHECK(r.unique);
  CHECK(r.kkt.scaled() < 1e-10);
}

TEST_CASE("equality-constrained QP matches a direct KKT solve") {
  std::mt19937_64 rng(7);
  std::normal_distribution<double> z(0.0, 1.0);
  for (int trial = 0; trial < 30; ++trial) {
    const int n = 3 + trial % 5, m = 1 + trial % 2;
    Mat l(n, n);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) l(i, j) = z(rng);
    Mat h = l * l.transpose() + Mat::Identity(n, n);
    Vec c(n), b(m);
    Mat a(m, n);
    for (int i = 0; i < n; ++i) c(i) = z(rng);
    for (int i = 0; i < m; ++i) {
      b(i) = z(rng);
      for (int j = 0; j < n; ++j) a(i, j) = z(rng);
    }
    auto qp = unconstrained(h, c);
    qp.eq_matrix = a;
    qp.eq_rhs = b;
    const auto got = artcal::solve_qp(qp);
    const auto want = oracle::kkt_solve(h, c, a, b);
    REQUIRE(want);
    CHECK((got.x - *want).cwiseAbs().maxCoeff() < 1e-9);
    CHECK(got.kkt.scaled() < 1e-8);
  }
}

TEST_CASE("bounded QPs match active-pattern enumeration") {
  std::mt19937_64 rng(11);
  std::normal_distribution<double> z(0.0, 1.0);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int trial = 0; trial < 120; ++trial) {
    CAPTURE(trial);
    const int n = 2 + trial % 5, m = trial % 3;
    Mat l(n, n);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) l(i, j) = z(rng);
    QuadraticProgram<double> qp = unconstrained(l * l.transpose() + 0.1 * Mat::Identity(n, n), Vec(n));
    for (int i = 0; i < n; ++i) qp.linear(i) = 3.0 * z(rng);
    Vec x0(n);
    for (int i = 0; i < n; ++i) {
      qp.lower(i) = u(rng) < 0.8 ? 0.0 : -kInf;
      qp.upper(i) = u(rng) < 0.5 ? 1.0 + 2.0 * u(rng) : kInf;
      x0(i) = std::isfinite(qp.upper(i)) ? qp.upper(i) * u(rng) : 2.0 * u(rng);
    }
    qp.eq_matrix = Mat(m, n);
    qp.eq_rhs = Vec(m);
    for (int i = 0; i < m; ++i) {
      for (int j = 0; j < n; ++j) qp.eq_matrix(i, j) = z(rng);
      qp.eq_rhs(i) = qp.eq_matrix.row(i).dot(x0);
    }
    const auto got = artcal::solve_qp(qp);
    const auto want = oracle::brute_force_qp(qp);
    REQUIRE(want);
    CHECK(std::abs(got.objective - *want) <= 1e-8 * (1.0 + std::abs(*want)));
    CHECK(got.kkt.scaled() <= 1e-8);
    for (int i = 0; i < n; ++i) {
      CHECK(got.x(i) >= qp.lower(i));
      CHECK(got.x(i) <= qp.upper(i));
    }
  }
}

TEST_CASE("semidefinite objective returns the minimum-norm minimizer") {
  // (x0 + x1 - 2)^2: every point on x0 + x1 = 2 is optimal.
  Mat h(2, 2);
  h << 2, 2, 2, 2;
  auto qp = unconstrained(h, Vec::Constant(2, -4.0));
  qp.constant = 4.0;
  qp.lower.setZero();
  const auto r = artcal::solve_qp(qp);
  CHECK_FALSE(r.unique);
  CHECK(r.x(0) == doctest::Approx(1.0).epsilon(1e-9));
  CHECK(r.x(1) == doctest::Approx(1.0).epsilon(1e-9));
  CHECK(std::abs(r.objective) < 1e-12);
}

TEST_CASE("redundant equalities and fixed variables") {
  auto qp = unconstrained(Mat::Identity(3, 3), Vec::Zero(3));
  qp.linear << -1.0, -5.0, 0.0;
  qp.eq_matrix = Mat(2, 3);
  qp.eq_matrix << 1, 1, 1, 2, 2, 2;
  qp.eq_rhs = Vec(2);
  qp.eq_rhs << 3, 6;
  qp.lower << 0, 0, 0.5;
  qp.upper << kInf, kInf, 0.5;
  const auto r = artcal::solve_qp(qp);
  CHECK(r.x(2) == 0.5);
  CHECK(r.x.sum() == doctest::Approx(3.0));
  // Hand solution: x1 = 2.5 - x0 makes the gradient 2 x0 + 1.5 > 0, so x0 = 0.
  CHECK(std::abs(r.x(0)) < 1e-12);
  CHECK(r.x(1) == doctest::Approx(2.5));
  CHECK(r.objective == doctest::Approx(-9.25));
}

TEST_CASE("infeasible constraints and iteration limit") {
  auto qp = unconstrained(Mat::Identity(2, 2), Vec::Zero(2));
  qp.lower.setZero();
  qp.eq_matrix = Mat::Ones(1, 2);
  qp.eq_rhs = Vec::Constant(1, -1.0);
  CHECK_THROWS_AS(artcal::solve_qp(qp), artcal::ComputationError);

  auto hard = unconstrained(Mat::Identity(4, 4), Vec::Constant(4, 1.0));
  hard.lower.setZero();
  hard.linear << 1, -1, 1, -1;
  artcal::QpOptions opt;
  opt.max_iterations = 1;
  try {
    artcal::solve_qp(hard, opt);
    FAIL("expected the iteration limit");
  } catch (const artcal::QpIterationLimit& e) {
    CHECK(e.best_iterate().size() == 4);
    CHECK(e.kkt_residual() > 0.0);
  }
}
