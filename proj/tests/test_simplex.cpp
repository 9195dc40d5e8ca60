#include "doctest.h"

#include <random>

#include "artcal/simplex.hpp"
#include "oracles.hpp"

using artcal::LinearProgram;
using artcal::LpStatus;
using artcal::Sense;
using Vec = Eigen::VectorXd;

namespace {

Vec row(std::initializer_list<double> v) {
  Vec r(static_cast<Eigen::Index>(v.size()));
  Eigen::Index i = 0;
  for (double x : v) r(i++) = x;
  return r;
}

void check_against_oracle(const LinearProgram<double>& lp) {
  const auto got = artcal::solve_lp(lp);
  const auto want = oracle::enumerate_vertices(lp);
  REQUIRE(got.status == want.status);
  if (want.status != LpStatus::optimal) return;
  CHECK(std::abs(got.value - want.value) <= 1e-9 * (1.0 + std::abs(want.value)));

  // Primal feasibility.
  const double tol = 1e-9;
  if (lp.eq_rhs.size()) CHECK((lp.eq_matrix * got.x - lp.eq_rhs).cwiseAbs().maxCoeff() <= tol * 10);
  if (lp.ineq_rhs.size()) CHECK((lp.ineq_matrix * got.x - lp.ineq_rhs).maxCoeff() <= tol * 10);
  for (Eigen::Index j = 0; j < lp.num_variables(); ++j) {
    CHECK(got.x(j) >= lp.lower(j) - tol);
    CHECK(got.x(j) <= lp.upper(j) + tol);
  }

  // Reduced-cost signs: improving directions must be blocked by a bound.
  const double s = lp.sense == Sense::maximize ? -1.0 : 1.0;
  for (Eigen::Index j = 0; j < lp.num_variables(); ++j) {
    const double d = s * got.reduced_costs(j);
    const bool at_lo = std::abs(got.x(j) - lp.lower(j)) <= 1e-9;
    const bool at_hi = std::abs(got.x(j) - lp.upper(j)) <= 1e-9;
    if (!at_lo) CHECK(d <= 1e-7);
    if (!at_hi) CHECK(d >= -1e-7);
  }
}

}  // namespace

TEST_CASE("max x subject to x <= 5") {
  auto lp = LinearProgram<double>::nonnegative(1, Sense::maximize);
  lp.objective << 1.0;
  lp.add_inequality(row({1.0}), 5.0);
  const auto r = artcal::solve_lp(lp);
  REQUIRE(r.status == LpStatus::optimal);
  CHECK(r.value == doctest::Approx(5.0));
}

TEST_CASE("max x + y with x + y <= 3 and x <= 2") {
  auto lp = LinearProgram<double>::nonnegative(2, Sense::maximize);
  lp.objective << 1.0, 1.0;
  lp.add_inequality(row({1.0, 1.0}), 3.0);
  lp.add_inequality(row({1.0, 0.0}), 2.0);
  const auto r = artcal::solve_lp(lp);
  REQUIRE(r.status == LpStatus::optimal);
  CHECK(r.value == doctest::Approx(3.0));
  check_against_oracle(lp);
}

TEST_CASE("unbounded problem returns an improving ray") {
  auto lp = LinearProgram<double>::nonnegative(1, Sense::maximize);
  lp.objective << 1.0;
  const auto r = artcal::solve_lp(lp);
  REQUIRE(r.status == LpStatus::unbounded);
  CHECK(r.ray(0) > 0.0);

  auto lp2 = LinearProgram<double>::nonnegative(2, Sense::maximize);
  lp2.objective << 1.0, 2.0;
  lp2.add_inequality(row({1.0, -1.0}), 1.0);
  const auto r2 = artcal::solve_lp(lp2);
  REQUIRE(r2.status == LpStatus::unbounded);
  CHECK(lp2.objective.dot(r2.ray) > 0.0);
  CHECK(lp2.ineq_matrix.row(0).dot(r2.ray) <= 1e-12);
  CHECK(r2.ray.minCoeff() >= 0.0);
}

TEST_CASE("infeasible problem returns a Farkas certificate") {
  auto lp = LinearProgram<double>::nonnegative(2);
  lp.add_equality(row({1.0, 1.0}), -1.0);
  const auto r = artcal::solve_lp(lp);
  REQUIRE(r.status == LpStatus::infeasible);
  // y'A <= 0 on nonnegative columns and y'b > 0.
  const Vec ya = lp.eq_matrix.transpose() * r.farkas;
  CHECK(ya.maxCoeff() <= 1e-12);
  CHECK(r.farkas.dot(lp.eq_rhs) > 0.0);
}

TEST_CASE("free, reflected and boxed variables") {
  LinearProgram<double> lp = LinearProgram<double>::nonnegative(3);
  lp.lower << -std::numeric_limits<double>::infinity(), -std::numeric_limits<double>::infinity(), 1.0;
  lp.upper << std::numeric_limits<double>::infinity(), 4.0, 2.5;
  lp.objective << 1.0, -1.0, 1.0;
  lp.add_inequality(row({-1.0, 0.0, 0.0}), 3.0);  // x0 >= -3
  lp.add_equality(row({1.0, 1.0, 1.0}), 2.0);
  const auto r = artcal::solve_lp(lp);
  REQUIRE(r.status == LpStatus::optimal);
  CHECK(r.x(0) == doctest::Approx(-3.0));
  CHECK(r.x(1) == doctest::Approx(4.0));
  CHECK(r.x(2) == doctest::Approx(1.0));
  check_against_oracle(lp);
}

TEST_CASE("redundant equality rows are dropped") {
  auto lp = LinearProgram<double>::nonnegative(3, Sense::maximize);
  lp.objective << 1.0, 2.0, 3.0;
  lp.add_equality(row({1.0, 1.0, 1.0}), 4.0);
  lp.add_equality(row({2.0, 2.0, 2.0}), 8.0);
  lp.add_equality(row({1.0, 0.0, -1.0}), 0.0);
  const auto r = artcal::solve_lp(lp);
  REQUIRE(r.status == LpStatus::optimal);
  check_against_oracle(lp);
}

TEST_CASE("degenerate cycling example terminates") {
  // Beale's example, which cycles under the textbook largest-coefficient rule.
  auto lp = LinearProgram<double>::nonnegative(4, Sense::maximize);
  lp.objective << 0.75, -150.0, 0.02, -6.0;
  lp.add_inequality(row({0.25, -60.0, -0.04, 9.0}), 0.0);
  lp.add_inequality(row({0.5, -90.0, -0.02, 3.0}), 0.0);
  lp.add_inequality(row({0.0, 0.0, 1.0, 0.0}), 1.0);
  const auto r = artcal::solve_lp(lp);
  REQUIRE(r.status == LpStatus::optimal);
  CHECK(r.value == doctest::Approx(0.05));
  check_against_oracle(lp);
}

TEST_CASE("random LPs match vertex enumeration") {
  std::mt19937_64 rng(20240611);
  std::uniform_int_distribution<int> coef(-3, 3);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  int optimal = 0, unbounded = 0, infeasible = 0;
  for (int trial = 0; trial < 300; ++trial) {
    const int n = 1 + static_cast<int>(rng() % 5) + (trial % 25 == 0 ? 3 : 0);  // occasionally 8 wide
    const int meq = static_cast<int>(rng() % 3);
    const int min = static_cast<int>(rng() % 4);
    auto lp = LinearProgram<double>::nonnegative(n, trial % 2 ? Sense::maximize : Sense::minimize);
    Vec x0(n);
    for (int j = 0; j < n; ++j) {
      lp.objective(j) = coef(rng);
      const double pick = unit(rng);
      if (pick < 0.2) lp.lower(j) = -std::numeric_limits<double>::infinity();
      else if (pick < 0.4) lp.lower(j) = coef(rng);
      if (unit(rng) < 0.5) lp.upper(j) = (std::isfinite(lp.lower(j)) ? lp.lower(j) : -2.0) + 1 + rng() % 4;
      const double lo = std::isfinite(lp.lower(j)) ? lp.lower(j) : -5.0;
      const double hi = std::isfinite(lp.upper(j)) ? lp.upper(j) : lo + 5.0;
      x0(j) = lo + (hi - lo) * unit(rng);
    }
    const bool make_infeasible = trial % 7 == 0;
    for (int i = 0; i < meq; ++i) {
      Vec a(n);
      for (int j = 0; j < n; ++j) a(j) = coef(rng);
      lp.add_equality(a, a.dot(x0) + (make_infeasible ? 100.0 : 0.0));
    }
    for (int i = 0; i < min; ++i) {
      Vec a(n);
      for (int j = 0; j < n; ++j) a(j) = coef(rng);
      lp.add_inequality(a, a.dot(x0) + 2.0 * unit(rng));
    }
    CAPTURE(trial);
    check_against_oracle(lp);
    switch (artcal::solve_lp(lp).status) {
      case LpStatus::optimal: ++optimal; break;
      case LpStatus::unbounded: ++unbounded; break;
      case LpStatus::infeasible: ++infeasible; break;
    }
  }
  CHECK(optimal > 100);
  CHECK(unbounded > 0);
  CHECK(infeasible > 0);
}
