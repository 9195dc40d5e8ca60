#include "doctest.h"

#include <random>
#include <sstream>

#include "artcal/calibrate.hpp"
#include "oracles.hpp"
#include "support.hpp"

using namespace artcal;
using testing_support::load;

namespace {

MeasurementSet one_link(const std::string& id, double v, double w = 1.0) {
  MeasurementSet m;
  m.link_flows[id].push_back({v, w});
  return m;
}

// Exact flows of the grid fixture from its demand and turn ratios.
SteadyFlows grid_truth(const NetworkDocument& doc) { return commodity_flows(doc.graph, doc.demands[0]); }

// Demands and every turn ratio: identifies all decision variables.
MeasurementSet demands_and_ratios(const NetworkDocument& doc, const SteadyFlows& truth) {
  MeasurementSet m;
  for (auto l : doc.graph.entry_links())
    m.demands[doc.graph.link(l).id].push_back({truth.link(static_cast<Eigen::Index>(l)), 1.0});
  for (const auto& [key, r] : doc.demands[0].turn_ratios) m.turn_ratios[key].push_back({r, 1.0});
  return m;
}

}  // namespace

TEST_CASE("no measurements: zero objective at all-zero flows") {
  const auto doc = load("chain3.json");
  const auto p = assemble_qp(doc.graph, {});
  CHECK(p.qp.hessian.cwiseAbs().maxCoeff() == 0.0);
  CHECK(p.qp.linear.cwiseAbs().maxCoeff() == 0.0);
  const auto sol = solve_calibration(doc.graph, {});
  CHECK(sol.objective == 0.0);
  CHECK(sol.link_flows.cwiseAbs().maxCoeff() < 1e-12);
  CHECK_FALSE(sol.unique);
}

TEST_CASE("single measured link expands to one square") {
  const auto doc = load("chain3.json");
  const auto p = assemble_qp(doc.graph, one_link("mid", 100.0));
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(-500.0, 500.0);
  for (int t = 0; t < 10; ++t) {
    Eigen::VectorXd x(p.layout.size());
    for (Eigen::Index i = 0; i < x.size(); ++i) x(i) = u(rng);
    const double fl = x(p.layout.link(doc.graph.link_index("mid")));
    CHECK(p.qp.objective(x) == doctest::Approx((fl - 100.0) * (fl - 100.0)));
  }
}

TEST_CASE("chain: entry measurement propagates") {
  const auto doc = load("chain3.json");
  const auto sol = solve_calibration(doc.graph, one_link("in", 600.0));
  for (Eigen::Index i = 0; i < 3; ++i) CHECK(sol.link_flows(i) == doctest::Approx(600.0).epsilon(1e-12));
  CHECK(sol.demands(0) == doctest::Approx(600.0));
  CHECK(sol.unique);
  CHECK(sol.conservation_residual <= 1e-8);
}

TEST_CASE("chain: inconsistent measurements average") {
  const auto doc = load("chain3.json");
  MeasurementSet m = one_link("in", 100.0);
  m.link_flows["mid"].push_back({120.0, 1.0});
  const auto sol = solve_calibration(doc.graph, m);
  CHECK(sol.link_flows(2) == doctest::Approx(110.0).epsilon(1e-12));
  REQUIRE(sol.residuals.size() == 2);
  CHECK(sol.residuals[0].error == doctest::Approx(10.0));
  CHECK(sol.residuals[1].error == doctest::Approx(-10.0));
  CHECK(sol.objective == doctest::Approx(200.0));

  // Repeated measurements of one link behave the same way.
  MeasurementSet dup = one_link("mid", 100.0);
  dup.link_flows["mid"].push_back({120.0, 1.0});
  CHECK(solve_calibration(doc.graph, dup).link_flows(0) == doctest::Approx(110.0));
}

TEST_CASE("weights scale out of the argmin") {
  const auto doc = load("ten_link.json");
  MeasurementSet m;
  m.link_flows["b"].push_back({200.0, 1.0});
  m.link_flows["e"].push_back({500.0, 2.0});
  m.link_flows["f"].push_back({650.0, 0.5});
  m.link_flows["g"].push_back({120.0, 1.0});
  m.link_flows["a"].push_back({260.0, 1.5});
  MeasurementSet scaled = m;
  for (auto& [id, vs] : scaled.link_flows)
    for (auto& v : vs) v.weight *= 37.0;
  const auto s1 = solve_calibration(doc.graph, m);
  const auto s2 = solve_calibration(doc.graph, scaled);
  CHECK((s1.link_flows - s2.link_flows).cwiseAbs().maxCoeff() < 1e-7);
  CHECK(s1.objective <= assemble_qp(doc.graph, m).qp.constant);
}

TEST_CASE("four sensors on the ten-link example make the calibration unique") {
  const auto doc = load("ten_link.json");
  MeasurementSet m;
  m.link_flows["b"].push_back({200.0, 1.0});
  m.link_flows["e"].push_back({500.0, 1.0});
  m.link_flows["f"].push_back({650.0, 1.0});
  m.link_flows["g"].push_back({120.0, 1.0});
  // Turn ratios pin the movement split at nodes 1 and 3.
  m.turn_ratios[{"e", "a"}].push_back({0.6, 1.0});
  m.turn_ratios[{"f", "c"}].push_back({150.0 / 650.0, 1.0});
  const auto sol = solve_calibration(doc.graph, m);
  CHECK(sol.unique);
  // Cutset sums: a = e + c - b with c = f - i and i = e; d = b; h = j = g.
  const auto& g = doc.graph;
  auto f = [&](const char* id) { return sol.link_flows(static_cast<Eigen::Index>(g.link_index(id))); };
  CHECK(f("i") == doctest::Approx(500.0));
  CHECK(f("c") == doctest::Approx(150.0));
  CHECK(f("a") == doctest::Approx(450.0));
  CHECK(f("d") == doctest::Approx(200.0));
  CHECK(f("h") == doctest::Approx(120.0));
}

TEST_CASE("variable ordering does not change the solution") {
  const auto doc = load("ten_link.json");
  MeasurementSet m;
  m.link_flows["b"].push_back({210.0, 1.0});
  m.link_flows["e"].push_back({480.0, 1.0});
  m.link_flows["f"].push_back({700.0, 1.0});
  m.link_flows["g"].push_back({100.0, 1.0});
  m.turn_ratios[{"e", "a"}].push_back({0.5, 1.0});
  m.turn_ratios[{"f", "i"}].push_back({0.7, 1.0});
  std::vector<Link> links(doc.graph.links().begin(), doc.graph.links().end());
  std::vector<Movement> moves(doc.graph.movements().begin(), doc.graph.movements().end());
  std::reverse(links.begin(), links.end());
  std::rotate(moves.begin(), moves.begin() + 4, moves.end());
  NetworkGraph shuffled({doc.graph.nodes().begin(), doc.graph.nodes().end()}, links, moves, {});
  const auto a = solve_calibration(doc.graph, m);
  const auto b = solve_calibration(shuffled, m);
  for (std::size_t l = 0; l < doc.graph.num_links(); ++l) {
    const auto& id = doc.graph.link(l).id;
    CHECK(a.link_flows(static_cast<Eigen::Index>(l)) ==
          doctest::Approx(b.link_flows(static_cast<Eigen::Index>(shuffled.link_index(id)))).epsilon(1e-9));
  }
  CHECK(a.objective == doctest::Approx(b.objective).epsilon(1e-9));
}

TEST_CASE("capacity bounds bind") {
  auto doc = load("grid2x2.json");
  const auto& g = doc.graph;
  const auto mv = g.movement_index("N1ie", "N1N2");
  const double cap = saturation_capacity(g, mv);
  CHECK(cap == doctest::Approx(840.0));
  MeasurementSet m;
  m.demands["N1ie"].push_back({2000.0, 1.0});
  m.turn_ratios[{"N1ie", "N1N2"}].push_back({1.0, 1.0});
  const auto sol = solve_calibration(g, m);
  CHECK(sol.movement_flows(static_cast<Eigen::Index>(mv)) == doctest::Approx(cap));
  CHECK(std::find(sol.binding_movements.begin(), sol.binding_movements.end(), mv) != sol.binding_movements.end());
  CHECK(sol.conservation_residual <= 1e-8);
}

TEST_CASE("error-free measurements on the grid are reproduced") {
  const auto doc = load("grid2x2.json");
  const auto truth = grid_truth(doc);
  const auto m = demands_and_ratios(doc, truth);
  const auto sol = solve_calibration(doc.graph, m);
  CHECK(sol.unique);
  const double scale = truth.link.cwiseAbs().maxCoeff();
  CHECK((sol.link_flows - truth.link).cwiseAbs().maxCoeff() <= 1e-6 * scale);
  CHECK((sol.movement_flows - truth.movement).cwiseAbs().maxCoeff() <= 1e-6 * scale);
  for (const auto& r : sol.residuals) CHECK(std::abs(r.error) <= 1e-8 * scale);
  CHECK(sol.conservation_residual <= 1e-8);
}

TEST_CASE("noisy measurements match a direct KKT solve") {
  const auto doc = load("grid2x2.json");
  const auto truth = grid_truth(doc);
  std::mt19937_64 rng(99);
  std::uniform_real_distribution<double> noise(-0.05, 0.05);
  for (int trial = 0; trial < 5; ++trial) {
    MeasurementSet m = demands_and_ratios(doc, truth);
    for (auto& [id, vs] : m.demands)
      for (auto& v : vs) v.value *= 1.0 + noise(rng);
    for (std::size_t l = 0; l < doc.graph.num_links(); l += 3)
      m.link_flows[doc.graph.link(l).id].push_back({truth.link(static_cast<Eigen::Index>(l)) * (1.0 + noise(rng)), 1.0});
    const auto p = assemble_qp(doc.graph, m);
    const auto sol = solve_calibration(p, doc.graph, m);
    const Eigen::VectorXd x = oracle::kkt_solve_lsq(p.qp.hessian, p.qp.linear, p.qp.eq_matrix, p.qp.eq_rhs);
    bool interior = x.minCoeff() > 0.0;
    for (Eigen::Index i = 0; i < x.size(); ++i) interior = interior && x(i) < p.qp.upper(i);
    REQUIRE(interior);
    CHECK(std::abs(sol.objective - p.qp.objective(x)) <= 1e-6 * std::max(1.0, std::abs(p.qp.objective(x))));
    CHECK(sol.conservation_residual <= 1e-8);
  }
}

TEST_CASE("split ratios") {
  NetworkGraph g({{"N"}},
                 {{"in", "", "N", 0.1, 10, 5, LinkKind::entry, 1},
                  {"x", "N", "", 0.1, 10, 5, LinkKind::exit, 1},
                  {"y", "N", "", 0.1, 10, 5, LinkKind::exit, 1}},
                 {{"in", "x", 1800, true}, {"in", "y", 1800, true}}, {});
  FlowSolution sol;
  sol.link_flows = Eigen::Vector3d(400.0, 300.0, 100.0);
  sol.movement_flows = Eigen::Vector2d(300.0, 100.0);
  auto s = split_ratios(g, sol);
  CHECK(s.ratios(0) == doctest::Approx(0.75));
  CHECK(s.ratios(1) == doctest::Approx(0.25));
  CHECK(s.undetermined_links.empty());

  sol.link_flows.setZero();
  sol.movement_flows.setZero();
  s = split_ratios(g, sol);
  CHECK(s.ratios(0) == 0.5);
  CHECK(s.ratios(1) == 0.5);
  CHECK(s.undetermined_links == std::vector<std::string>{"in"});

  const auto chain = load("chain3.json");
  const auto cs = solve_calibration(chain.graph, one_link("in", 600.0));
  CHECK(split_ratios(chain.graph, cs).ratios(0) == doctest::Approx(1.0));
}

TEST_CASE("measurement csv") {
  const auto m = parse_measurements_csv(
      "kind,id_from,id_to,value,weight\n"
      "link_flow,a,,100,\n"
      "link_flow,a,,120,2\n"
      "demand,e,,50,1\n"
      "\n"
      "# comment\n"
      "turn_ratio,e,a,0.65,3\r\n");
  CHECK(m.link_flows.at("a").size() == 2);
  CHECK(m.link_flows.at("a")[0].weight == 1.0);
  CHECK(m.turn_ratios.at({"e", "a"})[0].weight == 3.0);
  std::ostringstream os;
  write_measurements_csv(os, m);
  const auto again = parse_measurements_csv(os.str());
  CHECK(again.size() == m.size());

  CHECK_THROWS_AS(parse_measurements_csv("speed,a,,1,1\n"), InputError);
  CHECK_THROWS_AS(parse_measurements_csv("turn_ratio,a,b,1.5,1\n"), InputError);
  CHECK_THROWS_AS(parse_measurements_csv("link_flow,a,,1,0\n"), InputError);
  CHECK_THROWS_AS(parse_measurements_csv("link_flow,a,,x,1\n"), InputError);

  const auto doc = load("chain3.json");
  CHECK_THROWS_AS(assemble_qp(doc.graph, one_link("nope", 1.0)), InputError);
  MeasurementSet bad;
  bad.demands["mid"].push_back({1.0, 1.0});
  CHECK_THROWS_AS(assemble_qp(doc.graph, bad), InputError);
}

TEST_CASE("solution table marks missing measurements with -1") {
  const auto doc = load("chain3.json");
  MeasurementSet m = one_link("in", 100.0);
  m.link_flows["in"].push_back({200.0, 3.0});
  const auto sol = solve_calibration(doc.graph, m);
  std::ostringstream os;
  write_solution_csv(os, doc.graph, m, sol, split_ratios(doc.graph, sol));
  const auto text = os.str();
  CHECK(text.find("in,175,175,in,mid,-1,1\n") != std::string::npos);
  CHECK(text.find("mid,-1,175,mid,out,-1,1\n") != std::string::npos);
  CHECK(text.find("out,-1,175,,,,\n") != std::string::npos);
}
