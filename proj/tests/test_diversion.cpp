#include "doctest.h"

#include <random>
#include <set>

#include "artcal/diversion.hpp"
#include "json.hpp"
#include "support.hpp"

using namespace artcal;
using testing_support::load;

namespace {

FlowSolution with_movement_flows(const NetworkGraph& g, const std::vector<double>& f) {
  FlowSolution s;
  s.link_flows = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(g.num_links()));
  s.movement_flows = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(g.num_movements()));
  for (std::size_t i = 0; i < f.size(); ++i) s.movement_flows(static_cast<Eigen::Index>(i)) = f[i];
  return s;
}

// One signalized node: route a -> b, cross traffic d -> e, one stage each.
NetworkGraph crossing(double cycle, double lost, double green_route, double green_cross) {
  std::vector<Node> nodes{{"X", cycle, lost}};
  std::vector<Link> links{{"a", "", "X", 0.2, 30, 20, LinkKind::entry, 1},
                          {"b", "X", "", 0.2, 30, 20, LinkKind::exit, 1},
                          {"d", "", "X", 0.2, 30, 20, LinkKind::entry, 1},
                          {"e", "X", "", 0.2, 30, 20, LinkKind::exit, 1}};
  std::vector<Movement> moves{{"a", "b", 1800, true}, {"d", "e", 1800, true}};
  TimingPlan plan{"X", {Stage{{{"a", "b", green_route}}}, Stage{{{"d", "e", green_cross}}}}, 0.0};
  return NetworkGraph(nodes, links, moves, {plan});
}

// Three signalized nodes in series with chosen route capacities.
NetworkGraph corridor(const std::vector<double>& greens) {
  std::vector<Node> nodes;
  std::vector<Link> links{{"r0", "", "A0", 0.2, 30, 20, LinkKind::entry, 1}};
  std::vector<Movement> moves;
  std::vector<TimingPlan> plans;
  for (std::size_t i = 0; i < greens.size(); ++i) {
    const std::string n = "A" + std::to_string(i);
    nodes.push_back({n, 60.0, 0.0});
    const std::string next = "r" + std::to_string(i + 1);
    const bool last = i + 1 == greens.size();
    links.push_back({next, n, last ? "" : "A" + std::to_string(i + 1), 0.2, 30, 20,
                     last ? LinkKind::exit : LinkKind::internal, 1});
    moves.push_back({"r" + std::to_string(i), next, 1800, true});
    plans.push_back({n, {Stage{{{"r" + std::to_string(i), next, greens[i]}}}}, 0.0});
  }
  return NetworkGraph(nodes, links, moves, plans);
}

std::vector<std::string> random_route(const NetworkGraph& g, std::mt19937_64& rng) {
  const auto entries = g.entry_links();
  for (;;) {
    std::vector<std::size_t> path{entries[std::uniform_int_distribution<std::size_t>(0, entries.size() - 1)(rng)]};
    std::set<std::size_t> seen{path.front()};
    bool ok = true;
    while (g.link(path.back()).kind != LinkKind::exit) {
      const auto out = g.movements_from(path.back());
      const auto mv = out[std::uniform_int_distribution<std::size_t>(0, out.size() - 1)(rng)];
      const auto next = g.movement_to(mv);
      if (!seen.insert(next).second) {
        ok = false;
        break;
      }
      path.push_back(next);
    }
    if (!ok) continue;
    std::vector<std::string> ids;
    for (auto l : path) ids.push_back(g.link(l).id);
    return ids;
  }
}

}  // namespace

TEST_CASE("simple diversion is the smallest slack") {
  // s = 1800 * green / 60: greens 20, 19, 40 give 600, 570, 1200; baseline 200, 300, 300.
  const auto g = corridor({20, 19, 40});
  const auto base = with_movement_flows(g, {200, 300, 300});
  const std::vector<std::string> route{"r0", "r1", "r2", "r3"};
  const auto r = max_simple_diversion(g, base, route);
  CHECK(r.optimal_diversion == doctest::Approx(270.0));
  REQUIRE(r.binding_movements.size() == 1);
  CHECK(r.binding_movements[0] == 1);
  CHECK(r.route[0].slack() == doctest::Approx(400.0));
  CHECK(r.route[2].slack() == doctest::Approx(900.0));

  const auto lp = solve_lp(simple_diversion_lp(g, base, route));
  CHECK(lp.status == LpStatus::optimal);
  CHECK(std::abs(lp.value - r.optimal_diversion) <= 1e-9);
}

TEST_CASE("route at capacity or through a forbidden movement gives zero") {
  const auto g = corridor({20, 20, 20});
  const std::vector<std::string> route{"r0", "r1", "r2", "r3"};
  const auto r = max_simple_diversion(g, with_movement_flows(g, {100, 600, 100}), route);
  CHECK(r.optimal_diversion == 0.0);
  CHECK(r.binding_movements == std::vector<std::size_t>{1});
  CHECK_THROWS_AS(max_simple_diversion(g, with_movement_flows(g, {100, 700, 100}), route), InputError);

  std::vector<Movement> moves(g.movements().begin(), g.movements().end());
  moves[2].allowed = false;
  const NetworkGraph closed({g.nodes().begin(), g.nodes().end()}, {g.links().begin(), g.links().end()}, moves,
                            {g.plans().begin(), g.plans().end()});
  const auto z = max_simple_diversion(closed, with_movement_flows(g, {100, 100, 0}), route);
  CHECK(z.optimal_diversion == 0.0);
  CHECK(z.binding_movements == std::vector<std::size_t>{2});

  CHECK_THROWS_AS(route_movements(g, std::vector<std::string>{"r0", "r2"}), InputError);
}

TEST_CASE("re-timing gives the route all the green the cross street can spare") {
  // T = 60, L = 4, no cross traffic: D+* = c (T - L) / T - f* = 1680 - 300.
  const auto g = crossing(60, 4, 28, 28);
  const auto base = with_movement_flows(g, {300, 0});
  const std::vector<std::string> route{"a", "b"};
  const auto simple = max_simple_diversion(g, base, route);
  CHECK(simple.optimal_diversion == doctest::Approx(1800.0 * 28 / 60 - 300));
  const auto r = max_retimed_diversion(g, base, route);
  CHECK(r.optimal_diversion == doctest::Approx(1800.0 * 56 / 60 - 300).epsilon(1e-12));
  REQUIRE(r.new_plans);
  CHECK((*r.new_plans)[0].stages[0].greens[0].duration_s == doctest::Approx(56.0));
  CHECK((*r.new_plans)[0].stages[1].greens[0].duration_s == doctest::Approx(0.0));
  // The cross movement keeps zero green for zero flow, so it is tight too.
  CHECK(r.binding_movements == std::vector<std::size_t>{0, 1});
}

TEST_CASE("a saturated budget leaves nothing to re-split") {
  // Both movements at capacity: s = 1800 * 28 / 60 = 840.
  const auto g = crossing(60, 4, 28, 28);
  const auto base = with_movement_flows(g, {840, 840});
  const std::vector<std::string> route{"a", "b"};
  const auto simple = max_simple_diversion(g, base, route);
  const auto re = max_retimed_diversion(g, base, route);
  CHECK(simple.optimal_diversion == 0.0);
  CHECK(re.optimal_diversion == doctest::Approx(simple.optimal_diversion));
}

TEST_CASE("re-timing rejects plans over budget and unservable baselines") {
  const std::vector<std::string> route{"a", "b"};
  const auto over = crossing(60, 4, 30, 30);
  CHECK_THROWS_AS(max_retimed_diversion(over, with_movement_flows(over, {0, 0}), route), InputError);
  const auto g = crossing(60, 4, 28, 28);
  try {
    max_retimed_diversion(g, with_movement_flows(g, {1000, 1000}), route);
    FAIL("expected infeasible");
  } catch (const ComputationError& e) {
    CHECK(std::string(e.what()).find("X") != std::string::npos);
  }
}

TEST_CASE("random routes: LP matches the closed form and re-timing never loses") {
  const auto g = load("grid2x2.json").graph;
  std::mt19937_64 rng(17);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int trial = 0; trial < 100; ++trial) {
    CAPTURE(trial);
    std::vector<double> f(g.num_movements());
    for (std::size_t mv = 0; mv < g.num_movements(); ++mv) f[mv] = u(rng) * effective_capacity(g, mv);
    const auto base = with_movement_flows(g, f);
    const auto route = random_route(g, rng);

    const auto simple = max_simple_diversion(g, base, route);
    const auto lp = solve_lp(simple_diversion_lp(g, base, route));
    REQUIRE(lp.status == LpStatus::optimal);
    CHECK(std::abs(lp.value - simple.optimal_diversion) <= 1e-9);
    CHECK(simple.optimal_diversion >= 0.0);

    const auto re = max_retimed_diversion(g, base, route);
    CHECK(re.optimal_diversion >= simple.optimal_diversion - 1e-9);
    REQUIRE(re.new_plans);
    const auto moves = route_movements(g, route);
    const auto check = check_retimed_plan(g, base, moves, re.optimal_diversion, *re.new_plans);
    CHECK(check.worst_capacity_excess <= 1e-6);
    CHECK(check.worst_budget_excess <= 1e-9);
    CHECK(check.min_green >= 0.0);
  }
}

TEST_CASE("diversion JSON") {
  const auto g = crossing(60, 4, 28, 28);
  const auto r = max_retimed_diversion(g, with_movement_flows(g, {300, 0}), std::vector<std::string>{"a", "b"});
  const auto doc = nlohmann::json::parse(diversion_to_json(g, r));
  CHECK(doc["optimal_diversion"].get<double>() == doctest::Approx(1380.0));
  CHECK(doc["route"][0]["from"] == "a");
  CHECK(doc["binding"].size() == 2);
  CHECK(doc["timing_plans"][0]["node"] == "X");
}
