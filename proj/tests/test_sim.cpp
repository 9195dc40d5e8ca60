#include "doctest.h"

#include <algorithm>
#include <map>
#include <random>
#include <set>
#include <sstream>

#include "artcal/sim.hpp"
#include "support.hpp"

using namespace artcal;
using testing_support::load;

namespace {

// a -> X -> b, optionally with a cross street d -> X -> e and a plan.
NetworkGraph crossing(double cycle, double lost, double green_route, double green_cross, double storage = 1000) {
  std::vector<Node> nodes{{"X", cycle, lost}};
  std::vector<Link> links{{"a", "", "X", 0.2, storage, 20, LinkKind::entry, 1},
                          {"b", "X", "", 0.2, storage, 20, LinkKind::exit, 1},
                          {"d", "", "X", 0.2, storage, 20, LinkKind::entry, 1},
                          {"e", "X", "", 0.2, storage, 20, LinkKind::exit, 1}};
  std::vector<Movement> moves{{"a", "b", 1800, true}, {"d", "e", 1800, true}};
  TimingPlan plan{"X", {Stage{{{"a", "b", green_route}}}, Stage{{{"d", "e", green_cross}}}}, 0.0};
  return NetworkGraph(nodes, links, moves, {plan});
}

CommodityDemand ratio_demand(std::map<std::string, double> entries, std::map<MovementKey, double> ratios) {
  CommodityDemand d;
  d.entry_flows_vph = std::move(entries);
  d.turn_ratios = std::move(ratios);
  return d;
}

std::string to_csv(const NetworkGraph& g, const std::vector<SimEvent>& log) {
  std::ostringstream os;
  write_event_csv(os, g, log);
  return os.str();
}

// Movement queues plus vehicles not yet on their entry link, after each event.
struct QueueTrace {
  std::vector<std::pair<double, long>> samples;
  long max_between(double t0, double t1) const {
    long m = 0;
    for (auto [t, q] : samples)
      if (t >= t0 && t < t1) m = std::max(m, q);
    return m;
  }
  long at(double t) const {
    long q = 0;
    for (auto [s, v] : samples)
      if (s <= t) q = v;
    return q;
  }
};

QueueTrace total_queue(const NetworkGraph& g, const std::vector<SimEvent>& log) {
  QueueTrace tr;
  long q = 0;
  for (const auto& e : log) {
    switch (e.kind) {
      case EventKind::join_queue: ++q; break;
      case EventKind::cross_intersection: --q; break;
      case EventKind::external_arrival: ++q; break;
      case EventKind::enter_link:
        if (g.link(e.link_to).kind == LinkKind::entry) --q;
        break;
      default: continue;
    }
    tr.samples.emplace_back(e.time, q);
  }
  return tr;
}

// Green sets per movement over time rebuilt from phase_change rows.
struct GreenTimeline {
  std::vector<std::vector<std::pair<double, double>>> intervals;  // per movement
  bool green_at(std::size_t mv, double t) const {
    for (auto [a, b] : intervals[mv])
      if (t >= a && t < b) return true;
    return false;
  }
};

GreenTimeline green_timeline(const NetworkGraph& g, const std::vector<SimEvent>& log, double end) {
  GreenTimeline tl;
  tl.intervals.resize(g.num_movements());
  std::vector<double> since(g.num_movements(), -1);
  std::map<std::size_t, double> group_time;
  for (const auto& e : log) {
    if (e.kind != EventKind::phase_change) continue;
    auto it = group_time.find(e.node);
    if (it == group_time.end() || it->second != e.time) {
      group_time[e.node] = e.time;
      for (std::size_t mv = 0; mv < g.num_movements(); ++mv)
        if (g.movement_node(mv) == e.node && since[mv] >= 0) {
          tl.intervals[mv].emplace_back(since[mv], e.time);
          since[mv] = -1;
        }
    }
    if (e.link_from != kNone) since[g.movement_index(g.link(e.link_from).id, g.link(e.link_to).id)] = e.time;
  }
  for (std::size_t mv = 0; mv < g.num_movements(); ++mv)
    if (since[mv] >= 0) tl.intervals[mv].emplace_back(since[mv], end);
  return tl;
}

}  // namespace

TEST_CASE("stability check compares flows with capacities") {
  const auto g = crossing(60, 4, 28, 28);
  FlowSolution f;
  f.movement_flows = Eigen::VectorXd::Zero(2);
  auto s = stability_check(g, f);
  CHECK(s[0].ok);
  CHECK(s[0].margin == doctest::Approx(840));
  f.movement_flows << 840, 100;
  s = stability_check(g, f);
  CHECK_FALSE(s[0].ok);
  CHECK(s[1].ok);

  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(0, 1200);
  for (int i = 0; i < 50; ++i) {
    f.movement_flows << u(rng), u(rng);
    s = stability_check(g, f);
    for (std::size_t mv = 0; mv < 2; ++mv)
      CHECK(s[mv].ok == (f.movement_flows(static_cast<Eigen::Index>(mv)) < saturation_capacity(g, mv)));
  }
}

TEST_CASE("unobstructed flow: every vehicle leaves after the free travel time") {
  std::vector<Node> nodes{{"X", 0, 0}};
  std::vector<Link> links{{"a", "", "X", 0.2, 50, 20, LinkKind::entry, 1}, {"b", "X", "", 0.3, 50, 25, LinkKind::exit, 1}};
  const NetworkGraph g(nodes, links, {{"a", "b", 1800, true}}, {});
  SimConfig cfg;
  cfg.horizon_s = 3600;
  cfg.drain = true;
  const auto log = run(g, std::vector{ratio_demand({{"a", 360}}, {{{"a", "b"}, 1.0}})}, cfg);
  std::map<std::int64_t, double> arrived;
  int exits = 0;
  for (const auto& e : log) {
    if (e.kind == EventKind::external_arrival) arrived[e.vehicle] = e.time;
    if (e.kind == EventKind::exit_network) {
      ++exits;
      CHECK(e.time - arrived.at(e.vehicle) == doctest::Approx(45.0));
    }
    CHECK(e.kind != EventKind::blocked);
  }
  CHECK(exits == 360);
}

TEST_CASE("single intersection: bounded queue below capacity, linear growth above") {
  const auto g = crossing(60, 4, 28, 28);  // s = 840 vph per movement
  SimConfig cfg;
  cfg.horizon_s = 7200;

  const auto stable = total_queue(g, run(g, std::vector{ratio_demand({{"a", 700}, {"d", 500}},
                                                                      {{{"a", "b"}, 1.0}, {{"d", "e"}, 1.0}})},
                                         cfg));
  CHECK(stable.max_between(5400, 7200) <= stable.max_between(1800, 3600) + 1);
  CHECK(stable.max_between(0, 7200) < 60);

  // d = 1.2 s on a: growth (d - s) t = 168 vph.
  const auto over = total_queue(g, run(g, std::vector{ratio_demand({{"a", 1008}}, {{{"a", "b"}, 1.0}})}, cfg));
  const double growth = static_cast<double>(over.at(7199) - over.at(3600));
  CHECK(growth == doctest::Approx(168.0).epsilon(0.15));
}

TEST_CASE("conservation, storage and lifecycle on a congested grid") {
  auto doc = load("grid2x2.json");
  std::vector<Link> links(doc.graph.links().begin(), doc.graph.links().end());
  for (auto& l : links) l.storage_capacity = l.kind == LinkKind::internal ? 8 : 6;
  const NetworkGraph g({doc.graph.nodes().begin(), doc.graph.nodes().end()}, links,
                       {doc.graph.movements().begin(), doc.graph.movements().end()},
                       {doc.graph.plans().begin(), doc.graph.plans().end()});
  SimConfig cfg;
  cfg.horizon_s = 1800;
  cfg.arrivals = ArrivalProcess::poisson;
  cfg.travel_times = TravelTimeModel::exponential;
  cfg.demand_scale = 2.0;
  cfg.seed = 11;
  const auto log = run(g, doc.demands, cfg);
  REQUIRE(!log.empty());

  std::vector<long> occ(g.num_links(), 0);
  std::map<std::int64_t, std::vector<EventKind>> life;
  long arrivals = 0, exits = 0, outside = 0, blocked = 0;
  double last = 0;
  for (const auto& e : log) {
    CHECK(e.time >= last);
    last = e.time;
    switch (e.kind) {
      case EventKind::external_arrival: ++arrivals; ++outside; break;
      case EventKind::enter_link:
        ++occ[e.link_to];
        if (e.link_from == kNone) --outside;
        CHECK(static_cast<double>(occ[e.link_to]) <= g.link(e.link_to).storage_capacity);
        break;
      case EventKind::cross_intersection: --occ[e.link_from]; break;
      case EventKind::exit_network: --occ[e.link_from]; ++exits; break;
      case EventKind::blocked: ++blocked; break;
      default: break;
    }
    if (e.vehicle >= 0 && e.kind != EventKind::blocked) life[e.vehicle].push_back(e.kind);
    // A crossing row is always followed by the enter_link row of the same transfer.
    if (e.kind == EventKind::cross_intersection) continue;
    long inside = 0;
    for (auto o : occ) inside += o;
    CHECK(arrivals == exits + inside + outside);
  }
  CHECK(blocked > 0);

  for (const auto& [id, kinds] : life) {
    REQUIRE(kinds.front() == EventKind::external_arrival);
    if (kinds.size() > 1) CHECK(kinds[1] == EventKind::enter_link);
    for (std::size_t i = 2; i < kinds.size(); ++i) {
      const auto prev = kinds[i - 1];
      const auto k = kinds[i];
      if (k == EventKind::join_queue) CHECK(prev == EventKind::enter_link);
      if (k == EventKind::cross_intersection) CHECK(prev == EventKind::join_queue);
      if (k == EventKind::enter_link) CHECK(prev == EventKind::cross_intersection);
      if (k == EventKind::exit_network) CHECK(prev == EventKind::enter_link);
    }
  }
}

TEST_CASE("service respects headways and green") {
  const auto doc = load("grid2x2.json");
  const auto& g = doc.graph;
  SimConfig cfg;
  cfg.horizon_s = 3600;
  cfg.demand_scale = 1.5;
  for (auto mode : {ControlMode::fixed_time, ControlMode::max_pressure}) {
    cfg.controller.mode = mode;
    const auto log = run(g, doc.demands, cfg);
    const auto tl = green_timeline(g, log, cfg.horizon_s);
    std::vector<double> last(g.num_movements(), -1e9);
    for (const auto& e : log) {
      if (e.kind != EventKind::cross_intersection) continue;
      const auto mv = g.movement_index(g.link(e.link_from).id, g.link(e.link_to).id);
      CHECK(e.time - last[mv] >= 3600.0 / g.movement(mv).saturation_flow_vph - 1e-9);
      CHECK(tl.green_at(mv, e.time));
      last[mv] = e.time;
    }
  }
}

TEST_CASE("fixed-time departures recur with the cycle") {
  const auto g = crossing(60, 4, 28, 28);
  SimConfig cfg;
  cfg.horizon_s = 1800;
  const auto log = run(g, std::vector{ratio_demand({{"a", 1200}}, {{{"a", "b"}, 1.0}})}, cfg);
  std::vector<double> starts;
  double prev = -100;
  for (const auto& e : log)
    if (e.kind == EventKind::cross_intersection) {
      if (e.time - prev > 10) starts.push_back(e.time);
      prev = e.time;
    }
  REQUIRE(starts.size() > 10);
  for (std::size_t i = 3; i < starts.size(); ++i) CHECK(starts[i] - starts[i - 1] == doctest::Approx(60.0));
}

TEST_CASE("a platoon raises the downstream queue by its size") {
  // A serves r0 -> r1 for 20 s per 60 s cycle; B is red while the platoon arrives.
  std::vector<Node> nodes{{"A", 60, 40}, {"B", 60, 40}};
  std::vector<Link> links{{"r0", "", "A", 0.2, 200, 10, LinkKind::entry, 1},
                          {"r1", "A", "B", 0.3, 200, 15, LinkKind::internal, 1},
                          {"r2", "B", "", 0.2, 200, 10, LinkKind::exit, 1}};
  std::vector<Movement> moves{{"r0", "r1", 3600, true}, {"r1", "r2", 3600, true}};
  std::vector<TimingPlan> plans{{"A", {Stage{{{"r0", "r1", 20}}}}, 0.0}, {"B", {Stage{{{"r1", "r2", 20}}}}, 40.0}};
  const NetworkGraph g(nodes, links, moves, plans);
  SimConfig cfg;
  cfg.horizon_s = 1200;
  const auto log = run(g, std::vector{ratio_demand({{"r0", 1080}}, {{{"r0", "r1"}, 1.0}, {{"r1", "r2"}, 1.0}})}, cfg);

  // Per cycle: crossings at A in [60j, 60j+20) and joins at B before B turns green at 60j+40.
  for (int j = 5; j < 15; ++j) {
    const double t0 = 60.0 * j;
    int platoon = 0, joined = 0;
    for (const auto& e : log) {
      if (e.kind == EventKind::cross_intersection && g.link(e.link_from).id == "r0" && e.time >= t0 && e.time < t0 + 20)
        ++platoon;
      if (e.kind == EventKind::join_queue && g.link(e.link_from).id == "r1" && e.time >= t0 && e.time < t0 + 40)
        ++joined;
    }
    CHECK(platoon == 18);
    CHECK(joined == platoon);
  }
}

TEST_CASE("identical seeds give identical logs") {
  const auto doc = load("grid2x2.json");
  SimConfig cfg;
  cfg.horizon_s = 1200;
  cfg.arrivals = ArrivalProcess::poisson;
  cfg.travel_times = TravelTimeModel::exponential;
  cfg.seed = 99;
  const auto a = to_csv(doc.graph, run(doc.graph, doc.demands, cfg));
  const auto b = to_csv(doc.graph, run(doc.graph, doc.demands, cfg));
  CHECK(a == b);
  cfg.seed = 100;
  CHECK(a != to_csv(doc.graph, run(doc.graph, doc.demands, cfg)));

  std::istringstream is(a);
  std::vector<SimEvent> back;
  read_event_csv(is, doc.graph, [&](const SimEvent& e) { back.push_back(e); });
  CHECK(to_csv(doc.graph, back) == a);
}

TEST_CASE("a one-step sweep is a plain run") {
  const auto doc = load("grid2x2.json");
  SimConfig cfg;
  cfg.horizon_s = 1800;
  const auto plain = run(doc.graph, doc.demands, cfg);
  const std::vector<double> one{1.0};
  const auto sweep = loading_sweep(doc.graph, doc.demands, cfg, one, 0.5);
  CHECK(sweep.events == plain);
  REQUIRE(sweep.segments.size() == 1);
  CHECK(sweep.segments[0].end_event == plain.size());

  const std::vector<double> bad{1.0, 1.0};
  CHECK_THROWS_AS(loading_sweep(doc.graph, doc.demands, cfg, bad, 1.0), InputError);
}

TEST_CASE("max pressure moves green to the loaded approach") {
  const auto g = crossing(60, 4, 28, 28);
  const std::vector demand{ratio_demand({{"a", 1100}, {"d", 300}}, {{{"a", "b"}, 1.0}, {{"d", "e"}, 1.0}})};
  SimConfig cfg;
  cfg.horizon_s = 3600;
  const auto ft = total_queue(g, run(g, demand, cfg));
  cfg.controller = {ControlMode::max_pressure, 6};
  const auto mp = total_queue(g, run(g, demand, cfg));
  CHECK(ft.at(3599) > 150);
  CHECK(mp.max_between(1800, 3600) < 60);
}

TEST_CASE("bad configurations are input errors") {
  const auto g = crossing(60, 4, 28, 28);
  const std::vector demand{ratio_demand({{"a", 100}}, {{{"a", "b"}, 1.0}})};
  SimConfig cfg;
  cfg.horizon_s = 0;
  CHECK_THROWS_AS(run(g, demand, cfg), InputError);
  cfg.horizon_s = 100;
  cfg.controller = {ControlMode::max_pressure, 0};
  CHECK_THROWS_AS(run(g, demand, cfg), InputError);
  cfg.controller = {};
  CHECK_THROWS_AS(run(g, std::vector{ratio_demand({{"b", 100}}, {})}, cfg), InputError);
  CHECK_THROWS_AS(run(crossing(60, 4, 40, 40), demand, cfg), InputError);
}
