#include "artcal/diversion.hpp"

#include <algorithm>
#include <map>
#include <set>

#include "json.hpp"

namespace artcal {

namespace {

double route_extra(const std::set<std::size_t>& route, std::size_t mv, double d) {
  return route.contains(mv) ? d : 0.0;
}

double plan_budget(const NetworkGraph& g, const TimingPlan& plan) {
  const auto& n = g.node(g.node_index(plan.node_id));
  return n.cycle_time_s - n.lost_time_s;
}

double plan_green(const TimingPlan& plan) {
  double s = 0.0;
  for (const auto& st : plan.stages) s += st.duration_s();
  return s;
}

// Column layout of the re-timing LP: D first, then per plan its stage
// durations and phase greens.
struct RetimeLayout {
  struct PlanCols {
    std::size_t plan = 0;
    std::vector<Eigen::Index> stage;               // G_{n,i}
    std::vector<std::vector<Eigen::Index>> phase;  // g_{n,i,k}
  };
  std::vector<PlanCols> plans;
  Eigen::Index size = 1;
};

struct RetimeProblem {
  LinearProgram<double> lp;
  RetimeLayout layout;
  std::vector<std::pair<std::size_t, Eigen::Index>> capacity_rows;  // movement, inequality row
};

// `only` restricts the problem to one plan with D pinned at 0.
RetimeProblem build_retime_lp(const NetworkGraph& g, const FlowSolution& baseline,
                              const std::set<std::size_t>& route, std::optional<std::size_t> only) {
  RetimeProblem p;
  auto& lay = p.layout;
  for (std::size_t k = 0; k < g.plans().size(); ++k) {
    if (only && *only != k) continue;
    const auto& plan = g.plans()[k];
    RetimeLayout::PlanCols cols;
    cols.plan = k;
    for (const auto& st : plan.stages) {
      cols.stage.push_back(lay.size++);
      std::vector<Eigen::Index> ph;
      for (std::size_t i = 0; i < st.greens.size(); ++i) ph.push_back(lay.size++);
      cols.phase.push_back(std::move(ph));
    }
    lay.plans.push_back(std::move(cols));
  }

  auto& lp = p.lp;
  lp = LinearProgram<double>::nonnegative(lay.size, Sense::maximize);
  lp.objective(0) = 1.0;
  if (only) lp.upper(0) = 0.0;

  const Eigen::VectorXd zero = Eigen::VectorXd::Zero(lay.size);
  for (const auto& cols : lay.plans) {
    const auto& plan = g.plans()[cols.plan];
    Eigen::VectorXd budget = zero;
    for (std::size_t i = 0; i < plan.stages.size(); ++i) {
      budget(cols.stage[i]) = 1.0;
      for (auto c : cols.phase[i]) {
        Eigen::VectorXd row = zero;
        row(c) = 1.0;
        row(cols.stage[i]) = -1.0;
        lp.add_inequality(row, 0.0);
      }
    }
    lp.add_inequality(budget, plan_budget(g, plan));
  }

  std::map<std::size_t, const RetimeLayout::PlanCols*> by_node;
  for (const auto& cols : lay.plans) by_node[g.node_index(g.plans()[cols.plan].node_id)] = &cols;
  for (std::size_t mv = 0; mv < g.num_movements(); ++mv) {
    const auto node = g.movement_node(mv);
    if (node == kNone) continue;
    const auto it = by_node.find(node);
    if (it == by_node.end()) continue;  // unsignalized, or another plan when restricted
    const auto& m = g.movement(mv);
    const auto& plan = g.plans()[it->second->plan];
    Eigen::VectorXd row = zero;
    if (route.contains(mv)) row(0) = 1.0;
    if (m.allowed) {
      const double rate = m.saturation_flow_vph / g.node(node).cycle_time_s;
      for (std::size_t i = 0; i < plan.stages.size(); ++i)
        for (std::size_t k = 0; k < plan.stages[i].greens.size(); ++k) {
          const auto& ph = plan.stages[i].greens[k];
          if (ph.from_link == m.from_link && ph.to_link == m.to_link) row(it->second->phase[i][k]) -= rate;
        }
    }
    p.capacity_rows.emplace_back(mv, lp.ineq_matrix.rows());
    lp.add_inequality(row, -baseline.movement_flows(static_cast<Eigen::Index>(mv)));
  }
  return p;
}

}  // namespace

std::vector<std::size_t> route_movements(const NetworkGraph& g, std::span<const std::string> route) {
  if (route.size() < 2) throw InputError("a diversion route needs at least two links");
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i + 1 < route.size(); ++i) {
    auto mv = g.find_movement(route[i], route[i + 1]);
    if (!mv) throw InputError("route has no movement " + route[i] + " -> " + route[i + 1]);
    out.push_back(*mv);
  }
  return out;
}

DiversionResult max_simple_diversion(const NetworkGraph& g, const FlowSolution& baseline,
                                     std::span<const std::string> route, const DiversionOptions& options) {
  DiversionResult r;
  r.optimal_diversion = kInfinity;
  for (auto mv : route_movements(g, route)) {
    RouteMovement rm{mv, baseline.movement_flows(static_cast<Eigen::Index>(mv)), effective_capacity(g, mv)};
    if (rm.slack() < -options.feasibility_tolerance)
      throw InputError("baseline flow " + std::to_string(rm.baseline) + " exceeds capacity " +
                       std::to_string(rm.capacity) + " on movement " +
                       to_string(MovementKey{g.movement(mv).from_link, g.movement(mv).to_link}));
    r.optimal_diversion = std::min(r.optimal_diversion, std::max(0.0, rm.slack()));
    r.route.push_back(rm);
  }
  if (std::isfinite(r.optimal_diversion))
    for (const auto& rm : r.route)
      if (std::max(0.0, rm.slack()) <= r.optimal_diversion + options.binding_tolerance)
        r.binding_movements.push_back(rm.movement);
  return r;
}

LinearProgram<double> simple_diversion_lp(const NetworkGraph& g, const FlowSolution& baseline,
                                          std::span<const std::string> route) {
  auto lp = LinearProgram<double>::nonnegative(1, Sense::maximize);
  lp.objective(0) = 1.0;
  for (auto mv : route_movements(g, route)) {
    const double s = effective_capacity(g, mv);
    if (!std::isfinite(s)) continue;
    lp.add_inequality(Eigen::VectorXd::Ones(1), s - baseline.movement_flows(static_cast<Eigen::Index>(mv)));
  }
  return lp;
}

DiversionResult max_retimed_diversion(const NetworkGraph& g, const FlowSolution& baseline,
                                      std::span<const std::string> route, const DiversionOptions& options) {
  const auto moves = route_movements(g, route);
  const std::set<std::size_t> on_route(moves.begin(), moves.end());
  for (const auto& plan : g.plans()) {
    const double used = plan_green(plan), budget = plan_budget(g, plan);
    if (used > budget + 1e-9)
      throw InputError("timing plan at node '" + plan.node_id + "' uses " + std::to_string(used) +
                       " s of green, more than cycle minus lost time " + std::to_string(budget));
  }

  auto problem = build_retime_lp(g, baseline, on_route, std::nullopt);
  const auto sol = solve_lp(problem.lp, options.lp);
  if (sol.status == LpStatus::infeasible) {
    std::string nodes;
    for (std::size_t k = 0; k < g.plans().size(); ++k) {
      const auto alone = build_retime_lp(g, baseline, on_route, k);
      if (solve_lp(alone.lp, options.lp).status == LpStatus::infeasible)
        nodes += (nodes.empty() ? "" : ", ") + g.plans()[k].node_id;
    }
    if (nodes.empty()) nodes = "(unsignalized forbidden movement)";
    throw ComputationError("baseline flows exceed every re-split of green at node(s) " + nodes);
  }

  DiversionResult r;
  for (auto mv : moves)
    r.route.push_back({mv, baseline.movement_flows(static_cast<Eigen::Index>(mv)), effective_capacity(g, mv)});
  if (sol.status == LpStatus::unbounded) {
    r.optimal_diversion = kInfinity;
    return r;
  }
  r.optimal_diversion = std::max(0.0, sol.x(0));

  const Eigen::VectorXd slack = problem.lp.ineq_rhs - problem.lp.ineq_matrix * sol.x;
  for (const auto& [mv, row] : problem.capacity_rows)
    if (slack(row) <= options.binding_tolerance * std::max(1.0, std::abs(problem.lp.ineq_rhs(row))))
      r.binding_movements.push_back(mv);

  std::vector<TimingPlan> plans(g.plans().begin(), g.plans().end());
  for (const auto& cols : problem.layout.plans) {
    auto& plan = plans[cols.plan];
    double used = 0.0;
    for (auto c : cols.stage) used += sol.x(c);
    const double spare = std::max(0.0, plan_budget(g, plan) - used) / static_cast<double>(std::max<std::size_t>(1, cols.stage.size()));
    for (std::size_t i = 0; i < plan.stages.size(); ++i)
      for (auto& ph : plan.stages[i].greens) ph.duration_s = sol.x(cols.stage[i]) + spare;
  }
  r.new_plans = std::move(plans);
  return r;
}

PlanCheck check_retimed_plan(const NetworkGraph& g, const FlowSolution& baseline,
                             std::span<const std::size_t> route_moves, double diversion,
                             std::span<const TimingPlan> plans) {
  const std::set<std::size_t> on_route(route_moves.begin(), route_moves.end());
  PlanCheck c;
  c.worst_capacity_excess = -kInfinity;
  c.worst_budget_excess = -kInfinity;
  c.min_green = kInfinity;
  std::map<std::size_t, const TimingPlan*> by_node;
  for (const auto& p : plans) {
    by_node[g.node_index(p.node_id)] = &p;
    c.worst_budget_excess = std::max(c.worst_budget_excess, plan_green(p) - plan_budget(g, p));
    for (const auto& st : p.stages)
      for (const auto& ph : st.greens) c.min_green = std::min(c.min_green, ph.duration_s);
  }
  for (std::size_t mv = 0; mv < g.num_movements(); ++mv) {
    const auto node = g.movement_node(mv);
    if (node == kNone || !by_node.contains(node)) continue;
    const auto& m = g.movement(mv);
    const double s = m.allowed ? total_green(*by_node[node], m.from_link, m.to_link) * m.saturation_flow_vph /
                                     g.node(node).cycle_time_s
                               : 0.0;
    const double load = baseline.movement_flows(static_cast<Eigen::Index>(mv)) + route_extra(on_route, mv, diversion);
    c.worst_capacity_excess = std::max(c.worst_capacity_excess, load - s);
  }
  return c;
}

std::string diversion_to_json(const NetworkGraph& g, const DiversionResult& r) {
  using nlohmann::json;
  auto number = [](double v) -> json { return std::isfinite(v) ? json(v) : json("inf"); };
  json doc;
  doc["optimal_diversion"] = number(r.optimal_diversion);
  doc["route"] = json::array();
  for (const auto& rm : r.route) {
    const auto& m = g.movement(rm.movement);
    doc["route"].push_back({{"from", m.from_link},
                            {"to", m.to_link},
                            {"baseline", rm.baseline},
                            {"capacity", number(rm.capacity)},
                            {"slack", number(rm.slack())}});
  }
  doc["binding"] = json::array();
  for (auto mv : r.binding_movements)
    doc["binding"].push_back({{"from", g.movement(mv).from_link}, {"to", g.movement(mv).to_link}});
  if (r.new_plans) {
    json plans = json::array();
    for (const auto& p : *r.new_plans) {
      json stages = json::array();
      for (const auto& s : p.stages) {
        json phases = json::array();
        for (const auto& ph : s.greens)
          phases.push_back({{"from", ph.from_link}, {"to", ph.to_link}, {"green", ph.duration_s}});
        stages.push_back({{"phases", phases}});
      }
      plans.push_back({{"node", p.node_id}, {"offset", p.offset_s}, {"stages", stages}});
    }
    doc["timing_plans"] = plans;
  }
  return doc.dump(2) + "\n";
}

}  // namespace artcal
