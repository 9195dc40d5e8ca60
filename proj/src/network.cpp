#include "artcal/network.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <set>
#include <sstream>

namespace artcal {

namespace {

constexpr double kRatioTol = 1e-9;
constexpr double kBudgetTol = 1e-9;

bool is_virtual_endpoint(const std::string& id) { return id.empty() || id == kSuperNodeId; }

}  // namespace

std::string_view to_string(LinkKind kind) {
  switch (kind) {
    case LinkKind::entry: return "entry";
    case LinkKind::internal: return "internal";
    case LinkKind::exit: return "exit";
    case LinkKind::movement: return "movement";
  }
  return "internal";
}

std::optional<LinkKind> link_kind_from_string(std::string_view s) {
  if (s == "entry") return LinkKind::entry;
  if (s == "internal") return LinkKind::internal;
  if (s == "exit") return LinkKind::exit;
  if (s == "movement") return LinkKind::movement;
  return std::nullopt;
}

std::string to_string(const MovementKey& key) { return "(" + key.from + "," + key.to + ")"; }

double Stage::duration_s() const {
  double d = 0.0;
  for (const auto& p : greens) d = std::max(d, p.duration_s);
  return d;
}

// ---------------------------------------------------------------------------

NetworkGraph::NetworkGraph(std::vector<Node> nodes, std::vector<Link> links,
                           std::vector<Movement> movements, std::vector<TimingPlan> plans)
    : nodes_(std::move(nodes)),
      links_(std::move(links)),
      movements_(std::move(movements)),
      plans_(std::move(plans)) {
  for (std::size_t i = 0; i < nodes_.size(); ++i) {
    if (!node_ids_.emplace(nodes_[i].id, i).second)
      throw InputError("duplicate node id '" + nodes_[i].id + "'");
  }
  for (std::size_t i = 0; i < links_.size(); ++i) {
    if (!link_ids_.emplace(links_[i].id, i).second)
      throw InputError("duplicate link id '" + links_[i].id + "'");
  }

  auto endpoint = [&](const std::string& id) -> std::size_t {
    if (id.empty()) return kNone;
    auto it = node_ids_.find(id);
    return it == node_ids_.end() ? kNone : it->second;
  };
  tails_.resize(links_.size());
  heads_.resize(links_.size());
  in_links_.assign(nodes_.size(), {});
  out_links_.assign(nodes_.size(), {});
  for (std::size_t l = 0; l < links_.size(); ++l) {
    tails_[l] = endpoint(links_[l].from_node);
    heads_[l] = endpoint(links_[l].to_node);
    if (tails_[l] != kNone) out_links_[tails_[l]].push_back(l);
    if (heads_[l] != kNone) in_links_[heads_[l]].push_back(l);
  }

  out_moves_.assign(links_.size(), {});
  in_moves_.assign(links_.size(), {});
  mv_from_.resize(movements_.size());
  mv_to_.resize(movements_.size());
  for (std::size_t k = 0; k < movements_.size(); ++k) {
    const auto& m = movements_[k];
    auto from = find_link(m.from_link);
    auto to = find_link(m.to_link);
    if (!from || !to)
      throw InputError("movement " + to_string(MovementKey{m.from_link, m.to_link}) +
                       " references an unknown link");
    if (!movement_ids_.emplace(std::pair{*from, *to}, k).second)
      throw InputError("duplicate movement " + to_string(MovementKey{m.from_link, m.to_link}));
    mv_from_[k] = *from;
    mv_to_[k] = *to;
    out_moves_[*from].push_back(k);
    in_moves_[*to].push_back(k);
  }

  node_plan_.assign(nodes_.size(), kNone);
  for (std::size_t p = 0; p < plans_.size(); ++p) {
    auto n = find_node(plans_[p].node_id);
    if (!n) throw InputError("timing plan references unknown node '" + plans_[p].node_id + "'");
    if (node_plan_[*n] != kNone)
      throw InputError("node '" + plans_[p].node_id + "' has more than one timing plan");
    node_plan_[*n] = p;
  }
}

std::optional<std::size_t> NetworkGraph::find_node(std::string_view id) const {
  auto it = node_ids_.find(id);
  if (it == node_ids_.end()) return std::nullopt;
  return it->second;
}

std::optional<std::size_t> NetworkGraph::find_link(std::string_view id) const {
  auto it = link_ids_.find(id);
  if (it == link_ids_.end()) return std::nullopt;
  return it->second;
}

std::optional<std::size_t> NetworkGraph::find_movement(std::string_view from,
                                                       std::string_view to) const {
  auto f = find_link(from);
  auto t = find_link(to);
  if (!f || !t) return std::nullopt;
  auto it = movement_ids_.find({*f, *t});
  if (it == movement_ids_.end()) return std::nullopt;
  return it->second;
}

std::size_t NetworkGraph::node_index(std::string_view id) const {
  if (auto n = find_node(id)) return *n;
  throw InputError("unknown node '" + std::string(id) + "'");
}

std::size_t NetworkGraph::link_index(std::string_view id) const {
  if (auto l = find_link(id)) return *l;
  throw InputError("unknown link '" + std::string(id) + "'");
}

std::size_t NetworkGraph::movement_index(std::string_view from, std::string_view to) const {
  if (auto m = find_movement(from, to)) return *m;
  throw InputError("unknown movement " + to_string(MovementKey{std::string(from), std::string(to)}));
}

const TimingPlan* NetworkGraph::plan_for(std::size_t node) const {
  const auto p = node_plan_.at(node);
  return p == kNone ? nullptr : &plans_[p];
}

std::vector<std::size_t> NetworkGraph::entry_links() const {
  std::vector<std::size_t> out;
  for (std::size_t l = 0; l < links_.size(); ++l)
    if (links_[l].kind == LinkKind::entry) out.push_back(l);
  return out;
}

std::vector<std::size_t> NetworkGraph::exit_links() const {
  std::vector<std::size_t> out;
  for (std::size_t l = 0; l < links_.size(); ++l)
    if (links_[l].kind == LinkKind::exit) out.push_back(l);
  return out;
}

// ---------------------------------------------------------------------------
// Validation

namespace {

void validate_links(const NetworkGraph& g, std::vector<Violation>& out) {
  for (std::size_t l = 0; l < g.num_links(); ++l) {
    const Link& link = g.link(l);
    auto bad = [&](std::string msg) { out.push_back({link.id, std::move(msg)}); };
    const bool movement_link = link.kind == LinkKind::movement;
    if (movement_link ? link.length_mi < 0.0 : !(link.length_mi > 0.0)) bad("length must be > 0");
    if (!movement_link) {
      if (!(link.storage_capacity >= 1.0)) bad("storage capacity must be >= 1");
      if (!(link.travel_time_s > 0.0)) bad("travel time must be > 0");
    }
    if (link.lanes < 1) bad("lanes must be >= 1");

    if (!link.from_node.empty() && g.tail(l) == kNone)
      bad("orphan link: unknown from-node '" + link.from_node + "'");
    if (!link.to_node.empty() && g.head(l) == kNone)
      bad("orphan link: unknown to-node '" + link.to_node + "'");

    const bool virtual_tail = is_virtual_endpoint(link.from_node);
    const bool virtual_head = is_virtual_endpoint(link.to_node);
    if (link.kind == LinkKind::entry && !virtual_tail)
      bad("entry link must start at the virtual source");
    if (link.kind != LinkKind::entry && link.from_node.empty())
      bad("only entry links may start at the virtual source");
    if (link.kind == LinkKind::exit && !virtual_head)
      bad("exit link must end at the virtual sink");
    if (link.kind != LinkKind::exit && link.to_node.empty())
      bad("only exit links may end at the virtual sink");

    if (link.kind == LinkKind::entry && !g.movements_into(l).empty())
      bad("entry link has upstream movements");
    if (link.kind == LinkKind::exit && !g.movements_from(l).empty())
      bad("exit link has downstream movements");
    if (link.kind != LinkKind::exit && g.movements_from(l).empty())
      bad("orphan link: no downstream movement");
    if (link.kind != LinkKind::entry && g.movements_into(l).empty())
      bad("orphan link: no upstream movement");
  }
}

void validate_movements(const NetworkGraph& g, std::vector<Violation>& out) {
  for (std::size_t k = 0; k < g.num_movements(); ++k) {
    const Movement& m = g.movement(k);
    const std::string subject = to_string(MovementKey{m.from_link, m.to_link});
    const auto via = g.head(g.movement_from(k));
    if (via == kNone || via != g.tail(g.movement_to(k)))
      out.push_back({subject, "from-link and to-link do not share a node"});
    if (m.allowed && !(m.saturation_flow_vph > 0.0))
      out.push_back({subject, "missing saturation flow"});
  }
}

void validate_nodes_and_plans(const NetworkGraph& g, std::vector<Violation>& out) {
  for (std::size_t n = 0; n < g.num_nodes(); ++n) {
    const Node& node = g.node(n);
    if (node.id == kSuperNodeId) continue;
    if (g.incoming(n).empty() && g.outgoing(n).empty()) {
      out.push_back({node.id, "isolated node"});
      continue;
    }
    const TimingPlan* plan = g.plan_for(n);
    if (plan == nullptr) continue;
    if (!(node.cycle_time_s > node.lost_time_s && node.lost_time_s >= 0.0))
      out.push_back({node.id, "cycle time must exceed lost time >= 0"});
    if (g.incoming(n).empty() || g.outgoing(n).empty())
      out.push_back({node.id, "signalized node needs incoming and outgoing links"});

    double budget_used = 0.0;
    for (std::size_t i = 0; i < plan->stages.size(); ++i) {
      for (const auto& phase : plan->stages[i].greens) {
        const std::string subject = to_string(MovementKey{phase.from_link, phase.to_link});
        auto mv = g.find_movement(phase.from_link, phase.to_link);
        if (!mv) {
          out.push_back({subject, "timing plan of node '" + node.id + "' names an unknown movement"});
          continue;
        }
        if (g.movement_node(*mv) != n)
          out.push_back({subject, "phase does not belong to node '" + node.id + "'"});
        if (!g.movement(*mv).allowed && phase.duration_s > 0.0)
          out.push_back({subject, "forbidden movement is actuated"});
        if (phase.duration_s < 0.0) out.push_back({subject, "negative green duration"});
      }
      budget_used += plan->stages[i].duration_s();
    }
    const double budget = node.cycle_time_s - node.lost_time_s;
    if (budget_used > budget + kBudgetTol) {
      std::ostringstream msg;
      msg << "stage durations " << budget_used << " s exceed cycle minus lost time " << budget << " s";
      out.push_back({node.id, msg.str()});
    }
  }
}

void validate_demand(const NetworkGraph& g, const CommodityDemand& d, std::vector<Violation>& out) {
  const std::string subject = "commodity " + std::to_string(d.index);
  for (const auto& [id, flow] : d.entry_flows_vph) {
    auto l = g.find_link(id);
    if (!l || g.link(*l).kind != LinkKind::entry)
      out.push_back({subject, "demand on '" + id + "', which is not an entry link"});
    if (!(flow >= 0.0)) out.push_back({subject, "negative demand on '" + id + "'"});
  }

  if (d.fixed_route()) {
    auto first = g.find_link(d.route.front());
    auto last = g.find_link(d.route.back());
    if (!first || g.link(*first).kind != LinkKind::entry)
      out.push_back({subject, "route does not start at an entry link"});
    if (!last || g.link(*last).kind != LinkKind::exit)
      out.push_back({subject, "route does not end at an exit link"});
    for (std::size_t i = 0; i + 1 < d.route.size(); ++i) {
      auto mv = g.find_movement(d.route[i], d.route[i + 1]);
      if (!mv || !g.movement(*mv).allowed)
        out.push_back({subject, "route is not connected at " +
                                    to_string(MovementKey{d.route[i], d.route[i + 1]})});
    }
    return;
  }

  // Ratio sums per link that has any ratio.
  std::map<std::string, double> sums;
  for (const auto& [key, r] : d.turn_ratios) {
    auto mv = g.find_movement(key.from, key.to);
    if (!mv) {
      out.push_back({subject, "turn ratio on unknown movement " + to_string(key)});
      continue;
    }
    if (!(r >= 0.0 && r <= 1.0)) out.push_back({to_string(key), "turn ratio outside [0,1]"});
    if (!g.movement(*mv).allowed) {
      if (r > 0.0) out.push_back({to_string(key), "positive turn ratio on forbidden movement"});
      continue;
    }
    sums[key.from] += r;
  }
  for (const auto& [link, s] : sums) {
    if (std::abs(s - 1.0) > kRatioTol) {
      std::ostringstream msg;
      msg << "turn ratios sum to " << s << " (" << subject << ")";
      out.push_back({link, msg.str()});
    }
  }

  // Every link that can carry this commodity needs a ratio set.
  std::vector<bool> seen(g.num_links(), false);
  std::deque<std::size_t> frontier;
  for (const auto& [id, flow] : d.entry_flows_vph) {
    auto l = g.find_link(id);
    if (l && flow > 0.0 && !seen[*l]) {
      seen[*l] = true;
      frontier.push_back(*l);
    }
  }
  while (!frontier.empty()) {
    const auto l = frontier.front();
    frontier.pop_front();
    const Link& link = g.link(l);
    if (link.kind == LinkKind::exit) continue;
    if (!sums.contains(link.id)) {
      out.push_back({link.id, "link carries " + subject + " but has no turn ratios"});
      continue;
    }
    for (auto mv : g.movements_from(l)) {
      const auto& m = g.movement(mv);
      auto it = d.turn_ratios.find(MovementKey{m.from_link, m.to_link});
      if (it == d.turn_ratios.end() || !(it->second > 0.0)) continue;
      const auto to = g.movement_to(mv);
      if (!seen[to]) {
        seen[to] = true;
        frontier.push_back(to);
      }
    }
  }
}

}  // namespace

ValidationReport validate_network(const NetworkGraph& g, std::span<const CommodityDemand> demands) {
  ValidationReport report;
  if (g.num_nodes() == 0) {
    report.violations.push_back({"network", "no nodes"});
    return report;
  }
  validate_links(g, report.violations);
  validate_movements(g, report.violations);
  validate_nodes_and_plans(g, report.violations);
  for (const auto& d : demands) validate_demand(g, d, report.violations);
  return report;
}

// ---------------------------------------------------------------------------
// Capacity

double total_green(const TimingPlan& plan, std::string_view from, std::string_view to) {
  double green = 0.0;
  for (const auto& stage : plan.stages)
    for (const auto& p : stage.greens)
      if (p.from_link == from && p.to_link == to) green += p.duration_s;
  return green;
}

double saturation_capacity(const NetworkGraph& g, std::size_t movement) {
  if (movement >= g.num_movements())
    throw InputError("unknown movement index " + std::to_string(movement));
  const Movement& m = g.movement(movement);
  const auto node = g.movement_node(movement);
  const TimingPlan* plan = node == kNone ? nullptr : g.plan_for(node);
  if (plan == nullptr)
    throw InputError("no timing plan at the node of movement " +
                     to_string(MovementKey{m.from_link, m.to_link}));
  const double cycle = g.node(node).cycle_time_s;
  if (!(cycle > 0.0))
    throw InputError("node '" + g.node(node).id + "' has a non-positive cycle time");
  return total_green(*plan, m.from_link, m.to_link) * m.saturation_flow_vph / cycle;
}

double saturation_capacity(const NetworkGraph& g, std::string_view from, std::string_view to) {
  return saturation_capacity(g, g.movement_index(from, to));
}

double effective_capacity(const NetworkGraph& g, std::size_t movement) {
  const Movement& m = g.movement(movement);
  if (!m.allowed) return 0.0;
  const auto node = g.movement_node(movement);
  if (node == kNone || g.plan_for(node) == nullptr) return kInfinity;
  return saturation_capacity(g, movement);
}

// ---------------------------------------------------------------------------
// Augmentations

namespace {

struct Reach {
  std::vector<bool> forward, backward;
};

Reach reachability(const NetworkGraph& g, std::size_t root) {
  Reach r{std::vector<bool>(g.num_nodes(), false), std::vector<bool>(g.num_nodes(), false)};
  auto sweep = [&](std::vector<bool>& seen, bool forward) {
    std::deque<std::size_t> q{root};
    seen[root] = true;
    while (!q.empty()) {
      const auto n = q.front();
      q.pop_front();
      const auto links = forward ? g.outgoing(n) : g.incoming(n);
      for (auto l : links) {
        const auto next = forward ? g.head(l) : g.tail(l);
        if (next != kNone && !seen[next]) {
          seen[next] = true;
          q.push_back(next);
        }
      }
    }
  };
  sweep(r.forward, true);
  sweep(r.backward, false);
  return r;
}

}  // namespace

bool is_strongly_connected(const NetworkGraph& g) {
  if (g.num_nodes() == 0) return false;
  const auto root = g.find_node(kSuperNodeId).value_or(0);
  const Reach r = reachability(g, root);
  for (std::size_t n = 0; n < g.num_nodes(); ++n)
    if (!r.forward[n] || !r.backward[n]) return false;
  return true;
}

SuperNodeAugmentation augment_with_super_node(const NetworkGraph& g) {
  if (g.find_node(kSuperNodeId))
    throw InputError("network already contains a node with the reserved id '0'");

  std::vector<Node> nodes;
  nodes.reserve(g.num_nodes() + 1);
  nodes.push_back(Node{std::string(kSuperNodeId), 0.0, 0.0});
  nodes.insert(nodes.end(), g.nodes().begin(), g.nodes().end());

  std::vector<Link> links(g.links().begin(), g.links().end());
  bool any_boundary = false;
  for (auto& l : links) {
    if (l.kind == LinkKind::entry) {
      l.from_node = std::string(kSuperNodeId);
      any_boundary = true;
    }
    if (l.kind == LinkKind::exit) {
      l.to_node = std::string(kSuperNodeId);
      any_boundary = true;
    }
  }

  SuperNodeAugmentation out;
  out.graph = NetworkGraph(std::move(nodes), std::move(links),
                           {g.movements().begin(), g.movements().end()},
                           {g.plans().begin(), g.plans().end()});
  out.super_node_isolated = !any_boundary;

  const NetworkGraph& a = out.graph;
  const Reach r = reachability(a, 0);
  out.strongly_connected = true;
  for (std::size_t n = 0; n < a.num_nodes(); ++n) {
    if (!r.forward[n] || !r.backward[n]) {
      out.strongly_connected = false;
      out.unreachable_nodes.push_back(a.node(n).id);
    }
  }
  for (std::size_t l = 0; l < a.num_links(); ++l) {
    const auto t = a.tail(l), h = a.head(l);
    if (t == kNone || h == kNone || !r.forward[t] || !r.backward[h])
      out.links_off_path.push_back(a.link(l).id);
  }
  return out;
}

TurnMovementAugmentation augment_turn_movements(const NetworkGraph& g,
                                                std::span<const MovementKey> movements,
                                                ForbiddenMovementPolicy policy) {
  // Group requested movement indices by from-link.
  std::map<std::size_t, std::set<std::size_t>> requested;
  for (const auto& key : movements) {
    auto mv = g.find_movement(key.from, key.to);
    if (!mv) throw InputError("movement " + to_string(key) + " is not in the graph");
    requested[g.movement_from(*mv)].insert(*mv);
  }

  TurnMovementAugmentation out;
  if (requested.empty()) {
    out.graph = g;
    return out;
  }
  std::vector<Node> nodes(g.nodes().begin(), g.nodes().end());
  std::vector<Link> links(g.links().begin(), g.links().end());
  std::vector<Movement> moves;
  for (std::size_t k = 0; k < g.num_movements(); ++k)
    if (!requested.contains(g.movement_from(k))) moves.push_back(g.movement(k));

  for (const auto& [l, chosen] : requested) {
    const Link& link = g.link(l);
    if (g.head(l) == kNone) throw InputError("link '" + link.id + "' has no downstream node");
    const std::string node_id = link.to_node;
    const std::string split_id = node_id + "~" + link.id;
    nodes.push_back(Node{split_id, 0.0, 0.0});
    links[l].to_node = split_id;

    auto make_link = [&](std::string id) {
      Link m;
      m.id = std::move(id);
      m.from_node = split_id;
      m.to_node = node_id;
      m.length_mi = 0.0;
      m.storage_capacity = link.storage_capacity;
      m.travel_time_s = 0.0;
      m.kind = LinkKind::movement;
      m.lanes = link.lanes;
      return m;
    };

    bool need_remainder = false;
    for (auto mv : g.movements_from(l)) {
      const Movement& m = g.movement(mv);
      if (!chosen.contains(mv)) {
        need_remainder = need_remainder || m.allowed;
        continue;
      }
      if (!m.allowed && policy == ForbiddenMovementPolicy::remove) continue;
      const std::string id = m.from_link + ">" + m.to_link;
      links.push_back(make_link(id));
      out.movement_links.emplace(MovementKey{m.from_link, m.to_link}, id);
      if (!m.allowed) out.zero_flow_links.push_back(id);
      moves.push_back(Movement{m.from_link, id, m.saturation_flow_vph, m.allowed});
      moves.push_back(Movement{id, m.to_link, m.saturation_flow_vph, m.allowed});
    }
    if (need_remainder) {
      const std::string id = link.id + ">*";
      links.push_back(make_link(id));
      out.remainder_links.emplace(link.id, id);
      moves.push_back(Movement{link.id, id, 0.0, true});
      for (auto mv : g.movements_from(l)) {
        const Movement& m = g.movement(mv);
        if (!chosen.contains(mv) && m.allowed)
          moves.push_back(Movement{id, m.to_link, m.saturation_flow_vph, true});
      }
    }
  }

  out.graph = NetworkGraph(std::move(nodes), std::move(links), std::move(moves), {});
  return out;
}

// ---------------------------------------------------------------------------
// Steady-state flows

RatioVector ratio_vector(const NetworkGraph& g, const std::map<MovementKey, double>& ratios) {
  RatioVector r = RatioVector::Zero(static_cast<Eigen::Index>(g.num_movements()));
  for (const auto& [key, value] : ratios)
    r(static_cast<Eigen::Index>(g.movement_index(key.from, key.to))) = value;
  return r;
}

SteadyFlows propagate_flows(const NetworkGraph& g, const Eigen::VectorXd& entry_demand,
                            const RatioVector& ratios) {
  const auto nl = static_cast<Eigen::Index>(g.num_links());
  Eigen::MatrixXd system = Eigen::MatrixXd::Identity(nl, nl);
  for (std::size_t k = 0; k < g.num_movements(); ++k) {
    const auto from = static_cast<Eigen::Index>(g.movement_from(k));
    const auto to = static_cast<Eigen::Index>(g.movement_to(k));
    system(to, from) -= ratios(static_cast<Eigen::Index>(k));
  }
  Eigen::FullPivLU<Eigen::MatrixXd> lu(system);
  if (!lu.isInvertible())
    throw ComputationError("turn ratios trap flow in a closed cycle; steady state undefined");

  SteadyFlows out;
  out.link = lu.solve(entry_demand);
  out.movement.resize(static_cast<Eigen::Index>(g.num_movements()));
  for (std::size_t k = 0; k < g.num_movements(); ++k) {
    const auto i = static_cast<Eigen::Index>(k);
    out.movement(i) = ratios(i) * out.link(static_cast<Eigen::Index>(g.movement_from(k)));
  }
  return out;
}

SteadyFlows commodity_flows(const NetworkGraph& g, const CommodityDemand& demand) {
  const auto nl = static_cast<Eigen::Index>(g.num_links());
  if (!demand.fixed_route()) {
    Eigen::VectorXd d = Eigen::VectorXd::Zero(nl);
    for (const auto& [id, flow] : demand.entry_flows_vph)
      d(static_cast<Eigen::Index>(g.link_index(id))) += flow;
    return propagate_flows(g, d, ratio_vector(g, demand.turn_ratios));
  }

  const auto& route = demand.route;
  for (const auto& [id, flow] : demand.entry_flows_vph) {
    if (id != route.front())
      throw InputError("route commodity " + std::to_string(demand.index) +
                       " has demand on '" + id + "' off its route start");
  }
  auto it = demand.entry_flows_vph.find(route.front());
  const double flow = it == demand.entry_flows_vph.end() ? 0.0 : it->second;

  SteadyFlows out{Eigen::VectorXd::Zero(nl),
                  Eigen::VectorXd::Zero(static_cast<Eigen::Index>(g.num_movements()))};
  for (std::size_t i = 0; i < route.size(); ++i) {
    out.link(static_cast<Eigen::Index>(g.link_index(route[i]))) += flow;
    if (i + 1 < route.size())
      out.movement(static_cast<Eigen::Index>(g.movement_index(route[i], route[i + 1]))) += flow;
  }
  return out;
}

AggregateRouting aggregate_commodities(std::span<const CommodityDemand> demands,
                                       const NetworkGraph& g) {
  const auto nl = static_cast<Eigen::Index>(g.num_links());
  const auto nm = static_cast<Eigen::Index>(g.num_movements());
  AggregateRouting out;
  out.link_flows = Eigen::VectorXd::Zero(nl);
  out.entry_demand = Eigen::VectorXd::Zero(nl);
  Eigen::VectorXd movement_flows = Eigen::VectorXd::Zero(nm);

  for (const auto& d : demands) {
    const SteadyFlows f = commodity_flows(g, d);
    out.link_flows += f.link;
    movement_flows += f.movement;
    for (const auto& [id, flow] : d.entry_flows_vph)
      out.entry_demand(static_cast<Eigen::Index>(g.link_index(id))) += flow;
  }

  // Summing r^p f^p_l over commodities is the same as summing f^p(l,m).
  out.ratios = RatioVector::Zero(nm);
  std::vector<bool> flagged(g.num_links(), false);
  for (std::size_t k = 0; k < g.num_movements(); ++k) {
    const auto from = g.movement_from(k);
    const double total = out.link_flows(static_cast<Eigen::Index>(from));
    if (total > 0.0) {
      out.ratios(static_cast<Eigen::Index>(k)) = movement_flows(static_cast<Eigen::Index>(k)) / total;
    } else if (!flagged[from]) {
      flagged[from] = true;
      out.zero_flow_links.push_back(g.link(from).id);
    }
  }
  return out;
}

}  // namespace artcal
