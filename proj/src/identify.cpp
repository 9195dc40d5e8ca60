#include "artcal/identify.hpp"

#include <algorithm>
#include <deque>
#include <limits>
#include <numeric>
#include <ostream>

#include "artcal/csv.hpp"
#include "artcal/simplex.hpp"

namespace artcal {

std::string_view to_string(FlowStatus s) {
  switch (s) {
    case FlowStatus::measured: return "measured";
    case FlowStatus::identified: return "identified";
    case FlowStatus::undetermined: return "undetermined";
  }
  return "?";
}

std::size_t IdentifiabilityReport::count(FlowStatus s) const {
  return static_cast<std::size_t>(std::count(status.begin(), status.end(), s));
}

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

void require_closed_graph(const NetworkGraph& g) {
  for (std::size_t l = 0; l < g.num_links(); ++l)
    if (g.tail(l) == kNone || g.head(l) == kNone)
      throw InputError("link '" + g.link(l).id + "' has a virtual endpoint; add the super node first");
  if (!is_strongly_connected(g)) throw InputError("graph is not strongly connected");
}

std::vector<std::string> node_ids(const NetworkGraph& g, const std::vector<std::size_t>& nodes) {
  std::vector<std::string> out;
  for (auto n : nodes) out.push_back(g.node(n).id);
  return out;
}

std::string join(const std::vector<std::string>& xs) {
  std::string s;
  for (const auto& x : xs) s += (s.empty() ? "" : ",") + x;
  return s;
}

// Bridges of the undirected multigraph formed by the links with `in_set`.
std::vector<std::size_t> bridges(const NetworkGraph& g, const std::vector<bool>& in_set) {
  const std::size_t n = g.num_nodes();
  std::vector<std::vector<std::pair<std::size_t, std::size_t>>> adj(n);
  for (std::size_t l = 0; l < g.num_links(); ++l) {
    if (!in_set[l] || g.tail(l) == g.head(l)) continue;
    adj[g.tail(l)].emplace_back(g.head(l), l);
    adj[g.head(l)].emplace_back(g.tail(l), l);
  }
  std::vector<int> disc(n, -1), low(n, 0);
  int timer = 0;
  struct Frame {
    std::size_t v, parent_link, next;
  };
  std::vector<Frame> stack;
  std::vector<std::size_t> out;
  for (std::size_t root = 0; root < n; ++root) {
    if (disc[root] >= 0) continue;
    disc[root] = low[root] = timer++;
    stack.push_back({root, kNone, 0});
    while (!stack.empty()) {
      Frame& f = stack.back();
      if (f.next < adj[f.v].size()) {
        const auto [w, l] = adj[f.v][f.next++];
        if (l == f.parent_link) continue;
        if (disc[w] < 0) {
          disc[w] = low[w] = timer++;
          stack.push_back({w, l, 0});
        } else {
          low[f.v] = std::min(low[f.v], disc[w]);
        }
        continue;
      }
      const Frame done = f;
      stack.pop_back();
      if (stack.empty()) continue;
      Frame& p = stack.back();
      low[p.v] = std::min(low[p.v], low[done.v]);
      if (low[done.v] > disc[p.v]) out.push_back(done.parent_link);
    }
  }
  return out;
}

// Connected node sets under the links with `in_set`; every node appears once.
std::vector<std::vector<std::size_t>> node_components(const NetworkGraph& g, const std::vector<bool>& in_set,
                                                      std::vector<std::size_t>* label = nullptr) {
  const std::size_t n = g.num_nodes();
  std::vector<std::size_t> parent(n);
  std::iota(parent.begin(), parent.end(), 0);
  auto find = [&](std::size_t x) {
    while (parent[x] != x) x = parent[x] = parent[parent[x]];
    return x;
  };
  for (std::size_t l = 0; l < g.num_links(); ++l)
    if (in_set[l]) parent[find(g.tail(l))] = find(g.head(l));
  std::map<std::size_t, std::size_t> index;
  std::vector<std::vector<std::size_t>> out;
  if (label) label->assign(n, 0);
  for (std::size_t v = 0; v < n; ++v) {
    auto [it, fresh] = index.emplace(find(v), out.size());
    if (fresh) out.emplace_back();
    out[it->second].push_back(v);
    if (label) (*label)[v] = it->second;
  }
  return out;
}

class Closure {
 public:
  Closure(const NetworkGraph& g, std::span<const FlowRelation> relations, double tol)
      : g_(g), relations_(relations), tol_(tol) {
    status_.assign(g.num_links(), FlowStatus::undetermined);
    value_.assign(g.num_links(), kNaN);
    for (const auto& r : relations)
      for (const auto& [l, c] : r.terms)
        if (l >= g.num_links()) throw InputError("relation '" + r.label + "' references an unknown link");
  }

  void measure(std::size_t l, double v) {
    if (l >= g_.num_links()) throw InputError("measured link index out of range");
    status_[l] = FlowStatus::measured;
    value_[l] = v;
  }

  bool known(std::size_t l) const { return status_[l] != FlowStatus::undetermined; }

  void run() {
    for (bool changed = true; changed;) {
      changed = false;
      for (const auto& r : relations_) changed = solve_relation(r) || changed;
      std::vector<bool> unknown(g_.num_links());
      for (std::size_t l = 0; l < g_.num_links(); ++l) unknown[l] = !known(l);
      for (auto e : bridges(g_, unknown)) {
        impute_bridge(e, unknown);
        unknown[e] = false;
        changed = true;
      }
    }
  }

  // Cutset sums of every undetermined component and every fully known
  // relation must vanish; imputed flows must be nonnegative.
  void check_consistency() const {
    std::vector<bool> unknown(g_.num_links());
    for (std::size_t l = 0; l < g_.num_links(); ++l) unknown[l] = !known(l);
    std::vector<std::size_t> label;
    const auto comps = node_components(g_, unknown, &label);
    std::vector<double> sum(comps.size(), 0.0), scale(comps.size(), 0.0);
    for (std::size_t l = 0; l < g_.num_links(); ++l) {
      if (unknown[l]) continue;
      const auto t = label[g_.tail(l)], h = label[g_.head(l)];
      if (t == h) continue;
      sum[t] += value_[l];
      sum[h] -= value_[l];
      scale[t] += std::abs(value_[l]);
      scale[h] += std::abs(value_[l]);
    }
    for (std::size_t c = 0; c < comps.size(); ++c) {
      if (std::abs(sum[c]) > tol_ * std::max(1.0, scale[c])) {
        auto ids = node_ids(g_, comps[c]);
        throw InconsistentMeasurements("measurements violate conservation around nodes {" + join(ids) +
                                           "}: net outflow " + format_number(sum[c]) + " vph",
                                       ids);
      }
    }
    for (const auto& r : relations_) {
      double s = 0.0, sc = 0.0;
      bool complete = true;
      for (const auto& [l, c] : r.terms) {
        if (!known(l)) {
          complete = complete && c == 0.0;
          continue;
        }
        s += c * value_[l];
        sc += std::abs(c * value_[l]);
      }
      if (complete && std::abs(s) > tol_ * std::max(1.0, sc))
        throw InconsistentMeasurements("measurements violate relation " + r.label + " (residual " +
                                           format_number(s) + ")",
                                       {});
    }
    double largest = 1.0;
    for (std::size_t l = 0; l < g_.num_links(); ++l)
      if (status_[l] == FlowStatus::measured) largest = std::max(largest, std::abs(value_[l]));
    for (std::size_t l = 0; l < g_.num_links(); ++l)
      if (status_[l] == FlowStatus::identified && value_[l] < -tol_ * largest)
        throw InconsistentMeasurements("imputed flow on '" + g_.link(l).id + "' is negative (" +
                                           format_number(value_[l]) + " vph)",
                                       {});
  }

  IdentifiabilityReport report(bool with_values) const {
    IdentifiabilityReport r;
    r.status = status_;
    if (with_values) {
      r.flows = value_;
      for (std::size_t l = 0; l < g_.num_links(); ++l)
        if (!known(l)) r.flows[l] = kNaN;
    }
    std::vector<bool> und(g_.num_links());
    for (std::size_t l = 0; l < g_.num_links(); ++l) und[l] = !known(l);
    std::vector<std::size_t> label;
    const auto comps = node_components(g_, und, &label);
    std::vector<UndeterminedComponent> grouped(comps.size());
    for (std::size_t c = 0; c < comps.size(); ++c) grouped[c].nodes = comps[c];
    for (std::size_t l = 0; l < g_.num_links(); ++l)
      if (und[l]) grouped[label[g_.tail(l)]].links.push_back(l);
    for (auto& c : grouped)
      if (!c.links.empty()) {
        r.required_additional_count += c.required();
        r.components.push_back(std::move(c));
      }
    r.suggested_measurements = minimal_additional_measurements(g_, r);
    return r;
  }

 private:
  bool solve_relation(const FlowRelation& r) {
    std::size_t unknown = kNone;
    double coef = 0.0, rest = 0.0;
    for (const auto& [l, c] : r.terms) {
      if (c == 0.0) continue;
      if (known(l)) {
        rest += c * value_[l];
      } else if (unknown == kNone || unknown == l) {
        unknown = l;
        coef += c;
      } else {
        return false;
      }
    }
    if (unknown == kNone || coef == 0.0) return false;
    status_[unknown] = FlowStatus::identified;
    value_[unknown] = -rest / coef;
    return true;
  }

  // f_e = (known inflow to B) - (known outflow from B, other than e), where B
  // is the side of e holding its tail once e is removed from the unknowns.
  void impute_bridge(std::size_t e, const std::vector<bool>& unknown) {
    std::vector<bool> in_b(g_.num_nodes(), false);
    std::vector<std::vector<std::size_t>> adj(g_.num_nodes());
    for (std::size_t l = 0; l < g_.num_links(); ++l) {
      if (!unknown[l] || l == e) continue;
      adj[g_.tail(l)].push_back(g_.head(l));
      adj[g_.head(l)].push_back(g_.tail(l));
    }
    std::deque<std::size_t> queue{g_.tail(e)};
    in_b[g_.tail(e)] = true;
    while (!queue.empty()) {
      const auto v = queue.front();
      queue.pop_front();
      for (auto w : adj[v])
        if (!in_b[w]) {
          in_b[w] = true;
          queue.push_back(w);
        }
    }
    double f = 0.0;
    for (std::size_t l = 0; l < g_.num_links(); ++l) {
      if (l == e || unknown[l]) continue;
      const bool t = in_b[g_.tail(l)], h = in_b[g_.head(l)];
      if (h && !t) f += value_[l];
      if (t && !h) f -= value_[l];
    }
    status_[e] = FlowStatus::identified;
    value_[e] = f;
  }

  const NetworkGraph& g_;
  std::span<const FlowRelation> relations_;
  double tol_;
  std::vector<FlowStatus> status_;
  std::vector<double> value_;
};

double weighted_mean(const std::vector<WeightedValue>& vs) {
  double s = 0.0, w = 0.0;
  for (const auto& v : vs) {
    s += v.weight * v.value;
    w += v.weight;
  }
  return s / w;
}

}  // namespace

IdentifiabilityReport identifiable_links(const NetworkGraph& g, const std::set<std::size_t>& measured,
                                         std::span<const FlowRelation> relations) {
  require_closed_graph(g);
  Closure c(g, relations, 0.0);
  for (auto l : measured) c.measure(l, 0.0);
  c.run();
  return c.report(false);
}

IdentifiabilityReport impute_flows(const NetworkGraph& g, const std::map<std::size_t, double>& measured,
                                   std::span<const FlowRelation> relations, const IdentifyOptions& options) {
  require_closed_graph(g);
  Closure c(g, relations, options.tolerance);
  for (const auto& [l, v] : measured) {
    if (!std::isfinite(v) || v < 0.0)
      throw InputError("measured flow on '" + g.link(l).id + "' must be finite and nonnegative");
    c.measure(l, v);
  }
  c.run();
  c.check_consistency();
  return c.report(true);
}

std::vector<std::size_t> minimal_additional_measurements(const NetworkGraph& g,
                                                         const IdentifiabilityReport& report) {
  std::vector<std::size_t> out;
  const auto super = g.find_node(kSuperNodeId);
  auto by_id = [&](std::size_t a, std::size_t b) { return g.link(a).id < g.link(b).id; };
  for (const auto& comp : report.components) {
    std::map<std::size_t, std::vector<std::size_t>> incident;
    for (auto l : comp.links) {
      incident[g.tail(l)].push_back(l);
      if (g.head(l) != g.tail(l)) incident[g.head(l)].push_back(l);
    }
    for (auto& [v, ls] : incident) std::sort(ls.begin(), ls.end(), by_id);
    std::size_t root = comp.nodes.front();
    if (super && std::find(comp.nodes.begin(), comp.nodes.end(), *super) != comp.nodes.end()) root = *super;

    std::set<std::size_t> visited{root};
    std::set<std::size_t> tree;
    std::deque<std::size_t> queue{root};
    while (!queue.empty()) {
      const auto v = queue.front();
      queue.pop_front();
      for (auto l : incident[v]) {
        const auto w = g.tail(l) == v ? g.head(l) : g.tail(l);
        if (visited.insert(w).second) {
          tree.insert(l);
          queue.push_back(w);
        }
      }
    }
    for (auto l : comp.links)
      if (!tree.contains(l)) out.push_back(l);
  }
  std::sort(out.begin(), out.end(), by_id);
  return out;
}

std::vector<FlowRelation> turn_ratio_relations(const NetworkGraph& g, const TurnMovementAugmentation& aug,
                                               const std::map<MovementKey, double>& ratios) {
  std::vector<FlowRelation> out;
  std::map<std::string, double> sums;
  for (const auto& [key, r] : ratios) {
    if (!(r >= 0.0 && r <= 1.0)) throw InputError("turn ratio " + to_string(key) + " outside [0,1]");
    auto it = aug.movement_links.find(key);
    if (it == aug.movement_links.end())
      throw InputError("turn ratio on " + to_string(key) + " but that movement is not split into a link");
    FlowRelation rel;
    rel.label = "r" + to_string(key);
    rel.terms = {{g.link_index(it->second), 1.0}, {g.link_index(key.from), -r}};
    out.push_back(std::move(rel));
    sums[key.from] += r;
  }
  // A full ratio set must sum to 1.
  for (const auto& [from, s] : sums) {
    if (aug.remainder_links.contains(from)) continue;
    bool complete = true;
    for (const auto& [key, id] : aug.movement_links)
      if (key.from == from && !ratios.contains(key)) complete = false;
    if (complete && std::abs(s - 1.0) > 1e-6)
      throw InputError("turn ratios of link '" + from + "' sum to " + format_number(s));
  }
  // f_m = sum of the movement links feeding m, when all of them are split out.
  std::set<std::string> movement_ids;
  for (const auto& [key, id] : aug.movement_links) movement_ids.insert(id);
  for (std::size_t m = 0; m < g.num_links(); ++m) {
    const auto into = g.movements_into(m);
    if (into.empty()) continue;
    bool all_split = true;
    for (auto mv : into) all_split = all_split && movement_ids.contains(g.link(g.movement_from(mv)).id);
    if (!all_split) continue;
    FlowRelation rel;
    rel.label = "sum into " + g.link(m).id;
    rel.terms.emplace_back(m, 1.0);
    for (auto mv : into) rel.terms.emplace_back(g.movement_from(mv), -1.0);
    out.push_back(std::move(rel));
  }
  return out;
}

std::map<MovementKey, double> propagate_turn_ratios(const NetworkGraph& g, const TurnMovementAugmentation& aug,
                                                    const std::map<std::size_t, double>& measured,
                                                    const std::map<MovementKey, double>& ratios,
                                                    const IdentifyOptions& options) {
  const auto relations = turn_ratio_relations(g, aug, ratios);
  const auto report = impute_flows(g, measured, relations, options);
  std::map<MovementKey, double> out;
  for (const auto& [key, id] : aug.movement_links) {
    const auto l = g.link_index(id);
    if (report.status[l] == FlowStatus::identified) out[key] = report.flows[l];
  }
  return out;
}

std::map<std::size_t, FlowInterval> flow_bounds(const NetworkGraph& g, const IdentifiabilityReport& report) {
  std::map<std::size_t, FlowInterval> out;
  if (report.flows.size() != g.num_links()) throw InputError("flow bounds need imputed flows");
  const std::size_t n = g.num_nodes(), nl = g.num_links();
  std::vector<bool> und(nl);
  for (std::size_t l = 0; l < nl; ++l) und[l] = report.status[l] == FlowStatus::undetermined;
  if (std::none_of(und.begin(), und.end(), [](bool b) { return b; })) return out;

  // Strongly connected pieces of the undetermined subgraph by mutual reachability.
  std::vector<std::vector<std::size_t>> succ(n);
  for (std::size_t l = 0; l < nl; ++l)
    if (und[l]) succ[g.tail(l)].push_back(g.head(l));
  std::vector<std::vector<bool>> reach(n, std::vector<bool>(n, false));
  for (std::size_t s = 0; s < n; ++s) {
    std::deque<std::size_t> queue{s};
    reach[s][s] = true;
    while (!queue.empty()) {
      const auto v = queue.front();
      queue.pop_front();
      for (auto w : succ[v])
        if (!reach[s][w]) {
          reach[s][w] = true;
          queue.push_back(w);
        }
    }
  }
  std::vector<std::size_t> piece(n, kNone);
  std::size_t pieces = 0;
  for (std::size_t v = 0; v < n; ++v) {
    if (piece[v] != kNone) continue;
    for (std::size_t w = v; w < n; ++w)
      if (piece[w] == kNone && reach[v][w] && reach[w][v]) piece[w] = pieces;
    ++pieces;
  }

  // Kahn order over pieces linked by undetermined links.
  std::vector<std::set<std::size_t>> next(pieces);
  std::vector<std::size_t> indegree(pieces, 0);
  for (std::size_t l = 0; l < nl; ++l) {
    if (!und[l]) continue;
    const auto a = piece[g.tail(l)], b = piece[g.head(l)];
    if (a != b && next[a].insert(b).second) ++indegree[b];
  }
  std::deque<std::size_t> ready;
  for (std::size_t p = 0; p < pieces; ++p)
    if (indegree[p] == 0) ready.push_back(p);

  std::vector<FlowInterval> bound(nl);
  for (std::size_t l = 0; l < nl; ++l)
    if (!und[l]) bound[l] = {report.flows[l], report.flows[l]};
  std::vector<bool> bounded(nl, false);
  for (std::size_t l = 0; l < nl; ++l) {
    bounded[l] = !und[l];
    if (und[l] && piece[g.tail(l)] == piece[g.head(l)]) {
      bound[l] = {0.0, kInfinity};
      bounded[l] = true;
    }
  }
  while (!ready.empty()) {
    const auto p = ready.front();
    ready.pop_front();
    double in_lo = 0.0, in_hi = 0.0, out_lo = 0.0, out_hi = 0.0;
    std::vector<std::size_t> free_out;
    for (std::size_t l = 0; l < nl; ++l) {
      const bool t = piece[g.tail(l)] == p, h = piece[g.head(l)] == p;
      if (t == h) continue;
      if (h) {
        in_lo += bound[l].lo;
        in_hi += bound[l].hi;
      } else if (und[l]) {
        free_out.push_back(l);
      } else {
        out_lo += bound[l].lo;
        out_hi += bound[l].hi;
      }
    }
    const double hi = std::max(0.0, in_hi - out_lo);
    const double lo = free_out.size() == 1 ? std::max(0.0, in_lo - out_hi) : 0.0;
    for (auto l : free_out) {
      bound[l] = {std::min(lo, hi), hi};
      bounded[l] = true;
    }
    for (auto q : next[p])
      if (--indegree[q] == 0) ready.push_back(q);
  }
  for (std::size_t l = 0; l < nl; ++l)
    if (und[l]) out[l] = bound[l];
  return out;
}

VmtBounds vmt_bounds(const NetworkGraph& g, const IdentifiabilityReport& report,
                     std::span<const FlowRelation> relations) {
  if (report.flows.size() != g.num_links()) throw InputError("VMT bounds need imputed flows");
  VmtBounds out;
  std::vector<Eigen::Index> column(g.num_links(), -1);
  Eigen::Index n = 0;
  for (std::size_t l = 0; l < g.num_links(); ++l) {
    const double d = g.link(l).length_mi;
    switch (report.status[l]) {
      case FlowStatus::measured: out.measured_term += d * report.flows[l]; break;
      case FlowStatus::identified: out.identified_term += d * report.flows[l]; break;
      case FlowStatus::undetermined: column[l] = n++; break;
    }
  }
  out.upper = out.lower = out.identified_term;
  if (n == 0) return out;

  auto lp = LinearProgram<double>::nonnegative(n, Sense::maximize);
  for (std::size_t l = 0; l < g.num_links(); ++l)
    if (column[l] >= 0) lp.objective(column[l]) = g.link(l).length_mi;
  // A^u f^u = -A^m f^m, one row per node touching an undetermined link.
  for (std::size_t v = 0; v < g.num_nodes(); ++v) {
    Eigen::VectorXd row = Eigen::VectorXd::Zero(n);
    double rhs = 0.0;
    bool touched = false;
    for (auto l : g.outgoing(v)) {
      if (column[l] >= 0) {
        row(column[l]) += 1.0;
        touched = true;
      } else {
        rhs -= report.flows[l];
      }
    }
    for (auto l : g.incoming(v)) {
      if (column[l] >= 0) {
        row(column[l]) -= 1.0;
        touched = true;
      } else {
        rhs += report.flows[l];
      }
    }
    if (touched) lp.add_equality(row, rhs);
  }
  for (const auto& r : relations) {
    Eigen::VectorXd row = Eigen::VectorXd::Zero(n);
    double rhs = 0.0;
    bool touched = false;
    for (const auto& [l, c] : r.terms) {
      if (column[l] >= 0) {
        row(column[l]) += c;
        touched = true;
      } else {
        rhs -= c * report.flows[l];
      }
    }
    if (touched) lp.add_equality(row, rhs);
  }

  const auto hi = solve_lp(lp);
  if (hi.status == LpStatus::infeasible) throw ComputationError("VMT bounds: measurements admit no nonnegative flow");
  lp.sense = Sense::minimize;
  const auto lo = solve_lp(lp);
  if (lo.status != LpStatus::optimal) throw ComputationError("VMT lower bound LP is " + std::string(to_string(lo.status)));
  out.lower += lo.value;
  if (hi.status == LpStatus::unbounded) {
    out.unbounded = true;
    out.upper = kInfinity;
  } else {
    out.upper += std::max(hi.value, lo.value);
  }
  return out;
}

IdentificationResult analyze_identifiability(const NetworkGraph& g, const MeasurementSet& m,
                                             const IdentifyOptions& options) {
  check_measurements(g, m);
  std::set<std::string> ratio_links;
  for (const auto& [key, vs] : m.turn_ratios) ratio_links.insert(key.from);
  std::vector<MovementKey> split;
  for (std::size_t k = 0; k < g.num_movements(); ++k) {
    const auto& mv = g.movement(k);
    if (ratio_links.contains(mv.from_link)) split.push_back({mv.from_link, mv.to_link});
  }

  IdentificationResult out;
  out.movements = augment_turn_movements(g, split);
  auto closed = augment_with_super_node(out.movements.graph);
  if (!closed.strongly_connected) throw InputError("network is not strongly connected after adding the super node");
  out.graph = std::move(closed.graph);
  const NetworkGraph& a = out.graph;

  // Link flow and demand on the same entry link are the same quantity.
  std::map<std::size_t, std::vector<WeightedValue>> values;
  for (const auto& [id, vs] : m.link_flows) {
    auto& dst = values[a.link_index(id)];
    dst.insert(dst.end(), vs.begin(), vs.end());
  }
  for (const auto& [id, vs] : m.demands) {
    auto& dst = values[a.link_index(id)];
    dst.insert(dst.end(), vs.begin(), vs.end());
  }
  std::map<std::size_t, double> measured;
  for (const auto& [l, vs] : values) measured[l] = weighted_mean(vs);
  for (const auto& id : out.movements.zero_flow_links) measured[a.link_index(id)] = 0.0;

  std::map<MovementKey, double> ratios;
  for (const auto& [key, vs] : m.turn_ratios) ratios[key] = weighted_mean(vs);
  out.relations = turn_ratio_relations(a, out.movements, ratios);

  out.report = impute_flows(a, measured, out.relations, options);
  out.report.flow_bounds = flow_bounds(a, out.report);
  out.report.vmt = vmt_bounds(a, out.report, out.relations);
  return out;
}

void write_identifiability_csv(std::ostream& os, const NetworkGraph& g, const IdentifiabilityReport& report) {
  os << "link,kind,status,flow,lo,hi\n";
  for (std::size_t l = 0; l < g.num_links(); ++l) {
    const auto s = report.status[l];
    os << g.link(l).id << ',' << to_string(g.link(l).kind) << ',' << to_string(s) << ',';
    const bool valued = l < report.flows.size() && std::isfinite(report.flows[l]);
    if (valued) os << format_number(report.flows[l]);
    os << ',';
    if (valued) {
      os << format_number(report.flows[l]) << ',' << format_number(report.flows[l]);
    } else if (auto it = report.flow_bounds.find(l); it != report.flow_bounds.end()) {
      os << format_number(it->second.lo) << ',' << format_number(it->second.hi);
    } else {
      os << ',';
    }
    os << '\n';
  }
}

void write_color_annotation(std::ostream& os, const NetworkGraph& g, const IdentifiabilityReport& report) {
  const std::set<std::size_t> suggested(report.suggested_measurements.begin(), report.suggested_measurements.end());
  os << "link,status,color,suggested\n";
  for (std::size_t l = 0; l < g.num_links(); ++l) {
    const auto s = report.status[l];
    const char* color = s == FlowStatus::measured     ? "red"
                        : s == FlowStatus::identified ? "green"
                        : suggested.contains(l)       ? "blue"
                                                      : "black";
    os << g.link(l).id << ',' << to_string(s) << ',' << color << ',' << (suggested.contains(l) ? 1 : 0) << '\n';
  }
}

}  // namespace artcal
