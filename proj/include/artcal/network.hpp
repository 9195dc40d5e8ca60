#pragma once

// Static model of a signalized arterial network.
//
// Units: flows in vehicles/hour, times in seconds, lengths in miles.
// Graphs are immutable once built; every augmentation returns a new graph.

#include <Eigen/Dense>

#include <compare>
#include <cstddef>
#include <limits>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "artcal/error.hpp"

namespace artcal {

inline constexpr std::size_t kNone = static_cast<std::size_t>(-1);
inline constexpr double kInfinity = std::numeric_limits<double>::infinity();

// Id of the artificial node that closes entry and exit links into a cycle.
inline constexpr std::string_view kSuperNodeId = "0";

enum class LinkKind { entry, internal, exit, movement };

std::string_view to_string(LinkKind kind);
std::optional<LinkKind> link_kind_from_string(std::string_view s);

struct Link {
  std::string id;
  std::string from_node;  // empty for entry links (virtual source)
  std::string to_node;    // empty for exit links (virtual sink)
  double length_mi = 0.0;
  double storage_capacity = 1.0;  // vehicles, turn pockets included
  double travel_time_s = 1.0;     // constant, or exponential mean in stochastic mode
  LinkKind kind = LinkKind::internal;
  int lanes = 1;
};

struct Movement {
  std::string from_link;
  std::string to_link;
  double saturation_flow_vph = 0.0;
  bool allowed = true;
};

struct Node {
  std::string id;
  double cycle_time_s = 0.0;  // meaningful only when a timing plan exists
  double lost_time_s = 0.0;
};

struct PhaseGreen {
  std::string from_link;
  std::string to_link;
  double duration_s = 0.0;
};

// Phases actuated together. Each phase is green from the start of the stage
// for its own duration; the stage lasts as long as its longest phase.
struct Stage {
  std::vector<PhaseGreen> greens;
  double duration_s() const;
};

struct TimingPlan {
  std::string node_id;
  std::vector<Stage> stages;
  double offset_s = 0.0;
};

struct MovementKey {
  std::string from;
  std::string to;
  auto operator<=>(const MovementKey&) const = default;
};

std::string to_string(const MovementKey& key);

// One commodity of demand. Either routed by turn ratios or, when `route` is
// non-empty, following that explicit entry-to-exit link sequence.
struct CommodityDemand {
  int index = 0;
  std::map<std::string, double> entry_flows_vph;
  std::map<MovementKey, double> turn_ratios;
  std::vector<std::string> route;

  bool fixed_route() const { return !route.empty(); }
};

class NetworkGraph {
 public:
  NetworkGraph() = default;

  // Throws InputError on duplicate ids or movements/plans that reference
  // unknown links. Unknown node references are tolerated and surface as
  // kNone endpoints so validate_network can report them.
  NetworkGraph(std::vector<Node> nodes, std::vector<Link> links,
               std::vector<Movement> movements, std::vector<TimingPlan> plans);

  std::span<const Node> nodes() const { return nodes_; }
  std::span<const Link> links() const { return links_; }
  std::span<const Movement> movements() const { return movements_; }
  std::span<const TimingPlan> plans() const { return plans_; }

  std::size_t num_nodes() const { return nodes_.size(); }
  std::size_t num_links() const { return links_.size(); }
  std::size_t num_movements() const { return movements_.size(); }

  const Node& node(std::size_t i) const { return nodes_.at(i); }
  const Link& link(std::size_t i) const { return links_.at(i); }
  const Movement& movement(std::size_t i) const { return movements_.at(i); }

  std::optional<std::size_t> find_node(std::string_view id) const;
  std::optional<std::size_t> find_link(std::string_view id) const;
  std::optional<std::size_t> find_movement(std::string_view from, std::string_view to) const;

  // Throwing lookups (InputError naming the id).
  std::size_t node_index(std::string_view id) const;
  std::size_t link_index(std::string_view id) const;
  std::size_t movement_index(std::string_view from, std::string_view to) const;

  // Endpoint node indices; kNone for virtual or unknown endpoints.
  std::size_t tail(std::size_t link) const { return tails_.at(link); }
  std::size_t head(std::size_t link) const { return heads_.at(link); }

  std::size_t movement_from(std::size_t mv) const { return mv_from_.at(mv); }
  std::size_t movement_to(std::size_t mv) const { return mv_to_.at(mv); }
  // Intersection at which the movement takes place (head of its from-link).
  std::size_t movement_node(std::size_t mv) const { return head(mv_from_.at(mv)); }

  std::span<const std::size_t> movements_from(std::size_t link) const { return out_moves_.at(link); }
  std::span<const std::size_t> movements_into(std::size_t link) const { return in_moves_.at(link); }
  std::span<const std::size_t> incoming(std::size_t node) const { return in_links_.at(node); }
  std::span<const std::size_t> outgoing(std::size_t node) const { return out_links_.at(node); }

  // Timing plan governing a node, or nullptr when the node is unsignalized.
  const TimingPlan* plan_for(std::size_t node) const;
  std::size_t plan_index_for(std::size_t node) const { return node_plan_.at(node); }

  std::vector<std::size_t> entry_links() const;
  std::vector<std::size_t> exit_links() const;

 private:
  std::vector<Node> nodes_;
  std::vector<Link> links_;
  std::vector<Movement> movements_;
  std::vector<TimingPlan> plans_;

  std::map<std::string, std::size_t, std::less<>> node_ids_;
  std::map<std::string, std::size_t, std::less<>> link_ids_;
  std::map<std::pair<std::size_t, std::size_t>, std::size_t> movement_ids_;

  std::vector<std::size_t> tails_, heads_;
  std::vector<std::size_t> mv_from_, mv_to_;
  std::vector<std::vector<std::size_t>> out_moves_, in_moves_;
  std::vector<std::vector<std::size_t>> in_links_, out_links_;
  std::vector<std::size_t> node_plan_;
};

// ---------------------------------------------------------------------------
// Validation

struct Violation {
  std::string subject;  // id of the offending node/link/movement/commodity
  std::string message;
};

struct ValidationReport {
  std::vector<Violation> violations;
  bool well_formed() const { return violations.empty(); }
};

ValidationReport validate_network(const NetworkGraph& g,
                                  std::span<const CommodityDemand> demands = {});

// ---------------------------------------------------------------------------
// Capacity

// s(l,m) = (1/T_n) * sum_i g_{n,i}(l,m) * c(l,m). Throws InputError for an
// unknown movement or a node without timing plan.
double saturation_capacity(const NetworkGraph& g, std::size_t movement);
double saturation_capacity(const NetworkGraph& g, std::string_view from, std::string_view to);

// Same as saturation_capacity, but unsignalized movements are unconstrained
// (+inf) and forbidden movements have zero capacity.
double effective_capacity(const NetworkGraph& g, std::size_t movement);

// Total green seconds per cycle given to a movement over all stages of a plan.
double total_green(const TimingPlan& plan, std::string_view from, std::string_view to);

// ---------------------------------------------------------------------------
// Augmentations

struct SuperNodeAugmentation {
  NetworkGraph graph;
  bool strongly_connected = false;
  bool super_node_isolated = false;
  std::vector<std::string> links_off_path;    // links on no entry->exit path
  std::vector<std::string> unreachable_nodes;  // fail either reachability pass
};

// Adds node "0" as the tail of every entry link and head of every exit link.
// Strong connectivity is verified by reachability from and to node 0.
SuperNodeAugmentation augment_with_super_node(const NetworkGraph& g);

// Strong connectivity via forward/backward reachability from node 0 (or node
// index 0 when no super node exists). Virtual endpoints are ignored.
bool is_strongly_connected(const NetworkGraph& g);

enum class ForbiddenMovementPolicy { measured_zero, remove };

struct TurnMovementAugmentation {
  NetworkGraph graph;
  std::map<MovementKey, std::string> movement_links;  // (l,m) -> link id "l>m"
  std::map<std::string, std::string> remainder_links;  // l -> "l>*" when not all movements split out
  std::vector<std::string> zero_flow_links;            // forbidden movements kept as measured zero
};

// Replaces each requested movement (l,m) with an explicit link "l>m". The
// head of l is moved to a new node "n~l" from which the movement links (and
// a remainder link "l>*" for unrequested movements) lead into the original
// node n. Timing plans are not carried over.
TurnMovementAugmentation augment_turn_movements(
    const NetworkGraph& g, std::span<const MovementKey> movements,
    ForbiddenMovementPolicy policy = ForbiddenMovementPolicy::measured_zero);

// Node-link incidence matrix: +1 where the link leaves the node, -1 where it
// enters. Virtual endpoints have no row, so augment with the super node first
// if every column must balance.
template <typename Scalar = double>
Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic> incidence_matrix(const NetworkGraph& g) {
  using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
  Matrix a = Matrix::Zero(static_cast<Eigen::Index>(g.num_nodes()),
                          static_cast<Eigen::Index>(g.num_links()));
  for (std::size_t l = 0; l < g.num_links(); ++l) {
    const auto col = static_cast<Eigen::Index>(l);
    if (g.tail(l) != kNone) a(static_cast<Eigen::Index>(g.tail(l)), col) += Scalar(1);
    if (g.head(l) != kNone) a(static_cast<Eigen::Index>(g.head(l)), col) -= Scalar(1);
  }
  return a;
}

// ---------------------------------------------------------------------------
// Steady-state flows and commodity aggregation

struct SteadyFlows {
  Eigen::VectorXd link;      // f_l, aligned with g.links()
  Eigen::VectorXd movement;  // f(l,m), aligned with g.movements()
};

// Turn-ratio lookup for movement indices; aligned with g.movements().
using RatioVector = Eigen::VectorXd;

RatioVector ratio_vector(const NetworkGraph& g, const std::map<MovementKey, double>& ratios);

// Solves f_l = d_l + sum_k r(k,l) f_k (conservation with turn ratios).
SteadyFlows propagate_flows(const NetworkGraph& g, const Eigen::VectorXd& entry_demand,
                            const RatioVector& ratios);

// Steady-state flows of one commodity (ratio- or route-driven).
SteadyFlows commodity_flows(const NetworkGraph& g, const CommodityDemand& demand);

struct AggregateRouting {
  RatioVector ratios;                      // r(l,m) per movement
  Eigen::VectorXd link_flows;              // sum_p f^p_l
  Eigen::VectorXd entry_demand;            // sum_p d^p_l
  std::vector<std::string> zero_flow_links;  // ratio undefined, set to 0
};

// r(l,m) = sum_p r^p(l,m) f^p_l / sum_p f^p_l.
AggregateRouting aggregate_commodities(std::span<const CommodityDemand> demands,
                                       const NetworkGraph& g);

}  // namespace artcal
