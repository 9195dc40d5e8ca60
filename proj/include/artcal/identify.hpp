#pragma once

// Which flows are pinned down by a sensor layout plus conservation.
//
// All operations take a graph whose every link has both endpoints, normally
// the output of augment_with_super_node (after augment_turn_movements when
// movement flows matter). A link is identified when it lies on no undirected
// cycle of unknown links; identified links then count as known and the test is
// repeated, together with any extra linear relations (turn ratios), until
// nothing changes.

#include <cmath>
#include <cstddef>
#include <iosfwd>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "artcal/calibrate.hpp"
#include "artcal/network.hpp"

namespace artcal {

enum class FlowStatus { measured, identified, undetermined };

std::string_view to_string(FlowStatus s);

// sum_k coef_k * f_{link_k} = 0. Used for turn-ratio rows f(l,m) = r f_l and
// for downstream sums f_m = sum_l f(l,m) over explicit movement links.
struct FlowRelation {
  std::vector<std::pair<std::size_t, double>> terms;
  std::string label;
};

struct UndeterminedComponent {
  std::vector<std::size_t> nodes;
  std::vector<std::size_t> links;
  std::size_t required() const { return links.size() + 1 - nodes.size(); }
};

struct FlowInterval {
  double lo = 0.0;
  double hi = kInfinity;
  bool unbounded() const { return !std::isfinite(hi); }
};

struct VmtBounds {
  double measured_term = 0.0;    // sum over measured links of d_l f_l
  double identified_term = 0.0;  // identified links, exact
  double upper = 0.0;            // VMT over unmeasured links, maximum
  double lower = 0.0;            // and minimum
  bool unbounded = false;        // a directed cycle of undetermined links

  double gap() const { return upper - lower; }
  double estimate() const { return measured_term + 0.5 * (upper + lower); }
  double half_width() const { return 0.5 * gap(); }
};

struct IdentifiabilityReport {
  std::vector<FlowStatus> status;  // aligned with g.links()
  std::vector<double> flows;       // known values; NaN when undetermined or not computed
  std::vector<UndeterminedComponent> components;
  std::size_t required_additional_count = 0;
  std::vector<std::size_t> suggested_measurements;
  std::map<std::size_t, FlowInterval> flow_bounds;
  std::optional<VmtBounds> vmt;

  std::size_t count(FlowStatus s) const;
  bool fully_identified() const { return count(FlowStatus::undetermined) == 0; }
};

// Measurements that cannot all hold under conservation. `nodes` is the node
// set whose cutset sum fails, empty when a relation row is violated instead.
class InconsistentMeasurements : public InputError {
 public:
  InconsistentMeasurements(std::string what, std::vector<std::string> nodes)
      : InputError(std::move(what)), nodes_(std::move(nodes)) {}
  const std::vector<std::string>& nodes() const { return nodes_; }

 private:
  std::vector<std::string> nodes_;
};

struct IdentifyOptions {
  double tolerance = 1e-6;  // relative, on cutset and relation residuals
};

// Status only. Throws InputError when a link lacks an endpoint or g is not
// strongly connected. Fills components, required count and suggestions.
IdentifiabilityReport identifiable_links(const NetworkGraph& g, const std::set<std::size_t>& measured,
                                         std::span<const FlowRelation> relations = {});

// Status and values: each identified flow is the signed cutset sum of known
// flows around one side of it. Throws InconsistentMeasurements.
IdentifiabilityReport impute_flows(const NetworkGraph& g, const std::map<std::size_t, double>& measured,
                                   std::span<const FlowRelation> relations = {},
                                   const IdentifyOptions& options = {});

// Non-tree links of a breadth-first spanning tree of each undetermined
// component, rooted at the super node when present, edges in link-id order.
std::vector<std::size_t> minimal_additional_measurements(const NetworkGraph& g,
                                                         const IdentifiabilityReport& report);

// Turn-ratio and downstream-sum rows for a turn-movement augmented graph `g`
// (the augmentation's graph, possibly with the super node added). Throws
// InputError when the ratios of a link cover all its movement links and do
// not sum to 1, or when a ratio references a movement that was not split out.
std::vector<FlowRelation> turn_ratio_relations(const NetworkGraph& g,
                                               const TurnMovementAugmentation& aug,
                                               const std::map<MovementKey, double>& ratios);

// Movement flows fixed by measurements, conservation and the known ratios.
// Keys are original movements; measured movement links are not repeated.
std::map<MovementKey, double> propagate_turn_ratios(const NetworkGraph& g,
                                                    const TurnMovementAugmentation& aug,
                                                    const std::map<std::size_t, double>& measured,
                                                    const std::map<MovementKey, double>& ratios,
                                                    const IdentifyOptions& options = {});

// Bounds on undetermined flows by induction over a topological order of the
// strongly connected pieces of the undetermined subgraph. Links inside a
// directed cycle, and anything fed by one, are unbounded above.
std::map<std::size_t, FlowInterval> flow_bounds(const NetworkGraph& g, const IdentifiabilityReport& report);

// Two linear programs over the undetermined links: max and min of
// sum d_l f_l subject to conservation, the relations and f >= 0, with known
// flows fixed. Throws ComputationError when infeasible.
VmtBounds vmt_bounds(const NetworkGraph& g, const IdentifiabilityReport& report,
                     std::span<const FlowRelation> relations = {});

// Whole pipeline on an unaugmented network: movements with a measured ratio
// are split out, the super node is added, link flows and demands count as
// measured links, then imputation, bounds and VMT.
struct IdentificationResult {
  NetworkGraph graph;  // augmented
  TurnMovementAugmentation movements;
  std::vector<FlowRelation> relations;
  IdentifiabilityReport report;
};

IdentificationResult analyze_identifiability(const NetworkGraph& g, const MeasurementSet& m,
                                             const IdentifyOptions& options = {});

// link,kind,status,flow,lo,hi
void write_identifiability_csv(std::ostream& os, const NetworkGraph& g, const IdentifiabilityReport& report);
// link,status,color,suggested  with red measured, green identified, blue for a
// suggested sensor and black for the remaining tree links.
void write_color_annotation(std::ostream& os, const NetworkGraph& g, const IdentifiabilityReport& report);

}  // namespace artcal
