#pragma once

// How much extra through traffic a fixed route can absorb on top of a
// calibrated baseline, with the current timing plans or with re-split greens.

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "artcal/calibrate.hpp"
#include "artcal/network.hpp"
#include "artcal/simplex.hpp"

namespace artcal {

struct RouteMovement {
  std::size_t movement = kNone;
  double baseline = 0.0;  // f*(l,m)
  double capacity = 0.0;  // s(l,m), +inf when unsignalized
  double slack() const { return capacity - baseline; }
};

struct DiversionResult {
  double optimal_diversion = 0.0;  // D* or D+*, +inf if nothing on the route is capacity limited
  std::vector<RouteMovement> route;
  std::vector<std::size_t> binding_movements;
  std::optional<std::vector<TimingPlan>> new_plans;  // re-timing only
};

struct DiversionOptions {
  double binding_tolerance = 1e-7;  // vph
  double feasibility_tolerance = 1e-6;
  LpOptions lp;
};

// Consecutive links of `route` (entry to exit) must be joined by movements.
std::vector<std::size_t> route_movements(const NetworkGraph& g, std::span<const std::string> route);

// D* = min over the route of s(l,m) - f*(l,m). Throws InputError when the
// baseline already exceeds a route capacity by more than the tolerance.
DiversionResult max_simple_diversion(const NetworkGraph& g, const FlowSolution& baseline,
                                     std::span<const std::string> route, const DiversionOptions& options = {});

// The same problem as a one-variable LP: max D s.t. f* + D <= s on the route.
LinearProgram<double> simple_diversion_lp(const NetworkGraph& g, const FlowSolution& baseline,
                                          std::span<const std::string> route);

// Variables: D, one green per (node, stage, phase) of the current plans and
// one duration per stage. Constraints: f* (+D on the route) <= c/T sum_i g
// for every signalized movement, g <= stage duration, sum of stage durations
// <= T - L. The returned plans give every phase of a stage the full stage
// duration and spread any unused budget evenly over the stages.
// InputError when a current plan already exceeds T - L; ComputationError
// naming the nodes whose baseline cannot be served by any re-split.
DiversionResult max_retimed_diversion(const NetworkGraph& g, const FlowSolution& baseline,
                                      std::span<const std::string> route, const DiversionOptions& options = {});

struct PlanCheck {
  double worst_capacity_excess = 0.0;  // max over movements of f* (+D) - s, vph
  double worst_budget_excess = 0.0;    // max over nodes of sum of stages - (T - L), s
  double min_green = 0.0;
};

// Re-evaluates the capacity, budget and sign constraints for `plans` from
// scratch, independent of the LP.
PlanCheck check_retimed_plan(const NetworkGraph& g, const FlowSolution& baseline,
                             std::span<const std::size_t> route_moves, double diversion,
                             std::span<const TimingPlan> plans);

// {"optimal_diversion":..., "route":[{from,to,baseline,capacity,slack}], "binding":[...], "plans":[...]}
std::string diversion_to_json(const NetworkGraph& g, const DiversionResult& r);

}  // namespace artcal
