#pragma once

// Calibration of link flows, demands and movement flows against weighted
// measurements by a convex quadratic program.
//
// Decision vector: f_l for every link, then d_l for every entry link, then
// f(l,m) for every movement. The objective is
//   sum alpha (f_l - f^_l)^2 + sum beta (d_l - d^_l)^2 + sum gamma (f(l,m) - r^(l,m) f_l)^2
// subject to conservation at both ends of every movement, f_l = d_l on entry
// links, 0 <= f(l,m) <= s(l,m) and nonnegative flows.

#include <Eigen/Dense>

#include <filesystem>
#include <iosfwd>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "artcal/network.hpp"
#include "artcal/qp.hpp"

namespace artcal {

struct WeightedValue {
  double value = 0.0;
  double weight = 1.0;
};

// Repeated measurements of the same quantity are kept; each contributes its
// own squared term.
struct MeasurementSet {
  std::map<std::string, std::vector<WeightedValue>> link_flows;
  std::map<std::string, std::vector<WeightedValue>> demands;
  std::map<MovementKey, std::vector<WeightedValue>> turn_ratios;

  bool empty() const { return link_flows.empty() && demands.empty() && turn_ratios.empty(); }
  std::size_t size() const;
};

// kind,id_from,id_to,value,weight  with kind in {link_flow, demand, turn_ratio}.
// id_to is only used by turn_ratio rows; an empty weight means 1. A header
// row starting with "kind" is optional. Blank lines and lines starting with
// '#' are ignored.
MeasurementSet parse_measurements_csv(std::string_view text);
MeasurementSet load_measurements_csv(const std::filesystem::path& path);
void write_measurements_csv(std::ostream& os, const MeasurementSet& m);

// Throws InputError on ids unknown to g, demand on a non-entry link, ratios
// outside [0,1] or non-positive weights.
void check_measurements(const NetworkGraph& g, const MeasurementSet& m);

struct DecisionLayout {
  std::size_t num_links = 0;
  std::vector<std::size_t> entry_links;  // link index of each demand variable
  std::size_t num_movements = 0;

  Eigen::Index link(std::size_t l) const { return static_cast<Eigen::Index>(l); }
  Eigen::Index demand(std::size_t k) const { return static_cast<Eigen::Index>(num_links + k); }
  Eigen::Index movement(std::size_t mv) const {
    return static_cast<Eigen::Index>(num_links + entry_links.size() + mv);
  }
  Eigen::Index size() const {
    return static_cast<Eigen::Index>(num_links + entry_links.size() + num_movements);
  }
};

struct CalibrationProblem {
  QuadraticProgram<double> qp;
  DecisionLayout layout;
};

CalibrationProblem assemble_qp(const NetworkGraph& g, const MeasurementSet& m);

struct MeasurementResidual {
  std::string kind;  // link_flow, demand, turn_ratio
  std::string from;
  std::string to;
  double measured = 0.0;
  double calibrated = 0.0;  // same units as measured (ratio for turn_ratio)
  double weight = 1.0;
  double error = 0.0;       // model minus measurement, in vph
};

struct FlowSolution {
  Eigen::VectorXd link_flows;          // aligned with g.links()
  std::vector<std::size_t> entry_links;
  Eigen::VectorXd demands;             // aligned with entry_links
  Eigen::VectorXd movement_flows;      // aligned with g.movements()
  std::vector<MeasurementResidual> residuals;
  double objective = 0.0;
  bool unique = true;
  KktResidual kkt;
  double conservation_residual = 0.0;  // max |A f| over the constraint rows
  std::vector<std::size_t> binding_movements;  // at capacity (and capacity finite)

  double demand_of(std::size_t link) const;
};

struct CalibrationOptions {
  double tolerance = 1e-8;
  QpOptions qp;
};

// Throws ComputationError when the solver stops above tolerance.
FlowSolution solve_calibration(const NetworkGraph& g, const MeasurementSet& m,
                               const CalibrationOptions& options = {});
FlowSolution solve_calibration(const CalibrationProblem& problem, const NetworkGraph& g,
                               const MeasurementSet& m, const CalibrationOptions& options = {});

struct SplitRatios {
  RatioVector ratios;  // aligned with g.movements()
  std::vector<std::string> undetermined_links;  // f*_l <= tol: uniform split
};

// r*(l,m) = f*(l,m) / f*_l. Links without flow split evenly over their
// allowed movements and are listed as undetermined.
SplitRatios split_ratios(const NetworkGraph& g, const FlowSolution& sol, double tol = 1e-9);

// Side-by-side table: link, measured flow, calculated flow | from, to,
// measured ratio, calculated ratio. "-1" marks a missing measurement.
void write_solution_csv(std::ostream& os, const NetworkGraph& g, const MeasurementSet& m,
                        const FlowSolution& sol, const SplitRatios& splits);
void write_residuals_csv(std::ostream& os, const FlowSolution& sol);
void write_split_ratios_csv(std::ostream& os, const NetworkGraph& g, const SplitRatios& splits);
void write_flows_csv(std::ostream& os, const NetworkGraph& g, const FlowSolution& sol);

}  // namespace artcal
