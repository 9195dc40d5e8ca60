#include "artcal/calibrate.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>
#include <sstream>

#include "artcal/csv.hpp"
#include "artcal/network_io.hpp"

namespace artcal {

std::size_t MeasurementSet::size() const {
  std::size_t n = 0;
  for (const auto& [k, v] : link_flows) n += v.size();
  for (const auto& [k, v] : demands) n += v.size();
  for (const auto& [k, v] : turn_ratios) n += v.size();
  return n;
}

double FlowSolution::demand_of(std::size_t link) const {
  for (std::size_t k = 0; k < entry_links.size(); ++k)
    if (entry_links[k] == link) return demands(static_cast<Eigen::Index>(k));
  return 0.0;
}

// ---------------------------------------------------------------------------
// CSV

MeasurementSet parse_measurements_csv(std::string_view text) {
  MeasurementSet out;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const auto nl = text.find('\n', pos);
    std::string_view line = text.substr(pos, nl == std::string_view::npos ? text.npos : nl - pos);
    pos = nl == std::string_view::npos ? text.size() + 1 : nl + 1;
    ++line_no;
    const auto fields = split_csv_line(line);
    if (fields.size() == 1 && fields[0].empty()) continue;
    if (!fields[0].empty() && fields[0][0] == '#') continue;
    const std::string where = "measurements line " + std::to_string(line_no);
    if (line_no == 1 && fields[0] == "kind") continue;
    if (fields.size() < 4 || fields.size() > 5)
      throw InputError(where + ": expected kind,id_from,id_to,value[,weight]");
    WeightedValue v;
    v.value = parse_number(fields[3], where + " value");
    if (fields.size() == 5 && !fields[4].empty()) v.weight = parse_number(fields[4], where + " weight");
    if (!(v.weight > 0.0) || !std::isfinite(v.weight)) throw InputError(where + ": weight must be > 0");
    if (!std::isfinite(v.value)) throw InputError(where + ": value must be finite");
    if (fields[1].empty()) throw InputError(where + ": missing id_from");
    const std::string& kind = fields[0];
    if (kind == "link_flow") {
      if (v.value < 0.0) throw InputError(where + ": negative flow");
      out.link_flows[fields[1]].push_back(v);
    } else if (kind == "demand") {
      if (v.value < 0.0) throw InputError(where + ": negative demand");
      out.demands[fields[1]].push_back(v);
    } else if (kind == "turn_ratio") {
      if (fields[2].empty()) throw InputError(where + ": turn_ratio needs id_to");
      if (v.value < 0.0 || v.value > 1.0) throw InputError(where + ": turn ratio outside [0,1]");
      out.turn_ratios[MovementKey{fields[1], fields[2]}].push_back(v);
    } else {
      throw InputError(where + ": unknown kind '" + kind + "'");
    }
  }
  return out;
}

MeasurementSet load_measurements_csv(const std::filesystem::path& path) {
  return parse_measurements_csv(read_text_file(path));
}

void write_measurements_csv(std::ostream& os, const MeasurementSet& m) {
  os << "kind,id_from,id_to,value,weight\n";
  for (const auto& [id, vs] : m.link_flows)
    for (const auto& v : vs) os << "link_flow," << id << ",," << format_number(v.value) << ',' << format_number(v.weight) << '\n';
  for (const auto& [id, vs] : m.demands)
    for (const auto& v : vs) os << "demand," << id << ",," << format_number(v.value) << ',' << format_number(v.weight) << '\n';
  for (const auto& [key, vs] : m.turn_ratios)
    for (const auto& v : vs)
      os << "turn_ratio," << key.from << ',' << key.to << ',' << format_number(v.value) << ',' << format_number(v.weight) << '\n';
}

void check_measurements(const NetworkGraph& g, const MeasurementSet& m) {
  for (const auto& [id, vs] : m.link_flows)
    if (!g.find_link(id)) throw InputError("measurement on unknown link '" + id + "'");
  for (const auto& [id, vs] : m.demands) {
    auto l = g.find_link(id);
    if (!l) throw InputError("demand measurement on unknown link '" + id + "'");
    if (g.link(*l).kind != LinkKind::entry) throw InputError("demand measurement on non-entry link '" + id + "'");
  }
  for (const auto& [key, vs] : m.turn_ratios)
    if (!g.find_movement(key.from, key.to))
      throw InputError("turn ratio measurement on unknown movement " + to_string(key));
  auto check = [](const std::vector<WeightedValue>& vs, const std::string& what, bool ratio) {
    for (const auto& v : vs) {
      if (!(v.weight > 0.0)) throw InputError("non-positive weight on " + what);
      if (ratio && !(v.value >= 0.0 && v.value <= 1.0)) throw InputError("turn ratio outside [0,1] on " + what);
    }
  };
  for (const auto& [id, vs] : m.link_flows) check(vs, id, false);
  for (const auto& [id, vs] : m.demands) check(vs, id, false);
  for (const auto& [key, vs] : m.turn_ratios) check(vs, to_string(key), true);
}

// ---------------------------------------------------------------------------
// QP assembly

CalibrationProblem assemble_qp(const NetworkGraph& g, const MeasurementSet& m) {
  check_measurements(g, m);
  CalibrationProblem p;
  auto& lay = p.layout;
  lay.num_links = g.num_links();
  lay.entry_links = g.entry_links();
  lay.num_movements = g.num_movements();
  const Eigen::Index n = lay.size();

  auto& qp = p.qp;
  qp.hessian = Eigen::MatrixXd::Zero(n, n);
  qp.linear = Eigen::VectorXd::Zero(n);
  qp.constant = 0.0;
  qp.lower = Eigen::VectorXd::Zero(n);
  qp.upper = Eigen::VectorXd::Constant(n, kInfinity);
  for (std::size_t k = 0; k < g.num_movements(); ++k) qp.upper(lay.movement(k)) = effective_capacity(g, k);

  // w (x_i - v)^2  ->  H_ii += 2w, c_i -= 2wv, k += wv^2
  auto add_point = [&](Eigen::Index i, const WeightedValue& v) {
    qp.hessian(i, i) += 2.0 * v.weight;
    qp.linear(i) -= 2.0 * v.weight * v.value;
    qp.constant += v.weight * v.value * v.value;
  };
  for (const auto& [id, vs] : m.link_flows)
    for (const auto& v : vs) add_point(lay.link(g.link_index(id)), v);
  std::map<std::size_t, std::size_t> entry_pos;
  for (std::size_t k = 0; k < lay.entry_links.size(); ++k) entry_pos[lay.entry_links[k]] = k;
  for (const auto& [id, vs] : m.demands)
    for (const auto& v : vs) add_point(lay.demand(entry_pos.at(g.link_index(id))), v);
  // w (f(l,m) - r f_l)^2 with u = e_mv - r e_l  ->  H += 2w u u'
  for (const auto& [key, vs] : m.turn_ratios) {
    const auto mv = g.movement_index(key.from, key.to);
    const auto i = lay.movement(mv);
    const auto j = lay.link(g.movement_from(mv));
    for (const auto& v : vs) {
      qp.hessian(i, i) += 2.0 * v.weight;
      qp.hessian(j, j) += 2.0 * v.weight * v.value * v.value;
      qp.hessian(i, j) -= 2.0 * v.weight * v.value;
      qp.hessian(j, i) -= 2.0 * v.weight * v.value;
    }
  }

  std::vector<Eigen::VectorXd> rows;
  for (std::size_t l = 0; l < g.num_links(); ++l) {
    if (!g.movements_from(l).empty()) {
      Eigen::VectorXd r = Eigen::VectorXd::Zero(n);
      r(lay.link(l)) = 1.0;
      for (auto mv : g.movements_from(l)) r(lay.movement(mv)) -= 1.0;
      rows.push_back(std::move(r));
    }
    if (!g.movements_into(l).empty()) {
      Eigen::VectorXd r = Eigen::VectorXd::Zero(n);
      r(lay.link(l)) = 1.0;
      for (auto mv : g.movements_into(l)) r(lay.movement(mv)) -= 1.0;
      rows.push_back(std::move(r));
    }
  }
  for (std::size_t k = 0; k < lay.entry_links.size(); ++k) {
    Eigen::VectorXd r = Eigen::VectorXd::Zero(n);
    r(lay.link(lay.entry_links[k])) = 1.0;
    r(lay.demand(k)) = -1.0;
    rows.push_back(std::move(r));
  }
  qp.eq_matrix.resize(static_cast<Eigen::Index>(rows.size()), n);
  for (std::size_t i = 0; i < rows.size(); ++i) qp.eq_matrix.row(static_cast<Eigen::Index>(i)) = rows[i].transpose();
  qp.eq_rhs = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(rows.size()));
  return p;
}

// ---------------------------------------------------------------------------
// Solve

FlowSolution solve_calibration(const NetworkGraph& g, const MeasurementSet& m,
                               const CalibrationOptions& options) {
  return solve_calibration(assemble_qp(g, m), g, m, options);
}

FlowSolution solve_calibration(const CalibrationProblem& problem, const NetworkGraph& g,
                               const MeasurementSet& m, const CalibrationOptions& options) {
  QpOptions qo = options.qp;
  qo.tolerance = options.tolerance;
  const auto res = solve_qp(problem.qp, qo);
  if (res.kkt.scaled() > options.tolerance) {
    std::ostringstream os;
    os << "calibration solve stopped with scaled KKT residual " << res.kkt.scaled() << " > " << options.tolerance;
    throw ComputationError(os.str());
  }
  const auto& lay = problem.layout;
  FlowSolution sol;
  sol.link_flows = res.x.head(static_cast<Eigen::Index>(lay.num_links));
  sol.entry_links = lay.entry_links;
  sol.demands = res.x.segment(static_cast<Eigen::Index>(lay.num_links), static_cast<Eigen::Index>(lay.entry_links.size()));
  sol.movement_flows = res.x.tail(static_cast<Eigen::Index>(lay.num_movements));
  sol.objective = res.objective;
  sol.unique = res.unique;
  sol.kkt = res.kkt;
  sol.conservation_residual =
      problem.qp.eq_rhs.size() ? (problem.qp.eq_matrix * res.x - problem.qp.eq_rhs).cwiseAbs().maxCoeff() : 0.0;
  for (std::size_t k = 0; k < g.num_movements(); ++k) {
    const double cap = problem.qp.upper(lay.movement(k));
    if (std::isfinite(cap) && g.movement(k).allowed &&
        sol.movement_flows(static_cast<Eigen::Index>(k)) >= cap - 1e-7 * std::max(1.0, cap))
      sol.binding_movements.push_back(k);
  }

  for (const auto& [id, vs] : m.link_flows) {
    const double f = sol.link_flows(static_cast<Eigen::Index>(g.link_index(id)));
    for (const auto& v : vs) sol.residuals.push_back({"link_flow", id, "", v.value, f, v.weight, f - v.value});
  }
  for (const auto& [id, vs] : m.demands) {
    const double d = sol.demand_of(g.link_index(id));
    for (const auto& v : vs) sol.residuals.push_back({"demand", id, "", v.value, d, v.weight, d - v.value});
  }
  for (const auto& [key, vs] : m.turn_ratios) {
    const auto mv = g.movement_index(key.from, key.to);
    const double fm = sol.movement_flows(static_cast<Eigen::Index>(mv));
    const double fl = sol.link_flows(static_cast<Eigen::Index>(g.movement_from(mv)));
    const double ratio = fl > 1e-9 ? fm / fl : std::numeric_limits<double>::quiet_NaN();
    for (const auto& v : vs) sol.residuals.push_back({"turn_ratio", key.from, key.to, v.value, ratio, v.weight, fm - v.value * fl});
  }
  return sol;
}

SplitRatios split_ratios(const NetworkGraph& g, const FlowSolution& sol, double tol) {
  SplitRatios out;
  out.ratios = RatioVector::Zero(static_cast<Eigen::Index>(g.num_movements()));
  for (std::size_t l = 0; l < g.num_links(); ++l) {
    const auto moves = g.movements_from(l);
    if (moves.empty()) continue;
    const double fl = sol.link_flows(static_cast<Eigen::Index>(l));
    if (fl > tol) {
      for (auto mv : moves) out.ratios(static_cast<Eigen::Index>(mv)) = sol.movement_flows(static_cast<Eigen::Index>(mv)) / fl;
      continue;
    }
    std::size_t allowed = 0;
    for (auto mv : moves) allowed += g.movement(mv).allowed ? 1 : 0;
    for (auto mv : moves)
      out.ratios(static_cast<Eigen::Index>(mv)) = g.movement(mv).allowed && allowed ? 1.0 / static_cast<double>(allowed) : 0.0;
    out.undetermined_links.push_back(g.link(l).id);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Output

namespace {

// Solver output rounded to 1e-6 so the table does not show roundoff noise.
std::string table_number(double v) { return format_number(std::round(v * 1e6) / 1e6 + 0.0); }

double weighted_mean(const std::vector<WeightedValue>& vs) {
  double num = 0.0, den = 0.0;
  for (const auto& v : vs) {
    num += v.weight * v.value;
    den += v.weight;
  }
  return num / den;
}

}  // namespace

void write_solution_csv(std::ostream& os, const NetworkGraph& g, const MeasurementSet& m,
                        const FlowSolution& sol, const SplitRatios& splits) {
  os << "link,measured_flow,calculated_flow,from,to,measured_ratio,calculated_ratio\n";
  const std::size_t rows = std::max(g.num_links(), g.num_movements());
  for (std::size_t i = 0; i < rows; ++i) {
    if (i < g.num_links()) {
      const auto& id = g.link(i).id;
      auto it = m.link_flows.find(id);
      os << id << ',' << (it == m.link_flows.end() ? "-1" : format_number(weighted_mean(it->second))) << ','
         << table_number(sol.link_flows(static_cast<Eigen::Index>(i)));
    } else {
      os << ",,";
    }
    os << ',';
    if (i < g.num_movements()) {
      const auto& mv = g.movement(i);
      auto it = m.turn_ratios.find(MovementKey{mv.from_link, mv.to_link});
      os << mv.from_link << ',' << mv.to_link << ','
         << (it == m.turn_ratios.end() ? "-1" : format_number(weighted_mean(it->second))) << ','
         << table_number(splits.ratios(static_cast<Eigen::Index>(i)));
    } else {
      os << ",,,";
    }
    os << '\n';
  }
}

void write_residuals_csv(std::ostream& os, const FlowSolution& sol) {
  os << "kind,id_from,id_to,measured,calibrated,weight,error\n";
  for (const auto& r : sol.residuals)
    os << r.kind << ',' << r.from << ',' << r.to << ',' << format_number(r.measured) << ','
       << format_number(r.calibrated) << ',' << format_number(r.weight) << ',' << format_number(r.error) << '\n';
}

void write_split_ratios_csv(std::ostream& os, const NetworkGraph& g, const SplitRatios& splits) {
  os << "from,to,ratio,undetermined\n";
  for (std::size_t k = 0; k < g.num_movements(); ++k) {
    const auto& mv = g.movement(k);
    const bool undetermined = std::find(splits.undetermined_links.begin(), splits.undetermined_links.end(),
                                        mv.from_link) != splits.undetermined_links.end();
    os << mv.from_link << ',' << mv.to_link << ',' << format_number(splits.ratios(static_cast<Eigen::Index>(k)))
       << ',' << (undetermined ? 1 : 0) << '\n';
  }
}

void write_flows_csv(std::ostream& os, const NetworkGraph& g, const FlowSolution& sol) {
  os << "kind,id_from,id_to,flow_vph\n";
  for (std::size_t l = 0; l < g.num_links(); ++l)
    os << "link," << g.link(l).id << ",," << format_number(sol.link_flows(static_cast<Eigen::Index>(l))) << '\n';
  for (std::size_t k = 0; k < sol.entry_links.size(); ++k)
    os << "demand," << g.link(sol.entry_links[k]).id << ",," << format_number(sol.demands(static_cast<Eigen::Index>(k))) << '\n';
  for (std::size_t k = 0; k < g.num_movements(); ++k)
    os << "movement," << g.movement(k).from_link << ',' << g.movement(k).to_link << ','
       << format_number(sol.movement_flows(static_cast<Eigen::Index>(k))) << '\n';
}

}  // namespace artcal
