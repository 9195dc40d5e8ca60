#include "artcal/cli.hpp"

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <optional>
#include <ostream>
#include <sstream>

#include "CLI11.hpp"
#include "artcal/calibrate.hpp"
#include "artcal/csv.hpp"
#include "artcal/diversion.hpp"
#include "artcal/identify.hpp"
#include "artcal/metrics.hpp"
#include "artcal/network_io.hpp"
#include "artcal/scenario.hpp"
#include "artcal/sim.hpp"

namespace artcal {

namespace {

namespace fs = std::filesystem;

enum class Verbosity { quiet, info, debug };

Verbosity verbosity_from_env() {
  const char* v = std::getenv("ARTCAL_LOG_LEVEL");
  if (!v) return Verbosity::info;
  const std::string s(v);
  if (s == "quiet" || s == "0" || s == "error") return Verbosity::quiet;
  if (s == "debug" || s == "2") return Verbosity::debug;
  return Verbosity::info;
}

class Log {
 public:
  Log(std::ostream& os, Verbosity level) : os_(&os), level_(level) {}
  void info(const std::string& msg) const {
    if (level_ != Verbosity::quiet) *os_ << msg << '\n';
  }
  void debug(const std::string& msg) const {
    if (level_ == Verbosity::debug) *os_ << msg << '\n';
  }

 private:
  std::ostream* os_;
  Verbosity level_;
};

// Raw flag values; `given` tells whether the user passed them.
struct Flags {
  std::string network, measurements, scenario, out = ".";
  std::uint64_t seed = 1;
  double tol = 0.0;
  CLI::Option *network_opt = nullptr, *measurements_opt = nullptr, *scenario_opt = nullptr;
  CLI::Option *seed_opt = nullptr, *tol_opt = nullptr;

  // command specific
  std::vector<std::string> route;
  bool simple = false;
  std::string log;
  double end_s = 0.0;
  CLI::Option* end_opt = nullptr;
};

struct Context {
  ScenarioConfig scenario;
  fs::path out;
  std::optional<double> tol;
  Log log;
  std::ostream* out_stream;

  NetworkDocument network() const {
    if (!scenario.network) throw InputError("no network given (use --network or a scenario)");
    log.debug("loading network " + scenario.network->string());
    return load_network_json(*scenario.network);
  }
  std::optional<MeasurementSet> measurements() const {
    if (!scenario.measurements) return std::nullopt;
    log.debug("loading measurements " + scenario.measurements->string());
    return load_measurements_csv(*scenario.measurements);
  }
  fs::path out_file(const std::string& name) const {
    fs::create_directories(out);
    return out / name;
  }
};

Context resolve(const Flags& f, std::ostream& out, std::ostream& err) {
  Context ctx{{}, fs::path(f.out), std::nullopt, Log(err, verbosity_from_env()), &out};
  if (f.scenario_opt->count()) ctx.scenario = load_scenario(f.scenario);
  if (f.network_opt->count()) ctx.scenario.network = f.network;
  if (f.measurements_opt->count()) ctx.scenario.measurements = f.measurements;
  if (f.seed_opt->count()) ctx.scenario.sim.seed = f.seed;
  if (f.tol_opt->count()) {
    if (!(f.tol > 0.0)) throw InputError("--tol must be positive");
    ctx.tol = f.tol;
  }
  if (!f.route.empty()) ctx.scenario.route = f.route;
  if (f.simple) ctx.scenario.retime = false;
  if (!f.log.empty()) ctx.scenario.metrics.log = f.log;
  return ctx;
}

void write_file(const fs::path& path, const std::function<void(std::ostream&)>& body) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw InputError("cannot write " + path.string());
  body(os);
  if (!os) throw InputError("error writing " + path.string());
}

// ---------------------------------------------------------------------------

int cmd_validate(const Context& ctx) {
  const auto doc = ctx.network();
  const auto report = validate_network(doc.graph, doc.demands);
  auto& out = *ctx.out_stream;
  for (const auto& v : report.violations) out << v.subject << ": " << v.message << '\n';
  if (!report.well_formed()) {
    ctx.log.info(std::to_string(report.violations.size()) + " violation(s)");
    return kExitInput;
  }
  if (auto m = ctx.measurements()) check_measurements(doc.graph, *m);
  out << "ok: " << doc.graph.num_nodes() << " nodes, " << doc.graph.num_links() << " links, "
      << doc.graph.num_movements() << " movements, " << doc.demands.size() << " commodities\n";
  return kExitOk;
}

int cmd_calibrate(const Context& ctx) {
  const auto doc = ctx.network();
  const auto m = ctx.measurements();
  if (!m) throw InputError("calibrate needs --measurements");
  check_measurements(doc.graph, *m);

  CalibrationOptions opt;
  if (ctx.tol) opt.tolerance = *ctx.tol;
  const auto sol = solve_calibration(doc.graph, *m, opt);
  const auto splits = split_ratios(doc.graph, sol);

  write_file(ctx.out_file("solution.csv"), [&](std::ostream& os) { write_solution_csv(os, doc.graph, *m, sol, splits); });
  write_file(ctx.out_file("residuals.csv"), [&](std::ostream& os) { write_residuals_csv(os, sol); });
  write_file(ctx.out_file("split_ratios.csv"), [&](std::ostream& os) { write_split_ratios_csv(os, doc.graph, splits); });
  write_file(ctx.out_file("flows.csv"), [&](std::ostream& os) { write_flows_csv(os, doc.graph, sol); });

  double worst = 0.0;
  for (const auto& r : sol.residuals) worst = std::max(worst, std::abs(r.error));
  auto& out = *ctx.out_stream;
  out << "objective " << format_number(sol.objective) << '\n'
      << "measurements " << sol.residuals.size() << ", max |residual| " << format_number(worst) << " vph\n"
      << "conservation residual " << format_number(sol.conservation_residual) << '\n';
  if (!sol.unique) out << "solution not unique: some flows are not pinned down by the measurements\n";
  for (const auto& l : splits.undetermined_links) ctx.log.info("no flow on " + l + ": split ratios set uniform");
  return kExitOk;
}

int cmd_identify(const Context& ctx) {
  const auto doc = ctx.network();
  const auto m = ctx.measurements();
  if (!m) throw InputError("identify needs --measurements");
  check_measurements(doc.graph, *m);

  IdentifyOptions opt;
  if (ctx.tol) opt.tolerance = *ctx.tol;
  const auto res = analyze_identifiability(doc.graph, *m, opt);
  write_file(ctx.out_file("identifiability.csv"),
             [&](std::ostream& os) { write_identifiability_csv(os, res.graph, res.report); });
  write_file(ctx.out_file("colors.csv"), [&](std::ostream& os) { write_color_annotation(os, res.graph, res.report); });

  const auto& r = res.report;
  auto& out = *ctx.out_stream;
  out << "measured " << r.count(FlowStatus::measured) << ", identified " << r.count(FlowStatus::identified)
      << ", undetermined " << r.count(FlowStatus::undetermined) << '\n';
  if (!r.fully_identified()) {
    out << "additional measurements needed " << r.required_additional_count << ':';
    for (auto l : r.suggested_measurements) out << ' ' << res.graph.link(l).id;
    out << '\n';
  }
  if (r.vmt) {
    if (r.vmt->unbounded)
      out << "VMT unbounded above (undetermined directed cycle)\n";
    else
      out << "VMT " << format_number(r.vmt->estimate()) << " +- " << format_number(r.vmt->half_width()) << '\n';
  }
  return kExitOk;
}

// Steady flows of the network's own demand, in calibration layout.
FlowSolution demand_baseline(const NetworkGraph& g, std::span<const CommodityDemand> demands) {
  if (demands.empty()) throw InputError("divert needs measurements or demands in the network file");
  const auto agg = aggregate_commodities(demands, g);
  FlowSolution sol;
  sol.link_flows = agg.link_flows;
  sol.entry_links = g.entry_links();
  sol.demands.resize(static_cast<Eigen::Index>(sol.entry_links.size()));
  for (std::size_t k = 0; k < sol.entry_links.size(); ++k)
    sol.demands[static_cast<Eigen::Index>(k)] = agg.entry_demand[static_cast<Eigen::Index>(sol.entry_links[k])];
  sol.movement_flows.resize(static_cast<Eigen::Index>(g.num_movements()));
  for (std::size_t mv = 0; mv < g.num_movements(); ++mv) {
    const auto i = static_cast<Eigen::Index>(mv);
    sol.movement_flows[i] = agg.ratios[i] * agg.link_flows[static_cast<Eigen::Index>(g.movement_from(mv))];
  }
  return sol;
}

int cmd_divert(const Context& ctx) {
  const auto doc = ctx.network();
  const auto& route = ctx.scenario.route;
  if (route.size() < 2) throw InputError("divert needs a route of at least two links (--route a,b,...)");

  FlowSolution baseline;
  if (auto m = ctx.measurements()) {
    check_measurements(doc.graph, *m);
    ctx.log.debug("baseline from calibration");
    baseline = solve_calibration(doc.graph, *m);
  } else {
    ctx.log.debug("baseline from network demands");
    baseline = demand_baseline(doc.graph, doc.demands);
  }

  DiversionOptions opt;
  if (ctx.tol) opt.binding_tolerance = *ctx.tol;
  auto& out = *ctx.out_stream;
  const auto simple = max_simple_diversion(doc.graph, baseline, route, opt);
  write_file(ctx.out_file("diversion.json"), [&](std::ostream& os) { os << diversion_to_json(doc.graph, simple) << '\n'; });
  out << "D* " << format_number(simple.optimal_diversion) << " vph\n";

  if (ctx.scenario.retime) {
    const auto retimed = max_retimed_diversion(doc.graph, baseline, route, opt);
    write_file(ctx.out_file("diversion_retimed.json"),
               [&](std::ostream& os) { os << diversion_to_json(doc.graph, retimed) << '\n'; });
    out << "D+* " << format_number(retimed.optimal_diversion) << " vph\n";
  }
  return kExitOk;
}

int cmd_simulate(const Context& ctx) {
  const auto doc = ctx.network();
  const auto path = ctx.out_file("events.csv");
  std::ofstream os(path, std::ios::binary);
  if (!os) throw InputError("cannot write " + path.string());
  CsvEventWriter writer(os, doc.graph);
  Simulator sim(doc.graph, doc.demands, ctx.scenario.sim, writer);
  sim.run();
  if (!os) throw InputError("error writing " + path.string());

  *ctx.out_stream << "simulated " << format_number(sim.now()) << " s: " << sim.vehicles_created() << " vehicles, "
                  << sim.vehicles_exited() << " exited, " << sim.vehicles_inside() << " inside, "
                  << sim.vehicles_waiting_outside() << " waiting outside\n";
  return kExitOk;
}

int cmd_sweep(const Context& ctx) {
  const auto doc = ctx.network();
  const auto& s = ctx.scenario;
  const auto res = loading_sweep(doc.graph, doc.demands, s.sim, s.factors, s.step_hours);
  write_file(ctx.out_file("events.csv"), [&](std::ostream& os) { write_event_csv(os, doc.graph, res.events); });

  std::vector<double> edges{0.0};
  for (const auto& seg : res.segments) edges.push_back(seg.end_s);
  const auto steps = step_summaries(doc.graph, res.events, edges);
  write_file(ctx.out_file("sweep_segments.csv"), [&](std::ostream& os) {
    os << "gamma,start_s,end_s,e_vph,a_vph,d_vph,mean_w,mean_n,end_w,end_n\n";
    for (std::size_t i = 0; i < steps.size(); ++i) {
      const auto& st = steps[i];
      os << format_number(res.segments[i].gamma) << ',' << format_number(st.start_s) << ','
         << format_number(st.end_s) << ',' << format_number(st.e_vph) << ',' << format_number(st.a_vph) << ','
         << format_number(st.d_vph) << ',' << format_number(st.mean_w) << ',' << format_number(st.mean_n) << ','
         << st.end_w << ',' << st.end_n << '\n';
    }
  });

  auto& out = *ctx.out_stream;
  out << "gamma  arrivals/h  departures/h  mean n  end n\n";
  for (std::size_t i = 0; i < steps.size(); ++i)
    out << format_number(res.segments[i].gamma) << "  " << format_number(std::round(steps[i].a_vph)) << "  "
        << format_number(std::round(steps[i].d_vph)) << "  " << format_number(std::round(steps[i].mean_n)) << "  "
        << steps[i].end_n << '\n';
  return kExitOk;
}

int cmd_metrics(const Context& ctx, std::optional<double> end_s) {
  const auto doc = ctx.network();
  const auto& settings = ctx.scenario.metrics;
  if (!settings.log) throw InputError("metrics needs an event log (--log or metrics.log)");
  std::ifstream is(*settings.log, std::ios::binary);
  if (!is) throw InputError("cannot open '" + settings.log->string() + "'");

  LogAnalysis analysis(doc.graph, metrics_options(settings, doc.graph));
  read_event_csv(is, doc.graph, [&](const SimEvent& e) { analysis.add(e); });
  const auto report = analysis.finish(end_s);
  write_metrics(ctx.out.string(), doc.graph, report);

  auto& out = *ctx.out_stream;
  out << "trips " << report.trips.size() << " over " << format_number(report.duration_s) << " s\n";
  if (report.vmt)
    out << "VMT/h " << format_number(report.vmt->vmt_per_hour) << ", VHT/h " << format_number(report.vmt->vht_per_hour)
        << ", speed " << format_number(report.vmt->speed_mph) << " mph\n";
  const auto& lr = report.macro.little;
  if (lr.n_error && lr.w_error)
    out << "Little's law: n error " << format_number(*lr.n_error) << ", w error " << format_number(*lr.w_error) << '\n';
  if (!report.excess.never_actuated.empty())
    out << report.excess.never_actuated.size() << " signalized movement(s) never green\n";
  return kExitOk;
}

}  // namespace

int run_cli(std::span<const std::string> args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Arterial network calibration, identifiability, diversion and simulation"};
  app.name("artcal");
  app.require_subcommand(1);
  app.fallthrough();

  Flags f;
  f.network_opt = app.add_option("--network", f.network, "network JSON");
  f.measurements_opt = app.add_option("--measurements", f.measurements, "measurement CSV");
  f.scenario_opt = app.add_option("--scenario", f.scenario, "scenario JSON");
  app.add_option("--out", f.out, "output directory")->capture_default_str();
  f.seed_opt = app.add_option("--seed", f.seed, "simulation seed");
  f.tol_opt = app.add_option("--tol", f.tol, "solver tolerance");

  auto* validate = app.add_subcommand("validate", "check a network (and measurements) for structural problems");
  auto* calibrate = app.add_subcommand("calibrate", "fit flows and split ratios to measurements");
  auto* identify = app.add_subcommand("identify", "which flows the measurements determine");
  auto* divert = app.add_subcommand("divert", "largest extra flow a route can absorb");
  divert->add_option("--route", f.route, "link ids from entry to exit")->delimiter(',');
  divert->add_flag("--simple", f.simple, "skip the re-timed LP");
  auto* simulate = app.add_subcommand("simulate", "run the queue simulation and write events.csv");
  auto* sweep = app.add_subcommand("sweep", "stepwise demand loading sweep");
  auto* metrics = app.add_subcommand("metrics", "analyze an event log");
  metrics->add_option("--log", f.log, "event CSV");
  f.end_opt = metrics->add_option("--end", f.end_s, "end of the analysis period, s (default: last event)");

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << '\n' << "run with --help for usage\n";
    return kExitInput;
  }

  try {
    const auto ctx = resolve(f, out, err);
    if (validate->parsed()) return cmd_validate(ctx);
    if (calibrate->parsed()) return cmd_calibrate(ctx);
    if (identify->parsed()) return cmd_identify(ctx);
    if (divert->parsed()) return cmd_divert(ctx);
    if (simulate->parsed()) return cmd_simulate(ctx);
    if (sweep->parsed()) return cmd_sweep(ctx);
    if (metrics->parsed()) return cmd_metrics(ctx, f.end_opt->count() ? std::optional(f.end_s) : std::nullopt);
  } catch (const InputError& e) {
    err << "input error: " << e.what() << '\n';
    return kExitInput;
  } catch (const fs::filesystem_error& e) {
    err << "input error: " << e.what() << '\n';
    return kExitInput;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitComputation;
  }
  return kExitInput;
}

}  // namespace artcal
