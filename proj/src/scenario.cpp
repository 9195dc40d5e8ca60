#include "artcal/scenario.hpp"

#include "artcal/network_io.hpp"
#include "json.hpp"

namespace artcal {

namespace {

using nlohmann::json;

[[noreturn]] void fail(const std::string& field, const std::string& problem) {
  throw InputError(field + ": " + problem);
}

const json* member(const json& obj, const char* key) {
  auto it = obj.find(key);
  return it == obj.end() || it->is_null() ? nullptr : &*it;
}

double number_field(const json& obj, const char* key, const std::string& path, double fallback) {
  const auto* v = member(obj, key);
  if (!v) return fallback;
  if (!v->is_number()) fail(path + "." + key, "expected a number");
  return v->get<double>();
}

std::string string_field(const json& obj, const char* key, const std::string& path, std::string fallback) {
  const auto* v = member(obj, key);
  if (!v) return fallback;
  if (!v->is_string()) fail(path + "." + key, "expected a string");
  return v->get<std::string>();
}

std::vector<std::string> string_list(const json& v, const std::string& path) {
  if (!v.is_array()) fail(path, "expected an array of strings");
  std::vector<std::string> out;
  for (const auto& s : v) {
    if (!s.is_string()) fail(path, "expected an array of strings");
    out.push_back(s.get<std::string>());
  }
  return out;
}

std::filesystem::path resolve(const std::filesystem::path& base, const std::string& p) {
  const std::filesystem::path path(p);
  return path.is_absolute() || base.empty() ? path : base / path;
}

void parse_simulate(const json& block, SimConfig& sim) {
  if (!block.is_object()) fail("simulate", "expected an object");
  sim.horizon_s = number_field(block, "horizon_s", "simulate", sim.horizon_s);
  if (!(sim.horizon_s > 0.0)) fail("simulate.horizon_s", "must be positive");
  sim.demand_scale = number_field(block, "demand_scale", "simulate", sim.demand_scale);
  if (!(sim.demand_scale >= 0.0)) fail("simulate.demand_scale", "must be nonnegative");

  const auto arrivals = string_field(block, "arrivals", "simulate", "deterministic");
  if (arrivals == "deterministic")
    sim.arrivals = ArrivalProcess::deterministic;
  else if (arrivals == "poisson")
    sim.arrivals = ArrivalProcess::poisson;
  else
    fail("simulate.arrivals", "expected deterministic or poisson");

  const auto times = string_field(block, "travel_times", "simulate", "constant");
  if (times == "constant")
    sim.travel_times = TravelTimeModel::constant;
  else if (times == "exponential")
    sim.travel_times = TravelTimeModel::exponential;
  else
    fail("simulate.travel_times", "expected constant or exponential");

  if (const auto* d = member(block, "drain")) {
    if (!d->is_boolean()) fail("simulate.drain", "expected true or false");
    sim.drain = d->get<bool>();
  }

  if (const auto* c = member(block, "controller")) {
    if (!c->is_object()) fail("simulate.controller", "expected an object");
    const auto mode = string_field(*c, "mode", "simulate.controller", "fixed_time");
    if (mode == "fixed_time")
      sim.controller.mode = ControlMode::fixed_time;
    else if (mode == "max_pressure")
      sim.controller.mode = ControlMode::max_pressure;
    else
      fail("simulate.controller.mode", "expected fixed_time or max_pressure");
    const double k = number_field(*c, "decisions_per_cycle", "simulate.controller", 4);
    if (k < 1 || k != static_cast<int>(k)) fail("simulate.controller.decisions_per_cycle", "expected a positive integer");
    sim.controller.decisions_per_cycle = static_cast<int>(k);
  }
}

void parse_metrics(const json& block, MetricsSettings& m, const std::filesystem::path& base) {
  if (!block.is_object()) fail("metrics", "expected an object");
  if (const auto* log = member(block, "log")) {
    if (!log->is_string()) fail("metrics.log", "expected a path");
    m.log = resolve(base, log->get<std::string>());
  }
  m.bin_s = number_field(block, "bin_s", "metrics", m.bin_s);
  m.queue_bin_s = number_field(block, "queue_bin_s", "metrics", m.queue_bin_s);
  m.mfd_bin_s = number_field(block, "mfd_bin_s", "metrics", m.mfd_bin_s);
  for (auto [v, name] : {std::pair{m.bin_s, "bin_s"}, {m.queue_bin_s, "queue_bin_s"}, {m.mfd_bin_s, "mfd_bin_s"}})
    if (!(v > 0.0)) fail(std::string("metrics.") + name, "must be positive");
  if (const auto* w = member(block, "window")) {
    if (!w->is_array() || w->size() != 2 || !(*w)[0].is_number() || !(*w)[1].is_number())
      fail("metrics.window", "expected [start, end]");
    m.window = {(*w)[0].get<double>(), (*w)[1].get<double>()};
    if (!(m.window->second > m.window->first)) fail("metrics.window", "end must follow start");
  }
  if (const auto* r = member(block, "routes")) {
    if (!r->is_array()) fail("metrics.routes", "expected an array of [entry, exit] pairs");
    for (const auto& pair : *r) {
      const auto ids = string_list(pair, "metrics.routes");
      if (ids.size() != 2) fail("metrics.routes", "expected an array of [entry, exit] pairs");
      m.routes.emplace_back(ids[0], ids[1]);
    }
  }
  if (const auto* l = member(block, "mfd_links")) m.mfd_links = string_list(*l, "metrics.mfd_links");
}

}  // namespace

ScenarioConfig parse_scenario_json(std::string_view text, const std::filesystem::path& base_dir) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw InputError(std::string("scenario: ") + e.what());
  }
  if (!doc.is_object()) fail("scenario", "expected a JSON object");

  ScenarioConfig s;
  if (const auto* n = member(doc, "network")) {
    if (!n->is_string()) fail("network", "expected a path");
    s.network = resolve(base_dir, n->get<std::string>());
  }
  if (const auto* m = member(doc, "measurements")) {
    if (!m->is_string()) fail("measurements", "expected a path");
    s.measurements = resolve(base_dir, m->get<std::string>());
  }
  if (const auto* seed = member(doc, "seed")) {
    if (!seed->is_number_unsigned()) fail("seed", "expected a nonnegative integer");
    s.sim.seed = seed->get<std::uint64_t>();
  }
  if (const auto* b = member(doc, "simulate")) parse_simulate(*b, s.sim);
  if (const auto* b = member(doc, "sweep")) {
    if (!b->is_object()) fail("sweep", "expected an object");
    if (const auto* f = member(*b, "factors")) {
      if (!f->is_array() || f->empty()) fail("sweep.factors", "expected a nonempty array of numbers");
      s.factors.clear();
      for (const auto& v : *f) {
        if (!v.is_number()) fail("sweep.factors", "expected a nonempty array of numbers");
        s.factors.push_back(v.get<double>());
      }
      for (std::size_t i = 0; i < s.factors.size(); ++i)
        if (!(s.factors[i] > 0.0) || (i > 0 && !(s.factors[i] > s.factors[i - 1])))
          fail("sweep.factors", "must be positive and increasing");
    }
    s.step_hours = number_field(*b, "step_hours", "sweep", s.step_hours);
    if (!(s.step_hours > 0.0)) fail("sweep.step_hours", "must be positive");
  }
  if (const auto* b = member(doc, "divert")) {
    if (!b->is_object()) fail("divert", "expected an object");
    if (const auto* r = member(*b, "route")) s.route = string_list(*r, "divert.route");
    if (const auto* rt = member(*b, "retime")) {
      if (!rt->is_boolean()) fail("divert.retime", "expected true or false");
      s.retime = rt->get<bool>();
    }
  }
  if (const auto* b = member(doc, "metrics")) parse_metrics(*b, s.metrics, base_dir);
  return s;
}

ScenarioConfig load_scenario(const std::filesystem::path& path) {
  return parse_scenario_json(read_text_file(path), path.parent_path());
}

MetricsOptions metrics_options(const MetricsSettings& s, const NetworkGraph& g) {
  MetricsOptions o;
  o.macro.bin_s = s.bin_s;
  if (s.window) {
    o.macro.window_start_s = s.window->first;
    o.macro.window_end_s = s.window->second;
  }
  o.queue_bin_s = s.queue_bin_s;
  o.mfd_bin_s = s.mfd_bin_s;
  for (const auto& [entry, exit] : s.routes) o.routes.emplace_back(g.link_index(entry), g.link_index(exit));
  for (const auto& id : s.mfd_links) o.mfd_links.push_back(g.link_index(id));
  return o;
}

}  // namespace artcal
