#include "artcal/network_io.hpp"

#include <fstream>
#include <ostream>
#include <sstream>

#include "artcal/csv.hpp"
#include "json.hpp"

namespace artcal {

using nlohmann::json;

namespace {

class Reader {
 public:
  explicit Reader(std::string path) : path_(std::move(path)) {}

  [[noreturn]] void fail(const std::string& problem) const {
    throw InputError(path_ + ": " + problem);
  }

  Reader at(const std::string& key) const { return Reader(path_ + "." + key); }
  Reader at(std::size_t i) const { return Reader(path_ + "[" + std::to_string(i) + "]"); }

  const json& field(const json& obj, const char* key) const {
    if (!obj.is_object()) fail("expected an object");
    auto it = obj.find(key);
    if (it == obj.end()) at(key).fail("missing required field");
    return *it;
  }

  std::string string(const json& v) const {
    if (!v.is_string()) fail("expected a string");
    auto s = v.get<std::string>();
    if (s.find(',') != std::string::npos || s.find('"') != std::string::npos)
      fail("ids may not contain commas or quotes");
    return s;
  }

  double number(const json& v) const {
    if (!v.is_number()) fail("expected a number");
    return v.get<double>();
  }

  const json& array(const json& v) const {
    if (!v.is_array()) fail("expected an array");
    return v;
  }

 private:
  std::string path_;
};

std::string optional_id(const json& obj, const char* key, const Reader& r) {
  auto it = obj.find(key);
  if (it == obj.end() || it->is_null()) return {};
  return r.at(key).string(*it);
}

double number_or(const json& obj, const char* key, double fallback, const Reader& r) {
  auto it = obj.find(key);
  if (it == obj.end()) return fallback;
  return r.at(key).number(*it);
}

CommodityDemand parse_demand(const json& v, const Reader& r, int fallback_index) {
  CommodityDemand d;
  d.index = fallback_index;
  if (!v.is_object()) r.fail("expected an object");
  if (auto it = v.find("commodity"); it != v.end()) {
    if (!it->is_number_integer()) r.at("commodity").fail("expected an integer");
    d.index = it->get<int>();
  }
  if (auto it = v.find("entry_flows"); it != v.end()) {
    if (!it->is_object()) r.at("entry_flows").fail("expected an object of link -> vph");
    for (const auto& [id, flow] : it->items())
      d.entry_flows_vph[id] = r.at("entry_flows").at(id).number(flow);
  }
  if (auto it = v.find("turn_ratios"); it != v.end()) {
    const Reader rr = r.at("turn_ratios");
    for (std::size_t i = 0; i < rr.array(*it).size(); ++i) {
      const json& t = (*it)[i];
      const Reader ri = rr.at(i);
      MovementKey key{ri.at("from").string(ri.field(t, "from")), ri.at("to").string(ri.field(t, "to"))};
      d.turn_ratios[key] = ri.at("ratio").number(ri.field(t, "ratio"));
    }
  }
  if (auto it = v.find("route"); it != v.end()) {
    const Reader rr = r.at("route");
    for (std::size_t i = 0; i < rr.array(*it).size(); ++i) d.route.push_back(rr.at(i).string((*it)[i]));
  }
  return d;
}

}  // namespace

NetworkDocument parse_network_json(std::string_view text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw InputError(std::string("network: invalid JSON: ") + e.what());
  }
  const Reader root("network");
  if (!doc.is_object()) root.fail("expected a JSON object");

  std::vector<Node> nodes;
  {
    const Reader r = root.at("nodes");
    const json& arr = r.array(root.field(doc, "nodes"));
    for (std::size_t i = 0; i < arr.size(); ++i) {
      const Reader ri = r.at(i);
      Node n;
      n.id = ri.at("id").string(ri.field(arr[i], "id"));
      n.cycle_time_s = number_or(arr[i], "cycle_time", 0.0, ri);
      n.lost_time_s = number_or(arr[i], "lost_time", 0.0, ri);
      nodes.push_back(std::move(n));
    }
  }

  std::vector<Link> links;
  {
    const Reader r = root.at("links");
    const json& arr = r.array(root.field(doc, "links"));
    for (std::size_t i = 0; i < arr.size(); ++i) {
      const Reader ri = r.at(i);
      const json& v = arr[i];
      Link l;
      l.id = ri.at("id").string(ri.field(v, "id"));
      l.from_node = optional_id(v, "from", ri);
      l.to_node = optional_id(v, "to", ri);
      l.length_mi = ri.at("length").number(ri.field(v, "length"));
      l.storage_capacity = ri.at("storage").number(ri.field(v, "storage"));
      l.travel_time_s = ri.at("travel_time").number(ri.field(v, "travel_time"));
      if (auto it = v.find("lanes"); it != v.end()) {
        if (!it->is_number_integer()) ri.at("lanes").fail("expected an integer");
        l.lanes = it->get<int>();
      }
      if (auto it = v.find("kind"); it != v.end()) {
        auto kind = link_kind_from_string(ri.at("kind").string(*it));
        if (!kind) ri.at("kind").fail("expected one of entry, internal, exit");
        l.kind = *kind;
      } else {
        l.kind = l.from_node.empty() ? LinkKind::entry
                 : l.to_node.empty() ? LinkKind::exit
                                     : LinkKind::internal;
      }
      links.push_back(std::move(l));
    }
  }

  std::vector<Movement> movements;
  if (auto it = doc.find("movements"); it != doc.end()) {
    const Reader r = root.at("movements");
    for (std::size_t i = 0; i < r.array(*it).size(); ++i) {
      const Reader ri = r.at(i);
      const json& v = (*it)[i];
      Movement m;
      m.from_link = ri.at("from").string(ri.field(v, "from"));
      m.to_link = ri.at("to").string(ri.field(v, "to"));
      m.saturation_flow_vph = number_or(v, "saturation_flow", 0.0, ri);
      if (auto a = v.find("allowed"); a != v.end()) {
        if (!a->is_boolean()) ri.at("allowed").fail("expected a boolean");
        m.allowed = a->get<bool>();
      }
      movements.push_back(std::move(m));
    }
  }

  std::vector<TimingPlan> plans;
  if (auto it = doc.find("timing_plans"); it != doc.end()) {
    const Reader r = root.at("timing_plans");
    for (std::size_t i = 0; i < r.array(*it).size(); ++i) {
      const Reader ri = r.at(i);
      const json& v = (*it)[i];
      TimingPlan p;
      p.node_id = ri.at("node").string(ri.field(v, "node"));
      p.offset_s = number_or(v, "offset", 0.0, ri);
      const Reader rs = ri.at("stages");
      const json& stages = rs.array(ri.field(v, "stages"));
      for (std::size_t s = 0; s < stages.size(); ++s) {
        const Reader rss = rs.at(s).at("phases");
        const json& phases = rss.array(rs.at(s).field(stages[s], "phases"));
        Stage stage;
        for (std::size_t k = 0; k < phases.size(); ++k) {
          const Reader rp = rss.at(k);
          PhaseGreen g;
          g.from_link = rp.at("from").string(rp.field(phases[k], "from"));
          g.to_link = rp.at("to").string(rp.field(phases[k], "to"));
          g.duration_s = rp.at("green").number(rp.field(phases[k], "green"));
          stage.greens.push_back(std::move(g));
        }
        p.stages.push_back(std::move(stage));
      }
      plans.push_back(std::move(p));
    }
  }

  NetworkDocument out;
  try {
    out.graph = NetworkGraph(std::move(nodes), std::move(links), std::move(movements), std::move(plans));
  } catch (const InputError& e) {
    throw InputError(std::string("network: ") + e.what());
  }

  if (auto it = doc.find("demands"); it != doc.end()) {
    const Reader r = root.at("demands");
    for (std::size_t i = 0; i < r.array(*it).size(); ++i)
      out.demands.push_back(parse_demand((*it)[i], r.at(i), static_cast<int>(i)));
  }
  return out;
}

std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open '" + path.string() + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

NetworkDocument load_network_json(const std::filesystem::path& path) {
  return parse_network_json(read_text_file(path));
}

std::string network_to_json(const NetworkGraph& g, std::span<const CommodityDemand> demands) {
  json doc;
  doc["nodes"] = json::array();
  for (const auto& n : g.nodes()) {
    json v{{"id", n.id}};
    if (n.cycle_time_s > 0.0) {
      v["cycle_time"] = n.cycle_time_s;
      v["lost_time"] = n.lost_time_s;
    }
    doc["nodes"].push_back(v);
  }
  doc["links"] = json::array();
  for (const auto& l : g.links()) {
    json v{{"id", l.id},
           {"from", l.from_node.empty() ? json(nullptr) : json(l.from_node)},
           {"to", l.to_node.empty() ? json(nullptr) : json(l.to_node)},
           {"length", l.length_mi},
           {"storage", l.storage_capacity},
           {"travel_time", l.travel_time_s},
           {"kind", std::string(to_string(l.kind))}};
    if (l.lanes != 1) v["lanes"] = l.lanes;
    doc["links"].push_back(v);
  }
  doc["movements"] = json::array();
  for (const auto& m : g.movements()) {
    json v{{"from", m.from_link}, {"to", m.to_link}, {"saturation_flow", m.saturation_flow_vph}};
    if (!m.allowed) v["allowed"] = false;
    doc["movements"].push_back(v);
  }
  doc["timing_plans"] = json::array();
  for (const auto& p : g.plans()) {
    json stages = json::array();
    for (const auto& s : p.stages) {
      json phases = json::array();
      for (const auto& ph : s.greens)
        phases.push_back({{"from", ph.from_link}, {"to", ph.to_link}, {"green", ph.duration_s}});
      stages.push_back({{"phases", phases}});
    }
    doc["timing_plans"].push_back({{"node", p.node_id}, {"offset", p.offset_s}, {"stages", stages}});
  }
  if (!demands.empty()) {
    doc["demands"] = json::array();
    for (const auto& d : demands) {
      json v{{"commodity", d.index}, {"entry_flows", d.entry_flows_vph}};
      if (!d.turn_ratios.empty()) {
        v["turn_ratios"] = json::array();
        for (const auto& [key, r] : d.turn_ratios)
          v["turn_ratios"].push_back({{"from", key.from}, {"to", key.to}, {"ratio", r}});
      }
      if (d.fixed_route()) v["route"] = d.route;
      doc["demands"].push_back(v);
    }
  }
  return doc.dump(2) + "\n";
}

void write_links_csv(std::ostream& os, const NetworkGraph& g) {
  os << "id,from,to,kind,length_mi,storage,travel_time_s,lanes\n";
  for (const auto& l : g.links()) {
    os << l.id << ',' << l.from_node << ',' << l.to_node << ',' << to_string(l.kind) << ','
       << format_number(l.length_mi) << ',' << format_number(l.storage_capacity) << ','
       << format_number(l.travel_time_s) << ',' << l.lanes << '\n';
  }
}

void write_movements_csv(std::ostream& os, const NetworkGraph& g) {
  os << "from,to,saturation_flow_vph,allowed,capacity_vph\n";
  for (std::size_t k = 0; k < g.num_movements(); ++k) {
    const auto& m = g.movement(k);
    os << m.from_link << ',' << m.to_link << ',' << format_number(m.saturation_flow_vph) << ','
       << (m.allowed ? "true" : "false") << ',' << format_number(effective_capacity(g, k)) << '\n';
  }
}

}  // namespace artcal
