#include "artcal/event_log.hpp"

#include <array>
#include <charconv>
#include <istream>
#include <ostream>
#include <string>

#include "artcal/csv.hpp"

namespace artcal {

namespace {

constexpr std::array<std::string_view, 7> kKindNames{
    "external_arrival", "enter_link", "join_queue", "cross_intersection", "exit_network", "phase_change", "blocked"};

std::string_view link_id(const NetworkGraph& g, std::size_t l) {
  return l == kNone ? std::string_view{} : std::string_view{g.link(l).id};
}

std::size_t resolve_link(const NetworkGraph& g, const std::string& id, std::size_t line) {
  if (id.empty()) return kNone;
  auto l = g.find_link(id);
  if (!l) throw InputError("event log line " + std::to_string(line) + ": unknown link '" + id + "'");
  return *l;
}

}  // namespace

std::string_view to_string(EventKind kind) { return kKindNames.at(static_cast<std::size_t>(kind)); }

std::optional<EventKind> event_kind_from_string(std::string_view s) {
  for (std::size_t i = 0; i < kKindNames.size(); ++i)
    if (kKindNames[i] == s) return static_cast<EventKind>(i);
  return std::nullopt;
}

void write_event_csv_row(std::ostream& os, const NetworkGraph& g, const SimEvent& e) {
  os << format_number(e.time) << ',' << to_string(e.kind) << ',';
  if (e.vehicle >= 0) os << e.vehicle;
  os << ',' << link_id(g, e.link_from) << ',' << link_id(g, e.link_to) << ',';
  if (e.node != kNone) os << g.node(e.node).id;
  os << '\n';
}

void write_event_csv(std::ostream& os, const NetworkGraph& g, std::span<const SimEvent> events) {
  os << kEventCsvHeader << '\n';
  for (const auto& e : events) write_event_csv_row(os, g, e);
}

CsvEventWriter::CsvEventWriter(std::ostream& os, const NetworkGraph& g) : os_(&os), g_(&g) {
  os << kEventCsvHeader << '\n';
}

void read_event_csv(std::istream& is, const NetworkGraph& g, const EventSink& sink) {
  std::string line;
  std::size_t number = 0;
  if (!std::getline(is, line)) throw InputError("event log is empty");
  ++number;
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != kEventCsvHeader) throw InputError("event log: expected header '" + std::string(kEventCsvHeader) + "'");

  while (std::getline(is, line)) {
    ++number;
    if (line.empty() || line == "\r") continue;
    const auto f = split_csv_line(line);
    const std::string where = "event log line " + std::to_string(number);
    if (f.size() != 6) throw InputError(where + ": expected 6 fields");
    SimEvent e;
    e.time = parse_number(f[0], where + " time");
    auto kind = event_kind_from_string(f[1]);
    if (!kind) throw InputError(where + ": unknown kind '" + f[1] + "'");
    e.kind = *kind;
    if (!f[2].empty()) {
      auto [ptr, ec] = std::from_chars(f[2].data(), f[2].data() + f[2].size(), e.vehicle);
      if (ec != std::errc() || ptr != f[2].data() + f[2].size())
        throw InputError(where + ": bad vehicle id '" + f[2] + "'");
    }
    e.link_from = resolve_link(g, f[3], number);
    e.link_to = resolve_link(g, f[4], number);
    if (!f[5].empty()) {
      auto n = g.find_node(f[5]);
      if (!n) throw InputError(where + ": unknown node '" + f[5] + "'");
      e.node = *n;
    }
    sink(e);
  }
}

}  // namespace artcal
