#pragma once

// Simulation event records and their CSV form
// `time,kind,vehicle,link_from,link_to,node`.
//
// Row conventions (empty field = not applicable):
//   external_arrival  vehicle, link_to = entry link it wants to enter
//   enter_link        vehicle, link_from = previous link, link_to = entered link
//   join_queue        vehicle, movement (link_from, link_to), node
//   cross_intersection vehicle, movement, node
//   exit_network      vehicle, link_from = exit link
//   blocked           head vehicle, movement, node (once per blocking spell)
//   phase_change      node, one row per movement green from this instant on;
//                     a single row with empty links means all red. Rows with
//                     the same (time, node) together give the new green set.

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "artcal/network.hpp"

namespace artcal {

enum class EventKind : std::uint8_t {
  external_arrival,
  enter_link,
  join_queue,
  cross_intersection,
  exit_network,
  phase_change,
  blocked,
};

std::string_view to_string(EventKind kind);
std::optional<EventKind> event_kind_from_string(std::string_view s);

struct SimEvent {
  double time = 0.0;
  EventKind kind = EventKind::external_arrival;
  std::int64_t vehicle = -1;
  std::size_t link_from = kNone;
  std::size_t link_to = kNone;
  std::size_t node = kNone;

  bool operator==(const SimEvent&) const = default;
};

using EventSink = std::function<void(const SimEvent&)>;

inline constexpr std::string_view kEventCsvHeader = "time,kind,vehicle,link_from,link_to,node";

void write_event_csv_row(std::ostream& os, const NetworkGraph& g, const SimEvent& e);
void write_event_csv(std::ostream& os, const NetworkGraph& g, std::span<const SimEvent> events);

// Sink that appends rows to a stream; the header is written on construction.
class CsvEventWriter {
 public:
  CsvEventWriter(std::ostream& os, const NetworkGraph& g);
  void operator()(const SimEvent& e) const { write_event_csv_row(*os_, *g_, e); }

 private:
  std::ostream* os_;
  const NetworkGraph* g_;
};

// Streams a CSV log row by row into `sink`, resolving ids against `g`.
// Throws InputError with the line number on malformed rows.
void read_event_csv(std::istream& is, const NetworkGraph& g, const EventSink& sink);

}  // namespace artcal
