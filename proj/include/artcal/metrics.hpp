#pragma once

// Queries over a simulation event log. Every metric is an accumulator fed
// one event at a time, so a CSV log can be streamed without loading it.
//
// Definitions used throughout:
//   external arrival   the external_arrival row (vehicle shows up at its entry)
//   internal arrival   crossing out of an entry link
//   trip time t_i      exit_network time - time the vehicle entered its entry link
//   entry wait E_i     internal arrival - external arrival (outside wait included)
//   sojourn T_i        exit_network - internal arrival
//   total queue        vehicles in movement queues + vehicles waiting outside

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "artcal/event_log.hpp"
#include "artcal/network.hpp"

namespace artcal {

// Piecewise-constant signal integrated per time bin.
class BinnedIntegral {
 public:
  explicit BinnedIntegral(double bin_s = 1.0) : bin_(bin_s) {}
  void set(double t, double value);
  void advance(double t);
  double value() const { return value_; }
  // Bin means over [0, end); advances to `end` first.
  std::vector<double> means(double end);
  const std::vector<double>& areas() const { return area_; }

 private:
  double bin_;
  double last_ = 0.0;
  double value_ = 0.0;
  std::vector<double> area_;
};

// Integral of a piecewise-constant signal clipped to [lo, hi).
struct WindowIntegral {
  double lo = 0.0, hi = kInfinity;
  double last = 0.0, value = 0.0, area = 0.0;
  void advance(double t);
  void set(double t, double v) {
    advance(t);
    value = v;
  }
};

// ---------------------------------------------------------------------------
// Trips

struct TripRecord {
  std::int64_t vehicle = -1;
  std::size_t entry_link = kNone;
  std::size_t exit_link = kNone;
  double arrival_s = 0.0;   // external arrival
  double entered_s = 0.0;   // onto the entry link
  double internal_s = 0.0;  // left the entry link
  double exit_s = 0.0;
  double distance_mi = 0.0;  // sum of traversed link lengths
  bool touches_internal = false;

  double travel_time_s() const { return exit_s - entered_s; }
  double speed_mph() const { return distance_mi / (travel_time_s() / 3600.0); }
};

class TripCollector {
 public:
  explicit TripCollector(const NetworkGraph& g) : g_(&g) {}
  void add(const SimEvent& e);
  const std::vector<TripRecord>& trips() const { return done_; }

 private:
  const NetworkGraph* g_;
  std::unordered_map<std::int64_t, TripRecord> open_;
  std::vector<TripRecord> done_;
};

std::vector<TripRecord> collect_trips(const NetworkGraph& g, std::span<const SimEvent> log);

struct RouteTravelTimes {
  std::vector<std::pair<double, double>> samples;  // (entered at, travel time)
  double mean = 0.0;
  double stddev = 0.0;  // population convention
  double within_two_sigma = 0.0;  // fraction of samples in [mean - 2 sd, mean + 2 sd]
  bool flagged = true;            // fewer than two samples
};

RouteTravelTimes route_travel_times(std::span<const TripRecord> trips, std::size_t entry_link, std::size_t exit_link);

struct VmtVht {
  std::size_t trips = 0;
  double vmt_per_hour = 0.0;
  double vht_per_hour = 0.0;
  double speed_mph = 0.0;  // VMT / VHT, flow weighted
  double mean_distance_mi = 0.0;
  double mean_time_s = 0.0;
  double mean_speed_mph = 0.0;
  std::optional<double> correlation;  // Pearson rho(v_i, t_i); empty at zero variance
};

// Trips that touch no internal link are left out. ComputationError when no
// trip remains or the duration is not positive.
VmtVht vmt_vht(std::span<const TripRecord> trips, double duration_s);

// VMT from link entries: sum over links of entries x length. Counts every
// vehicle, so it matches the trip sum only once all vehicles have left and
// boundary-only trips are added back.
class LinkEntryCounter {
 public:
  explicit LinkEntryCounter(const NetworkGraph& g) : g_(&g), entries_(g.num_links(), 0) {}
  void add(const SimEvent& e);
  const std::vector<std::int64_t>& entries() const { return entries_; }
  double vehicle_miles() const;

 private:
  const NetworkGraph* g_;
  std::vector<std::int64_t> entries_;
};

// ---------------------------------------------------------------------------
// Excess green

struct PhaseExcess {
  std::size_t movement = kNone;
  double actuated_s = 0.0;
  double empty_s = 0.0;  // actuated with an empty queue
  std::optional<double> excess() const {
    if (actuated_s <= 0.0) return std::nullopt;
    return empty_s / actuated_s;
  }
};

struct ExcessGreen {
  std::vector<PhaseExcess> phases;  // signalized movements, never-actuated ones included
  std::vector<std::size_t> never_actuated;
  std::vector<std::pair<double, double>> cdf;  // (e, F(e)) at each distinct e, right-continuous steps
  double cdf_at(double e) const;
};

// Green sets come from phase_change rows; queues from join/cross rows.
class ExcessGreenMeter {
 public:
  explicit ExcessGreenMeter(const NetworkGraph& g);
  void add(const SimEvent& e);
  ExcessGreen finish(double end_s);

 private:
  void advance(std::size_t mv, double t);
  const NetworkGraph* g_;
  std::vector<char> green_, signalized_;
  std::vector<long> queue_;
  std::vector<double> last_;
  std::vector<PhaseExcess> acc_;
  std::vector<double> group_time_;  // per node, time of the last phase_change group
};

ExcessGreen excess_green(const NetworkGraph& g, std::span<const SimEvent> log, double end_s);

// ---------------------------------------------------------------------------
// Macroscopic queuing quantities

struct MacroBin {
  double start_s = 0.0;
  double e_vph = 0.0, a_vph = 0.0, d_vph = 0.0;
  std::int64_t cum_e = 0, cum_a = 0, cum_d = 0;  // at the end of the bin
  std::int64_t w = 0, n = 0;                      // at the end of the bin
  std::int64_t n_from_occupancy = 0;              // sum of non-entry link occupancies
};

struct LittleReport {
  double window_start_s = 0.0;
  double window_end_s = 0.0;
  double lambda_vph = 0.0;
  double w_mean = 0.0, n_mean = 0.0;
  double entry_wait_s = 0.0;  // E
  double sojourn_s = 0.0;     // T
  std::size_t vehicles = 0;
  // Relative discrepancies; empty when the window has no vehicles.
  std::optional<double> w_error, n_error, total_error;
};

struct MacroSeries {
  double bin_s = 5.0;
  std::vector<MacroBin> bins;
  LittleReport little;
};

struct MacroOptions {
  double bin_s = 5.0;
  double window_start_s = 0.0;
  std::optional<double> window_end_s;  // default: end of the log
};

class MacroMeter {
 public:
  MacroMeter(const NetworkGraph& g, MacroOptions options);
  void add(const SimEvent& e);
  MacroSeries finish(double end_s);

 private:
  void close_bins(double t);
  const NetworkGraph* g_;
  MacroOptions opt_;
  double window_end_;
  std::int64_t cum_e_ = 0, cum_a_ = 0, cum_d_ = 0, inside_ = 0;
  std::int64_t bin_e_ = 0, bin_a_ = 0, bin_d_ = 0;
  std::vector<MacroBin> bins_;
  WindowIntegral w_, n_;
  std::unordered_map<std::int64_t, double> arrived_, internal_;
  double wait_sum_ = 0.0, sojourn_sum_ = 0.0;
  std::size_t waits_ = 0, sojourns_ = 0, window_arrivals_ = 0;
};

MacroSeries macro_series(const NetworkGraph& g, std::span<const SimEvent> log, const MacroOptions& options,
                         double end_s);

// Per-step view of a loading sweep: rates over each step and the entry
// queue w and network count n, averaged and at the step end.
struct StepSummary {
  double start_s = 0.0, end_s = 0.0;
  double e_vph = 0.0, a_vph = 0.0, d_vph = 0.0;
  double mean_w = 0.0, mean_n = 0.0;
  std::int64_t end_w = 0, end_n = 0;
};

// `edges` are the step boundaries t0 < t1 < ... < tk.
std::vector<StepSummary> step_summaries(const NetworkGraph& g, std::span<const SimEvent> log,
                                        std::span<const double> edges);

// ---------------------------------------------------------------------------
// Queues and MFD

struct QueueSeries {
  double bin_s = 60.0;
  std::vector<double> mean_total;  // time average per bin
};

class QueueMeter {
 public:
  QueueMeter(const NetworkGraph& g, double bin_s) : g_(&g), bin_(bin_s), total_(bin_s) {}
  void add(const SimEvent& e);
  QueueSeries finish(double end_s);

 private:
  const NetworkGraph* g_;
  double bin_;
  long count_ = 0;
  BinnedIntegral total_;
};

QueueSeries queue_series(const NetworkGraph& g, std::span<const SimEvent> log, double bin_s, double end_s);

struct Trend {
  double slope = 0.0;      // per second
  double std_error = 0.0;  // of the slope
};

// Ordinary least squares of y on bin midpoints.
Trend trend(std::span<const double> y, double bin_s);

struct MfdPoint {
  double start_s = 0.0;
  double flow_vph = 0.0;
  double occupancy = 0.0;  // vehicles / storage
};

class MfdMeter {
 public:
  // Empty `links` samples every internal link. Weights are length x lanes.
  MfdMeter(const NetworkGraph& g, std::vector<std::size_t> links, double bin_s);
  void add(const SimEvent& e);
  std::vector<MfdPoint> finish(double end_s);

 private:
  const NetworkGraph* g_;
  double bin_;
  std::vector<std::size_t> links_;
  std::vector<std::size_t> slot_;  // link -> position in links_, kNone if not sampled
  std::vector<long> occ_;
  std::vector<BinnedIntegral> integ_;
  std::vector<std::vector<std::int64_t>> departures_;
};

std::vector<MfdPoint> mfd_aggregate(const NetworkGraph& g, std::span<const SimEvent> log,
                                    std::vector<std::size_t> links, double bin_s, double end_s);

// ---------------------------------------------------------------------------
// Everything at once, for the command line.

struct MetricsOptions {
  MacroOptions macro;
  double queue_bin_s = 60.0;
  double mfd_bin_s = 300.0;
  std::vector<std::size_t> mfd_links;
  std::vector<std::pair<std::size_t, std::size_t>> routes;  // (entry, exit); empty = every observed pair
};

struct MetricsReport {
  double duration_s = 0.0;
  std::vector<TripRecord> trips;
  std::vector<std::pair<std::pair<std::size_t, std::size_t>, RouteTravelTimes>> routes;
  std::optional<VmtVht> vmt;
  double link_vmt_per_hour = 0.0;
  ExcessGreen excess;
  MacroSeries macro;
  QueueSeries queues;
  std::vector<MfdPoint> mfd;
};

class LogAnalysis {
 public:
  LogAnalysis(const NetworkGraph& g, MetricsOptions options);
  void add(const SimEvent& e);
  // `end_s` defaults to the last event time.
  MetricsReport finish(std::optional<double> end_s = std::nullopt);

 private:
  const NetworkGraph* g_;
  MetricsOptions opt_;
  double last_time_ = 0.0;
  TripCollector trips_;
  LinkEntryCounter links_;
  ExcessGreenMeter excess_;
  MacroMeter macro_;
  QueueMeter queues_;
  MfdMeter mfd_;
};

// Writes trips.csv, route_travel_times.csv, excess_green.csv,
// excess_green_cdf.csv, mqd.csv, queue_series.csv, mfd.csv and summary.json.
void write_metrics(const std::string& dir, const NetworkGraph& g, const MetricsReport& r);
std::string metrics_summary_json(const NetworkGraph& g, const MetricsReport& r);

}  // namespace artcal
