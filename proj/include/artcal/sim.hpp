#pragma once

// Point-queue discrete-event simulation of a signalized network.
//
// Vehicles arrive at entry links, spend the link travel time in transit,
// join the FIFO queue of the movement they will take and cross when the
// movement is green, its saturation headway 3600/c has elapsed and the
// receiving link has storage left. Vehicles that find their entry link full
// wait outside the network.

#include <cstdint>
#include <memory>
#include <span>
#include <vector>

#include "artcal/calibrate.hpp"
#include "artcal/event_log.hpp"
#include "artcal/network.hpp"

namespace artcal {

enum class ControlMode { fixed_time, max_pressure };
enum class ArrivalProcess { deterministic, poisson };
enum class TravelTimeModel { constant, exponential };

struct ControllerConfig {
  ControlMode mode = ControlMode::fixed_time;
  int decisions_per_cycle = 4;  // max pressure only
};

struct SimConfig {
  ControllerConfig controller;
  double horizon_s = 3600.0;  // no external arrivals at or after this time
  std::uint64_t seed = 1;
  ArrivalProcess arrivals = ArrivalProcess::deterministic;
  TravelTimeModel travel_times = TravelTimeModel::constant;
  double demand_scale = 1.0;
  // Keep running past the horizon until every vehicle has left, or until
  // horizon + drain_limit_s.
  bool drain = false;
  double drain_limit_s = 86400.0;
};

struct MovementStability {
  std::size_t movement = kNone;
  double flow = 0.0;
  double capacity = 0.0;  // +inf when unsignalized
  double margin = 0.0;    // capacity - flow
  bool ok = false;        // strict margin
};

// Strict capacity margins s(l,m) - f(l,m) for every movement.
std::vector<MovementStability> stability_check(const NetworkGraph& g, const FlowSolution& flows);

class Simulator {
 public:
  // Throws InputError for a bad configuration (horizon <= 0, k < 1, a plan
  // longer than its cycle, missing turn ratios).
  Simulator(const NetworkGraph& g, std::vector<CommodityDemand> demands, SimConfig config, EventSink sink);
  ~Simulator();
  Simulator(const Simulator&) = delete;
  Simulator& operator=(const Simulator&) = delete;

  // Scales every entry rate from the next scheduled arrival of each stream on.
  void set_demand_scale(double gamma);

  // Processes every event strictly before `t`.
  void run_until(double t);
  // run_until(horizon), then the drain phase when configured.
  void run();

  double now() const;
  std::int64_t vehicles_created() const;
  std::int64_t vehicles_exited() const;
  std::size_t vehicles_inside() const;   // on links, entry links included
  std::size_t vehicles_waiting_outside() const;
  std::size_t occupancy(std::size_t link) const;
  std::size_t queue_length(std::size_t movement) const;

 private:
  struct State;
  std::unique_ptr<State> state_;
};

std::vector<SimEvent> run(const NetworkGraph& g, std::span<const CommodityDemand> demands, const SimConfig& config);

struct SweepSegment {
  double gamma = 1.0;
  double start_s = 0.0;
  double end_s = 0.0;
  std::size_t first_event = 0;  // [first_event, end_event) of the log
  std::size_t end_event = 0;
};

struct SweepResult {
  std::vector<SimEvent> events;
  std::vector<SweepSegment> segments;
};

// Runs consecutive steps of `step_hours`, scaling all demands by each factor
// in turn and carrying the network state over. config.horizon_s and
// config.demand_scale are ignored. Factors must be positive and increasing.
SweepResult loading_sweep(const NetworkGraph& g, std::span<const CommodityDemand> demands, SimConfig config,
                          std::span<const double> factors, double step_hours);

}  // namespace artcal
