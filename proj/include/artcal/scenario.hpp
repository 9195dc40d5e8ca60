#pragma once

// Scenario files tie a network, measurements and per-command settings
// together. Paths inside a scenario are relative to the scenario file.
//
// {
//   "network": "grid2x2.json", "measurements": "counts.csv", "seed": 7,
//   "simulate": {"horizon_s": 7200, "arrivals": "deterministic" | "poisson",
//                "travel_times": "constant" | "exponential", "demand_scale": 1,
//                "drain": false,
//                "controller": {"mode": "fixed_time" | "max_pressure", "decisions_per_cycle": 4}},
//   "sweep": {"factors": [1, 1.05, 1.15], "step_hours": 2},
//   "divert": {"route": ["a", "b", "c"], "retime": true},
//   "metrics": {"log": "events.csv", "bin_s": 5, "queue_bin_s": 60, "mfd_bin_s": 300,
//               "window": [1800, 5400], "routes": [["in", "out"]], "mfd_links": ["mid"]}
// }

#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "artcal/metrics.hpp"
#include "artcal/sim.hpp"

namespace artcal {

struct MetricsSettings {
  std::optional<std::filesystem::path> log;
  double bin_s = 5.0;
  double queue_bin_s = 60.0;
  double mfd_bin_s = 300.0;
  std::optional<std::pair<double, double>> window;
  std::vector<std::pair<std::string, std::string>> routes;
  std::vector<std::string> mfd_links;
};

struct ScenarioConfig {
  std::optional<std::filesystem::path> network;
  std::optional<std::filesystem::path> measurements;
  SimConfig sim;
  std::vector<double> factors{1.0};
  double step_hours = 2.0;
  std::vector<std::string> route;
  bool retime = true;
  MetricsSettings metrics;
};

// Throws InputError naming the offending field ("simulate.horizon_s: ...").
ScenarioConfig parse_scenario_json(std::string_view text, const std::filesystem::path& base_dir = {});
ScenarioConfig load_scenario(const std::filesystem::path& path);

// Resolves the link ids of a metrics block against `g`.
MetricsOptions metrics_options(const MetricsSettings& s, const NetworkGraph& g);

}  // namespace artcal
