#pragma once

// JSON network documents and CSV attribute dumps. The schema is described in
// docs/network_schema.md.

#include <filesystem>
#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

#include "artcal/network.hpp"

namespace artcal {

struct NetworkDocument {
  NetworkGraph graph;
  std::vector<CommodityDemand> demands;
};

// Throws InputError with a "field.path: problem" message on schema errors.
NetworkDocument parse_network_json(std::string_view text);
NetworkDocument load_network_json(const std::filesystem::path& path);

std::string network_to_json(const NetworkGraph& g, std::span<const CommodityDemand> demands = {});

// id,from,to,kind,length_mi,storage,travel_time_s,lanes
void write_links_csv(std::ostream& os, const NetworkGraph& g);
// from,to,saturation_flow_vph,allowed,capacity_vph (capacity "inf" when unsignalized)
void write_movements_csv(std::ostream& os, const NetworkGraph& g);

std::string read_text_file(const std::filesystem::path& path);

}  // namespace artcal
