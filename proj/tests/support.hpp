#pragma once

#include <filesystem>
#include <string>

#include "artcal/network_io.hpp"

namespace testing_support {

inline std::filesystem::path fixture(const std::string& name) {
  return std::filesystem::path(ARTCAL_FIXTURE_DIR) / name;
}

inline artcal::NetworkDocument load(const std::string& name) {
  return artcal::load_network_json(fixture(name));
}

}  // namespace testing_support
