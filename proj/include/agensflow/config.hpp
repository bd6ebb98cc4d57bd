#pragma once

#include <string>

#include "agensflow/reward.hpp"
#include "agensflow/router.hpp"

namespace agensflow {

// Full run configuration: routing substrate plus reward composition. Loaded
// from a structured text document; absent fields keep their defaults, so a
// config file only needs the overrides it cares about.
struct Config {
  RouterConfig router;
  RewardConfig reward;
};

std::string config_to_document(const Config& config);
Config config_from_document(const std::string& text);

Config load_config(const std::string& path);
void save_config(const Config& config, const std::string& path);

std::string read_text_file(const std::string& path);
void write_text_file(const std::string& path, const std::string& text);

}  // namespace agensflow
