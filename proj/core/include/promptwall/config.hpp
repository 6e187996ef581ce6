#pragma once

#include <optional>
#include <string>

#include "promptwall/agentsim.hpp"
#include "promptwall/harness.hpp"

namespace promptwall {

// Parsed harness configuration document (docs/config-schema.md). A missing
// section falls back to the shipped default; unknown keys are rejected.
struct HarnessConfig {
  DefenseStack stack;
  std::optional<SimConfig> simulation;
};

HarnessConfig load_config_json(const std::string& json_text);
HarnessConfig load_config_file(const std::string& path);

// A standalone simulation document, as accepted by `simulate` and the
// gateway's /simulate endpoint.
SimConfig sim_config_from_json_text(const std::string& json_text);

}  // namespace promptwall
