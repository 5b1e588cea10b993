#pragma once

#include <string>

#include "hwm/harness.hpp"

namespace hwm::config {

// All tunables behind the CLI. Config files are plain text, one `key=value`
// per line; `#` starts a comment. Unknown keys and malformed values throw
// Error(Config).
struct Settings {
  harness::RunConfig run;
  uint64_t seed = 0;
};

// Propagates one seed into the planner, visual world model, and policy
// streams. The frozen encoder seed is left alone; set `encoder_seed`
// explicitly to change the observation space.
void set_seed(Settings& settings, uint64_t seed);

void apply_key(Settings& settings, const std::string& key, const std::string& value);
void parse_settings_text(Settings& settings, const std::string& text);
Settings load_settings(const std::string& path);  // defaults overlaid with the file

}  // namespace hwm::config
