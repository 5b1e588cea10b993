#include "hwm/config.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

#include "hwm/error.hpp"

namespace hwm::config {

namespace {

std::string trim(const std::string& s) {
  size_t b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  size_t e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

[[noreturn]] void bad_value(const std::string& key, const std::string& value,
                            const char* expected) {
  throw Error(ErrorKind::Config,
              "key '" + key + "': cannot parse '" + value + "' as " + expected);
}

long long parse_int(const std::string& key, const std::string& value) {
  try {
    size_t pos = 0;
    long long v = std::stoll(value, &pos);
    if (pos != value.size()) bad_value(key, value, "an integer");
    return v;
  } catch (const std::logic_error&) {
    bad_value(key, value, "an integer");
  }
}

uint64_t parse_u64(const std::string& key, const std::string& value) {
  try {
    size_t pos = 0;
    uint64_t v = std::stoull(value, &pos);
    if (pos != value.size()) bad_value(key, value, "an unsigned integer");
    return v;
  } catch (const std::logic_error&) {
    bad_value(key, value, "an unsigned integer");
  }
}

double parse_double(const std::string& key, const std::string& value) {
  try {
    size_t pos = 0;
    double v = std::stod(value, &pos);
    if (pos != value.size()) bad_value(key, value, "a number");
    return v;
  } catch (const std::logic_error&) {
    bad_value(key, value, "a number");
  }
}

bool parse_bool(const std::string& key, const std::string& value) {
  std::string v = value;
  std::transform(v.begin(), v.end(), v.begin(), [](unsigned char c) { return std::tolower(c); });
  if (v == "1" || v == "true" || v == "yes" || v == "on") return true;
  if (v == "0" || v == "false" || v == "no" || v == "off") return false;
  bad_value(key, value, "a boolean");
}

}  // namespace

void set_seed(Settings& settings, uint64_t seed) {
  settings.seed = seed;
  settings.run.seed = seed;
  settings.run.planner.rng_seed = seed;
  settings.run.vwm.rng_seed = seed;
  settings.run.policy.rng_seed = seed;
}

void apply_key(Settings& s, const std::string& key, const std::string& value) {
  harness::RunConfig& r = s.run;
  if (key == "seed") {
    set_seed(s, parse_u64(key, value));
  } else if (key == "step_cap") {
    r.step_cap = int(parse_int(key, value));
  } else if (key == "oracle_completion") {
    r.oracle_completion = parse_bool(key, value);
  } else if (key == "completion_consecutive") {
    r.completion_consecutive = int(parse_int(key, value));
  } else if (key == "chunk_stride") {
    r.chunk_stride = int(parse_int(key, value));
  } else if (key == "dwell_steps") {
    r.dwell_steps = int(parse_int(key, value));
  } else if (key == "collect_noise") {
    r.collect_noise = parse_double(key, value);
  } else if (key == "beam_width") {
    r.planner.beam_width = int(parse_int(key, value));
  } else if (key == "max_depth") {
    r.planner.max_depth = int(parse_int(key, value));
  } else if (key == "w_g") {
    r.planner.w_g = parse_double(key, value);
  } else if (key == "w_c") {
    r.planner.w_c = parse_double(key, value);
  } else if (key == "proposer_noise") {
    r.planner.proposer_noise = parse_double(key, value);
  } else if (key == "feature_dim") {
    size_t d = size_t(parse_int(key, value));
    r.encoder.dim = d;
    r.vwm.feature_dim = d;
    r.policy.feature_dim = d;
  } else if (key == "encoder_seed") {
    r.encoder.seed = parse_u64(key, value);
  } else if (key == "cond_dim") {
    r.vwm.cond_dim = size_t(parse_int(key, value));
  } else if (key == "vwm_hidden") {
    r.vwm.hidden = size_t(parse_int(key, value));
  } else if (key == "vwm_hash_dim") {
    r.vwm.hash_dim = size_t(parse_int(key, value));
  } else if (key == "denoise_steps") {
    r.vwm.denoise_steps = int(parse_int(key, value));
  } else if (key == "vwm_train_steps") {
    r.vwm.train_steps = int(parse_int(key, value));
  } else if (key == "vwm_batch_size") {
    r.vwm.batch_size = int(parse_int(key, value));
  } else if (key == "vwm_lr") {
    r.vwm.lr = parse_double(key, value);
  } else if (key == "vwm_momentum") {
    r.vwm.momentum = parse_double(key, value);
  } else if (key == "sw_projections") {
    r.vwm.sw_projections = int(parse_int(key, value));
  } else if (key == "lambda") {
    r.vwm.lambda = parse_double(key, value);
  } else if (key == "per_sample_sw") {
    r.vwm.per_sample_sw = parse_bool(key, value);
  } else if (key == "token_dim") {
    r.policy.token_dim = size_t(parse_int(key, value));
  } else if (key == "policy_hidden") {
    r.policy.hidden = size_t(parse_int(key, value));
  } else if (key == "policy_hash_dim") {
    r.policy.hash_dim = size_t(parse_int(key, value));
  } else if (key == "chunk_len") {
    r.policy.chunk_len = size_t(parse_int(key, value));
  } else if (key == "flow_steps") {
    r.policy.flow_steps = int(parse_int(key, value));
  } else if (key == "policy_train_steps") {
    r.policy.train_steps = int(parse_int(key, value));
  } else if (key == "policy_batch_size") {
    r.policy.batch_size = int(parse_int(key, value));
  } else if (key == "policy_lr") {
    r.policy.lr = parse_double(key, value);
  } else if (key == "policy_momentum") {
    r.policy.momentum = parse_double(key, value);
  } else if (key == "max_delta") {
    r.policy.max_delta = parse_double(key, value);
  } else if (key == "tau_dist") {
    r.policy.tau_dist = parse_double(key, value);
  } else if (key == "dist_scale") {
    r.policy.dist_scale = parse_double(key, value);
  } else if (key == "threshold") {
    r.policy.threshold = parse_double(key, value);
  } else if (key == "monitor_steps") {
    r.policy.monitor_steps = int(parse_int(key, value));
  } else if (key == "monitor_lr") {
    r.policy.monitor_lr = parse_double(key, value);
  } else if (key == "holdout_fraction") {
    r.policy.holdout_fraction = parse_double(key, value);
  } else {
    throw Error(ErrorKind::Config, "unknown config key '" + key + "'");
  }
}

void parse_settings_text(Settings& settings, const std::string& text) {
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    size_t hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    line = trim(line);
    if (line.empty()) continue;
    size_t eq = line.find('=');
    if (eq == std::string::npos) {
      throw Error(ErrorKind::Config,
                  "line " + std::to_string(lineno) + ": expected key=value, got '" + line + "'");
    }
    std::string key = trim(line.substr(0, eq));
    std::string value = trim(line.substr(eq + 1));
    if (key.empty()) {
      throw Error(ErrorKind::Config, "line " + std::to_string(lineno) + ": empty key");
    }
    try {
      apply_key(settings, key, value);
    } catch (const Error& e) {
      throw Error(e.kind(), "line " + std::to_string(lineno) + ": " + e.message());
    }
  }
}

Settings load_settings(const std::string& path) {
  std::ifstream file(path, std::ios::binary);
  if (!file) throw Error(ErrorKind::Config, "cannot open config file " + path);
  std::ostringstream ss;
  ss << file.rdbuf();
  Settings settings;
  parse_settings_text(settings, ss.str());
  return settings;
}

}  // namespace hwm::config
