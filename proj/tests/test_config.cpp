#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <fstream>

#include "hwm/config.hpp"
#include "hwm/error.hpp"

using hwm::Error;
using hwm::ErrorKind;
using hwm::config::Settings;

namespace {
Settings parsed(const std::string& text) {
  Settings s;
  hwm::config::parse_settings_text(s, text);
  return s;
}
}  // namespace

TEST_CASE("defaults round the run config") {
  Settings s;
  CHECK(s.seed == 0);
  CHECK(s.run.mode == hwm::harness::Mode::Hwm);
  CHECK(s.run.step_cap == 200);
  CHECK(s.run.planner.beam_width == 32);
  CHECK(s.run.vwm.feature_dim == s.run.encoder.dim);
  CHECK(s.run.policy.feature_dim == s.run.encoder.dim);
}

TEST_CASE("set_seed propagates to every rng stream but not the frozen encoder") {
  Settings s;
  uint64_t encoder_seed = s.run.encoder.seed;
  hwm::config::set_seed(s, 42);
  CHECK(s.seed == 42);
  CHECK(s.run.seed == 42);
  CHECK(s.run.planner.rng_seed == 42);
  CHECK(s.run.vwm.rng_seed == 42);
  CHECK(s.run.policy.rng_seed == 42);
  CHECK(s.run.encoder.seed == encoder_seed);
}

TEST_CASE("parse_settings_text applies typed keys") {
  Settings s = parsed(
      "# comment line\n"
      "\n"
      "seed = 7\n"
      "step_cap=120   # trailing comment\n"
      "oracle_completion = yes\n"
      "beam_width = 16\n"
      "proposer_noise = 0.25\n"
      "vwm_lr = 1e-3\n"
      "chunk_len = 6\n");
  CHECK(s.seed == 7);
  CHECK(s.run.planner.rng_seed == 7);
  CHECK(s.run.step_cap == 120);
  CHECK(s.run.oracle_completion);
  CHECK(s.run.planner.beam_width == 16);
  CHECK(std::abs(s.run.planner.proposer_noise - 0.25) <= 1e-15);
  CHECK(std::abs(s.run.vwm.lr - 1e-3) <= 1e-15);
  CHECK(s.run.policy.chunk_len == 6);
}

TEST_CASE("feature_dim retunes encoder and both model configs together") {
  Settings s = parsed("feature_dim = 48\n");
  CHECK(s.run.encoder.dim == 48);
  CHECK(s.run.vwm.feature_dim == 48);
  CHECK(s.run.policy.feature_dim == 48);
}

TEST_CASE("bool parsing accepts the usual spellings") {
  CHECK(parsed("oracle_completion=TRUE\n").run.oracle_completion);
  CHECK(parsed("oracle_completion=1\n").run.oracle_completion);
  CHECK(parsed("oracle_completion=on\n").run.oracle_completion);
  CHECK_FALSE(parsed("oracle_completion=off\n").run.oracle_completion);
  CHECK_FALSE(parsed("oracle_completion=No\n").run.oracle_completion);
}

TEST_CASE("malformed input reports the offending line") {
  auto kind = [](const std::string& text) {
    try {
      parsed(text);
    } catch (const Error& e) {
      return e.kind();
    }
    return ErrorKind::EmptyInput;
  };
  CHECK(kind("step_cap 120\n") == ErrorKind::Config);        // no '='
  CHECK(kind("= 120\n") == ErrorKind::Config);               // empty key
  CHECK(kind("step_cap = twelve\n") == ErrorKind::Config);   // bad int
  CHECK(kind("step_cap = 1.5\n") == ErrorKind::Config);      // trailing chars
  CHECK(kind("vwm_lr = fast\n") == ErrorKind::Config);       // bad double
  CHECK(kind("oracle_completion = ja\n") == ErrorKind::Config);
  CHECK(kind("warp_speed = 9\n") == ErrorKind::Config);      // unknown key
  CHECK_THROWS_WITH_AS(parsed("bogus_key = 1\n"),
                       doctest::Contains("bogus_key"), Error);
  CHECK_THROWS_WITH_AS(parsed("ok=1\n"),
                       doctest::Contains("line 1"), Error);
}

TEST_CASE("load_settings reads a file and rejects a missing one") {
  std::string path = "config_test_tmp.cfg";
  {
    std::ofstream out(path);
    out << "seed = 5\nmonitor_steps = 99\n";
  }
  Settings s = hwm::config::load_settings(path);
  CHECK(s.seed == 5);
  CHECK(s.run.policy.monitor_steps == 99);
  std::remove(path.c_str());
  CHECK_THROWS_AS(hwm::config::load_settings("no_such_file.cfg"), Error);
}
