#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "hwm/nn.hpp"
#include "hwm/symbolic.hpp"

namespace hwm::sim {

// Planar tabletop in [0,1]^2. All dynamics are pure functions of the scene
// and the commanded action; there is no hidden state and no randomness.

struct LowLevelAction {
  double dx = 0.0;
  double dy = 0.0;
  double grip = 1.0;  // < 0.5 closes the gripper, >= 0.5 releases

  friend bool operator==(const LowLevelAction&, const LowLevelAction&) = default;
};

struct Container {
  double x = 0.0;  // interior center when fully closed
  double y = 0.0;
  double half_w = 0.0;
  double half_h = 0.0;
  double open_fraction = 0.0;  // 0 closed .. 1 fully open
  double travel = 0.0;         // slide distance along -y at open_fraction 1
  bool openable = false;       // fixed-open containers have no handle

  friend bool operator==(const Container&, const Container&) = default;
};

struct Surface {
  double x = 0.0;
  double y = 0.0;
  double half_w = 0.0;
  double half_h = 0.0;

  friend bool operator==(const Surface&, const Surface&) = default;
};

struct Gripper {
  double x = 0.5;
  double y = 0.5;
  double grip = 1.0;

  friend bool operator==(const Gripper&, const Gripper&) = default;
};

struct Scene {
  std::map<std::string, std::array<double, 2>> objects;
  std::map<std::string, Container> containers;
  std::map<std::string, Surface> surfaces;
  Gripper gripper;
  // Name of the carried object, or "<container>:handle" while dragging a
  // drawer handle. Handles are furniture, not carried objects.
  std::optional<std::string> held;
  int step_count = 0;

  friend bool operator==(const Scene&, const Scene&) = default;
};

struct SimParams {
  double max_delta = 0.05;      // per-axis motion clamp
  double attach_radius = 0.03;
  double open_threshold = 0.9;  // open_fraction >= this reads as open
  double closed_threshold = 0.1;
};

bool is_handle(const std::string& held_name);
std::string handle_of(const std::string& container_name);
// Current handle position; the handle rides the sliding front edge.
std::array<double, 2> handle_point(const Container& c);

// Advance one control step: clamp deltas, move the gripper, drag whatever is
// held (a held handle moves open_fraction and its contents), then apply the
// grip command (attach nearest object or handle within attach_radius on
// close, detach on release).
Scene step(const Scene& scene, const LowLevelAction& action, const SimParams& params = {});

// Ground-truth predicate readout. Statics (graspable/container/openable/
// surface) come from the scene inventory; held objects are excluded from
// ontable/in/on; open/closed use a dead band between the two thresholds.
LogicalState classify_predicates(const Scene& scene, const SimParams& params = {});

struct EncoderConfig {
  size_t dim = 32;
  uint64_t seed = 0x1f0c5ed5;
};

// Frozen observation encoder: canonical centered scene vector through a
// seeded random linear map and tanh. Same config, same scene, same output.
nn::Vec encode(const Scene& scene, const EncoderConfig& config = {});

nn::Vec joint_config(const Scene& scene);  // {x, y, grip}

// One control command toward completing `subtask` (a ground action of the
// tabletop domain). Pure function of the scene: the phase is re-derived
// every call. Emits at most one no-op once the subtask's add effects hold.
// Throws Error(UnsupportedSchema) for unknown schema names.
LowLevelAction scripted_controller(const Scene& scene, const GroundAction& subtask,
                                   const SimParams& params = {});

struct TaskSpec {
  std::string task_id;
  int horizon = 0;  // number of subtasks
  Domain domain;
  Problem problem;
  std::vector<AtomSet> subtask_goals;  // add effects of the reference plan
  Scene scene;                         // initial scene
};

const std::string& tabletop_domain_text();
const Domain& tabletop_domain();

// Sample a solvable tabletop task whose optimal plan has exactly `horizon`
// steps (5..7). Deterministic in the seed. Throws Error(GenerationFailed)
// for an out-of-range horizon or when retries are exhausted.
TaskSpec generate_task(uint64_t seed, int horizon);

std::string serialize_task(const TaskSpec& task);
TaskSpec parse_task(const std::string& json_text);

struct EpisodeFrame {
  int t = 0;  // control step index within the episode
  int m = 0;  // active subtask index
  Scene scene;
  nn::Vec q;
  LowLevelAction action;  // command emitted from this frame; rest on the last
  LogicalState atoms;
  nn::Vec feature;

  friend bool operator==(const EpisodeFrame&, const EpisodeFrame&) = default;
};

// JSONL, one frame per line.
std::string serialize_episode(const std::vector<EpisodeFrame>& frames);
std::vector<EpisodeFrame> parse_episode(const std::string& text);

// Feature of the first frame at or after subtask m's start in which the
// subtask's goal atoms hold. Throws Error(SubtaskUnreachable) when no such
// frame exists.
nn::Vec goal_feature(const std::vector<EpisodeFrame>& rollout, size_t subtask_index,
                     const AtomSet& subtask_goal);

}  // namespace hwm::sim
