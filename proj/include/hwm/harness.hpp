#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "hwm/env_sim.hpp"
#include "hwm/logic_wm.hpp"
#include "hwm/policy.hpp"
#include "hwm/symbolic.hpp"
#include "hwm/trace.hpp"
#include "hwm/visual_wm.hpp"

namespace hwm::harness {

// Executor ablation modes. hwm runs the full hierarchy; logic-only drops the
// visual subgoal and conditions the policy on the hashed symbolic subgoal;
// unguided conditions on the hashed task goal alone, with no per-subtask
// action; scripted-oracle bypasses learned models entirely.
enum class Mode { Hwm, LogicOnly, Unguided, ScriptedOracle };

const char* to_string(Mode mode);
Mode parse_mode(const std::string& text);  // throws Error(Config)

struct RunConfig {
  Mode mode = Mode::Hwm;
  int step_cap = 200;             // per-subtask control-step budget, >= 1
  bool oracle_completion = false; // classify_predicates drives transitions
  int completion_consecutive = 2; // learned-monitor frames needed to advance
  int chunk_stride = 0;           // regenerate chunk after this many steps; 0 = full chunk
  int dwell_steps = 0;            // extra recorded frames after each completion
  bool record_frames = false;
  // Execution noise during recording, as a fraction of max_delta. Frames keep
  // the clean command while the perturbed one is stepped, so the dataset
  // carries corrective labels in a tube around the demonstrations.
  double collect_noise = 0.0;
  uint64_t seed = 0;
  // Beam width 8 is incomplete on tabletop tasks; 16 recovers optimal plans
  // on the generated suite, 32 adds margin at negligible cost.
  logic::PlannerConfig planner = {.beam_width = 32};
  sim::EncoderConfig encoder;
  vwm::VwmConfig vwm;
  policy::PolicyConfig policy;
};

struct Models {
  std::optional<vwm::DenoiserModel> denoiser;
  std::optional<policy::PolicyModel> policy;
  std::optional<policy::CompletionMonitor> monitor;
};

struct SubtaskOutcome {
  bool completed = false;  // goal atoms held at some queried frame (ground truth)
  int steps = 0;           // control steps spent before advancing or hitting the cap
};

struct EpisodeResult {
  std::string task_id;
  std::vector<SubtaskOutcome> outcomes;
  int total_steps = 0;
  bool success = false;   // every subtask completed
  double q_score = 0.0;   // completed / total
  int predict_calls = 0;      // visual world model queries (one per subtask in hwm)
  int completion_queries = 0; // completion checks (one per control step)
};

// A fully recorded run: the symbolic plan, per-subtask goals, and one frame
// per control step plus a final rest frame.
struct Episode {
  std::string task_id;
  PlanTrace plan;
  AtomSet task_goal;
  std::vector<AtomSet> subtask_goals;  // add effects of each plan action
  std::vector<sim::EpisodeFrame> frames;
  EpisodeResult result;
};

// Signed feature hash of an atom set, used to condition the policy on
// symbolic goals in the logic-only and unguided modes.
nn::Vec atoms_feature(const AtomSet& atoms, size_t dim);

// Plan once, then execute subtask by subtask: one subgoal prediction per
// subtask (hwm), one completion query per control step, a step cap per
// subtask, no replanning. Scoring always uses ground-truth predicate
// classification. Throws Error(PlanNotFound) and Error(ModelLoad) when the
// supplied models do not match the mode.
EpisodeResult run_episode(const sim::TaskSpec& task, const Models& models,
                          const RunConfig& config, Episode* recording = nullptr);

double q_score(const EpisodeResult& result);
// Percentage of successful episodes. Throws Error(EmptyInput).
double success_rate(const std::vector<EpisodeResult>& results);

struct BenchRow {
  std::string task_id;
  int horizon = 0;
  Mode mode = Mode::Hwm;
  double q_score = 0.0;
  bool success = false;
  int steps = 0;
};

struct BenchResult {
  std::vector<BenchRow> rows;
  std::string csv;          // task_id,horizon,mode,q_score,success,steps
  std::string horizon_csv;  // horizon,mode,mean_q_score,success_rate
  std::string table;        // aligned per-mode summary
};

// Generates tasks_per_horizon tasks at horizons 5, 6, 7 from the suite seed
// and runs every mode on the identical tasks. A plan failure scores the
// episode 0 instead of aborting the suite.
BenchResult run_benchmark(uint64_t suite_seed, int tasks_per_horizon,
                          const std::vector<Mode>& modes,
                          const std::map<Mode, Models>& models, const RunConfig& config);

// Scripted-oracle rollouts with frame recording, one episode per task.
// config.dwell_steps adds post-completion frames so completion-positive
// states appear in the data.
std::vector<Episode> collect_episodes(const std::vector<sim::TaskSpec>& tasks,
                                      const RunConfig& config);

// JSONL export: one task header per episode, one boundary record per
// subtask, one record per control frame; writes a `.cot.txt` companion with
// the rendered plan traces. Returns boundary + frame record count.
size_t export_dataset(const std::vector<Episode>& episodes, const std::string& path);

struct Dataset {
  struct Task {
    std::string task_id;
    int horizon = 0;
    AtomSet goal;
  };
  struct Boundary {
    std::string task_id;
    int subtask = 0;
    LogicalState state;       // symbolic state entering the subtask
    GroundAction action;      // name and binding only
    LogicalState next_state;  // planned successor state
    AtomSet goal;             // the action's add effects
    nn::Vec obs;
    nn::Vec q;
    nn::Vec goal_obs;         // feature of the completion frame; empty if none
    bool completed = false;
  };
  struct Frame {
    std::string task_id;
    int subtask = 0;
    int t = 0;
    nn::Vec obs;
    nn::Vec q;
    sim::LowLevelAction action;  // command emitted from this frame
    bool done = false;           // subtask goal atoms hold in this frame
  };
  std::vector<Task> tasks;
  std::vector<Boundary> boundaries;
  std::vector<Frame> frames;
};

Dataset load_dataset(const std::string& path);

// Dataset views for the three trainers. Policy and monitor records are
// conditioned per mode exactly as run_episode conditions them at inference.
std::vector<vwm::TrainRecord> vwm_records(const Dataset& dataset);
std::vector<policy::PolicyTrainRecord> policy_records(const Dataset& dataset, Mode regime,
                                                      const policy::PolicyConfig& config);
std::vector<policy::MonitorFrame> monitor_frames(const Dataset& dataset, Mode regime,
                                                 const policy::PolicyConfig& config);

}  // namespace hwm::harness
