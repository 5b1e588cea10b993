#include "hwm/harness.hpp"

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

#include <json.hpp>

#include "hwm/error.hpp"
#include "hwm/rng.hpp"

namespace hwm::harness {

namespace {

constexpr uint64_t kGoalHashSeed = 0x7c3a1d95b4e2f681ULL;

std::string fmt(const char* spec, double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), spec, v);
  return buf;
}

nn::Vec json_vec(const nlohmann::json& j) { return j.get<nn::Vec>(); }

nlohmann::json atoms_json(const AtomSet& atoms) {
  nlohmann::json arr = nlohmann::json::array();
  for (const GroundAtom& a : atoms) arr.push_back(a.str());
  return arr;
}

AtomSet atoms_from_json(const nlohmann::json& arr) {
  AtomSet atoms;
  for (const auto& s : arr) atoms.push_back(GroundAtom::parse(s.get<std::string>()));
  normalize_atoms(atoms);
  return atoms;
}

// Completion scene feature for subtask m, or empty when never reached.
nn::Vec subgoal_feature_or_empty(const Episode& ep, size_t m) {
  try {
    return sim::goal_feature(ep.frames, m, ep.subtask_goals[m]);
  } catch (const Error& e) {
    if (e.kind() == ErrorKind::SubtaskUnreachable) return {};
    throw;
  }
}

struct ModeStats {
  double q_sum = 0.0;
  double steps_sum = 0.0;
  int successes = 0;
  int count = 0;
};

}  // namespace

const char* to_string(Mode mode) {
  switch (mode) {
    case Mode::Hwm: return "hwm";
    case Mode::LogicOnly: return "logic-only";
    case Mode::Unguided: return "unguided";
    case Mode::ScriptedOracle: return "scripted-oracle";
  }
  return "unknown";
}

Mode parse_mode(const std::string& text) {
  if (text == "hwm") return Mode::Hwm;
  if (text == "logic-only") return Mode::LogicOnly;
  if (text == "unguided") return Mode::Unguided;
  if (text == "scripted-oracle") return Mode::ScriptedOracle;
  throw Error(ErrorKind::Config, "unknown mode '" + text +
                                     "' (expected hwm, logic-only, unguided, scripted-oracle)");
}

nn::Vec atoms_feature(const AtomSet& atoms, size_t dim) {
  if (dim == 0) throw Error(ErrorKind::DimensionMismatch, "atom feature width must be positive");
  nn::Vec out(dim, 0.0);
  for (const GroundAtom& a : atoms) {
    uint64_t h = fnv1a(a.str(), kGoalHashSeed);
    double sign = ((h >> 33) & 1) ? 1.0 : -1.0;
    out[h % dim] += sign;
  }
  return out;
}

EpisodeResult run_episode(const sim::TaskSpec& task, const Models& models,
                          const RunConfig& config, Episode* recording) {
  if (config.step_cap < 1) {
    throw Error(ErrorKind::Config, "per-subtask step cap must be at least 1");
  }
  const Mode mode = config.mode;
  if (mode == Mode::Hwm && !models.denoiser) {
    throw Error(ErrorKind::ModelLoad, "hwm mode needs a denoiser model");
  }
  if (mode != Mode::ScriptedOracle && !models.policy) {
    throw Error(ErrorKind::ModelLoad,
                std::string(to_string(mode)) + " mode needs a policy model");
  }
  const bool oracle_done = config.oracle_completion || mode == Mode::ScriptedOracle;
  const policy::CompletionMonitor fallback;
  const policy::CompletionMonitor& monitor = models.monitor ? *models.monitor : fallback;
  const int consecutive = std::max(1, config.completion_consecutive);
  const size_t chunk_len = std::max<size_t>(1, config.policy.chunk_len);
  const size_t stride =
      config.chunk_stride > 0 ? std::min<size_t>(config.chunk_stride, chunk_len) : chunk_len;

  PlanTrace plan = logic::plan(task.problem, task.domain, config.planner);

  EpisodeResult result;
  result.task_id = task.task_id;

  sim::Scene scene = task.scene;
  nn::Vec obs = sim::encode(scene, config.encoder);
  nn::Vec q = sim::joint_config(scene);
  const nn::Vec task_goal_feat =
      atoms_feature(task.problem.goal, config.policy.feature_dim);

  if (recording) {
    recording->task_id = task.task_id;
    recording->plan = plan;
    recording->task_goal = task.problem.goal;
    recording->subtask_goals.clear();
    for (const GroundAction& a : plan.actions) recording->subtask_goals.push_back(a.add);
    recording->frames.clear();
  }

  Rng jitter(mix_seed(mix_seed(config.seed, fnv1a("collect-noise")), fnv1a(task.task_id)));
  auto perturb = [&](const sim::LowLevelAction& clean) {
    if (!recording || config.collect_noise <= 0.0) return clean;
    sim::LowLevelAction noisy = clean;
    noisy.dx += jitter.normal() * config.collect_noise * config.policy.max_delta;
    noisy.dy += jitter.normal() * config.collect_noise * config.policy.max_delta;
    noisy.grip = std::clamp(noisy.grip + jitter.normal() * config.collect_noise, 0.0, 1.0);
    return noisy;
  };

  int t_global = 0;
  auto record_frame = [&](int m, const sim::LowLevelAction& action) {
    if (!recording) return;
    sim::EpisodeFrame f;
    f.t = t_global;
    f.m = m;
    f.scene = scene;
    f.q = q;
    f.action = action;
    f.atoms = sim::classify_predicates(scene);
    f.feature = obs;
    recording->frames.push_back(std::move(f));
  };

  for (size_t m = 0; m < plan.actions.size(); ++m) {
    const GroundAction& subtask = plan.actions[m];
    const AtomSet& goal = subtask.add;
    const GroundAction cond_action = mode == Mode::Unguided ? GroundAction{} : subtask;

    nn::Vec f_pred;
    switch (mode) {
      case Mode::Hwm:
        f_pred = vwm::predict_subgoal(*models.denoiser, obs, subtask, plan.states[m + 1], q,
                                      config.vwm);
        ++result.predict_calls;
        break;
      case Mode::LogicOnly:
        f_pred = atoms_feature(goal, config.policy.feature_dim);
        break;
      case Mode::Unguided:
        f_pred = task_goal_feat;
        break;
      case Mode::ScriptedOracle:
        break;
    }

    auto query_completion = [&](const LogicalState& atoms) {
      ++result.completion_queries;
      if (oracle_done) return atoms.includes(goal);
      double p = policy::completion_probability(monitor, *models.policy, obs, cond_action,
                                                f_pred, q, config.policy);
      return p >= monitor.threshold;
    };

    std::vector<sim::LowLevelAction> chunk;
    size_t used = 0;
    int steps = 0;
    int consec = 0;
    bool gt_hit = false;
    bool advanced = false;

    while (steps < config.step_cap) {
      if (chunk.empty() || used >= stride) {
        if (mode == Mode::ScriptedOracle) {
          chunk = policy::scripted_chunk(scene, subtask, chunk_len).actions;
        } else {
          chunk = policy::policy_step(*models.policy, obs, q, cond_action, f_pred,
                                      config.policy)
                      .actions;
        }
        used = 0;
      }
      const sim::LowLevelAction action = chunk[used++];
      record_frame(int(m), action);
      scene = sim::step(scene, perturb(action));
      obs = sim::encode(scene, config.encoder);
      q = sim::joint_config(scene);
      ++steps;
      ++result.total_steps;
      ++t_global;

      LogicalState atoms = sim::classify_predicates(scene);
      gt_hit = gt_hit || atoms.includes(goal);
      bool positive = query_completion(atoms);
      consec = positive ? consec + 1 : 0;
      if (consec >= (oracle_done ? 1 : consecutive)) {
        advanced = true;
        break;
      }
    }

    if (advanced && recording && config.dwell_steps > 0) {
      for (int j = 0; j < config.dwell_steps; ++j) {
        sim::LowLevelAction rest = mode == Mode::ScriptedOracle
                                       ? sim::scripted_controller(scene, subtask)
                                       : sim::LowLevelAction{0.0, 0.0, scene.gripper.grip};
        record_frame(int(m), rest);
        scene = sim::step(scene, perturb(rest));
        obs = sim::encode(scene, config.encoder);
        q = sim::joint_config(scene);
        ++result.total_steps;
        ++t_global;
        LogicalState atoms = sim::classify_predicates(scene);
        gt_hit = gt_hit || atoms.includes(goal);
        query_completion(atoms);
      }
    }

    result.outcomes.push_back({gt_hit, steps});
  }

  record_frame(int(plan.actions.empty() ? 0 : plan.actions.size() - 1),
               sim::LowLevelAction{0.0, 0.0, scene.gripper.grip});

  size_t completed = 0;
  for (const SubtaskOutcome& o : result.outcomes) completed += o.completed ? 1 : 0;
  result.success = completed == result.outcomes.size();
  result.q_score =
      result.outcomes.empty() ? 1.0 : double(completed) / double(result.outcomes.size());
  if (recording) recording->result = result;
  return result;
}

double q_score(const EpisodeResult& result) { return result.q_score; }

double success_rate(const std::vector<EpisodeResult>& results) {
  if (results.empty()) {
    throw Error(ErrorKind::EmptyInput, "success rate over zero episodes");
  }
  size_t hits = 0;
  for (const EpisodeResult& r : results) hits += r.success ? 1 : 0;
  return 100.0 * double(hits) / double(results.size());
}

BenchResult run_benchmark(uint64_t suite_seed, int tasks_per_horizon,
                          const std::vector<Mode>& modes,
                          const std::map<Mode, Models>& models, const RunConfig& config) {
  if (tasks_per_horizon < 1) {
    throw Error(ErrorKind::Config, "benchmark needs at least one task per horizon");
  }
  static const Models kNoModels;

  struct TaskEntry {
    sim::TaskSpec task;
    int horizon;
  };
  std::vector<TaskEntry> tasks;
  for (int horizon : {5, 6, 7}) {
    for (int i = 0; i < tasks_per_horizon; ++i) {
      uint64_t seed = mix_seed(
          suite_seed, fnv1a("task-" + std::to_string(horizon) + "-" + std::to_string(i)));
      tasks.push_back({sim::generate_task(seed, horizon), horizon});
    }
  }

  BenchResult out;
  std::map<Mode, ModeStats> stats;
  std::map<std::pair<int, Mode>, ModeStats> horizon_stats;
  for (const TaskEntry& entry : tasks) {
    for (Mode mode : modes) {
      auto it = models.find(mode);
      const Models& mode_models = it == models.end() ? kNoModels : it->second;
      RunConfig run_cfg = config;
      run_cfg.mode = mode;
      BenchRow row;
      row.task_id = entry.task.task_id;
      row.horizon = entry.horizon;
      row.mode = mode;
      try {
        EpisodeResult r = run_episode(entry.task, mode_models, run_cfg);
        row.q_score = r.q_score;
        row.success = r.success;
        row.steps = r.total_steps;
      } catch (const Error& e) {
        if (e.kind() != ErrorKind::PlanNotFound) throw;
        row.q_score = 0.0;
        row.success = false;
        row.steps = 0;
      }
      out.rows.push_back(row);
      ModeStats& s = stats[mode];
      s.q_sum += row.q_score;
      s.steps_sum += row.steps;
      s.successes += row.success ? 1 : 0;
      s.count += 1;
      ModeStats& hs = horizon_stats[{entry.horizon, mode}];
      hs.q_sum += row.q_score;
      hs.successes += row.success ? 1 : 0;
      hs.count += 1;
    }
  }

  std::string csv = "task_id,horizon,mode,q_score,success,steps\n";
  for (const BenchRow& r : out.rows) {
    csv += r.task_id + "," + std::to_string(r.horizon) + "," + to_string(r.mode) + "," +
           fmt("%.4f", r.q_score) + "," + (r.success ? "1" : "0") + "," +
           std::to_string(r.steps) + "\n";
  }
  out.csv = std::move(csv);

  std::string hcsv = "horizon,mode,mean_q_score,success_rate\n";
  for (int horizon : {5, 6, 7}) {
    for (Mode mode : modes) {
      auto it = horizon_stats.find({horizon, mode});
      if (it == horizon_stats.end()) continue;
      const ModeStats& s = it->second;
      hcsv += std::to_string(horizon) + "," + to_string(mode) + "," +
              fmt("%.4f", s.q_sum / s.count) + "," +
              fmt("%.2f", 100.0 * s.successes / s.count) + "\n";
    }
  }
  out.horizon_csv = std::move(hcsv);

  std::ostringstream table;
  table << "mode              mean_q  success_rate  mean_steps\n";
  for (Mode mode : modes) {
    const ModeStats& s = stats[mode];
    char line[128];
    std::snprintf(line, sizeof(line), "%-16s  %6.4f  %11.2f%%  %10.1f\n", to_string(mode),
                  s.q_sum / std::max(1, s.count), 100.0 * s.successes / std::max(1, s.count),
                  s.steps_sum / std::max(1, s.count));
    table << line;
  }
  out.table = table.str();
  return out;
}

std::vector<Episode> collect_episodes(const std::vector<sim::TaskSpec>& tasks,
                                      const RunConfig& config) {
  RunConfig cfg = config;
  cfg.mode = Mode::ScriptedOracle;
  cfg.record_frames = true;
  cfg.chunk_stride = 1;  // per-step labels stay corrective under injected noise
  std::vector<Episode> episodes;
  episodes.reserve(tasks.size());
  for (const sim::TaskSpec& task : tasks) {
    Episode ep;
    run_episode(task, {}, cfg, &ep);
    episodes.push_back(std::move(ep));
  }
  return episodes;
}

size_t export_dataset(const std::vector<Episode>& episodes, const std::string& path) {
  std::string out;
  std::string cot;
  size_t count = 0;

  for (const Episode& ep : episodes) {
    nlohmann::json header;
    header["kind"] = "task";
    header["task"] = ep.task_id;
    header["horizon"] = int(ep.plan.actions.size());
    header["goal"] = atoms_json(ep.task_goal);
    out += header.dump();
    out += "\n";

    // Boundary m: the first recorded frame of subtask m.
    std::map<int, const sim::EpisodeFrame*> first_frame;
    for (const sim::EpisodeFrame& f : ep.frames) {
      if (!first_frame.count(f.m)) first_frame[f.m] = &f;
    }
    for (size_t m = 0; m < ep.plan.actions.size(); ++m) {
      const GroundAction& a = ep.plan.actions[m];
      nn::Vec goal_obs = subgoal_feature_or_empty(ep, m);
      auto it = first_frame.find(int(m));

      nlohmann::json j;
      j["kind"] = "boundary";
      j["task"] = ep.task_id;
      j["m"] = int(m);
      j["state"] = atoms_json(ep.plan.states[m].atoms());
      j["next_state"] = atoms_json(ep.plan.states[m + 1].atoms());
      j["action"] = {{"name", a.name}, {"binding", a.binding}};
      j["goal"] = atoms_json(ep.subtask_goals[m]);
      j["obs"] = it != first_frame.end() ? it->second->feature : nn::Vec{};
      j["q"] = it != first_frame.end() ? it->second->q : nn::Vec{};
      j["goal_obs"] = goal_obs;
      j["completed"] = !goal_obs.empty();
      out += j.dump();
      out += "\n";
      ++count;
    }

    for (const sim::EpisodeFrame& f : ep.frames) {
      size_t m = size_t(f.m);
      bool done = m < ep.subtask_goals.size() && f.atoms.includes(ep.subtask_goals[m]);
      nlohmann::json j;
      j["kind"] = "frame";
      j["task"] = ep.task_id;
      j["m"] = f.m;
      j["t"] = f.t;
      j["obs"] = f.feature;
      j["q"] = f.q;
      j["action"] = {f.action.dx, f.action.dy, f.action.grip};
      j["done"] = done;
      out += j.dump();
      out += "\n";
      ++count;
    }

    cot += "# task " + ep.task_id + "\n";
    cot += logic::emit_cot_trace(ep.plan, ep.task_goal);
    cot += "\n";
  }
  if (episodes.empty()) {
    out.clear();
    cot.clear();
  }

  std::ofstream file(path, std::ios::binary);
  if (!file || !(file << out)) {
    throw Error(ErrorKind::Io, "cannot write dataset to " + path);
  }
  std::filesystem::path cot_path(path);
  cot_path.replace_extension(".cot.txt");
  std::ofstream cot_file(cot_path, std::ios::binary);
  if (!cot_file || !(cot_file << cot)) {
    throw Error(ErrorKind::Io, "cannot write trace companion to " + cot_path.string());
  }
  return count;
}

Dataset load_dataset(const std::string& path) {
  std::ifstream file(path, std::ios::binary);
  if (!file) throw Error(ErrorKind::Io, "cannot open dataset " + path);
  Dataset ds;
  std::string line;
  size_t lineno = 0;
  while (std::getline(file, line)) {
    ++lineno;
    if (line.empty()) continue;
    nlohmann::json j = nlohmann::json::parse(line, nullptr, false);
    if (j.is_discarded() || !j.is_object()) {
      throw Error(ErrorKind::Io, "dataset line " + std::to_string(lineno) + " is not valid JSON");
    }
    try {
      std::string kind = j.at("kind").get<std::string>();
      if (kind == "task") {
        Dataset::Task t;
        t.task_id = j.at("task").get<std::string>();
        t.horizon = j.at("horizon").get<int>();
        t.goal = atoms_from_json(j.at("goal"));
        ds.tasks.push_back(std::move(t));
      } else if (kind == "boundary") {
        Dataset::Boundary b;
        b.task_id = j.at("task").get<std::string>();
        b.subtask = j.at("m").get<int>();
        b.state = LogicalState(atoms_from_json(j.at("state")));
        b.next_state = LogicalState(atoms_from_json(j.at("next_state")));
        b.action.name = j.at("action").at("name").get<std::string>();
        b.action.binding = j.at("action").at("binding").get<std::vector<std::string>>();
        b.goal = atoms_from_json(j.at("goal"));
        b.obs = json_vec(j.at("obs"));
        b.q = json_vec(j.at("q"));
        b.goal_obs = json_vec(j.at("goal_obs"));
        b.completed = j.at("completed").get<bool>();
        ds.boundaries.push_back(std::move(b));
      } else if (kind == "frame") {
        Dataset::Frame f;
        f.task_id = j.at("task").get<std::string>();
        f.subtask = j.at("m").get<int>();
        f.t = j.at("t").get<int>();
        f.obs = json_vec(j.at("obs"));
        f.q = json_vec(j.at("q"));
        f.action = {j.at("action").at(0).get<double>(), j.at("action").at(1).get<double>(),
                    j.at("action").at(2).get<double>()};
        f.done = j.at("done").get<bool>();
        ds.frames.push_back(std::move(f));
      } else {
        throw Error(ErrorKind::Io, "dataset line " + std::to_string(lineno) +
                                       " has unknown kind '" + kind + "'");
      }
    } catch (const nlohmann::json::exception& e) {
      throw Error(ErrorKind::Io, "dataset line " + std::to_string(lineno) + ": " + e.what());
    }
  }
  return ds;
}

std::vector<vwm::TrainRecord> vwm_records(const Dataset& dataset) {
  std::vector<vwm::TrainRecord> records;
  for (const Dataset::Boundary& b : dataset.boundaries) {
    if (!b.completed || b.goal_obs.empty() || b.obs.empty()) continue;
    vwm::TrainRecord r;
    r.obs = b.obs;
    r.action = b.action;
    r.next_state = b.next_state;
    r.q = b.q;
    r.f_goal = b.goal_obs;
    records.push_back(std::move(r));
  }
  return records;
}

namespace {

struct BoundaryKey {
  std::string task_id;
  int subtask;
  bool operator<(const BoundaryKey& o) const {
    return std::tie(task_id, subtask) < std::tie(o.task_id, o.subtask);
  }
};

// Per-regime conditioning, mirroring run_episode: hwm uses the completion
// feature, logic-only the hashed subtask goal, unguided the hashed task goal
// with no per-subtask action. Returns false when the regime cannot condition
// this subtask (hwm with no completion frame).
bool regime_conditioning(const Dataset& dataset, const Dataset::Boundary& b, Mode regime,
                         size_t feature_dim, GroundAction& action, nn::Vec& f_pred) {
  switch (regime) {
    case Mode::Hwm:
      if (b.goal_obs.empty()) return false;
      action = b.action;
      f_pred = b.goal_obs;
      return true;
    case Mode::LogicOnly:
      action = b.action;
      f_pred = atoms_feature(b.goal, feature_dim);
      return true;
    case Mode::Unguided: {
      action = GroundAction{};
      for (const Dataset::Task& t : dataset.tasks) {
        if (t.task_id == b.task_id) {
          f_pred = atoms_feature(t.goal, feature_dim);
          return true;
        }
      }
      return false;
    }
    case Mode::ScriptedOracle:
      return false;
  }
  return false;
}

}  // namespace

std::vector<policy::PolicyTrainRecord> policy_records(const Dataset& dataset, Mode regime,
                                                      const policy::PolicyConfig& config) {
  std::map<BoundaryKey, const Dataset::Boundary*> boundary_of;
  for (const Dataset::Boundary& b : dataset.boundaries) {
    boundary_of[{b.task_id, b.subtask}] = &b;
  }
  std::map<BoundaryKey, std::vector<const Dataset::Frame*>> grouped;
  for (const Dataset::Frame& f : dataset.frames) {
    grouped[{f.task_id, f.subtask}].push_back(&f);
  }

  const size_t k = std::max<size_t>(1, config.chunk_len);
  std::vector<policy::PolicyTrainRecord> records;
  for (auto& [key, frames] : grouped) {
    auto bit = boundary_of.find(key);
    if (bit == boundary_of.end()) continue;
    GroundAction action;
    nn::Vec f_pred;
    if (!regime_conditioning(dataset, *bit->second, regime, config.feature_dim, action,
                             f_pred)) {
      continue;
    }
    std::sort(frames.begin(), frames.end(),
              [](const Dataset::Frame* a, const Dataset::Frame* b) { return a->t < b->t; });
    for (size_t start = 0; start < frames.size(); start += k) {
      policy::PolicyTrainRecord r;
      r.obs = frames[start]->obs;
      r.q = frames[start]->q;
      r.action = action;
      r.f_pred = f_pred;
      for (size_t i = 0; i < k; ++i) {
        if (start + i < frames.size()) {
          r.chunk.actions.push_back(frames[start + i]->action);
        } else {
          // Tail shorter than a chunk: hold position and grip.
          r.chunk.actions.push_back({0.0, 0.0, r.chunk.actions.back().grip});
        }
      }
      records.push_back(std::move(r));
    }
  }
  return records;
}

std::vector<policy::MonitorFrame> monitor_frames(const Dataset& dataset, Mode regime,
                                                 const policy::PolicyConfig& config) {
  std::map<BoundaryKey, const Dataset::Boundary*> boundary_of;
  for (const Dataset::Boundary& b : dataset.boundaries) {
    boundary_of[{b.task_id, b.subtask}] = &b;
  }
  std::vector<policy::MonitorFrame> frames;
  for (const Dataset::Frame& f : dataset.frames) {
    auto bit = boundary_of.find({f.task_id, f.subtask});
    if (bit == boundary_of.end()) continue;
    GroundAction action;
    nn::Vec f_pred;
    if (!regime_conditioning(dataset, *bit->second, regime, config.feature_dim, action,
                             f_pred)) {
      continue;
    }
    policy::MonitorFrame mf;
    mf.obs = f.obs;
    mf.q = f.q;
    mf.action = action;
    mf.f_pred = f_pred;
    mf.label = f.done;
    frames.push_back(std::move(mf));
  }
  return frames;
}

}  // namespace hwm::harness
