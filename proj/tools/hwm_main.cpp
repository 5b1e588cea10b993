#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "hwm/checkpoint.hpp"
#include "hwm/config.hpp"
#include "hwm/domain_io.hpp"
#include "hwm/error.hpp"
#include "hwm/harness.hpp"
#include "hwm/rng.hpp"

namespace fs = std::filesystem;
using hwm::Error;
using hwm::ErrorKind;
using hwm::config::Settings;
using hwm::harness::Mode;

namespace {

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::Io, "cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const std::string& path, const std::string& text) {
  fs::path p(path);
  if (p.has_parent_path()) fs::create_directories(p.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out || !(out << text)) throw Error(ErrorKind::Io, "cannot write " + path);
}

// Common per-command options: defaults < config file < HWM_SEED < --seed.
struct Common {
  std::string config_path;
  uint64_t seed = 0;
  CLI::Option* seed_opt = nullptr;

  void attach(CLI::App* cmd) {
    seed_opt = cmd->add_option("--seed", seed, "run seed (overrides HWM_SEED)");
    cmd->add_option("--config", config_path, "key=value configuration file");
  }

  Settings settings() const {
    Settings s;
    if (!config_path.empty()) s = hwm::config::load_settings(config_path);
    if (const char* env = std::getenv("HWM_SEED")) {
      try {
        size_t pos = 0;
        uint64_t v = std::stoull(env, &pos);
        if (pos != std::string(env).size()) throw std::invalid_argument(env);
        hwm::config::set_seed(s, v);
      } catch (const std::logic_error&) {
        throw Error(ErrorKind::Config, std::string("HWM_SEED is not an unsigned integer: ") + env);
      }
    }
    if (seed_opt && seed_opt->count() > 0) hwm::config::set_seed(s, seed);
    return s;
  }
};

std::vector<hwm::sim::TaskSpec> load_tasks(const std::string& dir) {
  if (!fs::is_directory(dir)) throw Error(ErrorKind::Io, "not a task directory: " + dir);
  std::vector<fs::path> files;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (entry.path().extension() == ".json") files.push_back(entry.path());
  }
  std::sort(files.begin(), files.end());
  if (files.empty()) throw Error(ErrorKind::EmptyInput, "no .json task files in " + dir);
  std::vector<hwm::sim::TaskSpec> tasks;
  tasks.reserve(files.size());
  for (const fs::path& f : files) tasks.push_back(hwm::sim::parse_task(read_file(f.string())));
  return tasks;
}

Mode required_mode(const std::string& text) { return hwm::harness::parse_mode(text); }

hwm::harness::Models load_models(Mode mode, const std::string& vwm_path,
                                 const std::string& policy_path,
                                 const std::string& monitor_path, const Settings& s) {
  hwm::harness::Models m;
  if (mode == Mode::Hwm) {
    if (vwm_path.empty()) throw Error(ErrorKind::Config, "hwm mode needs --vwm <checkpoint>");
    m.denoiser = hwm::vwm::load_denoiser(hwm::Checkpoint::load(vwm_path), s.run.vwm);
  }
  if (mode != Mode::ScriptedOracle) {
    if (policy_path.empty()) {
      throw Error(ErrorKind::Config,
                  std::string(to_string(mode)) + " mode needs a policy checkpoint");
    }
    m.policy = hwm::policy::load_policy(hwm::Checkpoint::load(policy_path), s.run.policy);
  }
  if (!monitor_path.empty()) {
    m.monitor = hwm::policy::load_monitor(hwm::Checkpoint::load(monitor_path), s.run.policy);
  }
  return m;
}

std::vector<Mode> parse_modes(const std::string& csv) {
  std::vector<Mode> modes;
  std::istringstream in(csv);
  std::string item;
  while (std::getline(in, item, ',')) {
    if (!item.empty()) modes.push_back(required_mode(item));
  }
  if (modes.empty()) throw Error(ErrorKind::Config, "no modes given");
  return modes;
}

uint64_t task_seed(uint64_t base, int horizon, int index) {
  return hwm::mix_seed(
      base, hwm::fnv1a("task-" + std::to_string(horizon) + "-" + std::to_string(index)));
}

void print_episode(const hwm::harness::EpisodeResult& r, Mode mode) {
  std::cout << "task " << r.task_id << " mode " << to_string(mode) << "\n";
  for (size_t m = 0; m < r.outcomes.size(); ++m) {
    std::cout << "  subtask " << m << ": " << (r.outcomes[m].completed ? "completed" : "failed")
              << " in " << r.outcomes[m].steps << " steps\n";
  }
  char line[128];
  std::snprintf(line, sizeof(line), "q_score %.4f success %d steps %d\n", r.q_score,
                r.success ? 1 : 0, r.total_steps);
  std::cout << line;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"hierarchical world-model planner, simulator, and benchmark harness"};
  app.require_subcommand(1);

  // plan
  auto* plan_cmd = app.add_subcommand("plan", "plan a PDDL problem and render the trace");
  Common plan_common;
  plan_common.attach(plan_cmd);
  std::string plan_domain, plan_problem, plan_out = "plan_trace.txt";
  plan_cmd->add_option("domain", plan_domain, "domain PDDL file")->required();
  plan_cmd->add_option("problem", plan_problem, "problem PDDL file")->required();
  plan_cmd->add_option("--out", plan_out, "trace output file");
  plan_cmd->callback([&] {
    Settings s = plan_common.settings();
    hwm::Domain domain = hwm::io::parse_domain(read_file(plan_domain));
    hwm::Problem problem = hwm::io::parse_problem(read_file(plan_problem), domain);
    hwm::PlanTrace trace = hwm::logic::plan(problem, domain, s.run.planner);
    write_file(plan_out, hwm::logic::emit_cot_trace(trace, problem.goal));
    for (const hwm::GroundAction& a : trace.actions) std::cout << a.str() << "\n";
    std::cout << "plan of length " << trace.actions.size() << " written to " << plan_out << "\n";
  });

  // gen-tasks
  auto* gen_cmd = app.add_subcommand("gen-tasks", "sample solvable tabletop tasks");
  Common gen_common;
  gen_common.attach(gen_cmd);
  int gen_count = 1, gen_horizon = 0;
  std::string gen_out = "tasks";
  gen_cmd->add_option("--count", gen_count, "tasks per horizon")->check(CLI::PositiveNumber);
  gen_cmd->add_option("--horizon", gen_horizon, "subtask count 5..7; 0 = all three");
  gen_cmd->add_option("--out", gen_out, "output directory");
  gen_cmd->callback([&] {
    Settings s = gen_common.settings();
    fs::create_directories(gen_out);
    std::vector<int> horizons =
        gen_horizon == 0 ? std::vector<int>{5, 6, 7} : std::vector<int>{gen_horizon};
    int written = 0;
    for (int h : horizons) {
      for (int i = 0; i < gen_count; ++i) {
        hwm::sim::TaskSpec task = hwm::sim::generate_task(task_seed(s.seed, h, i), h);
        char name[64];
        std::snprintf(name, sizeof(name), "task-h%d-%03d.json", h, i);
        write_file((fs::path(gen_out) / name).string(), hwm::sim::serialize_task(task));
        ++written;
      }
    }
    std::cout << "wrote " << written << " tasks to " << gen_out << "\n";
  });

  // collect
  auto* collect_cmd =
      app.add_subcommand("collect", "record scripted-oracle rollouts as a training dataset");
  Common collect_common;
  collect_common.attach(collect_cmd);
  std::string collect_tasks, collect_out = "data.jsonl";
  int collect_dwell = -1;
  double collect_noise = -1.0;
  collect_cmd->add_option("--tasks", collect_tasks, "directory of task .json files")->required();
  collect_cmd->add_option("--out", collect_out, "dataset JSONL path");
  collect_cmd->add_option("--dwell", collect_dwell, "post-completion frames per subtask");
  collect_cmd->add_option("--noise", collect_noise,
                          "execution noise as a fraction of max_delta");
  collect_cmd->callback([&] {
    Settings s = collect_common.settings();
    hwm::harness::RunConfig cfg = s.run;
    cfg.dwell_steps = collect_dwell >= 0 ? collect_dwell
                      : cfg.dwell_steps > 0 ? cfg.dwell_steps
                                            : 8;
    if (collect_noise >= 0.0) {
      cfg.collect_noise = collect_noise;
    } else if (cfg.collect_noise == 0.0) {
      cfg.collect_noise = 0.3;
    }
    auto episodes = hwm::harness::collect_episodes(load_tasks(collect_tasks), cfg);
    size_t n = hwm::harness::export_dataset(episodes, collect_out);
    std::cout << "collected " << episodes.size() << " episodes, " << n << " records into "
              << collect_out << "\n";
  });

  // train-vwm
  auto* tv_cmd = app.add_subcommand("train-vwm", "train the latent visual world model");
  Common tv_common;
  tv_common.attach(tv_cmd);
  std::string tv_data, tv_out = "vwm.ckpt";
  tv_cmd->add_option("--data", tv_data, "dataset JSONL from collect")->required();
  tv_cmd->add_option("--out", tv_out, "checkpoint path");
  tv_cmd->callback([&] {
    Settings s = tv_common.settings();
    auto records = hwm::harness::vwm_records(hwm::harness::load_dataset(tv_data));
    hwm::vwm::TrainResult res = hwm::vwm::train_visual_wm(records, s.run.vwm);
    hwm::Checkpoint ckpt;
    hwm::vwm::save_denoiser(res.model, ckpt);
    ckpt.save(tv_out);
    char line[128];
    std::snprintf(line, sizeof(line), "trained on %zu records, final loss %.6f\n",
                  records.size(), res.loss_curve.empty() ? 0.0 : res.loss_curve.back());
    std::cout << line << "saved " << tv_out << "\n";
  });

  // train-policy
  auto* tp_cmd = app.add_subcommand("train-policy", "train the guided low-level policy");
  Common tp_common;
  tp_common.attach(tp_cmd);
  std::string tp_data, tp_out = "policy.ckpt", tp_mode = "hwm";
  tp_cmd->add_option("--data", tp_data, "dataset JSONL from collect")->required();
  tp_cmd->add_option("--out", tp_out, "checkpoint path");
  tp_cmd->add_option("--mode", tp_mode, "conditioning regime: hwm, logic-only, unguided");
  tp_cmd->callback([&] {
    Settings s = tp_common.settings();
    Mode regime = required_mode(tp_mode);
    if (regime == Mode::ScriptedOracle) {
      throw Error(ErrorKind::Config, "scripted-oracle has no trainable policy");
    }
    auto records = hwm::harness::policy_records(hwm::harness::load_dataset(tp_data), regime,
                                                s.run.policy);
    hwm::policy::PolicyTrainResult res = hwm::policy::train_policy(records, s.run.policy);
    hwm::Checkpoint ckpt;
    hwm::policy::save_policy(res.model, ckpt);
    ckpt.save(tp_out);
    char line[128];
    std::snprintf(line, sizeof(line), "trained on %zu chunks, final loss %.6f\n", records.size(),
                  res.loss_curve.empty() ? 0.0 : res.loss_curve.back());
    std::cout << line << "saved " << tp_out << "\n";
  });

  // train-monitor
  auto* tm_cmd = app.add_subcommand("train-monitor", "train the completion monitor");
  Common tm_common;
  tm_common.attach(tm_cmd);
  std::string tm_data, tm_policy, tm_out = "monitor.ckpt", tm_mode = "hwm";
  tm_cmd->add_option("--data", tm_data, "dataset JSONL from collect")->required();
  tm_cmd->add_option("--policy", tm_policy, "policy checkpoint supplying expert tokens")
      ->required();
  tm_cmd->add_option("--out", tm_out, "checkpoint path");
  tm_cmd->add_option("--mode", tm_mode, "conditioning regime: hwm, logic-only, unguided");
  tm_cmd->callback([&] {
    Settings s = tm_common.settings();
    Mode regime = required_mode(tm_mode);
    auto model = hwm::policy::load_policy(hwm::Checkpoint::load(tm_policy), s.run.policy);
    auto frames = hwm::harness::monitor_frames(hwm::harness::load_dataset(tm_data), regime,
                                               s.run.policy);
    hwm::policy::MonitorResult res =
        hwm::policy::train_completion_monitor(model, frames, s.run.policy);
    hwm::Checkpoint ckpt;
    hwm::policy::save_monitor(res.monitor, ckpt);
    ckpt.save(tm_out);
    char line[160];
    std::snprintf(line, sizeof(line),
                  "trained on %zu frames, train accuracy %.4f, held-out accuracy %.4f\n",
                  frames.size(), res.train_accuracy, res.held_out_accuracy);
    std::cout << line << "saved " << tm_out << "\n";
  });

  // run
  auto* run_cmd = app.add_subcommand("run", "execute one task");
  Common run_common;
  run_common.attach(run_cmd);
  std::string run_task, run_mode = "hwm", run_vwm, run_policy, run_monitor, run_metrics;
  run_cmd->add_option("--task", run_task, "task .json file")->required();
  run_cmd->add_option("--mode", run_mode, "hwm, logic-only, unguided, scripted-oracle");
  run_cmd->add_option("--vwm", run_vwm, "denoiser checkpoint (hwm mode)");
  run_cmd->add_option("--policy", run_policy, "policy checkpoint");
  run_cmd->add_option("--monitor", run_monitor, "completion-monitor checkpoint");
  run_cmd->add_option("--metrics", run_metrics, "write a one-row metrics CSV here");
  run_cmd->callback([&] {
    Settings s = run_common.settings();
    Mode mode = required_mode(run_mode);
    hwm::sim::TaskSpec task = hwm::sim::parse_task(read_file(run_task));
    hwm::harness::RunConfig cfg = s.run;
    cfg.mode = mode;
    hwm::harness::Models models = load_models(mode, run_vwm, run_policy, run_monitor, s);
    hwm::harness::EpisodeResult r = hwm::harness::run_episode(task, models, cfg);
    print_episode(r, mode);
    if (!run_metrics.empty()) {
      char row[256];
      std::snprintf(row, sizeof(row), "%s,%d,%s,%.4f,%d,%d\n", r.task_id.c_str(),
                    int(r.outcomes.size()), to_string(mode), r.q_score, r.success ? 1 : 0,
                    r.total_steps);
      write_file(run_metrics, std::string("task_id,horizon,mode,q_score,success,steps\n") + row);
    }
  });

  // bench
  auto* bench_cmd = app.add_subcommand("bench", "run the benchmark suite across modes");
  Common bench_common;
  bench_common.attach(bench_cmd);
  int bench_count = 20;
  std::string bench_modes = "scripted-oracle", bench_out = "bench";
  std::string bench_vwm, bench_policy_hwm, bench_policy_logic, bench_policy_unguided;
  std::string bench_monitor_hwm, bench_monitor_logic, bench_monitor_unguided;
  bench_cmd->add_option("--count", bench_count, "tasks per horizon bucket")
      ->check(CLI::PositiveNumber);
  bench_cmd->add_option("--modes", bench_modes, "comma-separated mode list");
  bench_cmd->add_option("--out", bench_out, "output file prefix");
  bench_cmd->add_option("--vwm", bench_vwm, "denoiser checkpoint for hwm mode");
  bench_cmd->add_option("--policy-hwm", bench_policy_hwm, "policy checkpoint for hwm mode");
  bench_cmd->add_option("--policy-logic", bench_policy_logic,
                        "policy checkpoint for logic-only mode");
  bench_cmd->add_option("--policy-unguided", bench_policy_unguided,
                        "policy checkpoint for unguided mode");
  bench_cmd->add_option("--monitor-hwm", bench_monitor_hwm, "monitor checkpoint for hwm mode");
  bench_cmd->add_option("--monitor-logic", bench_monitor_logic,
                        "monitor checkpoint for logic-only mode");
  bench_cmd->add_option("--monitor-unguided", bench_monitor_unguided,
                        "monitor checkpoint for unguided mode");
  bench_cmd->callback([&] {
    Settings s = bench_common.settings();
    std::vector<Mode> modes = parse_modes(bench_modes);
    std::map<Mode, hwm::harness::Models> models;
    for (Mode mode : modes) {
      switch (mode) {
        case Mode::Hwm:
          models[mode] = load_models(mode, bench_vwm, bench_policy_hwm, bench_monitor_hwm, s);
          break;
        case Mode::LogicOnly:
          models[mode] = load_models(mode, "", bench_policy_logic, bench_monitor_logic, s);
          break;
        case Mode::Unguided:
          models[mode] = load_models(mode, "", bench_policy_unguided, bench_monitor_unguided, s);
          break;
        case Mode::ScriptedOracle:
          models[mode] = {};
          break;
      }
    }
    hwm::harness::BenchResult res =
        hwm::harness::run_benchmark(s.seed, bench_count, modes, models, s.run);
    write_file(bench_out + ".csv", res.csv);
    write_file(bench_out + "_horizon.csv", res.horizon_csv);
    write_file(bench_out + ".txt", res.table);
    std::cout << res.table;
    std::cout << "wrote " << bench_out << ".csv, " << bench_out << "_horizon.csv, " << bench_out
              << ".txt\n";
  });

  // export-dataset
  auto* ex_cmd =
      app.add_subcommand("export-dataset", "record runs and export the unified dataset");
  Common ex_common;
  ex_common.attach(ex_cmd);
  std::string ex_tasks, ex_out = "dataset.jsonl", ex_mode = "scripted-oracle";
  std::string ex_vwm, ex_policy, ex_monitor;
  int ex_dwell = -1;
  ex_cmd->add_option("--tasks", ex_tasks, "directory of task .json files")->required();
  ex_cmd->add_option("--out", ex_out, "dataset JSONL path");
  ex_cmd->add_option("--mode", ex_mode, "episode mode to record");
  ex_cmd->add_option("--vwm", ex_vwm, "denoiser checkpoint (hwm mode)");
  ex_cmd->add_option("--policy", ex_policy, "policy checkpoint (learned modes)");
  ex_cmd->add_option("--monitor", ex_monitor, "completion-monitor checkpoint");
  ex_cmd->add_option("--dwell", ex_dwell, "post-completion frames per subtask");
  ex_cmd->callback([&] {
    Settings s = ex_common.settings();
    Mode mode = required_mode(ex_mode);
    hwm::harness::RunConfig cfg = s.run;
    cfg.mode = mode;
    cfg.record_frames = true;
    if (ex_dwell >= 0) cfg.dwell_steps = ex_dwell;
    hwm::harness::Models models = load_models(mode, ex_vwm, ex_policy, ex_monitor, s);
    std::vector<hwm::harness::Episode> episodes;
    for (const hwm::sim::TaskSpec& task : load_tasks(ex_tasks)) {
      hwm::harness::Episode ep;
      hwm::harness::run_episode(task, models, cfg, &ep);
      episodes.push_back(std::move(ep));
    }
    size_t n = hwm::harness::export_dataset(episodes, ex_out);
    std::cout << "exported " << n << " records from " << episodes.size() << " episodes into "
              << ex_out << "\n";
  });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);  // --help
    std::cerr << e.what() << "\n\n" << app.help() << "\n";
    return 1;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
