#include "hwm/env_sim.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "hwm/domain_io.hpp"
#include "hwm/error.hpp"
#include "hwm/logic_wm.hpp"
#include "hwm/rng.hpp"
#include "json.hpp"

namespace hwm::sim {

namespace {

constexpr double kHandleMargin = 0.05;  // handle sits this far below the front edge
constexpr double kStepLen = 0.045;      // scripted motion per step; one pull crosses the dead band
constexpr double kArriveEps = 1e-9;
constexpr const char* kHandleSuffix = ":handle";

double clampd(double v, double lo, double hi) { return std::min(std::max(v, lo), hi); }

double interior_center_y(const Container& c) { return c.y - c.travel * c.open_fraction; }

bool inside_container(const std::array<double, 2>& p, const Container& c) {
  return std::abs(p[0] - c.x) <= c.half_w && std::abs(p[1] - interior_center_y(c)) <= c.half_h;
}

bool inside_surface(const std::array<double, 2>& p, const Surface& s) {
  return std::abs(p[0] - s.x) <= s.half_w && std::abs(p[1] - s.y) <= s.half_h;
}

GroundAtom atom(std::string pred, std::vector<std::string> args = {}) {
  return GroundAtom{std::move(pred), std::move(args)};
}

}  // namespace

bool is_handle(const std::string& held_name) {
  const std::string suffix = kHandleSuffix;
  return held_name.size() > suffix.size() &&
         held_name.compare(held_name.size() - suffix.size(), suffix.size(), suffix) == 0;
}

std::string handle_of(const std::string& container_name) { return container_name + kHandleSuffix; }

std::array<double, 2> handle_point(const Container& c) {
  return {c.x, c.y - c.half_h - kHandleMargin - c.travel * c.open_fraction};
}

Scene step(const Scene& scene, const LowLevelAction& action, const SimParams& params) {
  Scene s = scene;
  double dx = clampd(action.dx, -params.max_delta, params.max_delta);
  double dy = clampd(action.dy, -params.max_delta, params.max_delta);
  double grip_cmd = clampd(action.grip, 0.0, 1.0);

  s.gripper.x = clampd(s.gripper.x + dx, 0.0, 1.0);
  s.gripper.y = clampd(s.gripper.y + dy, 0.0, 1.0);

  if (s.held) {
    if (!is_handle(*s.held)) {
      auto it = s.objects.find(*s.held);
      if (it != s.objects.end()) it->second = {s.gripper.x, s.gripper.y};
    } else {
      std::string cname = s.held->substr(0, s.held->size() - std::string(kHandleSuffix).size());
      auto it = s.containers.find(cname);
      if (it != s.containers.end() && it->second.travel > 0.0) {
        Container& c = it->second;
        double closed_handle_y = c.y - c.half_h - kHandleMargin;
        double next = clampd((closed_handle_y - s.gripper.y) / c.travel, 0.0, 1.0);
        double shift = -c.travel * (next - c.open_fraction);
        // Contents ride with the sliding drawer.
        for (auto& [oname, pos] : s.objects) {
          if (oname != s.held && inside_container(pos, c)) pos[1] += shift;
        }
        c.open_fraction = next;
      }
    }
  }

  if (grip_cmd >= 0.5) {
    s.held.reset();
  } else if (!s.held) {
    // Attach the nearest graspable point within reach: object poses and the
    // handles of openable containers. Ties resolve to the first name.
    std::string best;
    bool best_is_handle = false;
    bool found = false;
    double best_d = 0.0;
    std::array<double, 2> best_point{};
    for (const auto& [name, pos] : s.objects) {
      double d = std::hypot(pos[0] - s.gripper.x, pos[1] - s.gripper.y);
      if (d <= params.attach_radius && (!found || d < best_d)) {
        found = true;
        best = name;
        best_is_handle = false;
        best_d = d;
        best_point = pos;
      }
    }
    for (const auto& [name, c] : s.containers) {
      if (!c.openable) continue;
      auto hp = handle_point(c);
      double d = std::hypot(hp[0] - s.gripper.x, hp[1] - s.gripper.y);
      if (d <= params.attach_radius && (!found || d < best_d)) {
        found = true;
        best = handle_of(name);
        best_is_handle = true;
        best_d = d;
        best_point = hp;
      }
    }
    if (found) {
      s.held = best;
      if (best_is_handle) {
        // The latch seats the gripper exactly on the handle.
        s.gripper.x = best_point[0];
        s.gripper.y = best_point[1];
      } else {
        s.objects[best] = {s.gripper.x, s.gripper.y};
      }
    }
  }

  s.gripper.grip = grip_cmd;
  s.step_count += 1;
  return s;
}

LogicalState classify_predicates(const Scene& scene, const SimParams& params) {
  AtomSet atoms;
  for (const auto& [name, pos] : scene.objects) {
    (void)pos;
    atoms.push_back(atom("graspable", {name}));
  }
  for (const auto& [name, c] : scene.containers) {
    atoms.push_back(atom("container", {name}));
    if (c.openable) atoms.push_back(atom("openable", {name}));
    if (c.open_fraction >= params.open_threshold) {
      atoms.push_back(atom("open", {name}));
    } else if (c.open_fraction <= params.closed_threshold) {
      atoms.push_back(atom("closed", {name}));
    }
  }
  for (const auto& [name, surf] : scene.surfaces) {
    (void)surf;
    atoms.push_back(atom("surface", {name}));
  }

  bool carrying_object = scene.held && !is_handle(*scene.held);
  if (carrying_object) {
    atoms.push_back(atom("holding", {*scene.held}));
  } else {
    // Dragging a handle is furniture interaction, not carrying.
    atoms.push_back(atom("handempty"));
  }

  for (const auto& [name, pos] : scene.objects) {
    if (carrying_object && *scene.held == name) continue;
    bool contained = false;
    for (const auto& [cname, c] : scene.containers) {
      if (inside_container(pos, c)) {
        atoms.push_back(atom("in", {name, cname}));
        contained = true;
      }
    }
    if (contained) continue;
    bool supported = false;
    for (const auto& [sname, surf] : scene.surfaces) {
      if (inside_surface(pos, surf)) {
        atoms.push_back(atom("on", {name, sname}));
        supported = true;
      }
    }
    if (!supported) atoms.push_back(atom("ontable", {name}));
  }

  return LogicalState(std::move(atoms));
}

namespace {

constexpr size_t kCanonDim = 24;
constexpr size_t kMaxObjects = 6;
constexpr size_t kMaxContainers = 2;

nn::Vec canonical_vector(const Scene& scene) {
  if (scene.objects.size() > kMaxObjects || scene.containers.size() > kMaxContainers) {
    throw Error(ErrorKind::DimensionMismatch,
                "scene exceeds encoder capacity of " + std::to_string(kMaxObjects) +
                    " objects and " + std::to_string(kMaxContainers) + " containers");
  }
  nn::Vec v;
  v.reserve(kCanonDim);
  for (const auto& [name, pos] : scene.objects) {
    v.push_back(pos[0] - 0.5);
    v.push_back(pos[1] - 0.5);
    v.push_back(scene.held && *scene.held == name ? 0.5 : -0.5);
  }
  v.resize(kMaxObjects * 3, 0.0);
  for (const auto& [name, c] : scene.containers) {
    (void)name;
    v.push_back(c.open_fraction - 0.5);
  }
  v.resize(kMaxObjects * 3 + kMaxContainers, 0.0);
  v.push_back(scene.gripper.x - 0.5);
  v.push_back(scene.gripper.y - 0.5);
  v.push_back(scene.gripper.grip - 0.5);
  v.resize(kCanonDim, 0.0);
  return v;
}

}  // namespace

nn::Vec encode(const Scene& scene, const EncoderConfig& config) {
  // Frozen map: the weights depend only on (dim, seed), never on data.
  static std::map<std::pair<size_t, uint64_t>, std::pair<nn::Mat, nn::Vec>> cache;
  auto key = std::make_pair(config.dim, config.seed);
  auto it = cache.find(key);
  if (it == cache.end()) {
    Rng wrng(mix_seed(config.seed, fnv1a("encoder-weights")));
    Rng brng(mix_seed(config.seed, fnv1a("encoder-bias")));
    nn::Mat w = nn::Mat::randn(config.dim, kCanonDim, wrng, 1.0 / std::sqrt(double(kCanonDim)));
    nn::Vec b(config.dim);
    for (double& x : b) x = brng.normal() * 0.1;
    it = cache.emplace(key, std::make_pair(std::move(w), std::move(b))).first;
  }
  nn::Vec out = nn::matvec(it->second.first, canonical_vector(scene));
  for (size_t i = 0; i < out.size(); ++i) out[i] = std::tanh(out[i] + it->second.second[i]);
  return out;
}

nn::Vec joint_config(const Scene& scene) {
  return {scene.gripper.x, scene.gripper.y, scene.gripper.grip};
}

namespace {

// Deterministic per-object drop offset so stacked placements spread out.
double drop_offset(const std::string& name) {
  return (double(fnv1a(name) % 5) - 2.0) * 0.015;
}

// Within one step of the target the remaining delta and the terminal grip are
// issued together, so demonstrations change grip over a fat region of states
// instead of a single razor-thin arrival frame.
std::optional<LowLevelAction> move_toward(const Scene& scene, double tx, double ty,
                                          double grip, double arrive_grip) {
  double dx = tx - scene.gripper.x;
  double dy = ty - scene.gripper.y;
  double d = std::hypot(dx, dy);
  if (d <= kArriveEps) return std::nullopt;
  if (d <= kStepLen) return LowLevelAction{dx, dy, arrive_grip};
  double f = kStepLen / d;
  return LowLevelAction{dx * f, dy * f, grip};
}

}  // namespace

LowLevelAction scripted_controller(const Scene& scene, const GroundAction& subtask,
                                   const SimParams& params) {
  const std::string& name = subtask.name;
  if (name != "pick" && name != "place-in" && name != "place-on" && name != "open" &&
      name != "close") {
    throw Error(ErrorKind::UnsupportedSchema, "scripted controller cannot execute '" + name + "'");
  }

  LogicalState state = classify_predicates(scene, params);
  if (state.includes(subtask.add)) {
    // Hold position and grip; the monitor sees at most this one no-op.
    return {0.0, 0.0, scene.gripper.grip};
  }

  if (name == "pick") {
    const std::string& obj = subtask.binding.at(0);
    if (scene.held && *scene.held != obj) return {0.0, 0.0, 1.0};
    auto it = scene.objects.find(obj);
    if (it == scene.objects.end()) {
      throw Error(ErrorKind::UnsupportedSchema, "pick target '" + obj + "' is not in the scene");
    }
    if (!scene.held) {
      if (auto mv = move_toward(scene, it->second[0], it->second[1], 1.0, 0.0)) return *mv;
      return {0.0, 0.0, 0.0};
    }
    return {0.0, 0.0, 0.0};
  }

  if (name == "place-in" || name == "place-on") {
    const std::string& obj = subtask.binding.at(0);
    const std::string& target = subtask.binding.at(1);
    if (!scene.held || *scene.held != obj) return {0.0, 0.0, 1.0};
    double tx = 0.0, ty = 0.0;
    if (name == "place-in") {
      auto it = scene.containers.find(target);
      if (it == scene.containers.end()) {
        throw Error(ErrorKind::UnsupportedSchema, "'" + target + "' is not a container");
      }
      tx = it->second.x + drop_offset(obj);
      ty = interior_center_y(it->second);
    } else {
      auto it = scene.surfaces.find(target);
      if (it == scene.surfaces.end()) {
        throw Error(ErrorKind::UnsupportedSchema, "'" + target + "' is not a surface");
      }
      tx = it->second.x + drop_offset(obj);
      ty = it->second.y;
    }
    if (auto mv = move_toward(scene, tx, ty, 0.0, 1.0)) return *mv;
    return {0.0, 0.0, 1.0};
  }

  // open / close
  const std::string& cname = subtask.binding.at(0);
  auto it = scene.containers.find(cname);
  if (it == scene.containers.end() || !it->second.openable) {
    throw Error(ErrorKind::UnsupportedSchema, "'" + cname + "' has no handle to operate");
  }
  if (scene.held && *scene.held != handle_of(cname)) return {0.0, 0.0, 1.0};
  if (!scene.held) {
    auto hp = handle_point(it->second);
    if (auto mv = move_toward(scene, hp[0], hp[1], 1.0, 0.0)) return *mv;
    return {0.0, 0.0, 0.0};
  }
  return {0.0, name == "open" ? -kStepLen : kStepLen, 0.0};
}

const std::string& tabletop_domain_text() {
  static const std::string text = R"((define (domain tabletop)
  (:predicates (graspable ?o) (container ?c) (openable ?c) (surface ?s)
               (holding ?o) (handempty) (ontable ?o) (in ?o ?c) (on ?o ?s)
               (open ?c) (closed ?c))
  (:action pick
    :parameters (?o)
    :precondition (and (graspable ?o) (ontable ?o) (handempty))
    :effect (and (holding ?o) (not (ontable ?o)) (not (handempty))))
  (:action place-in
    :parameters (?o ?c)
    :precondition (and (holding ?o) (container ?c) (open ?c))
    :effect (and (in ?o ?c) (handempty) (not (holding ?o))))
  (:action place-on
    :parameters (?o ?s)
    :precondition (and (holding ?o) (surface ?s))
    :effect (and (on ?o ?s) (handempty) (not (holding ?o))))
  (:action open
    :parameters (?c)
    :precondition (and (openable ?c) (closed ?c) (handempty))
    :effect (and (open ?c) (not (closed ?c))))
  (:action close
    :parameters (?c)
    :precondition (and (openable ?c) (open ?c) (handempty))
    :effect (and (closed ?c) (not (open ?c)))))
)";
  return text;
}

const Domain& tabletop_domain() {
  static const Domain domain = io::parse_domain(tabletop_domain_text());
  return domain;
}

namespace {

Scene base_furniture() {
  Scene s;
  s.containers["drawer"] = Container{0.20, 0.78, 0.08, 0.06, 0.0, 0.05, true};
  s.containers["tray"] = Container{0.75, 0.75, 0.09, 0.07, 1.0, 0.0, false};
  s.surfaces["platform"] = Surface{0.75, 0.20, 0.09, 0.07};
  return s;
}

// Keep sampled poses away from furniture, the drawer's swept corridor, and
// the handle track.
bool excluded_region(double x, double y) {
  if (std::abs(x - 0.20) <= 0.14 && y >= 0.56) return true;          // drawer + handle track
  if (std::abs(x - 0.75) <= 0.15 && std::abs(y - 0.75) <= 0.13) return true;  // tray
  if (std::abs(x - 0.75) <= 0.15 && std::abs(y - 0.20) <= 0.13) return true;  // platform
  return false;
}

std::optional<std::array<double, 2>> sample_free_pose(
    Rng& rng, const std::vector<std::array<double, 2>>& taken) {
  for (int attempt = 0; attempt < 200; ++attempt) {
    double x = rng.uniform(0.07, 0.93);
    double y = rng.uniform(0.07, 0.93);
    if (excluded_region(x, y)) continue;
    bool clash = false;
    for (const auto& p : taken) {
      if (std::hypot(p[0] - x, p[1] - y) < 0.09) {
        clash = true;
        break;
      }
    }
    if (!clash) return std::array<double, 2>{x, y};
  }
  return std::nullopt;
}

// Random legal action sequence of exactly `horizon` steps. Picks keep two
// steps of budget for the following place; a container is opened at most
// once and closed only when it has contents, so no shorter plan exists.
std::optional<std::vector<GroundAction>> sample_walk(Rng& rng, const LogicalState& init,
                                                     const std::vector<std::string>& objects,
                                                     int horizon) {
  LogicalState state = init;
  std::vector<GroundAction> actions;
  std::vector<std::string> opened;
  for (int i = 0; i < horizon; ++i) {
    int remaining = horizon - i;
    std::vector<GroundAction> cands;
    for (GroundAction& a : applicable_actions(state, tabletop_domain(), objects)) {
      if (a.name == "pick" && remaining < 2) continue;
      if (a.name == "open" &&
          std::find(opened.begin(), opened.end(), a.binding[0]) != opened.end()) {
        continue;
      }
      if (a.name == "close") {
        bool filled = false;
        for (const GroundAtom& g : state.atoms()) {
          if (g.predicate == "in" && g.args[1] == a.binding[0]) filled = true;
        }
        if (!filled) continue;
      }
      cands.push_back(std::move(a));
    }
    if (cands.empty()) return std::nullopt;
    GroundAction chosen = cands[rng.below(cands.size())];
    if (chosen.name == "open") opened.push_back(chosen.binding[0]);
    state = apply(chosen, state);
    actions.push_back(std::move(chosen));
  }
  return actions;
}

AtomSet outcome_goal(const std::vector<GroundAction>& actions, const LogicalState& final_state) {
  AtomSet goal;
  for (const GroundAction& a : actions) {
    for (const GroundAtom& g : a.add) {
      if (g.predicate == "in" || g.predicate == "on" || g.predicate == "open" ||
          g.predicate == "closed") {
        if (final_state.contains(g)) goal.push_back(g);
      }
    }
  }
  normalize_atoms(goal);
  return goal;
}

}  // namespace

TaskSpec generate_task(uint64_t seed, int horizon) {
  if (horizon < 5 || horizon > 7) {
    throw Error(ErrorKind::GenerationFailed,
                "horizon " + std::to_string(horizon) + " outside the supported range [5, 7]");
  }
  static const std::vector<std::string> kPool = {"blocka", "blockb", "blockc", "blockd"};

  for (uint64_t attempt = 0; attempt < 300; ++attempt) {
    Rng rng(mix_seed(mix_seed(seed, fnv1a("gen-task")), attempt));

    Scene scene = base_furniture();
    size_t n_objects = 3 + rng.below(2);
    std::vector<std::array<double, 2>> taken;
    bool placed_all = true;
    for (size_t i = 0; i < n_objects; ++i) {
      auto pose = sample_free_pose(rng, taken);
      if (!pose) {
        placed_all = false;
        break;
      }
      scene.objects[kPool[i]] = *pose;
      taken.push_back(*pose);
    }
    if (!placed_all) continue;
    auto gpose = sample_free_pose(rng, taken);
    if (!gpose) continue;
    scene.gripper = Gripper{(*gpose)[0], (*gpose)[1], 1.0};

    std::vector<std::string> objects;
    for (const auto& [n, p] : scene.objects) {
      (void)p;
      objects.push_back(n);
    }
    for (const auto& [n, c] : scene.containers) {
      (void)c;
      objects.push_back(n);
    }
    for (const auto& [n, s] : scene.surfaces) {
      (void)s;
      objects.push_back(n);
    }
    std::sort(objects.begin(), objects.end());

    LogicalState init = classify_predicates(scene);
    auto walk = sample_walk(rng, init, objects, horizon);
    if (!walk) continue;
    LogicalState final_state = init;
    for (const GroundAction& a : *walk) final_state = apply(a, final_state);
    AtomSet goal = outcome_goal(*walk, final_state);
    if (goal.empty()) continue;

    TaskSpec task;
    task.task_id = "task-" + std::to_string(seed) + "-h" + std::to_string(horizon);
    task.horizon = horizon;
    task.domain = tabletop_domain();
    task.problem = Problem{task.task_id, objects, init, goal};
    for (const GroundAction& a : *walk) task.subtask_goals.push_back(a.add);
    task.scene = scene;

    logic::PlannerConfig pc;
    pc.beam_width = 32;
    pc.max_depth = horizon;
    try {
      PlanTrace trace = logic::plan(task.problem, task.domain, pc);
      if (static_cast<int>(trace.length()) != horizon) continue;
    } catch (const Error&) {
      continue;
    }
    return task;
  }
  throw Error(ErrorKind::GenerationFailed,
              "no solvable task found for seed " + std::to_string(seed) + " at horizon " +
                  std::to_string(horizon));
}

namespace {

nlohmann::json scene_to_json(const Scene& s) {
  nlohmann::json objs = nlohmann::json::object();
  for (const auto& [n, p] : s.objects) objs[n] = {p[0], p[1]};
  nlohmann::json conts = nlohmann::json::object();
  for (const auto& [n, c] : s.containers) {
    conts[n] = {{"x", c.x},
                {"y", c.y},
                {"half_w", c.half_w},
                {"half_h", c.half_h},
                {"open_fraction", c.open_fraction},
                {"travel", c.travel},
                {"openable", c.openable}};
  }
  nlohmann::json surfs = nlohmann::json::object();
  for (const auto& [n, f] : s.surfaces) {
    surfs[n] = {{"x", f.x}, {"y", f.y}, {"half_w", f.half_w}, {"half_h", f.half_h}};
  }
  nlohmann::json j;
  j["objects"] = std::move(objs);
  j["containers"] = std::move(conts);
  j["surfaces"] = std::move(surfs);
  j["gripper"] = {s.gripper.x, s.gripper.y, s.gripper.grip};
  j["held"] = s.held ? nlohmann::json(*s.held) : nlohmann::json();
  j["step"] = s.step_count;
  return j;
}

Scene scene_from_json(const nlohmann::json& j) {
  Scene s;
  for (auto it = j.at("objects").begin(); it != j.at("objects").end(); ++it) {
    s.objects[it.key()] = {it.value().at(0).get<double>(), it.value().at(1).get<double>()};
  }
  for (auto it = j.at("containers").begin(); it != j.at("containers").end(); ++it) {
    const auto& c = it.value();
    s.containers[it.key()] =
        Container{c.at("x").get<double>(),          c.at("y").get<double>(),
                  c.at("half_w").get<double>(),     c.at("half_h").get<double>(),
                  c.at("open_fraction").get<double>(), c.at("travel").get<double>(),
                  c.at("openable").get<bool>()};
  }
  for (auto it = j.at("surfaces").begin(); it != j.at("surfaces").end(); ++it) {
    const auto& f = it.value();
    s.surfaces[it.key()] = Surface{f.at("x").get<double>(), f.at("y").get<double>(),
                                   f.at("half_w").get<double>(), f.at("half_h").get<double>()};
  }
  s.gripper = Gripper{j.at("gripper").at(0).get<double>(), j.at("gripper").at(1).get<double>(),
                      j.at("gripper").at(2).get<double>()};
  if (!j.at("held").is_null()) s.held = j.at("held").get<std::string>();
  s.step_count = j.at("step").get<int>();
  return s;
}

AtomSet atoms_from_json(const nlohmann::json& arr) {
  AtomSet atoms;
  for (const auto& a : arr) atoms.push_back(GroundAtom::parse(a.get<std::string>()));
  normalize_atoms(atoms);
  return atoms;
}

nlohmann::json atoms_to_json(const AtomSet& atoms) {
  nlohmann::json arr = nlohmann::json::array();
  for (const GroundAtom& a : atoms) arr.push_back(a.str());
  return arr;
}

}  // namespace

std::string serialize_task(const TaskSpec& task) {
  nlohmann::json j;
  j["format"] = "hwm-task";
  j["version"] = 1;
  j["task_id"] = task.task_id;
  j["horizon"] = task.horizon;
  j["domain"] = io::serialize_domain(task.domain);
  j["problem"] = io::serialize_problem(task.problem, task.domain);
  nlohmann::json goals = nlohmann::json::array();
  for (const AtomSet& g : task.subtask_goals) goals.push_back(atoms_to_json(g));
  j["subtask_goals"] = std::move(goals);
  j["scene"] = scene_to_json(task.scene);
  return j.dump(2) + "\n";
}

TaskSpec parse_task(const std::string& json_text) {
  nlohmann::json j = nlohmann::json::parse(json_text, nullptr, false);
  if (j.is_discarded() || !j.is_object()) {
    throw Error(ErrorKind::Io, "task file is not valid JSON");
  }
  if (j.value("format", "") != "hwm-task") {
    throw Error(ErrorKind::Io, "unrecognized task format");
  }
  try {
    TaskSpec task;
    task.task_id = j.at("task_id").get<std::string>();
    task.horizon = j.at("horizon").get<int>();
    task.domain = io::parse_domain(j.at("domain").get<std::string>());
    task.problem = io::parse_problem(j.at("problem").get<std::string>(), task.domain);
    for (const auto& g : j.at("subtask_goals")) task.subtask_goals.push_back(atoms_from_json(g));
    task.scene = scene_from_json(j.at("scene"));
    if (static_cast<int>(task.subtask_goals.size()) != task.horizon) {
      throw Error(ErrorKind::Io, "task horizon does not match its subtask goal count");
    }
    return task;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::Io, std::string("malformed task file: ") + e.what());
  }
}

std::string serialize_episode(const std::vector<EpisodeFrame>& frames) {
  std::string out;
  for (const EpisodeFrame& f : frames) {
    nlohmann::json j;
    j["t"] = f.t;
    j["m"] = f.m;
    j["scene"] = scene_to_json(f.scene);
    j["q"] = f.q;
    j["action"] = {f.action.dx, f.action.dy, f.action.grip};
    j["atoms"] = atoms_to_json(f.atoms.atoms());
    j["feature"] = f.feature;
    out += j.dump();
    out += "\n";
  }
  return out;
}

std::vector<EpisodeFrame> parse_episode(const std::string& text) {
  std::vector<EpisodeFrame> frames;
  std::istringstream in(text);
  std::string line;
  size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    nlohmann::json j = nlohmann::json::parse(line, nullptr, false);
    if (j.is_discarded() || !j.is_object()) {
      throw Error(ErrorKind::Io, "episode line " + std::to_string(lineno) + " is not valid JSON");
    }
    try {
      EpisodeFrame f;
      f.t = j.at("t").get<int>();
      f.m = j.at("m").get<int>();
      f.scene = scene_from_json(j.at("scene"));
      f.q = j.at("q").get<nn::Vec>();
      f.action = LowLevelAction{j.at("action").at(0).get<double>(),
                                j.at("action").at(1).get<double>(),
                                j.at("action").at(2).get<double>()};
      f.atoms = LogicalState(atoms_from_json(j.at("atoms")));
      f.feature = j.at("feature").get<nn::Vec>();
      frames.push_back(std::move(f));
    } catch (const nlohmann::json::exception& e) {
      throw Error(ErrorKind::Io, "episode line " + std::to_string(lineno) + ": " + e.what());
    }
  }
  return frames;
}

nn::Vec goal_feature(const std::vector<EpisodeFrame>& rollout, size_t subtask_index,
                     const AtomSet& subtask_goal) {
  for (const EpisodeFrame& f : rollout) {
    if (f.m < static_cast<int>(subtask_index)) continue;
    if (f.atoms.includes(subtask_goal)) return f.feature;
  }
  throw Error(ErrorKind::SubtaskUnreachable,
              "no frame reaches the goal of subtask " + std::to_string(subtask_index));
}

}  // namespace hwm::sim
