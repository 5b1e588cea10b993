#include "hwm/policy.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "hwm/error.hpp"
#include "hwm/rng.hpp"
#include "hwm/visual_wm.hpp"

namespace hwm::policy {

namespace {

constexpr double kTwoPi = 6.283185307179586;

nn::Vec time_embedding(double tau) {
  return {tau, std::sin(kTwoPi * tau), std::cos(kTwoPi * tau)};
}

nn::Vec understanding_input(const nn::Vec& obs, const GroundAction& action, const nn::Vec& q,
                            const PolicyConfig& config) {
  if (obs.size() != config.feature_dim || q.size() != 3) {
    throw Error(ErrorKind::DimensionMismatch,
                "understanding inputs: obs " + std::to_string(obs.size()) + ", q " +
                    std::to_string(q.size()));
  }
  nn::Vec in;
  in.reserve(config.feature_dim + config.hash_dim + 3);
  in.insert(in.end(), obs.begin(), obs.end());
  nn::Vec ha = vwm::encode_action(action, config.hash_dim);
  in.insert(in.end(), ha.begin(), ha.end());
  in.insert(in.end(), q.begin(), q.end());
  return in;
}

double sigmoid(double z) { return 1.0 / (1.0 + std::exp(-z)); }

// Forward intermediates for one sample, consumed by the end-to-end backward.
struct FuseTape {
  nn::Mlp::Tape u_tape, g_tape;
  nn::Vec u, g;
  nn::Vec ku, kg, vu, vg;
  double au = 0.0, ag = 0.0;
  nn::Vec fused;
};

nn::Vec fuse_forward(const PolicyModel& model, const nn::Vec& u, const nn::Vec& g,
                     FuseTape* tape) {
  double scale = 1.0 / std::sqrt(double(u.size()));
  nn::Vec ku = nn::matvec(model.w_key, u);
  nn::Vec kg = nn::matvec(model.w_key, g);
  nn::Vec vu = nn::matvec(model.w_value, u);
  nn::Vec vg = nn::matvec(model.w_value, g);
  double lu = nn::dot(model.query, ku) * scale;
  double lg = nn::dot(model.query, kg) * scale;
  double m = std::max(lu, lg);
  double eu = std::exp(lu - m);
  double eg = std::exp(lg - m);
  double au = eu / (eu + eg);
  double ag = eg / (eu + eg);
  nn::Vec fused(u.size());
  for (size_t i = 0; i < fused.size(); ++i) fused[i] = au * vu[i] + ag * vg[i];
  if (tape) {
    tape->u = u;
    tape->g = g;
    tape->ku = std::move(ku);
    tape->kg = std::move(kg);
    tape->vu = std::move(vu);
    tape->vg = std::move(vg);
    tape->au = au;
    tape->ag = ag;
    tape->fused = fused;
  }
  return fused;
}

// Propagates dL/dfused back through attention and both experts.
void fuse_backward(const PolicyModel& model, const FuseTape& tape, const nn::Vec& dfused,
                   PolicyModel& grads) {
  size_t c = dfused.size();
  double scale = 1.0 / std::sqrt(double(c));

  nn::Vec dvu(c), dvg(c);
  for (size_t i = 0; i < c; ++i) {
    dvu[i] = tape.au * dfused[i];
    dvg[i] = tape.ag * dfused[i];
  }
  double dau = nn::dot(dfused, tape.vu);
  double dag = nn::dot(dfused, tape.vg);
  double mixed = tape.au * dau + tape.ag * dag;
  double dlu = tape.au * (dau - mixed);
  double dlg = tape.ag * (dag - mixed);

  for (size_t i = 0; i < c; ++i) {
    grads.query[i] += scale * (dlu * tape.ku[i] + dlg * tape.kg[i]);
  }
  nn::Vec dku(c), dkg(c);
  for (size_t i = 0; i < c; ++i) {
    dku[i] = scale * dlu * model.query[i];
    dkg[i] = scale * dlg * model.query[i];
  }
  for (size_t r = 0; r < c; ++r) {
    for (size_t col = 0; col < c; ++col) {
      grads.w_key.at(r, col) += dku[r] * tape.u[col] + dkg[r] * tape.g[col];
      grads.w_value.at(r, col) += dvu[r] * tape.u[col] + dvg[r] * tape.g[col];
    }
  }
  nn::Vec du = nn::matvec_t(model.w_key, dku);
  nn::axpy(1.0, nn::matvec_t(model.w_value, dvu), du);
  nn::Vec dg = nn::matvec_t(model.w_key, dkg);
  nn::axpy(1.0, nn::matvec_t(model.w_value, dvg), dg);

  model.understanding.backward(tape.u_tape, du, grads.understanding);
  model.goal.backward(tape.g_tape, dg, grads.goal);
}

nn::Vec fused_with_tape(const PolicyModel& model, const PolicyConfig& config,
                        const nn::Vec& obs, const GroundAction& action, const nn::Vec& q,
                        const nn::Vec& f_pred, FuseTape& tape) {
  nn::Vec u = model.understanding.forward(understanding_input(obs, action, q, config),
                                          tape.u_tape);
  nn::Vec g = model.goal.forward(f_pred, tape.g_tape);
  return fuse_forward(model, u, g, &tape);
}

nn::Vec velocity_input(const nn::Vec& alpha, const nn::Vec& fused, double tau) {
  nn::Vec in;
  in.reserve(alpha.size() + fused.size() + 3);
  in.insert(in.end(), alpha.begin(), alpha.end());
  in.insert(in.end(), fused.begin(), fused.end());
  nn::Vec te = time_embedding(tau);
  in.insert(in.end(), te.begin(), te.end());
  return in;
}

// The flow runs in a normalized chunk space: dx and dy are scaled by
// 1/max_delta and grip to [-1, 1], so every channel spans a comparable
// range against the unit-variance transport noise.
nn::Vec flatten(const ActionChunk& chunk, const PolicyConfig& config) {
  nn::Vec out;
  out.reserve(chunk.actions.size() * 3);
  for (const sim::LowLevelAction& a : chunk.actions) {
    out.push_back(a.dx / config.max_delta);
    out.push_back(a.dy / config.max_delta);
    out.push_back(2.0 * a.grip - 1.0);
  }
  return out;
}

ActionChunk clamp_chunk(const nn::Vec& flat, const PolicyConfig& config) {
  ActionChunk chunk;
  for (size_t i = 0; i + 2 < flat.size(); i += 3) {
    sim::LowLevelAction a;
    a.dx = std::clamp(flat[i] * config.max_delta, -config.max_delta, config.max_delta);
    a.dy = std::clamp(flat[i + 1] * config.max_delta, -config.max_delta, config.max_delta);
    a.grip = std::clamp(0.5 * (flat[i + 2] + 1.0), 0.0, 1.0);
    chunk.actions.push_back(a);
  }
  return chunk;
}

}  // namespace

PolicyModel PolicyModel::init(const PolicyConfig& config) {
  Rng rng(mix_seed(config.rng_seed, fnv1a("policy-init")));
  size_t c = config.token_dim;
  size_t flat = config.chunk_len * 3;
  PolicyModel m;
  m.understanding = nn::Mlp::make(
      {config.feature_dim + config.hash_dim + 3, config.hidden, config.hidden, c}, rng);
  m.goal = nn::Mlp::make({config.feature_dim, config.hidden, c}, rng);
  double scale = 1.0 / std::sqrt(double(c));
  m.query = rng.normal_vec(c);
  for (double& v : m.query) v *= scale;
  m.w_key = nn::Mat::randn(c, c, rng, scale);
  m.w_value = nn::Mat::randn(c, c, rng, scale);
  m.velocity = nn::Mlp::make({flat + c + 3, config.hidden, config.hidden, flat}, rng);
  return m;
}

PolicyModel PolicyModel::zeros(const PolicyConfig& config) {
  return zeros_like(init(config));
}

PolicyModel PolicyModel::zeros_like(const PolicyModel& other) {
  PolicyModel m;
  m.understanding = nn::Mlp::zeros_like(other.understanding);
  m.goal = nn::Mlp::zeros_like(other.goal);
  m.query.assign(other.query.size(), 0.0);
  m.w_key = nn::Mat(other.w_key.rows, other.w_key.cols);
  m.w_value = nn::Mat(other.w_value.rows, other.w_value.cols);
  m.velocity = nn::Mlp::zeros_like(other.velocity);
  return m;
}

void collect_params(PolicyModel& m, std::vector<double*>& out) {
  nn::collect_params(m.understanding, out);
  nn::collect_params(m.goal, out);
  nn::collect_params(m.query, out);
  nn::collect_params(m.w_key, out);
  nn::collect_params(m.w_value, out);
  nn::collect_params(m.velocity, out);
}

nn::Vec understanding_token(const PolicyModel& model, const nn::Vec& obs,
                            const GroundAction& action, const nn::Vec& q,
                            const PolicyConfig& config) {
  return model.understanding.forward(understanding_input(obs, action, q, config));
}

nn::Vec goal_token(const PolicyModel& model, const nn::Vec& f_pred) {
  return model.goal.forward(f_pred);
}

nn::Vec fuse_guidance(const PolicyModel& model, const nn::Vec& u, const nn::Vec& g) {
  return fuse_forward(model, u, g, nullptr);
}

ActionChunk policy_step(const PolicyModel& model, const nn::Vec& obs, const nn::Vec& q,
                        const GroundAction& action, const nn::Vec& f_pred,
                        const PolicyConfig& config) {
  nn::Vec u = understanding_token(model, obs, action, q, config);
  nn::Vec g = goal_token(model, f_pred);
  nn::Vec fused = fuse_guidance(model, u, g);

  Rng noise(mix_seed(config.rng_seed, fnv1a("policy-noise")));
  nn::Vec alpha = noise.normal_vec(config.chunk_len * 3);
  int steps = config.flow_steps;
  for (int s = 0; s < steps; ++s) {
    double tau = double(s) / double(steps);
    nn::Vec v = model.velocity.forward(velocity_input(alpha, fused, tau));
    nn::axpy(1.0 / double(steps), v, alpha);
    if (!nn::all_finite(alpha)) {
      throw Error(ErrorKind::NumericFailure,
                  "non-finite chunk after flow step " + std::to_string(s));
    }
  }
  return clamp_chunk(alpha, config);
}

ActionChunk scripted_chunk(const sim::Scene& scene, const GroundAction& action,
                           size_t chunk_len, const sim::SimParams& params) {
  ActionChunk chunk;
  sim::Scene rollout = scene;
  for (size_t i = 0; i < chunk_len; ++i) {
    sim::LowLevelAction a = sim::scripted_controller(rollout, action, params);
    chunk.actions.push_back(a);
    rollout = sim::step(rollout, a, params);
  }
  return chunk;
}

PolicyTrainResult train_policy(const std::vector<PolicyTrainRecord>& dataset,
                               const PolicyConfig& config) {
  if (dataset.empty()) {
    throw Error(ErrorKind::EmptyInput, "policy training needs a non-empty dataset");
  }
  size_t flat_dim = config.chunk_len * 3;
  for (const PolicyTrainRecord& r : dataset) {
    if (r.chunk.actions.size() != config.chunk_len) {
      throw Error(ErrorKind::DimensionMismatch,
                  "expert chunk length " + std::to_string(r.chunk.actions.size()) +
                      ", expected " + std::to_string(config.chunk_len));
    }
  }

  PolicyTrainResult result;
  result.model = PolicyModel::init(config);
  PolicyModel& net = result.model;

  std::vector<double*> params;
  collect_params(net, params);
  nn::Sgd opt(config.lr, config.momentum);
  Rng rng(mix_seed(config.rng_seed, fnv1a("policy-train")));

  std::vector<nn::Vec> targets;
  targets.reserve(dataset.size());
  for (const PolicyTrainRecord& r : dataset) targets.push_back(flatten(r.chunk, config));

  size_t batch = std::min<size_t>(config.batch_size, dataset.size());
  for (int step = 0; step < config.train_steps; ++step) {
    std::vector<size_t> idx(batch);
    for (size_t i = 0; i < batch; ++i) idx[i] = rng.below(dataset.size());

    PolicyModel grads = PolicyModel::zeros_like(net);
    double loss = 0.0;
    for (size_t i = 0; i < batch; ++i) {
      const PolicyTrainRecord& r = dataset[idx[i]];
      double tau = rng.uniform();
      nn::Vec eps = rng.normal_vec(flat_dim);
      nn::Vec alpha_tau(flat_dim);
      for (size_t j = 0; j < flat_dim; ++j) {
        alpha_tau[j] = (1.0 - tau) * eps[j] + tau * targets[idx[i]][j];
      }

      FuseTape fuse;
      nn::Vec fused = fused_with_tape(net, config, r.obs, r.action, r.q, r.f_pred, fuse);
      nn::Mlp::Tape vel_tape;
      nn::Vec v = net.velocity.forward(velocity_input(alpha_tau, fused, tau), vel_tape);

      nn::Vec dv(flat_dim);
      for (size_t j = 0; j < flat_dim; ++j) {
        double err = v[j] - (targets[idx[i]][j] - eps[j]);
        loss += err * err / (double(batch) * double(flat_dim));
        dv[j] = 2.0 * err / (double(batch) * double(flat_dim));
      }
      nn::Vec din = net.velocity.backward(vel_tape, dv, grads.velocity);
      nn::Vec dfused(din.begin() + flat_dim, din.begin() + flat_dim + config.token_dim);
      fuse_backward(net, fuse, dfused, grads);
    }

    if (!std::isfinite(loss)) {
      throw Error(ErrorKind::NumericFailure,
                  "training loss diverged at step " + std::to_string(step));
    }
    result.loss_curve.push_back(loss);

    std::vector<double*> gptrs;
    collect_params(grads, gptrs);
    opt.step(params, gptrs);
  }
  return result;
}

double policy_gradient_check(const PolicyModel& model,
                             const std::vector<PolicyTrainRecord>& batch, double eps,
                             const PolicyConfig& config, double fault_scale) {
  if (batch.empty()) {
    throw Error(ErrorKind::EmptyInput, "gradient check needs a non-empty batch");
  }
  size_t flat_dim = config.chunk_len * 3;

  Rng rng(mix_seed(config.rng_seed, fnv1a("policy-check")));
  std::vector<double> taus;
  std::vector<nn::Vec> alphas, targets;
  for (const PolicyTrainRecord& r : batch) {
    nn::Vec goal = flatten(r.chunk, config);
    double tau = rng.uniform();
    nn::Vec noise = rng.normal_vec(flat_dim);
    nn::Vec alpha(flat_dim), target(flat_dim);
    for (size_t j = 0; j < flat_dim; ++j) {
      alpha[j] = (1.0 - tau) * noise[j] + tau * goal[j];
      target[j] = goal[j] - noise[j];
    }
    taus.push_back(tau);
    alphas.push_back(std::move(alpha));
    targets.push_back(std::move(target));
  }

  auto loss_of = [&](const PolicyModel& net) {
    double loss = 0.0;
    for (size_t i = 0; i < batch.size(); ++i) {
      const PolicyTrainRecord& r = batch[i];
      nn::Vec u = understanding_token(net, r.obs, r.action, r.q, config);
      nn::Vec g = goal_token(net, r.f_pred);
      nn::Vec fused = fuse_guidance(net, u, g);
      nn::Vec v = net.velocity.forward(velocity_input(alphas[i], fused, taus[i]));
      for (size_t j = 0; j < flat_dim; ++j) {
        double err = v[j] - targets[i][j];
        loss += err * err / (double(batch.size()) * double(flat_dim));
      }
    }
    return loss;
  };

  PolicyModel net = model;
  PolicyModel analytic = PolicyModel::zeros_like(net);
  for (size_t i = 0; i < batch.size(); ++i) {
    const PolicyTrainRecord& r = batch[i];
    FuseTape fuse;
    nn::Vec fused = fused_with_tape(net, config, r.obs, r.action, r.q, r.f_pred, fuse);
    nn::Mlp::Tape vel_tape;
    nn::Vec v = net.velocity.forward(velocity_input(alphas[i], fused, taus[i]), vel_tape);
    nn::Vec dv(flat_dim);
    for (size_t j = 0; j < flat_dim; ++j) {
      dv[j] = 2.0 * (v[j] - targets[i][j]) / (double(batch.size()) * double(flat_dim));
    }
    nn::Vec din = net.velocity.backward(vel_tape, dv, analytic.velocity);
    nn::Vec dfused(din.begin() + flat_dim, din.begin() + flat_dim + config.token_dim);
    fuse_backward(net, fuse, dfused, analytic);
  }

  std::vector<double*> params, grads;
  collect_params(net, params);
  collect_params(analytic, grads);

  // The velocity network occupies the tail of the flat parameter list.
  std::vector<double*> vel_probe;
  nn::collect_params(net.velocity, vel_probe);
  size_t vel_count = vel_probe.size();
  size_t head_count = params.size() - vel_count;

  std::set<size_t> chosen;
  Rng pick(mix_seed(config.rng_seed, fnv1a("policy-check-sample")));
  size_t want_vel = std::min<size_t>(vel_count, 64);
  while (chosen.size() < want_vel) chosen.insert(head_count + pick.below(vel_count));
  size_t want_head = std::min<size_t>(head_count, 24);
  size_t have = chosen.size();
  while (chosen.size() < have + want_head) chosen.insert(pick.below(head_count));

  double max_rel = 0.0;
  for (size_t i : chosen) {
    double saved = *params[i];
    *params[i] = saved + eps;
    double up = loss_of(net);
    *params[i] = saved - eps;
    double down = loss_of(net);
    *params[i] = saved;
    double fd = (up - down) / (2.0 * eps);
    double an = *grads[i] * fault_scale;
    double rel = std::abs(an - fd) / std::max(std::abs(fd), 1e-6);
    max_rel = std::max(max_rel, rel);
  }
  return max_rel;
}

double completion_probability(const CompletionMonitor& monitor, const PolicyModel& model,
                              const nn::Vec& obs, const GroundAction& action,
                              const nn::Vec& f_pred, const nn::Vec& q,
                              const PolicyConfig& config) {
  if (!monitor.trained) {
    double dist = nn::norm(nn::sub(obs, f_pred));
    return sigmoid((config.tau_dist - dist) / config.dist_scale);
  }
  nn::Vec u = understanding_token(model, obs, action, q, config);
  nn::Vec g = goal_token(model, f_pred);
  nn::Vec x = u;
  x.insert(x.end(), g.begin(), g.end());
  if (x.size() != monitor.weights.size()) {
    throw Error(ErrorKind::DimensionMismatch,
                "monitor feature width " + std::to_string(x.size()) + ", weights " +
                    std::to_string(monitor.weights.size()));
  }
  return sigmoid(nn::dot(monitor.weights, x) + monitor.bias);
}

MonitorResult train_completion_monitor(const PolicyModel& model,
                                       const std::vector<MonitorFrame>& frames,
                                       const PolicyConfig& config) {
  if (frames.empty()) {
    throw Error(ErrorKind::EmptyInput, "monitor training needs labeled frames");
  }
  bool first = frames.front().label;
  bool mixed = false;
  for (const MonitorFrame& f : frames) mixed = mixed || (f.label != first);
  if (!mixed) {
    throw Error(ErrorKind::DegenerateLabels, "all frames share one label");
  }

  std::vector<nn::Vec> features;
  features.reserve(frames.size());
  for (const MonitorFrame& f : frames) {
    nn::Vec u = understanding_token(model, f.obs, f.action, f.q, config);
    nn::Vec g = goal_token(model, f.f_pred);
    u.insert(u.end(), g.begin(), g.end());
    features.push_back(std::move(u));
  }

  std::vector<size_t> order(frames.size());
  for (size_t i = 0; i < order.size(); ++i) order[i] = i;
  Rng split_rng(mix_seed(config.rng_seed, fnv1a("monitor-split")));
  split_rng.shuffle(order);
  size_t n_hold = std::min(frames.size() - 1,
                           size_t(std::llround(config.holdout_fraction * frames.size())));
  std::vector<size_t> hold(order.begin(), order.begin() + n_hold);
  std::vector<size_t> train(order.begin() + n_hold, order.end());

  size_t dim = features.front().size();
  CompletionMonitor monitor;
  monitor.weights.assign(dim, 0.0);
  monitor.bias = 0.0;
  monitor.threshold = config.threshold;
  monitor.trained = true;

  for (int step = 0; step < config.monitor_steps; ++step) {
    nn::Vec gw(dim, 0.0);
    double gb = 0.0;
    for (size_t i : train) {
      double p = sigmoid(nn::dot(monitor.weights, features[i]) + monitor.bias);
      double err = p - (frames[i].label ? 1.0 : 0.0);
      nn::axpy(err / double(train.size()), features[i], gw);
      gb += err / double(train.size());
    }
    nn::axpy(-config.monitor_lr, gw, monitor.weights);
    monitor.bias -= config.monitor_lr * gb;
  }

  auto accuracy = [&](const std::vector<size_t>& split) {
    if (split.empty()) return 1.0;
    size_t hits = 0;
    for (size_t i : split) {
      double p = sigmoid(nn::dot(monitor.weights, features[i]) + monitor.bias);
      bool decided = p >= monitor.threshold;
      if (decided == frames[i].label) ++hits;
    }
    return double(hits) / double(split.size());
  };

  MonitorResult result;
  result.train_accuracy = accuracy(train);
  result.held_out_accuracy = accuracy(hold);
  result.monitor = std::move(monitor);
  return result;
}

void save_policy(const PolicyModel& model, Checkpoint& ckpt) {
  ckpt.put("policy", "understanding", model.understanding);
  ckpt.put("policy", "goal", model.goal);
  ckpt.put("policy", "query", model.query);
  ckpt.put("policy", "key", model.w_key);
  ckpt.put("policy", "value", model.w_value);
  ckpt.put("policy", "velocity", model.velocity);
}

PolicyModel load_policy(const Checkpoint& ckpt, const PolicyConfig& config) {
  size_t c = config.token_dim;
  size_t flat = config.chunk_len * 3;
  PolicyModel m;
  m.understanding = ckpt.get_mlp(
      "policy", "understanding",
      {config.feature_dim + config.hash_dim + 3, config.hidden, config.hidden, c});
  m.goal = ckpt.get_mlp("policy", "goal", {config.feature_dim, config.hidden, c});
  m.query = ckpt.get_vec("policy", "query", c);
  m.w_key = ckpt.get_mat("policy", "key", c, c);
  m.w_value = ckpt.get_mat("policy", "value", c, c);
  m.velocity = ckpt.get_mlp("policy", "velocity",
                            {flat + c + 3, config.hidden, config.hidden, flat});
  return m;
}

void save_monitor(const CompletionMonitor& monitor, Checkpoint& ckpt) {
  ckpt.put("completion-monitor", "weights", monitor.weights);
  ckpt.put("completion-monitor", "bias", nn::Vec{monitor.bias});
  ckpt.put("completion-monitor", "threshold", nn::Vec{monitor.threshold});
}

CompletionMonitor load_monitor(const Checkpoint& ckpt, const PolicyConfig& config) {
  CompletionMonitor m;
  m.weights = ckpt.get_vec("completion-monitor", "weights", 2 * config.token_dim);
  m.bias = ckpt.get_vec("completion-monitor", "bias", 1)[0];
  m.threshold = ckpt.get_vec("completion-monitor", "threshold", 1)[0];
  m.trained = true;
  return m;
}

}  // namespace hwm::policy
