#include "hwm/visual_wm.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <set>

#include "hwm/error.hpp"
#include "hwm/rng.hpp"

namespace hwm::vwm {

namespace {

constexpr double kTwoPi = 6.283185307179586;

// Frozen hashing and mixing seeds. These are part of the representation, not
// tunables: a checkpoint is only meaningful under the same condition map.
constexpr uint64_t kAtomHashSeed = 0x9d2c5680cafef00dULL;
constexpr uint64_t kCondMixSeed = 0x51c0ed17b00b5eedULL;

void hash_token(const std::string& token, nn::Vec& out) {
  uint64_t h = fnv1a(token, kAtomHashSeed);
  size_t idx = h % out.size();
  double sign = ((h >> 33) & 1) ? 1.0 : -1.0;
  out[idx] += sign;
}

nn::Vec hash_state(const LogicalState& state, size_t width) {
  nn::Vec out(width, 0.0);
  for (const GroundAtom& a : state.atoms()) hash_token(a.str(), out);
  return out;
}

struct CondMix {
  nn::Mat w;
  nn::Vec b;
};

const CondMix& cond_mix(const VwmConfig& config) {
  static std::map<std::tuple<size_t, size_t, size_t>, CondMix> cache;
  auto key = std::make_tuple(config.feature_dim, config.hash_dim, config.cond_dim);
  auto it = cache.find(key);
  if (it == cache.end()) {
    size_t in = config.feature_dim + 2 * config.hash_dim + 3;
    Rng wrng(mix_seed(kCondMixSeed, fnv1a("cond-weights")));
    Rng brng(mix_seed(kCondMixSeed, fnv1a("cond-bias")));
    CondMix mix;
    mix.w = nn::Mat::randn(config.cond_dim, in, wrng, 1.0 / std::sqrt(double(in)));
    mix.b.resize(config.cond_dim);
    for (double& v : mix.b) v = brng.normal() * 0.1;
    it = cache.emplace(key, std::move(mix)).first;
  }
  return it->second;
}

nn::Vec time_embedding(double tau) {
  return {tau, std::sin(kTwoPi * tau), std::cos(kTwoPi * tau)};
}

nn::Vec velocity_input(const nn::Vec& f, const nn::Vec& cond, double tau) {
  nn::Vec in;
  in.reserve(f.size() + cond.size() + 3);
  in.insert(in.end(), f.begin(), f.end());
  in.insert(in.end(), cond.begin(), cond.end());
  nn::Vec te = time_embedding(tau);
  in.insert(in.end(), te.begin(), te.end());
  return in;
}

std::vector<nn::Vec> make_directions(int projections, size_t dim, uint64_t seed) {
  Rng rng(seed);
  std::vector<nn::Vec> dirs;
  dirs.reserve(projections);
  for (int l = 0; l < projections; ++l) {
    nn::Vec u = rng.normal_vec(dim);
    double n = nn::norm(u);
    if (n < 1e-12) {
      u.assign(dim, 0.0);
      u[0] = 1.0;
      n = 1.0;
    }
    for (double& v : u) v /= n;
    dirs.push_back(std::move(u));
  }
  return dirs;
}

}  // namespace

nn::Vec encode_action(const GroundAction& action, size_t width) {
  nn::Vec out(width, 0.0);
  if (!action.name.empty()) hash_token("act:" + action.name, out);
  for (size_t i = 0; i < action.binding.size(); ++i) {
    hash_token("arg" + std::to_string(i) + ":" + action.binding[i], out);
  }
  return out;
}

DenoiserModel DenoiserModel::init(const VwmConfig& config) {
  Rng rng(mix_seed(config.rng_seed, fnv1a("vwm-init")));
  DenoiserModel m;
  m.velocity = nn::Mlp::make(
      {config.feature_dim + config.cond_dim + 3, config.hidden, config.feature_dim}, rng);
  return m;
}

DenoiserModel DenoiserModel::zeros(const VwmConfig& config) {
  DenoiserModel m = init(config);
  m.velocity = nn::Mlp::zeros_like(m.velocity);
  return m;
}

nn::Vec encode_condition(const nn::Vec& obs, const GroundAction& action,
                         const LogicalState& next_state, const nn::Vec& q,
                         const VwmConfig& config) {
  if (obs.size() != config.feature_dim || q.size() != 3) {
    throw Error(ErrorKind::DimensionMismatch,
                "condition inputs: obs " + std::to_string(obs.size()) + ", q " +
                    std::to_string(q.size()));
  }
  nn::Vec in;
  in.reserve(config.feature_dim + 2 * config.hash_dim + 3);
  in.insert(in.end(), obs.begin(), obs.end());
  nn::Vec ha = encode_action(action, config.hash_dim);
  in.insert(in.end(), ha.begin(), ha.end());
  nn::Vec hs = hash_state(next_state, config.hash_dim);
  in.insert(in.end(), hs.begin(), hs.end());
  in.insert(in.end(), q.begin(), q.end());

  const CondMix& mix = cond_mix(config);
  nn::Vec out = nn::matvec(mix.w, in);
  for (size_t i = 0; i < out.size(); ++i) out[i] += mix.b[i];
  return out;
}

double sliced_wasserstein(const std::vector<nn::Vec>& x, const std::vector<nn::Vec>& y,
                          int projections, uint64_t seed) {
  if (x.empty() || y.empty()) {
    throw Error(ErrorKind::EmptySet, "sliced wasserstein needs non-empty sample sets");
  }
  if (x.size() != y.size()) {
    throw Error(ErrorKind::DimensionMismatch,
                "sample counts differ: " + std::to_string(x.size()) + " vs " +
                    std::to_string(y.size()));
  }
  size_t dim = x[0].size();
  for (const auto& v : x) {
    if (v.size() != dim) throw Error(ErrorKind::DimensionMismatch, "ragged sample set");
  }
  for (const auto& v : y) {
    if (v.size() != dim) throw Error(ErrorKind::DimensionMismatch, "ragged sample set");
  }
  if (projections < 1) {
    throw Error(ErrorKind::DimensionMismatch, "projection count must be at least 1");
  }

  std::vector<nn::Vec> dirs = make_directions(projections, dim, seed);
  size_t n = x.size();
  std::vector<double> px(n), py(n);
  double total = 0.0;
  for (const nn::Vec& u : dirs) {
    for (size_t i = 0; i < n; ++i) {
      px[i] = nn::dot(x[i], u);
      py[i] = nn::dot(y[i], u);
    }
    std::sort(px.begin(), px.end());
    std::sort(py.begin(), py.end());
    double acc = 0.0;
    for (size_t i = 0; i < n; ++i) acc += (px[i] - py[i]) * (px[i] - py[i]);
    total += acc / double(n);
  }
  return total / double(projections);
}

nn::Vec denoise_step(const DenoiserModel& model, const nn::Vec& f_noisy, const nn::Vec& cond,
                     int k, int n_steps) {
  if (n_steps < 1 || k < 0 || k >= n_steps) {
    throw Error(ErrorKind::DimensionMismatch,
                "denoise step " + std::to_string(k) + " of " + std::to_string(n_steps));
  }
  double tau = double(k) / double(n_steps);
  nn::Vec v = model.velocity.forward(velocity_input(f_noisy, cond, tau));
  nn::Vec out = f_noisy;
  nn::axpy(1.0 / double(n_steps), v, out);
  if (!nn::all_finite(out)) {
    throw Error(ErrorKind::NumericFailure,
                "non-finite feature after denoise step " + std::to_string(k));
  }
  return out;
}

nn::Vec predict_subgoal(const DenoiserModel& model, const nn::Vec& obs,
                        const GroundAction& action, const LogicalState& next_state,
                        const nn::Vec& q, const VwmConfig& config) {
  nn::Vec cond = encode_condition(obs, action, next_state, q, config);
  Rng noise(mix_seed(config.rng_seed, fnv1a("vwm-noise")));
  nn::Vec f = noise.normal_vec(config.feature_dim);
  for (int k = 0; k < config.denoise_steps; ++k) {
    f = denoise_step(model, f, cond, k, config.denoise_steps);
  }
  return f;
}

namespace {

struct SwGrad {
  double value = 0.0;
  std::vector<nn::Vec> dx;  // gradient with respect to each x sample
};

// Batch-mode SW and its gradient in the first argument. Matches
// sliced_wasserstein exactly for the same seed.
SwGrad sw_with_grad(const std::vector<nn::Vec>& x, const std::vector<nn::Vec>& y,
                    int projections, uint64_t seed) {
  size_t n = x.size();
  size_t dim = x[0].size();
  std::vector<nn::Vec> dirs = make_directions(projections, dim, seed);
  SwGrad out;
  out.dx.assign(n, nn::Vec(dim, 0.0));
  std::vector<std::pair<double, size_t>> px(n);
  std::vector<double> py(n);
  for (const nn::Vec& u : dirs) {
    for (size_t i = 0; i < n; ++i) {
      px[i] = {nn::dot(x[i], u), i};
      py[i] = nn::dot(y[i], u);
    }
    std::sort(px.begin(), px.end());
    std::sort(py.begin(), py.end());
    for (size_t r = 0; r < n; ++r) {
      double diff = px[r].first - py[r];
      out.value += diff * diff / double(n);
      nn::axpy(2.0 * diff / (double(n) * double(projections)), u, out.dx[px[r].second]);
    }
  }
  out.value /= double(projections);
  return out;
}

// Per-sample mode: each record is its own one-element distribution.
SwGrad sw_per_sample_with_grad(const std::vector<nn::Vec>& x, const std::vector<nn::Vec>& y,
                               int projections, uint64_t seed) {
  size_t n = x.size();
  size_t dim = x[0].size();
  std::vector<nn::Vec> dirs = make_directions(projections, dim, seed);
  SwGrad out;
  out.dx.assign(n, nn::Vec(dim, 0.0));
  for (const nn::Vec& u : dirs) {
    for (size_t i = 0; i < n; ++i) {
      double diff = nn::dot(x[i], u) - nn::dot(y[i], u);
      out.value += diff * diff / double(n);
      nn::axpy(2.0 * diff / (double(n) * double(projections)), u, out.dx[i]);
    }
  }
  out.value /= double(projections);
  return out;
}

struct GenTape {
  std::vector<nn::Mlp::Tape> tapes;  // one per denoise step
  std::vector<nn::Vec> features;     // f_0 .. f_N
};

nn::Vec generate_with_tape(const nn::Mlp& net, const nn::Vec& start, const nn::Vec& cond,
                           int n_steps, GenTape& tape) {
  tape.tapes.assign(n_steps, {});
  tape.features.clear();
  tape.features.push_back(start);
  nn::Vec f = start;
  for (int k = 0; k < n_steps; ++k) {
    double tau = double(k) / double(n_steps);
    nn::Vec v = net.forward(velocity_input(f, cond, tau), tape.tapes[k]);
    nn::axpy(1.0 / double(n_steps), v, f);
    tape.features.push_back(f);
  }
  return f;
}

// Backpropagates dL/df_N through the Euler chain into the network gradients.
void backprop_generation(const nn::Mlp& net, const GenTape& tape, const nn::Vec& dfinal,
                         int n_steps, size_t feature_dim, nn::Mlp& grads) {
  nn::Vec df = dfinal;
  for (int k = n_steps - 1; k >= 0; --k) {
    nn::Vec dv(feature_dim);
    for (size_t i = 0; i < feature_dim; ++i) dv[i] = df[i] / double(n_steps);
    nn::Vec din = net.backward(tape.tapes[k], dv, grads);
    for (size_t i = 0; i < feature_dim; ++i) df[i] += din[i];
  }
}

}  // namespace

TrainResult train_visual_wm(const std::vector<TrainRecord>& dataset, const VwmConfig& config) {
  if (dataset.empty()) {
    throw Error(ErrorKind::EmptyInput, "visual world model training needs a non-empty dataset");
  }
  size_t d = config.feature_dim;
  for (const TrainRecord& r : dataset) {
    if (r.obs.size() != d || r.f_goal.size() != d || r.q.size() != 3) {
      throw Error(ErrorKind::DimensionMismatch, "train record does not match feature_dim");
    }
  }

  TrainResult result;
  result.model = DenoiserModel::init(config);
  nn::Mlp& net = result.model.velocity;

  std::vector<double*> params;
  nn::collect_params(net, params);
  nn::Sgd opt(config.lr, config.momentum);
  Rng rng(mix_seed(config.rng_seed, fnv1a("vwm-train")));

  // Condition embeddings are frozen; compute each record's once.
  std::vector<nn::Vec> conds;
  conds.reserve(dataset.size());
  for (const TrainRecord& r : dataset) {
    conds.push_back(encode_condition(r.obs, r.action, r.next_state, r.q, config));
  }

  size_t batch = std::min<size_t>(config.batch_size, dataset.size());
  for (int step = 0; step < config.train_steps; ++step) {
    std::vector<size_t> idx(batch);
    for (size_t i = 0; i < batch; ++i) idx[i] = rng.below(dataset.size());

    nn::Mlp grads = nn::Mlp::zeros_like(net);
    double vel_loss = 0.0;
    for (size_t i = 0; i < batch; ++i) {
      const TrainRecord& r = dataset[idx[i]];
      double tau = rng.uniform();
      nn::Vec noise = rng.normal_vec(d);
      nn::Vec f_tau(d);
      for (size_t j = 0; j < d; ++j) f_tau[j] = (1.0 - tau) * noise[j] + tau * r.f_goal[j];
      nn::Mlp::Tape tape;
      nn::Vec v = net.forward(velocity_input(f_tau, conds[idx[i]], tau), tape);
      nn::Vec dout(d);
      double scale = (1.0 - config.lambda) * 2.0 / (double(batch) * double(d));
      for (size_t j = 0; j < d; ++j) {
        double err = v[j] - (r.f_goal[j] - noise[j]);
        vel_loss += err * err / (double(batch) * double(d));
        dout[j] = scale * err;
      }
      net.backward(tape, dout, grads);
    }

    double sw_loss = 0.0;
    if (config.lambda > 0.0) {
      std::vector<nn::Vec> preds(batch), targets(batch);
      std::vector<GenTape> tapes(batch);
      for (size_t i = 0; i < batch; ++i) {
        nn::Vec start = rng.normal_vec(d);
        preds[i] = generate_with_tape(net, start, conds[idx[i]], config.denoise_steps, tapes[i]);
        targets[i] = dataset[idx[i]].f_goal;
      }
      uint64_t dir_seed = rng.bits();
      SwGrad sw = config.per_sample_sw
                      ? sw_per_sample_with_grad(preds, targets, config.sw_projections, dir_seed)
                      : sw_with_grad(preds, targets, config.sw_projections, dir_seed);
      sw_loss = sw.value;
      for (size_t i = 0; i < batch; ++i) {
        for (double& g : sw.dx[i]) g *= config.lambda;
        backprop_generation(net, tapes[i], sw.dx[i], config.denoise_steps, d, grads);
      }
    }

    double total = (1.0 - config.lambda) * vel_loss + config.lambda * sw_loss;
    if (!std::isfinite(total)) {
      throw Error(ErrorKind::NumericFailure,
                  "training loss diverged at step " + std::to_string(step));
    }
    result.loss_curve.push_back(total);

    std::vector<double*> gptrs;
    nn::collect_params(grads, gptrs);
    opt.step(params, gptrs);
  }
  return result;
}

double gradient_check(const DenoiserModel& model, const std::vector<TrainRecord>& batch,
                      double eps, const VwmConfig& config, double fault_scale) {
  if (batch.empty()) {
    throw Error(ErrorKind::EmptyInput, "gradient check needs a non-empty batch");
  }
  size_t d = config.feature_dim;

  // Fixed interpolation draws so the loss is a deterministic function of the
  // parameters alone.
  Rng rng(mix_seed(config.rng_seed, fnv1a("vwm-check")));
  std::vector<nn::Vec> conds, f_taus, targets;
  std::vector<double> taus;
  for (const TrainRecord& r : batch) {
    conds.push_back(encode_condition(r.obs, r.action, r.next_state, r.q, config));
    double tau = rng.uniform();
    nn::Vec noise = rng.normal_vec(d);
    nn::Vec f_tau(d);
    nn::Vec target(d);
    for (size_t j = 0; j < d; ++j) {
      f_tau[j] = (1.0 - tau) * noise[j] + tau * r.f_goal[j];
      target[j] = r.f_goal[j] - noise[j];
    }
    taus.push_back(tau);
    f_taus.push_back(std::move(f_tau));
    targets.push_back(std::move(target));
  }

  auto loss_of = [&](const nn::Mlp& net) {
    double loss = 0.0;
    for (size_t i = 0; i < batch.size(); ++i) {
      nn::Vec v = net.forward(velocity_input(f_taus[i], conds[i], taus[i]));
      for (size_t j = 0; j < d; ++j) {
        double err = v[j] - targets[i][j];
        loss += err * err / (double(batch.size()) * double(d));
      }
    }
    return loss;
  };

  nn::Mlp net = model.velocity;
  nn::Mlp analytic = nn::Mlp::zeros_like(net);
  for (size_t i = 0; i < batch.size(); ++i) {
    nn::Mlp::Tape tape;
    nn::Vec v = net.forward(velocity_input(f_taus[i], conds[i], taus[i]), tape);
    nn::Vec dout(d);
    for (size_t j = 0; j < d; ++j) {
      dout[j] = 2.0 * (v[j] - targets[i][j]) / (double(batch.size()) * double(d));
    }
    net.backward(tape, dout, analytic);
  }

  std::vector<double*> params, grads;
  nn::collect_params(net, params);
  nn::collect_params(analytic, grads);

  size_t want = std::min<size_t>(params.size(), 64);
  Rng pick(mix_seed(config.rng_seed, fnv1a("vwm-check-sample")));
  std::set<size_t> chosen;
  while (chosen.size() < want) chosen.insert(pick.below(params.size()));

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

void save_denoiser(const DenoiserModel& model, Checkpoint& ckpt) {
  ckpt.put("visual-wm", "velocity", model.velocity);
}

DenoiserModel load_denoiser(const Checkpoint& ckpt, const VwmConfig& config) {
  DenoiserModel m;
  m.velocity = ckpt.get_mlp(
      "visual-wm", "velocity",
      {config.feature_dim + config.cond_dim + 3, config.hidden, config.feature_dim});
  return m;
}

}  // namespace hwm::vwm
