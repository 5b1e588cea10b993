#pragma once

#include <cstdint>
#include <vector>

#include "hwm/checkpoint.hpp"
#include "hwm/nn.hpp"
#include "hwm/symbolic.hpp"

namespace hwm::vwm {

struct VwmConfig {
  size_t feature_dim = 32;  // d, matches the frozen observation encoder
  size_t cond_dim = 64;     // c
  size_t hidden = 128;      // h
  size_t hash_dim = 64;     // buckets for atom/action feature hashing
  int denoise_steps = 8;    // N
  int train_steps = 2000;
  int batch_size = 16;
  double lr = 0.05;
  double momentum = 0.9;
  int sw_projections = 64;  // L
  double lambda = 0.1;      // loss mix; 0 = pure velocity regression
  bool per_sample_sw = false;
  uint64_t rng_seed = 0;
};

// Small feed-forward velocity network for the rectified-flow denoiser:
// input [noisy feature, condition, time embedding], output a velocity.
struct DenoiserModel {
  nn::Mlp velocity;

  static DenoiserModel init(const VwmConfig& config);
  static DenoiserModel zeros(const VwmConfig& config);
};

// Signed-bucket feature hash of an action's name and arguments. A
// default-constructed action hashes to the zero vector.
nn::Vec encode_action(const GroundAction& action, size_t width);

// Deterministic condition embedding: ground atoms of the successor state and
// the action's tokens are feature-hashed into signed buckets, concatenated
// with the observation feature and joint config, then passed through one
// frozen linear mix to cond_dim. A default-constructed action hashes to zero.
nn::Vec encode_condition(const nn::Vec& obs, const GroundAction& action,
                         const LogicalState& next_state, const nn::Vec& q,
                         const VwmConfig& config = {});

// SW₂² estimate over `projections` seeded unit directions: project both sets
// to 1-D, sort, mean squared difference of order statistics, averaged over
// directions. Throws Error(EmptySet) / Error(DimensionMismatch).
double sliced_wasserstein(const std::vector<nn::Vec>& x, const std::vector<nn::Vec>& y,
                          int projections, uint64_t seed);

// One Euler update f + (1/N)·v(f, cond, k/N). Throws Error(NumericFailure)
// on a non-finite result.
nn::Vec denoise_step(const DenoiserModel& model, const nn::Vec& f_noisy, const nn::Vec& cond,
                     int k, int n_steps);

// Full generation: seeded standard-normal start, N denoise steps under the
// condition embedding of (obs, action, next_state, q). Pure function of
// (model, inputs, config.rng_seed); callers cache the result per subtask.
nn::Vec predict_subgoal(const DenoiserModel& model, const nn::Vec& obs,
                        const GroundAction& action, const LogicalState& next_state,
                        const nn::Vec& q, const VwmConfig& config = {});

struct TrainRecord {
  nn::Vec obs;
  GroundAction action;
  LogicalState next_state;
  nn::Vec q;
  nn::Vec f_goal;  // frozen-encoder feature of the true completion frame
};

struct TrainResult {
  DenoiserModel model;
  std::vector<double> loss_curve;  // one total-loss entry per training step
};

// Rectified-flow training: regress v(f_tau, cond, tau) toward f_goal - noise,
// plus lambda * sliced_wasserstein(generated f_pred batch, f_goal batch)
// backpropagated through all denoise steps. Throws Error(EmptyInput) on an
// empty dataset and Error(NumericFailure) naming the step that diverged.
TrainResult train_visual_wm(const std::vector<TrainRecord>& dataset, const VwmConfig& config);

// Max relative error between analytic gradients of the lambda = 0 loss and
// central finite differences on a seeded sample of at least 50 parameters.
// `fault_scale` multiplies the analytic gradients and exists so tests can
// prove the check catches wrong gradients.
double gradient_check(const DenoiserModel& model, const std::vector<TrainRecord>& batch,
                      double eps, const VwmConfig& config = {}, double fault_scale = 1.0);

void save_denoiser(const DenoiserModel& model, Checkpoint& ckpt);
DenoiserModel load_denoiser(const Checkpoint& ckpt, const VwmConfig& config = {});

}  // namespace hwm::vwm
