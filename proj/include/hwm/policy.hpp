#pragma once

#include <cstdint>
#include <vector>

#include "hwm/checkpoint.hpp"
#include "hwm/env_sim.hpp"
#include "hwm/nn.hpp"
#include "hwm/symbolic.hpp"

namespace hwm::policy {

struct PolicyConfig {
  size_t feature_dim = 32;  // d, frozen-encoder observation width
  size_t token_dim = 64;    // c, expert token width
  size_t hidden = 128;
  size_t hash_dim = 64;     // action feature-hash width
  size_t chunk_len = 8;     // k low-level actions per chunk
  int flow_steps = 10;      // S Euler integration steps
  int train_steps = 2000;
  int batch_size = 16;
  double lr = 0.05;
  double momentum = 0.9;
  double max_delta = 0.05;  // |dx|, |dy| bound; grip is clamped to [0,1]
  double tau_dist = 1.0;    // untrained completion fallback: radius
  double dist_scale = 0.25; // untrained completion fallback: sigmoid scale
  double threshold = 0.5;   // completion decision threshold
  int monitor_steps = 800;
  double monitor_lr = 0.5;
  double holdout_fraction = 0.2;
  uint64_t rng_seed = 0;
};

// Exactly chunk_len actions, each within bounds after policy_step clamping.
struct ActionChunk {
  std::vector<sim::LowLevelAction> actions;
};

// Three experts plus one attention block. The understanding and goal experts
// never read action-expert state; only fuse_guidance consumes their tokens.
struct PolicyModel {
  nn::Mlp understanding;  // [obs, hashed action, q] -> token
  nn::Mlp goal;           // f_pred -> token
  nn::Vec query;          // action-expert attention query
  nn::Mat w_key;          // token -> key
  nn::Mat w_value;        // token -> value
  nn::Mlp velocity;       // [flattened chunk, fused guidance, time] -> velocity

  static PolicyModel init(const PolicyConfig& config);
  static PolicyModel zeros(const PolicyConfig& config);
  static PolicyModel zeros_like(const PolicyModel& other);
};

void collect_params(PolicyModel& m, std::vector<double*>& out);

nn::Vec understanding_token(const PolicyModel& model, const nn::Vec& obs,
                            const GroundAction& action, const nn::Vec& q,
                            const PolicyConfig& config = {});
nn::Vec goal_token(const PolicyModel& model, const nn::Vec& f_pred);

// Single-head scaled dot-product attention of the action-expert query over
// the key/value pairs of {U, G}.
nn::Vec fuse_guidance(const PolicyModel& model, const nn::Vec& u, const nn::Vec& g);

// Learned chunk generation: seeded chunk noise integrated through the
// flow-matching velocity field for flow_steps under the fused guidance, then
// clamped to action bounds. Deterministic per config.rng_seed. Throws
// Error(NumericFailure) on non-finite outputs.
ActionChunk policy_step(const PolicyModel& model, const nn::Vec& obs, const nn::Vec& q,
                        const GroundAction& action, const nn::Vec& f_pred,
                        const PolicyConfig& config = {});

// Scripted mode: k sequential scripted_controller outputs, each applied to a
// simulated copy of the scene before the next query.
ActionChunk scripted_chunk(const sim::Scene& scene, const GroundAction& action,
                           size_t chunk_len, const sim::SimParams& params = {});

struct PolicyTrainRecord {
  nn::Vec obs;
  nn::Vec q;
  GroundAction action;
  nn::Vec f_pred;
  ActionChunk chunk;  // expert demonstration
};

struct PolicyTrainResult {
  PolicyModel model;
  std::vector<double> loss_curve;
};

// Flow matching over flattened chunks, trained end-to-end: gradients flow
// through the velocity network, the attention block, and both expert MLPs.
// Throws Error(EmptyInput) and Error(NumericFailure) naming the failing step.
PolicyTrainResult train_policy(const std::vector<PolicyTrainRecord>& dataset,
                               const PolicyConfig& config);

// Analytic vs central finite-difference gradients of the flow-matching loss,
// sampled over at least 50 velocity-network parameters plus a slice of the
// expert/attention parameters. `fault_scale` deliberately scales the analytic
// side so tests can prove the check catches wrong gradients.
double policy_gradient_check(const PolicyModel& model,
                             const std::vector<PolicyTrainRecord>& batch, double eps,
                             const PolicyConfig& config = {}, double fault_scale = 1.0);

struct CompletionMonitor {
  nn::Vec weights;  // over [pooled understanding token ; goal token]
  double bias = 0.0;
  double threshold = 0.5;
  bool trained = false;
};

// Trained: logistic head over [U ; G]. Untrained fallback:
// sigmoid((tau_dist - |obs - f_pred|) / dist_scale). Always in [0, 1].
double completion_probability(const CompletionMonitor& monitor, const PolicyModel& model,
                              const nn::Vec& obs, const GroundAction& action,
                              const nn::Vec& f_pred, const nn::Vec& q,
                              const PolicyConfig& config = {});

struct MonitorFrame {
  nn::Vec obs;
  nn::Vec q;
  GroundAction action;
  nn::Vec f_pred;
  bool label;  // subtask goal atoms hold in the classified scene
};

struct MonitorResult {
  CompletionMonitor monitor;
  double train_accuracy = 0.0;
  double held_out_accuracy = 0.0;
};

// Logistic regression over expert-token features with a seeded holdout
// split. Throws Error(EmptyInput) and Error(DegenerateLabels) when every
// frame carries the same label.
MonitorResult train_completion_monitor(const PolicyModel& model,
                                       const std::vector<MonitorFrame>& frames,
                                       const PolicyConfig& config = {});

void save_policy(const PolicyModel& model, Checkpoint& ckpt);
PolicyModel load_policy(const Checkpoint& ckpt, const PolicyConfig& config = {});
void save_monitor(const CompletionMonitor& monitor, Checkpoint& ckpt);
CompletionMonitor load_monitor(const Checkpoint& ckpt, const PolicyConfig& config = {});

}  // namespace hwm::policy
