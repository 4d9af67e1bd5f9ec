#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "reschunk/eval.hpp"
#include "reschunk/model.hpp"

namespace reschunk {

struct LossBreakdown {
  double kl = 0.0;
  double recon_fine = 0.0;
  double recon_coarse = 0.0;
  double total = 0.0;
};

struct OptimizerConfig {
  double learning_rate = 2e-4;
  double weight_decay = 5e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  int batch_size = 16;
  int max_steps = 500;
  int patience = 5;

  void validate() const;
};

/// KL divergence of the edge posterior from the factorized uniform prior:
/// sum over ordered pairs of (log C - H(q_ij)), in nats. Nonnegative, zero
/// iff every pair is uniform.
double kl_loss(const EdgePosterior& posterior);
// dL/dlogits of kl_loss, same layout as posterior.logits.
Matrix kl_loss_grad(const EdgePosterior& posterior);

/// Gaussian reconstruction penalty sum ||y_i - y_hat_i||^2 / (2 sigma^2).
double recon_loss(const Matrix& y_hat, const Matrix& y, double sigma);
Matrix recon_loss_grad(const Matrix& y_hat, const Matrix& y, double sigma);

/// Negative-ELBO composition. `y1` must be the coarsened target for
/// `result.partition`; pass an empty matrix when the coarse branch is off.
LossBreakdown total_loss(const ForwardResult& result, const Matrix& y0, const Matrix& y1,
                         const ModelConfig& cfg);

struct AdamState {
  std::vector<Matrix> m, v;  // one pair per parameter view, same order
  long long t = 0;
};

AdamState make_adam_state(ModelParams& params);

/// One Adam step with decoupled weight decay (applied multiplicatively
/// before the moment update), bias-corrected moments, eps 1e-8.
void adam_step(ModelParams& params, ModelGrads& grads, AdamState& state,
               const OptimizerConfig& cfg);

struct TrainConfig {
  OptimizerConfig opt;
  WindowingConfig windowing;
  HorizonSpec horizons;
  std::uint64_t seed = 0;
};

struct TrainResult {
  ModelParams params;              // best-validation checkpoint
  std::string metrics_log;         // per-step losses + per-epoch validation
  std::vector<double> step_total;  // total loss per step
  std::vector<double> best_val_mpjpe;  // per horizon, mm
  int epochs = 0;
  int steps = 0;
};

TrainResult train(const ModelConfig& mcfg, const std::vector<MotionSequence>& train_seqs,
                  const std::vector<MotionSequence>& val_seqs, const TrainConfig& tcfg);

/// Per-horizon MPJPE of the model over every window of `seqs`, with the
/// deterministic validation cropping schedule.
std::vector<double> evaluate_model(const ModelParams& params,
                                   const std::vector<MotionSequence>& seqs,
                                   const TrainConfig& tcfg);
/// Same schedule, zero-velocity predictor.
std::vector<double> evaluate_zero_velocity(const std::vector<MotionSequence>& seqs,
                                           const TrainConfig& tcfg);

struct GradCheckEntry {
  std::string name;
  double max_rel_err = 0.0;
  bool ok = true;
};

struct GradCheckReport {
  std::vector<GradCheckEntry> groups;
  double max_rel_err = 0.0;
  bool ok = true;
  std::string summary() const;
};

/// Compares every analytic parameter gradient of total_loss against central
/// finite differences (eps 1e-5) with frozen Gumbel noise and a frozen
/// partition. `corrupt_group`, when nonempty, doubles that group's analytic
/// gradient — a self-test hook for the harness.
GradCheckReport grad_check(const ModelConfig& cfg, double tolerance, std::uint64_t seed = 1,
                           const std::string& corrupt_group = "");

}  // namespace reschunk
