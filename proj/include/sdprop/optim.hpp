#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <optional>
#include <string>

#include "sdprop/covstat.hpp"

namespace sdprop {

enum class OptimizerKind { Sgd, RmsProp, Adam, SdPropDiag, SdPropFull };

std::string to_string(OptimizerKind kind);
std::optional<OptimizerKind> optimizer_from_string(const std::string& name);

// Multiplicative rate decay applied at epoch boundaries:
// rate(epoch) = base * factor^floor(epoch / every_n_epochs), epochs 0-based.
struct DecaySchedule {
  int every_n_epochs = 10;
  double factor = 0.97;
};

// One bag of hyperparameters for all optimizer kinds. Only the fields a kind
// actually consumes may be set; validated() rejects anything extraneous so a
// stray --beta on an SDProp run is an error instead of silently ignored.
struct OptimizerConfig {
  OptimizerKind kind = OptimizerKind::Sgd;
  std::optional<double> alpha;  // learning rate: sgd, rmsprop, adam
  std::optional<double> rho;    // step scale: sdprop, sdprop-full
  std::optional<double> beta;   // rmsprop second-moment decay
  std::optional<double> beta1;  // adam first-moment decay   (default 0.9)
  std::optional<double> beta2;  // adam second-moment decay  (default 0.999)
  std::optional<double> gamma;  // sdprop moment decay
  std::optional<double> epsilon;         // divisor stabilizer (default 1e-4)
  bool bias_correction = false;          // sdprop: divide moments by 1-gamma^t
  std::optional<double> clip_threshold;  // L2 gradient clipping (any kind)
  std::optional<DecaySchedule> decay;    // rate decay (any kind)
};

// Divisor stabilizer added outside the square root. Large enough that the
// documented oversized first SDProp step (rho/epsilon before any variance has
// accumulated) stays recoverable, small enough to leave steady-state steps
// untouched for gradient scales above ~1e-2.
inline constexpr double kDefaultEpsilon = 1e-4;
inline constexpr double kDefaultAdamBeta1 = 0.9;
inline constexpr double kDefaultAdamBeta2 = 0.999;

// Full-covariance preconditioning is O(d^3) per step; refuse beyond this.
inline constexpr Eigen::Index kFullCovMaxDim = 50;
// Eigenvalue floor used by the full-covariance step (matrix counterpart of
// epsilon: C + floor*I is inverted-square-rooted with the same floor).
inline constexpr double kFullCovEigenvalueFloor = 1e-12;

// Checks presence/absence of fields per kind, fills kind-appropriate
// defaults, and range-checks everything. Throws ConfigError.
OptimizerConfig validated(OptimizerConfig cfg);

// Per-run mutable optimizer memory. Only the members the configured kind
// needs are allocated; t counts applied updates (statistics warmup included).
struct OptimizerState {
  std::int64_t t = 0;
  Eigen::VectorXd v;         // rmsprop: EW mean of g^2
  Eigen::VectorXd m1, m2;    // adam moments
  DiagCovState diag;         // sdprop
  FullCovState full;         // sdprop-full
};

OptimizerState init_state(const OptimizerConfig& cfg, Eigen::Index dim);

struct StepResult {
  Eigen::VectorXd theta;
  OptimizerState state;
};

// One parameter update. theta/state are taken by value: std::move them in to
// update without copies. Statistics are always folded in before the step, so
// the update at time t uses the estimate that already includes g_t.
StepResult sgd_step(Eigen::VectorXd theta, const Eigen::VectorXd& g,
                    OptimizerState state, const OptimizerConfig& cfg);
StepResult rmsprop_step(Eigen::VectorXd theta, const Eigen::VectorXd& g,
                        OptimizerState state, const OptimizerConfig& cfg);
StepResult adam_step(Eigen::VectorXd theta, const Eigen::VectorXd& g,
                     OptimizerState state, const OptimizerConfig& cfg);
// theta_i -= rho * g_i / (sqrt(c2_i) + epsilon). The very first update sees
// c2 = 0 and therefore applies a step of magnitude (rho/epsilon)*|g|; that is
// the method's defined behavior, not a bug. Callers that want to avoid it can
// warm the statistics first (warm_statistics / harness warmup option).
StepResult sdprop_diag_step(Eigen::VectorXd theta, const Eigen::VectorXd& g,
                            OptimizerState state, const OptimizerConfig& cfg);
// theta -= rho * (C + floor*I)^{-1/2} g; refuses dim > kFullCovMaxDim.
StepResult sdprop_full_step(Eigen::VectorXd theta, const Eigen::VectorXd& g,
                            OptimizerState state, const OptimizerConfig& cfg);

// Dispatch on cfg.kind.
StepResult optimizer_step(Eigen::VectorXd theta, const Eigen::VectorXd& g,
                          OptimizerState state, const OptimizerConfig& cfg);

// Fold g into the gradient statistics without touching parameters. Only
// meaningful for the sdprop kinds; anything else is a ConfigError.
OptimizerState warm_statistics(OptimizerState state, const Eigen::VectorXd& g,
                               const OptimizerConfig& cfg);

// L2 clipping: rescales g to `threshold` when ||g||_2 exceeds it.
Eigen::VectorXd clip_gradient(Eigen::VectorXd g, double threshold);

// See DecaySchedule. epoch is 0-based; epochs before the first boundary keep
// the base rate unchanged.
double apply_decay(double base_rate, std::int64_t epoch, const DecaySchedule& schedule);

// The rate field decay acts on: alpha for sgd/rmsprop/adam, rho for sdprop.
double base_rate(const OptimizerConfig& cfg);
OptimizerConfig with_rate(OptimizerConfig cfg, double rate);

}  // namespace sdprop
