#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <utility>

namespace sdprop {

// Exponentially weighted first/second central moment estimates of a stochastic
// gradient stream. Both states share the same recurrences; the full state
// additionally tracks cross-coordinate covariance.
//
//   mu_t  = gamma * mu_{t-1}  + (1 - gamma) * g_t
//   c2_t  = gamma * c2_{t-1}  + gamma * (1 - gamma) * (g_t - mu_{t-1})^2
//   C_t   = gamma * C_{t-1}   + gamma * (1 - gamma) * (g_t - mu_{t-1})(g_t - mu_{t-1})^T
//
// Note the second-moment update uses the *previous* mean. t == 0 means
// "uninitialized": the first observation sets mu = g exactly and leaves the
// second moment at zero, so no bias from a synthetic zero-init leaks in.

struct DiagCovState {
  Eigen::VectorXd mu;
  Eigen::VectorXd c2;  // per-coordinate central variance estimate, >= 0
  std::int64_t t = 0;  // number of gradients absorbed
  double gamma = 0.0;
};

struct FullCovState {
  Eigen::VectorXd mu;
  Eigen::MatrixXd C;  // symmetric PSD covariance estimate
  std::int64_t t = 0;
  double gamma = 0.0;
};

// Fresh (t = 0) states. gamma must lie in [0, 1).
DiagCovState diag_state(Eigen::Index dim, double gamma);
FullCovState full_state(Eigen::Index dim, double gamma);

// Absorb one gradient observation. Takes the state by value so callers can
// std::move() to update in place. Throws DimensionError / NonFiniteError.
DiagCovState diag_update(DiagCovState state, const Eigen::VectorXd& g);

// Same recurrence with the full outer product. The result is explicitly
// re-symmetrized ((C + C^T)/2) after every update so floating-point drift
// cannot accumulate asymmetry over long streams.
FullCovState full_update(FullCovState state, const Eigen::VectorXd& g);

// C^{-1/2} of a symmetric PSD matrix via eigendecomposition, with eigenvalues
// clamped below at `floor` before the inverse square root. Throws on
// non-finite input or asymmetry beyond a small relative tolerance.
Eigen::MatrixXd inv_sqrt(const Eigen::MatrixXd& C, double floor = 1e-12);

// Divide both moments by (1 - gamma^t), the usual zero-init debiasing factor.
// The factor is exact only for the zero-init variant of the recurrence; this
// state initializes mu_1 = g_1, so correction ships disabled by default at
// the optimizer level. Throws StateError when t == 0 (factor would be 0/0).
std::pair<Eigen::VectorXd, Eigen::VectorXd> bias_correct(const DiagCovState& state);
std::pair<Eigen::VectorXd, Eigen::MatrixXd> bias_correct(const FullCovState& state);

}  // namespace sdprop
