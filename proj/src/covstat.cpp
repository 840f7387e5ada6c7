#include "sdprop/covstat.hpp"

#include <Eigen/Eigenvalues>
#include <cmath>
#include <string>

#include "sdprop/error.hpp"

namespace sdprop {
namespace {

void check_gamma(double gamma) {
  if (!(gamma >= 0.0 && gamma < 1.0)) {
    throw ConfigError("gamma must lie in [0, 1), got " + std::to_string(gamma));
  }
}

void check_gradient(const Eigen::VectorXd& g, Eigen::Index dim, const char* op) {
  if (g.size() != dim) {
    throw DimensionError(std::string(op) + ": gradient has size " +
                         std::to_string(g.size()) + ", state has dimension " +
                         std::to_string(dim));
  }
  if (!g.allFinite()) {
    throw NonFiniteError(std::string(op) + ": gradient contains NaN or Inf");
  }
}

}  // namespace

DiagCovState diag_state(Eigen::Index dim, double gamma) {
  check_gamma(gamma);
  DiagCovState s;
  s.mu = Eigen::VectorXd::Zero(dim);
  s.c2 = Eigen::VectorXd::Zero(dim);
  s.t = 0;
  s.gamma = gamma;
  return s;
}

FullCovState full_state(Eigen::Index dim, double gamma) {
  check_gamma(gamma);
  FullCovState s;
  s.mu = Eigen::VectorXd::Zero(dim);
  s.C = Eigen::MatrixXd::Zero(dim, dim);
  s.t = 0;
  s.gamma = gamma;
  return s;
}

DiagCovState diag_update(DiagCovState state, const Eigen::VectorXd& g) {
  check_gradient(g, state.mu.size(), "diag_update");
  const double gamma = state.gamma;
  if (state.t == 0) {
    state.mu = g;
    state.c2.setZero();
  } else {
    // Variance first: it uses the mean from before this observation.
    state.c2 = gamma * state.c2 +
               (gamma * (1.0 - gamma)) *
                   (g - state.mu).array().square().matrix();
    state.mu = gamma * state.mu + (1.0 - gamma) * g;
  }
  state.t += 1;
  return state;
}

FullCovState full_update(FullCovState state, const Eigen::VectorXd& g) {
  check_gradient(g, state.mu.size(), "full_update");
  const double gamma = state.gamma;
  if (state.t == 0) {
    state.mu = g;
    state.C.setZero();
  } else {
    const Eigen::VectorXd d = g - state.mu;
    // Rank-one update written out by hand: k * (d_i * d_j) keeps every entry
    // exactly symmetric (products commute) and pins the rounding order, so a
    // from-scratch recomputation of the same recurrence agrees bit for bit.
    // Dimensions are small enough (<= 50) that a loop costs nothing.
    const double k = gamma * (1.0 - gamma);
    for (Eigen::Index i = 0; i < d.size(); ++i) {
      const double di = d(i);
      for (Eigen::Index j = 0; j < d.size(); ++j) {
        state.C(i, j) = gamma * state.C(i, j) + k * (di * d(j));
      }
    }
    state.mu = gamma * state.mu + (1.0 - gamma) * g;
  }
  state.t += 1;
  return state;
}

Eigen::MatrixXd inv_sqrt(const Eigen::MatrixXd& C, double floor) {
  if (C.rows() != C.cols()) {
    throw DimensionError("inv_sqrt: matrix is " + std::to_string(C.rows()) +
                         "x" + std::to_string(C.cols()));
  }
  if (!C.allFinite()) {
    throw NonFiniteError("inv_sqrt: matrix contains NaN or Inf");
  }
  if (!(floor > 0.0)) {
    throw ConfigError("inv_sqrt: eigenvalue floor must be positive");
  }
  const double scale = C.cwiseAbs().maxCoeff();
  const double asym = (C - C.transpose()).cwiseAbs().maxCoeff();
  if (asym > 1e-12 * std::max(1.0, scale)) {
    throw DimensionError("inv_sqrt: matrix is not symmetric (max asymmetry " +
                         std::to_string(asym) + ")");
  }

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(C);
  if (es.info() != Eigen::Success) {
    throw NonFiniteError("inv_sqrt: eigendecomposition failed");
  }
  Eigen::VectorXd inv_sqrt_evals =
      es.eigenvalues().cwiseMax(floor).cwiseSqrt().cwiseInverse();
  return es.eigenvectors() * inv_sqrt_evals.asDiagonal() *
         es.eigenvectors().transpose();
}

namespace {

double debias_factor(std::int64_t t, double gamma) {
  if (t == 0) {
    throw StateError("bias_correct: state is uninitialized (t = 0)");
  }
  return 1.0 - std::pow(gamma, static_cast<double>(t));
}

}  // namespace

std::pair<Eigen::VectorXd, Eigen::VectorXd> bias_correct(const DiagCovState& state) {
  const double f = debias_factor(state.t, state.gamma);
  return {state.mu / f, state.c2 / f};
}

std::pair<Eigen::VectorXd, Eigen::MatrixXd> bias_correct(const FullCovState& state) {
  const double f = debias_factor(state.t, state.gamma);
  return {state.mu / f, state.C / f};
}

}  // namespace sdprop
