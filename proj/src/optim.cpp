#include "sdprop/optim.hpp"

#include <cmath>
#include <utility>

#include "sdprop/error.hpp"

namespace sdprop {

std::string to_string(OptimizerKind kind) {
  switch (kind) {
    case OptimizerKind::Sgd: return "sgd";
    case OptimizerKind::RmsProp: return "rmsprop";
    case OptimizerKind::Adam: return "adam";
    case OptimizerKind::SdPropDiag: return "sdprop";
    case OptimizerKind::SdPropFull: return "sdprop-full";
  }
  return "?";
}

std::optional<OptimizerKind> optimizer_from_string(const std::string& name) {
  if (name == "sgd") return OptimizerKind::Sgd;
  if (name == "rmsprop") return OptimizerKind::RmsProp;
  if (name == "adam") return OptimizerKind::Adam;
  if (name == "sdprop") return OptimizerKind::SdPropDiag;
  if (name == "sdprop-full") return OptimizerKind::SdPropFull;
  return std::nullopt;
}

namespace {

void require(bool ok, const std::string& msg) {
  if (!ok) throw ConfigError(msg);
}

void require_set(const std::optional<double>& field, const char* name,
                 const std::string& kind) {
  require(field.has_value(),
          kind + " requires --" + std::string(name) + " to be set");
}

void require_unset(const std::optional<double>& field, const char* name,
                   const std::string& kind) {
  require(!field.has_value(),
          std::string(name) + " is not a " + kind + " parameter");
}

void check_unit_interval(double x, const char* name) {
  require(x >= 0.0 && x < 1.0,
          std::string(name) + " must lie in [0, 1), got " + std::to_string(x));
}

void check_positive(double x, const char* name) {
  require(x > 0.0,
          std::string(name) + " must be positive, got " + std::to_string(x));
}

void check_step_inputs(const Eigen::VectorXd& theta, const Eigen::VectorXd& g,
                       const char* op) {
  if (theta.size() != g.size()) {
    throw DimensionError(std::string(op) + ": theta has size " +
                         std::to_string(theta.size()) + ", gradient has size " +
                         std::to_string(g.size()));
  }
  if (!g.allFinite()) {
    throw NonFiniteError(std::string(op) + ": gradient contains NaN or Inf");
  }
}

}  // namespace

OptimizerConfig validated(OptimizerConfig cfg) {
  const std::string kind = to_string(cfg.kind);
  switch (cfg.kind) {
    case OptimizerKind::Sgd:
      require_set(cfg.alpha, "alpha", kind);
      require_unset(cfg.rho, "rho", kind);
      require_unset(cfg.beta, "beta", kind);
      require_unset(cfg.beta1, "beta1", kind);
      require_unset(cfg.beta2, "beta2", kind);
      require_unset(cfg.gamma, "gamma", kind);
      require_unset(cfg.epsilon, "epsilon", kind);
      require(!cfg.bias_correction, "bias-correction is not a sgd parameter");
      break;
    case OptimizerKind::RmsProp:
      require_set(cfg.alpha, "alpha", kind);
      require_set(cfg.beta, "beta", kind);
      require_unset(cfg.rho, "rho", kind);
      require_unset(cfg.beta1, "beta1", kind);
      require_unset(cfg.beta2, "beta2", kind);
      require_unset(cfg.gamma, "gamma", kind);
      require(!cfg.bias_correction, "bias-correction is not a rmsprop parameter");
      if (!cfg.epsilon) cfg.epsilon = kDefaultEpsilon;
      check_unit_interval(*cfg.beta, "beta");
      break;
    case OptimizerKind::Adam:
      require_set(cfg.alpha, "alpha", kind);
      require_unset(cfg.rho, "rho", kind);
      require_unset(cfg.beta, "beta", kind);
      require_unset(cfg.gamma, "gamma", kind);
      require(!cfg.bias_correction,
              "bias-correction is not an adam parameter (adam always corrects)");
      if (!cfg.beta1) cfg.beta1 = kDefaultAdamBeta1;
      if (!cfg.beta2) cfg.beta2 = kDefaultAdamBeta2;
      if (!cfg.epsilon) cfg.epsilon = kDefaultEpsilon;
      check_unit_interval(*cfg.beta1, "beta1");
      check_unit_interval(*cfg.beta2, "beta2");
      break;
    case OptimizerKind::SdPropDiag:
      require_set(cfg.rho, "rho", kind);
      require_set(cfg.gamma, "gamma", kind);
      require_unset(cfg.alpha, "alpha", kind);
      require_unset(cfg.beta, "beta", kind);
      require_unset(cfg.beta1, "beta1", kind);
      require_unset(cfg.beta2, "beta2", kind);
      if (!cfg.epsilon) cfg.epsilon = kDefaultEpsilon;
      check_unit_interval(*cfg.gamma, "gamma");
      break;
    case OptimizerKind::SdPropFull:
      require_set(cfg.rho, "rho", kind);
      require_set(cfg.gamma, "gamma", kind);
      require_unset(cfg.alpha, "alpha", kind);
      require_unset(cfg.beta, "beta", kind);
      require_unset(cfg.beta1, "beta1", kind);
      require_unset(cfg.beta2, "beta2", kind);
      require_unset(cfg.epsilon, "epsilon",
                    kind + " (the eigenvalue floor plays epsilon's role)");
      require(!cfg.bias_correction,
              "bias-correction is not supported for sdprop-full");
      check_unit_interval(*cfg.gamma, "gamma");
      break;
  }
  if (cfg.alpha) check_positive(*cfg.alpha, "alpha");
  if (cfg.rho) check_positive(*cfg.rho, "rho");
  if (cfg.epsilon) require(*cfg.epsilon >= 0.0, "epsilon must be >= 0");
  if (cfg.clip_threshold) check_positive(*cfg.clip_threshold, "clip");
  if (cfg.decay) {
    require(cfg.decay->every_n_epochs >= 1, "decay-every must be >= 1");
    check_positive(cfg.decay->factor, "decay-factor");
  }
  return cfg;
}

OptimizerState init_state(const OptimizerConfig& cfg, Eigen::Index dim) {
  require(dim >= 1, "parameter dimension must be >= 1");
  OptimizerState s;
  switch (cfg.kind) {
    case OptimizerKind::Sgd:
      break;
    case OptimizerKind::RmsProp:
      s.v = Eigen::VectorXd::Zero(dim);
      break;
    case OptimizerKind::Adam:
      s.m1 = Eigen::VectorXd::Zero(dim);
      s.m2 = Eigen::VectorXd::Zero(dim);
      break;
    case OptimizerKind::SdPropDiag:
      s.diag = diag_state(dim, cfg.gamma.value());
      break;
    case OptimizerKind::SdPropFull:
      require(dim <= kFullCovMaxDim,
              "sdprop-full preconditions a " + std::to_string(dim) + "x" +
                  std::to_string(dim) +
                  " covariance; dimension limit is " +
                  std::to_string(kFullCovMaxDim));
      s.full = full_state(dim, cfg.gamma.value());
      break;
  }
  return s;
}

StepResult sgd_step(Eigen::VectorXd theta, const Eigen::VectorXd& g,
                    OptimizerState state, const OptimizerConfig& cfg) {
  check_step_inputs(theta, g, "sgd_step");
  theta -= cfg.alpha.value() * g;
  state.t += 1;
  return {std::move(theta), std::move(state)};
}

StepResult rmsprop_step(Eigen::VectorXd theta, const Eigen::VectorXd& g,
                        OptimizerState state, const OptimizerConfig& cfg) {
  check_step_inputs(theta, g, "rmsprop_step");
  const double beta = cfg.beta.value();
  const double eps = cfg.epsilon.value();
  state.v = beta * state.v + (1.0 - beta) * g.array().square().matrix();
  theta.array() -=
      cfg.alpha.value() * g.array() / (state.v.array().sqrt() + eps);
  state.t += 1;
  return {std::move(theta), std::move(state)};
}

StepResult adam_step(Eigen::VectorXd theta, const Eigen::VectorXd& g,
                     OptimizerState state, const OptimizerConfig& cfg) {
  check_step_inputs(theta, g, "adam_step");
  const double b1 = cfg.beta1.value();
  const double b2 = cfg.beta2.value();
  state.t += 1;
  state.m1 = b1 * state.m1 + (1.0 - b1) * g;
  state.m2 = b2 * state.m2 + (1.0 - b2) * g.array().square().matrix();
  const double t = static_cast<double>(state.t);
  const double corr1 = 1.0 - std::pow(b1, t);
  const double corr2 = 1.0 - std::pow(b2, t);
  theta.array() -= cfg.alpha.value() * (state.m1.array() / corr1) /
                   ((state.m2.array() / corr2).sqrt() + cfg.epsilon.value());
  return {std::move(theta), std::move(state)};
}

StepResult sdprop_diag_step(Eigen::VectorXd theta, const Eigen::VectorXd& g,
                            OptimizerState state, const OptimizerConfig& cfg) {
  check_step_inputs(theta, g, "sdprop_diag_step");
  state.diag = diag_update(std::move(state.diag), g);
  const double eps = cfg.epsilon.value();
  const double rho = cfg.rho.value();
  if (cfg.bias_correction) {
    Eigen::VectorXd c2hat = bias_correct(state.diag).second;
    theta.array() -= rho * g.array() / (c2hat.array().sqrt() + eps);
  } else {
    theta.array() -= rho * g.array() / (state.diag.c2.array().sqrt() + eps);
  }
  state.t += 1;
  return {std::move(theta), std::move(state)};
}

StepResult sdprop_full_step(Eigen::VectorXd theta, const Eigen::VectorXd& g,
                            OptimizerState state, const OptimizerConfig& cfg) {
  check_step_inputs(theta, g, "sdprop_full_step");
  if (theta.size() > kFullCovMaxDim) {
    throw ConfigError("sdprop_full_step: dimension " +
                      std::to_string(theta.size()) + " exceeds limit " +
                      std::to_string(kFullCovMaxDim));
  }
  state.full = full_update(std::move(state.full), g);
  const double floor = kFullCovEigenvalueFloor;
  Eigen::MatrixXd ridged =
      state.full.C +
      floor * Eigen::MatrixXd::Identity(theta.size(), theta.size());
  theta.noalias() -= cfg.rho.value() * (inv_sqrt(ridged, floor) * g);
  state.t += 1;
  return {std::move(theta), std::move(state)};
}

StepResult optimizer_step(Eigen::VectorXd theta, const Eigen::VectorXd& g,
                          OptimizerState state, const OptimizerConfig& cfg) {
  switch (cfg.kind) {
    case OptimizerKind::Sgd:
      return sgd_step(std::move(theta), g, std::move(state), cfg);
    case OptimizerKind::RmsProp:
      return rmsprop_step(std::move(theta), g, std::move(state), cfg);
    case OptimizerKind::Adam:
      return adam_step(std::move(theta), g, std::move(state), cfg);
    case OptimizerKind::SdPropDiag:
      return sdprop_diag_step(std::move(theta), g, std::move(state), cfg);
    case OptimizerKind::SdPropFull:
      return sdprop_full_step(std::move(theta), g, std::move(state), cfg);
  }
  throw ConfigError("unknown optimizer kind");
}

OptimizerState warm_statistics(OptimizerState state, const Eigen::VectorXd& g,
                               const OptimizerConfig& cfg) {
  switch (cfg.kind) {
    case OptimizerKind::SdPropDiag:
      if (!g.allFinite()) {
        throw NonFiniteError("warm_statistics: gradient contains NaN or Inf");
      }
      state.diag = diag_update(std::move(state.diag), g);
      state.t += 1;
      return state;
    case OptimizerKind::SdPropFull:
      if (!g.allFinite()) {
        throw NonFiniteError("warm_statistics: gradient contains NaN or Inf");
      }
      state.full = full_update(std::move(state.full), g);
      state.t += 1;
      return state;
    default:
      throw ConfigError("statistics warmup only applies to the sdprop kinds");
  }
}

Eigen::VectorXd clip_gradient(Eigen::VectorXd g, double threshold) {
  if (!(threshold > 0.0)) {
    throw ConfigError("clip threshold must be positive");
  }
  const double norm = g.norm();
  if (norm > threshold) {
    g *= threshold / norm;
  }
  return g;
}

double apply_decay(double base, std::int64_t epoch, const DecaySchedule& schedule) {
  if (epoch < 0) throw ConfigError("epoch must be >= 0");
  const auto periods = epoch / schedule.every_n_epochs;
  return base * std::pow(schedule.factor, static_cast<double>(periods));
}

double base_rate(const OptimizerConfig& cfg) {
  if (cfg.kind == OptimizerKind::SdPropDiag || cfg.kind == OptimizerKind::SdPropFull) {
    return cfg.rho.value();
  }
  return cfg.alpha.value();
}

OptimizerConfig with_rate(OptimizerConfig cfg, double rate) {
  if (cfg.kind == OptimizerKind::SdPropDiag || cfg.kind == OptimizerKind::SdPropFull) {
    cfg.rho = rate;
  } else {
    cfg.alpha = rate;
  }
  return cfg;
}

}  // namespace sdprop
