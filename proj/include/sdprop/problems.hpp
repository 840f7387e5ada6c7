#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <memory>
#include <optional>
#include <random>
#include <vector>

#include "sdprop/autodiff.hpp"
#include "sdprop/data.hpp"
#include "sdprop/rng.hpp"

namespace sdprop {

// One stochastic gradient observation.
struct GradSample {
  Eigen::VectorXd gradient;  // noisy / minibatch gradient at the query point
  double loss = 0.0;         // objective value the gradient was measured on
};

struct Evaluation {
  double loss = 0.0;
  std::optional<double> accuracy;  // classification problems only
};

// A training problem the harness can drive: something with parameters, a
// stochastic gradient source, and an exact (or full-dataset) objective.
class Problem {
 public:
  virtual ~Problem() = default;

  virtual Eigen::Index dim() const = 0;
  virtual Eigen::VectorXd initial_params() const = 0;
  // Dataset-backed problems report their example count so the harness can
  // shuffle; stream problems (fresh noise every call) report 0.
  virtual Eigen::Index num_examples() const = 0;
  // Stochastic gradient at theta. `batch` selects dataset rows and is ignored
  // by stream problems, which advance an internal generator instead.
  virtual GradSample sample_gradient(const Eigen::VectorXd& theta,
                                     const std::vector<int>& batch) = 0;
  // The exact objective, or the full-dataset loss (and accuracy) for
  // dataset-backed problems.
  virtual Evaluation evaluate(const Eigen::VectorXd& theta) = 0;
  // True when evaluate() is cheap enough to call after every step.
  virtual bool cheap_loss() const = 0;
};

// f(theta) = 0.5 theta' A theta, observed through gradient noise:
// g_hat = A theta + B z with z standard normal and B B' the noise covariance.
class NoisyQuadratic : public Problem {
 public:
  NoisyQuadratic(Eigen::MatrixXd curvature, Eigen::MatrixXd noise_cov,
                 Eigen::VectorXd theta0, std::uint64_t seed);
  // Diagonal curvature with isotropic N(0, noise_std^2 I) gradient noise.
  NoisyQuadratic(const Eigen::VectorXd& curvature_diag, double noise_std,
                 Eigen::VectorXd theta0, std::uint64_t seed);

  Eigen::Index dim() const override { return theta0_.size(); }
  Eigen::VectorXd initial_params() const override { return theta0_; }
  Eigen::Index num_examples() const override { return 0; }
  GradSample sample_gradient(const Eigen::VectorXd& theta,
                             const std::vector<int>& batch) override;
  Evaluation evaluate(const Eigen::VectorXd& theta) override;
  bool cheap_loss() const override { return true; }

  Eigen::VectorXd true_gradient(const Eigen::VectorXd& theta) const;
  const Eigen::MatrixXd& curvature() const { return a_; }

 private:
  Eigen::MatrixXd a_;
  Eigen::MatrixXd noise_sqrt_;
  Eigen::VectorXd theta0_;
  RngEngine rng_;
  std::normal_distribution<double> normal_{0.0, 1.0};
};

// The banana valley f(a, b) = (1 - a)^2 + 100 (b - a^2)^2 with additive
// N(0, noise_std^2 I) gradient noise. Starts at the classic (-1.2, 1).
class NoisyRosenbrock : public Problem {
 public:
  NoisyRosenbrock(double noise_std, std::uint64_t seed);

  Eigen::Index dim() const override { return 2; }
  Eigen::VectorXd initial_params() const override;
  Eigen::Index num_examples() const override { return 0; }
  GradSample sample_gradient(const Eigen::VectorXd& theta,
                             const std::vector<int>& batch) override;
  Evaluation evaluate(const Eigen::VectorXd& theta) override;
  bool cheap_loss() const override { return true; }

  Eigen::VectorXd true_gradient(const Eigen::VectorXd& theta) const;

 private:
  double noise_std_;
  RngEngine rng_;
  std::normal_distribution<double> normal_{0.0, 1.0};
};

// Mean NLL of an MLP classifier over a shared dataset. Minibatch gradients
// come from the rows the harness selects; evaluate() sweeps the whole dataset
// in fixed-size chunks and reports loss plus accuracy.
class ClassificationProblem : public Problem {
 public:
  ClassificationProblem(std::shared_ptr<const Dataset> data,
                        std::vector<int> hidden_sizes, InitSpec init);

  Eigen::Index dim() const override { return mlp_.num_params(); }
  Eigen::VectorXd initial_params() const override { return theta0_; }
  Eigen::Index num_examples() const override { return data_->rows(); }
  GradSample sample_gradient(const Eigen::VectorXd& theta,
                             const std::vector<int>& batch) override;
  Evaluation evaluate(const Eigen::VectorXd& theta) override;
  bool cheap_loss() const override { return false; }

  const std::vector<int>& layer_sizes() const { return mlp_.layer_sizes(); }

 private:
  void gather(const std::vector<int>& batch, Tensor& x,
              std::vector<int>& y) const;

  std::shared_ptr<const Dataset> data_;
  MlpClassifier mlp_;
  Eigen::VectorXd theta0_;
};

}  // namespace sdprop
