#include "sdprop/problems.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <utility>

#include "sdprop/error.hpp"

namespace sdprop {

namespace {

constexpr Eigen::Index kEvalChunk = 2048;

Eigen::MatrixXd psd_sqrt(const Eigen::MatrixXd& m) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(m);
  if (es.info() != Eigen::Success) {
    throw NonFiniteError("noise covariance eigendecomposition failed");
  }
  const Eigen::VectorXd lam = es.eigenvalues().cwiseMax(0.0);
  return es.eigenvectors() * lam.cwiseSqrt().asDiagonal() *
         es.eigenvectors().transpose();
}

}  // namespace

NoisyQuadratic::NoisyQuadratic(Eigen::MatrixXd curvature,
                               Eigen::MatrixXd noise_cov,
                               Eigen::VectorXd theta0, std::uint64_t seed)
    : a_(std::move(curvature)),
      theta0_(std::move(theta0)),
      rng_(make_engine(seed, 0)) {
  if (a_.rows() != a_.cols()) {
    throw DimensionError("quadratic curvature matrix must be square");
  }
  if (a_.rows() != theta0_.size()) {
    throw DimensionError("quadratic start point has " +
                         std::to_string(theta0_.size()) +
                         " entries, curvature is " + std::to_string(a_.rows()) +
                         "-dimensional");
  }
  if (noise_cov.rows() != a_.rows() || noise_cov.cols() != a_.cols()) {
    throw DimensionError("gradient noise covariance must match the curvature size");
  }
  if (!a_.allFinite() || !noise_cov.allFinite() || !theta0_.allFinite()) {
    throw NonFiniteError("quadratic problem inputs must be finite");
  }
  noise_sqrt_ = psd_sqrt(noise_cov);
}

NoisyQuadratic::NoisyQuadratic(const Eigen::VectorXd& curvature_diag,
                               double noise_std, Eigen::VectorXd theta0,
                               std::uint64_t seed)
    : NoisyQuadratic(
          Eigen::MatrixXd(curvature_diag.asDiagonal()),
          Eigen::MatrixXd(
              (Eigen::VectorXd::Constant(curvature_diag.size(),
                                         noise_std * noise_std))
                  .asDiagonal()),
          std::move(theta0), seed) {}

GradSample NoisyQuadratic::sample_gradient(const Eigen::VectorXd& theta,
                                           const std::vector<int>&) {
  if (theta.size() != dim()) {
    throw DimensionError("sample_gradient: wrong parameter size");
  }
  Eigen::VectorXd z(dim());
  for (Eigen::Index i = 0; i < z.size(); ++i) z(i) = normal_(rng_);
  GradSample out;
  out.gradient = true_gradient(theta) + noise_sqrt_ * z;
  out.loss = 0.5 * theta.dot(a_ * theta);
  return out;
}

Evaluation NoisyQuadratic::evaluate(const Eigen::VectorXd& theta) {
  Evaluation ev;
  ev.loss = 0.5 * theta.dot(a_ * theta);
  return ev;
}

Eigen::VectorXd NoisyQuadratic::true_gradient(
    const Eigen::VectorXd& theta) const {
  return a_ * theta;
}

// ---------------------------------------------------------------------------

NoisyRosenbrock::NoisyRosenbrock(double noise_std, std::uint64_t seed)
    : noise_std_(noise_std), rng_(make_engine(seed, 0)) {
  if (!(noise_std >= 0.0)) {
    throw ConfigError("gradient noise level must be >= 0");
  }
}

Eigen::VectorXd NoisyRosenbrock::initial_params() const {
  Eigen::VectorXd theta0(2);
  theta0 << -1.2, 1.0;
  return theta0;
}

GradSample NoisyRosenbrock::sample_gradient(const Eigen::VectorXd& theta,
                                            const std::vector<int>&) {
  if (theta.size() != 2) {
    throw DimensionError("sample_gradient: wrong parameter size");
  }
  GradSample out;
  out.gradient = true_gradient(theta);
  out.gradient(0) += noise_std_ * normal_(rng_);
  out.gradient(1) += noise_std_ * normal_(rng_);
  out.loss = evaluate(theta).loss;
  return out;
}

Evaluation NoisyRosenbrock::evaluate(const Eigen::VectorXd& theta) {
  const double a = theta(0), b = theta(1);
  Evaluation ev;
  ev.loss = (1.0 - a) * (1.0 - a) + 100.0 * (b - a * a) * (b - a * a);
  return ev;
}

Eigen::VectorXd NoisyRosenbrock::true_gradient(
    const Eigen::VectorXd& theta) const {
  const double a = theta(0), b = theta(1);
  Eigen::VectorXd g(2);
  g(0) = -2.0 * (1.0 - a) - 400.0 * a * (b - a * a);
  g(1) = 200.0 * (b - a * a);
  return g;
}

// ---------------------------------------------------------------------------

ClassificationProblem::ClassificationProblem(
    std::shared_ptr<const Dataset> data, std::vector<int> hidden_sizes,
    InitSpec init)
    : data_(std::move(data)),
      mlp_([&] {
        if (!data_) throw ConfigError("classification problem needs a dataset");
        if (data_->rows() < 1) throw ConfigError("dataset is empty");
        if (data_->num_classes < 2) {
          throw ConfigError("classification needs at least two classes");
        }
        std::vector<int> sizes;
        sizes.reserve(hidden_sizes.size() + 2);
        sizes.push_back(static_cast<int>(data_->cols()));
        sizes.insert(sizes.end(), hidden_sizes.begin(), hidden_sizes.end());
        sizes.push_back(data_->num_classes);
        return MlpClassifier(std::move(sizes), init);
      }()),
      theta0_(mlp_.params_flat()) {}

void ClassificationProblem::gather(const std::vector<int>& batch, Tensor& x,
                                   std::vector<int>& y) const {
  x.resize(static_cast<Eigen::Index>(batch.size()), data_->cols());
  y.resize(batch.size());
  for (std::size_t i = 0; i < batch.size(); ++i) {
    const int row = batch[i];
    if (row < 0 || row >= data_->rows()) {
      throw DimensionError("batch index " + std::to_string(row) +
                           " out of range for " + std::to_string(data_->rows()) +
                           " examples");
    }
    x.row(static_cast<Eigen::Index>(i)) = data_->features.row(row);
    y[i] = data_->labels[static_cast<std::size_t>(row)];
  }
}

GradSample ClassificationProblem::sample_gradient(
    const Eigen::VectorXd& theta, const std::vector<int>& batch) {
  if (batch.empty()) {
    throw ConfigError("classification gradients need a non-empty batch");
  }
  mlp_.set_params_flat(theta);
  Tensor x;
  std::vector<int> y;
  gather(batch, x, y);
  GradSample out;
  out.loss = mlp_.loss(x, y);
  out.gradient = mlp_.gradient();
  return out;
}

Evaluation ClassificationProblem::evaluate(const Eigen::VectorXd& theta) {
  mlp_.set_params_flat(theta);
  const Eigen::Index n = data_->rows();
  double loss_sum = 0.0;
  Eigen::Index correct = 0;
  std::vector<int> y;
  for (Eigen::Index begin = 0; begin < n; begin += kEvalChunk) {
    const Eigen::Index len = std::min(kEvalChunk, n - begin);
    const Tensor x = data_->features.middleRows(begin, len);
    y.assign(data_->labels.begin() + begin, data_->labels.begin() + begin + len);
    const MlpClassifier::BatchEval chunk = mlp_.evaluate(x, y);
    loss_sum += chunk.loss * static_cast<double>(len);
    correct += chunk.correct;
  }
  Evaluation ev;
  ev.loss = loss_sum / static_cast<double>(n);
  ev.accuracy = static_cast<double>(correct) / static_cast<double>(n);
  return ev;
}

}  // namespace sdprop
