#pragma once

#include <Eigen/Core>
#include <functional>
#include <iosfwd>
#include <string>
#include <utility>
#include <vector>

namespace sdprop {

// ---------------------------------------------------------------------------
// Reference oracles.
//
// Deliberately naive re-implementations used to cross-check the library. They
// avoid the library's own code paths: the moment recurrences are plain loops
// over nested std::vector, the eigensolver is a hand-rolled cyclic Jacobi
// iteration, and gradients come from central differences on the forward pass
// alone. Slow and simple on purpose — do not "optimize" them into reusing
// library routines, that would defeat their role.
// ---------------------------------------------------------------------------
namespace oracle {

using Stream = std::vector<std::vector<double>>;  // stream[t][i]

struct DiagMoments {
  std::vector<double> mu;
  std::vector<double> c2;
};

struct FullMoments {
  std::vector<double> mu;
  std::vector<std::vector<double>> C;
};

// Re-evaluate the exponentially weighted moment recurrences from scratch.
DiagMoments reference_diag_stats(double gamma, const Stream& stream);
FullMoments reference_full_stats(double gamma, const Stream& stream);

// Eigenvalues of a symmetric matrix by cyclic Jacobi rotations, ascending.
std::vector<double> jacobi_eigenvalues(std::vector<std::vector<double>> a);

// Central finite differences: (f(x + h e_i) - f(x - h e_i)) / 2h.
Eigen::VectorXd central_difference_gradient(
    const std::function<double(const Eigen::VectorXd&)>& f,
    const Eigen::VectorXd& x, double h = 1e-5);

// Sample mean and covariance with plain accumulation loops.
Eigen::VectorXd sample_mean(const std::vector<Eigen::VectorXd>& xs);
Eigen::MatrixXd sample_covariance(const std::vector<Eigen::VectorXd>& xs);

}  // namespace oracle

// ---------------------------------------------------------------------------
// Acceptance checks: the properties this project promises, runnable both from
// the test suite and from the CLI ("verify" subcommand). Each criterion
// prints/returns a single pass/fail verdict plus a short account of the
// measured quantities and the thresholds they were held to.
// ---------------------------------------------------------------------------

struct CriterionResult {
  int id = 0;
  std::string name;
  bool pass = false;
  std::string detail;
  double seconds = 0.0;
};

struct VerifyOptions {
  // Directory holding train-images-idx3-ubyte / train-labels-idx1-ubyte.
  // Empty -> $SDPROP_MNIST_DIR if set, else the built-in synthetic dataset
  // stands in for the MNIST subset.
  std::string mnist_dir;
  int threads = 0;  // 0 -> hardware concurrency
};

std::vector<int> all_criteria();
CriterionResult run_criterion(int id, const VerifyOptions& opts = {});

// Runs every criterion, streaming one line each to `out`. True iff all pass.
bool run_all_criteria(std::ostream& out, const VerifyOptions& opts = {});

}  // namespace sdprop
