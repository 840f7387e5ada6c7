#include <algorithm>
#include <cmath>
#include <cstddef>

#include "sdprop/error.hpp"
#include "sdprop/verify.hpp"

namespace sdprop::oracle {

DiagMoments reference_diag_stats(double gamma, const Stream& stream) {
  if (stream.empty()) {
    throw StateError("reference_diag_stats: empty stream");
  }
  const std::size_t d = stream.front().size();
  DiagMoments m;
  m.mu.assign(d, 0.0);
  m.c2.assign(d, 0.0);
  // One shared coefficient and an explicitly grouped squared deviation keep
  // the arithmetic associativity identical to the streaming form, so the two
  // routes agree to the last bit instead of merely to rounding error.
  const double k = gamma * (1.0 - gamma);
  for (std::size_t t = 0; t < stream.size(); ++t) {
    const std::vector<double>& g = stream[t];
    if (t == 0) {
      for (std::size_t i = 0; i < d; ++i) m.mu[i] = g[i];
      continue;
    }
    for (std::size_t i = 0; i < d; ++i) {
      double dev = g[i] - m.mu[i];
      m.c2[i] = gamma * m.c2[i] + k * (dev * dev);
    }
    for (std::size_t i = 0; i < d; ++i) {
      m.mu[i] = gamma * m.mu[i] + (1.0 - gamma) * g[i];
    }
  }
  return m;
}

FullMoments reference_full_stats(double gamma, const Stream& stream) {
  if (stream.empty()) {
    throw StateError("reference_full_stats: empty stream");
  }
  const std::size_t d = stream.front().size();
  FullMoments m;
  m.mu.assign(d, 0.0);
  m.C.assign(d, std::vector<double>(d, 0.0));
  for (std::size_t t = 0; t < stream.size(); ++t) {
    const std::vector<double>& g = stream[t];
    if (t == 0) {
      for (std::size_t i = 0; i < d; ++i) m.mu[i] = g[i];
      continue;
    }
    std::vector<double> dev(d);
    for (std::size_t i = 0; i < d; ++i) dev[i] = g[i] - m.mu[i];
    const double k = gamma * (1.0 - gamma);
    for (std::size_t i = 0; i < d; ++i) {
      for (std::size_t j = 0; j < d; ++j) {
        m.C[i][j] = gamma * m.C[i][j] + k * (dev[i] * dev[j]);
      }
    }
    for (std::size_t i = 0; i < d; ++i) {
      m.mu[i] = gamma * m.mu[i] + (1.0 - gamma) * g[i];
    }
  }
  return m;
}

std::vector<double> jacobi_eigenvalues(std::vector<std::vector<double>> a) {
  const std::size_t n = a.size();
  // Cyclic Jacobi: sweep all off-diagonal pairs, rotating each to zero,
  // until the off-diagonal mass is negligible relative to the diagonal.
  for (int sweep = 0; sweep < 100; ++sweep) {
    double off = 0.0, diag = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      diag += std::abs(a[i][i]);
      for (std::size_t j = i + 1; j < n; ++j) off += std::abs(a[i][j]);
    }
    if (off <= 1e-15 * (diag + 1e-300)) break;
    for (std::size_t p = 0; p + 1 < n; ++p) {
      for (std::size_t q = p + 1; q < n; ++q) {
        if (a[p][q] == 0.0) continue;
        double theta = (a[q][q] - a[p][p]) / (2.0 * a[p][q]);
        double t = (theta >= 0.0 ? 1.0 : -1.0) /
                   (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        double c = 1.0 / std::sqrt(t * t + 1.0);
        double s = t * c;
        for (std::size_t k = 0; k < n; ++k) {
          double akp = a[k][p], akq = a[k][q];
          a[k][p] = c * akp - s * akq;
          a[k][q] = s * akp + c * akq;
        }
        for (std::size_t k = 0; k < n; ++k) {
          double apk = a[p][k], aqk = a[q][k];
          a[p][k] = c * apk - s * aqk;
          a[q][k] = s * apk + c * aqk;
        }
      }
    }
  }
  std::vector<double> evals(n);
  for (std::size_t i = 0; i < n; ++i) evals[i] = a[i][i];
  std::sort(evals.begin(), evals.end());
  return evals;
}

Eigen::VectorXd central_difference_gradient(
    const std::function<double(const Eigen::VectorXd&)>& f,
    const Eigen::VectorXd& x, double h) {
  Eigen::VectorXd g(x.size());
  Eigen::VectorXd xp = x;
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    const double orig = xp[i];
    xp[i] = orig + h;
    const double fp = f(xp);
    xp[i] = orig - h;
    const double fm = f(xp);
    xp[i] = orig;
    g[i] = (fp - fm) / (2.0 * h);
  }
  return g;
}

Eigen::VectorXd sample_mean(const std::vector<Eigen::VectorXd>& xs) {
  if (xs.empty()) throw StateError("sample_mean: no samples");
  Eigen::VectorXd m = Eigen::VectorXd::Zero(xs.front().size());
  for (const auto& x : xs) {
    for (Eigen::Index i = 0; i < m.size(); ++i) m[i] += x[i];
  }
  return m / static_cast<double>(xs.size());
}

Eigen::MatrixXd sample_covariance(const std::vector<Eigen::VectorXd>& xs) {
  if (xs.size() < 2) throw StateError("sample_covariance: need >= 2 samples");
  const Eigen::VectorXd m = sample_mean(xs);
  const Eigen::Index d = m.size();
  Eigen::MatrixXd c = Eigen::MatrixXd::Zero(d, d);
  for (const auto& x : xs) {
    for (Eigen::Index i = 0; i < d; ++i) {
      for (Eigen::Index j = 0; j < d; ++j) {
        c(i, j) += (x[i] - m[i]) * (x[j] - m[j]);
      }
    }
  }
  return c / static_cast<double>(xs.size() - 1);
}

}  // namespace sdprop::oracle
