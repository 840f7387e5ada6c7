#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <Eigen/Dense>
#include <cmath>
#include <limits>
#include <random>
#include <vector>

#include "sdprop/covstat.hpp"
#include "sdprop/error.hpp"
#include "sdprop/rng.hpp"
#include "sdprop/verify.hpp"

using namespace sdprop;

namespace {

Eigen::VectorXd vec(std::initializer_list<double> xs) {
  Eigen::VectorXd v(static_cast<Eigen::Index>(xs.size()));
  Eigen::Index i = 0;
  for (double x : xs) v(i++) = x;
  return v;
}

std::vector<std::vector<double>> nested(const Eigen::MatrixXd& m) {
  std::vector<std::vector<double>> out(static_cast<std::size_t>(m.rows()));
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    out[static_cast<std::size_t>(r)].assign(m.row(r).begin(), m.row(r).end());
  }
  return out;
}

}  // namespace

TEST_CASE("first observation initializes the mean with zero variance") {
  DiagCovState d = diag_update(diag_state(2, 0.9), vec({1.0, -4.0}));
  CHECK(d.t == 1);
  CHECK(d.mu(0) == 1.0);
  CHECK(d.mu(1) == -4.0);
  CHECK(d.c2(0) == 0.0);
  CHECK(d.c2(1) == 0.0);

  FullCovState f = full_update(full_state(2, 0.9), vec({1.0, -4.0}));
  CHECK(f.t == 1);
  CHECK(f.mu(0) == 1.0);
  CHECK(f.C.cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("two-step diagonal stream: mu 1.2, second moment 0.36") {
  DiagCovState d = diag_state(1, 0.9);
  d = diag_update(std::move(d), vec({1.0}));
  d = diag_update(std::move(d), vec({3.0}));
  CHECK(d.mu(0) == doctest::Approx(1.2).epsilon(1e-14));
  // 0.9 * (1 - 0.9) * (3 - 1)^2, with the deviation taken from the mean
  // *before* this update.
  CHECK(d.c2(0) == doctest::Approx(0.36).epsilon(1e-14));
}

TEST_CASE("two-step full stream matches the rank-one update by hand") {
  FullCovState f = full_state(2, 0.9);
  f = full_update(std::move(f), vec({1.0, 0.0}));
  f = full_update(std::move(f), vec({3.0, 2.0}));
  CHECK(f.mu(0) == doctest::Approx(1.2).epsilon(1e-14));
  CHECK(f.mu(1) == doctest::Approx(0.2).epsilon(1e-14));
  for (int i = 0; i < 2; ++i) {
    for (int j = 0; j < 2; ++j) {
      CHECK(f.C(i, j) == doctest::Approx(0.36).epsilon(1e-14));
    }
  }
  CHECK((f.C - f.C.transpose().eval()).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("constant gradients leave the spread at zero") {
  const Eigen::VectorXd g = vec({1.0, 0.5});
  DiagCovState d = diag_state(2, 0.9);
  FullCovState f = full_state(2, 0.9);
  for (int t = 0; t < 10; ++t) {
    d = diag_update(std::move(d), g);
    f = full_update(std::move(f), g);
  }
  CHECK(std::abs(d.mu(0) - 1.0) <= 1e-15);
  CHECK(std::abs(d.mu(1) - 0.5) <= 1e-15);
  CHECK(d.c2.maxCoeff() <= 1e-30);
  CHECK(f.C.cwiseAbs().maxCoeff() <= 1e-30);
}

TEST_CASE("streaming moments agree with the recomputed reference") {
  double worst = 0.0;
  for (int s = 0; s < 30; ++s) {
    RngEngine eng = make_engine(42, static_cast<std::uint64_t>(s));
    std::normal_distribution<double> normal;
    const int d = 1 + (s % 5);
    const double gamma = (s % 2 == 0) ? 0.9 : 0.5;
    DiagCovState ds = diag_state(d, gamma);
    FullCovState fs = full_state(d, gamma);
    oracle::Stream stream;
    for (int t = 0; t < 40; ++t) {
      std::vector<double> g(static_cast<std::size_t>(d));
      for (auto& x : g) x = normal(eng);
      stream.push_back(g);
      const Eigen::VectorXd gv = Eigen::Map<const Eigen::VectorXd>(g.data(), d);
      ds = diag_update(std::move(ds), gv);
      fs = full_update(std::move(fs), gv);
      const oracle::DiagMoments ref = oracle::reference_diag_stats(gamma, stream);
      const oracle::FullMoments reff = oracle::reference_full_stats(gamma, stream);
      for (int i = 0; i < d; ++i) {
        worst = std::max(worst, std::abs(ds.mu(i) - ref.mu[i]));
        worst = std::max(worst, std::abs(ds.c2(i) - ref.c2[i]));
        worst = std::max(worst, std::abs(fs.C(i, i) - ds.c2(i)));
        for (int j = 0; j < d; ++j) {
          worst = std::max(worst, std::abs(fs.C(i, j) - reff.C[i][j]));
        }
      }
    }
  }
  CHECK(worst <= 1e-12);
}

TEST_CASE("estimates stay positive semidefinite under wild inputs") {
  RngEngine eng = make_engine(7, 0);
  std::normal_distribution<double> normal;
  FullCovState f = full_state(3, 0.99);
  DiagCovState d = diag_state(3, 0.99);
  for (int t = 0; t < 200; ++t) {
    Eigen::VectorXd g(3);
    const double scale = (t % 13 == 0) ? 1e6 : 1.0;
    for (int i = 0; i < 3; ++i) g(i) = scale * normal(eng);
    f = full_update(std::move(f), g);
    d = diag_update(std::move(d), g);
    const auto eig = oracle::jacobi_eigenvalues(nested(f.C));
    CHECK(eig.front() >= -1e-10 * (1.0 + eig.back()));
    CHECK(d.c2.minCoeff() >= 0.0);
  }
}

TEST_CASE("inv_sqrt inverts a diagonal matrix exactly enough") {
  Eigen::MatrixXd C = Eigen::MatrixXd::Zero(2, 2);
  C(0, 0) = 4.0;
  C(1, 1) = 9.0;
  const Eigen::MatrixXd D = inv_sqrt(C);
  CHECK(D(0, 0) == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(D(1, 1) == doctest::Approx(1.0 / 3.0).epsilon(1e-12));
  CHECK(std::abs(D(0, 1)) <= 1e-12);
  CHECK(std::abs(D(1, 0)) <= 1e-12);
}

TEST_CASE("inv_sqrt squares back to the inverse") {
  Eigen::MatrixXd B(3, 3);
  B << 2.0, 0.0, 0.0, 0.4, 1.5, 0.0, -0.3, 0.2, 0.9;
  const Eigen::MatrixXd C = B * B.transpose();
  const Eigen::MatrixXd D = inv_sqrt(C);
  const Eigen::MatrixXd should_be_identity = D * C * D;
  CHECK((should_be_identity - Eigen::MatrixXd::Identity(3, 3))
            .cwiseAbs()
            .maxCoeff() <= 1e-10);
}

TEST_CASE("inv_sqrt clamps zero eigenvalues to the floor") {
  Eigen::MatrixXd C = Eigen::MatrixXd::Zero(2, 2);
  C(1, 1) = 1.0;
  const Eigen::MatrixXd D = inv_sqrt(C, 1e-12);
  CHECK(D.allFinite());
  CHECK(D(0, 0) == doctest::Approx(1e6).epsilon(1e-9));
  CHECK(D(1, 1) == doctest::Approx(1.0).epsilon(1e-9));
}

TEST_CASE("inv_sqrt rejects asymmetric and malformed input") {
  Eigen::MatrixXd bad(2, 2);
  bad << 1.0, 0.1, 0.2, 1.0;
  CHECK_THROWS_AS(inv_sqrt(bad), DimensionError);
  CHECK_THROWS_AS(inv_sqrt(Eigen::MatrixXd::Zero(2, 3)), DimensionError);
  CHECK_THROWS_AS(inv_sqrt(Eigen::MatrixXd::Identity(2, 2), 0.0), ConfigError);
  Eigen::MatrixXd nan_mat = Eigen::MatrixXd::Identity(2, 2);
  nan_mat(0, 0) = std::nan("");
  CHECK_THROWS_AS(inv_sqrt(nan_mat), NonFiniteError);
}

TEST_CASE("bias correction rescales by one minus gamma to the t") {
  DiagCovState d = diag_state(1, 0.9);
  d = diag_update(std::move(d), vec({1.0}));
  d = diag_update(std::move(d), vec({3.0}));
  const auto [mu_hat, c2_hat] = bias_correct(d);
  CHECK(c2_hat(0) == doctest::Approx(0.36 / 0.19).epsilon(1e-12));
  CHECK(mu_hat(0) == doctest::Approx(1.2 / 0.19).epsilon(1e-12));

  FullCovState f = full_state(1, 0.9);
  f = full_update(std::move(f), vec({1.0}));
  f = full_update(std::move(f), vec({3.0}));
  const auto [fmu_hat, c_hat] = bias_correct(f);
  CHECK(c_hat(0, 0) == doctest::Approx(0.36 / 0.19).epsilon(1e-12));
}

TEST_CASE("bias correction refuses an untouched state") {
  CHECK_THROWS_AS(bias_correct(diag_state(2, 0.9)), StateError);
  CHECK_THROWS_AS(bias_correct(full_state(2, 0.9)), StateError);
}

TEST_CASE("invalid construction and inputs are rejected") {
  CHECK_THROWS_AS(diag_state(2, 1.0), ConfigError);
  CHECK_THROWS_AS(diag_state(2, -0.1), ConfigError);
  CHECK_THROWS_AS(full_state(2, 1.5), ConfigError);

  DiagCovState d = diag_state(2, 0.9);
  CHECK_THROWS_AS(diag_update(std::move(d), vec({1.0})), DimensionError);
  FullCovState f = full_state(2, 0.9);
  CHECK_THROWS_AS(full_update(std::move(f), vec({1.0, 2.0, 3.0})),
                  DimensionError);

  DiagCovState d2 = diag_state(1, 0.9);
  Eigen::VectorXd bad(1);
  bad(0) = std::numeric_limits<double>::infinity();
  CHECK_THROWS_AS(diag_update(std::move(d2), bad), NonFiniteError);
}

TEST_CASE("gamma zero forgets instantly") {
  DiagCovState d = diag_state(1, 0.0);
  d = diag_update(std::move(d), vec({5.0}));
  d = diag_update(std::move(d), vec({-2.0}));
  // mu tracks the newest gradient; the spread collapses because gamma
  // multiplies the whole variance recurrence.
  CHECK(d.mu(0) == -2.0);
  CHECK(d.c2(0) == 0.0);
}
