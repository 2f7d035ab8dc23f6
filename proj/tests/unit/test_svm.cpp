#include <catch_amalgamated.hpp>

#include <cmath>

#include "oracles.hpp"
#include "srcsel/common.hpp"
#include "srcsel/svm.hpp"

using namespace srcsel;
using namespace srcsel::svm;

namespace {

Eigen::MatrixXd rbf_gram(const Eigen::MatrixXd& X, double gamma) {
  Eigen::MatrixXd K(X.rows(), X.rows());
  for (long i = 0; i < X.rows(); ++i) {
    for (long j = 0; j < X.rows(); ++j) K(i, j) = std::exp(-gamma * (X.row(i) - X.row(j)).squaredNorm());
  }
  return K;
}

// Largest violation of the dual optimality conditions, computed from scratch.
double kkt_gap(const DualProblem& p, const std::vector<double>& alpha) {
  const std::size_t n = alpha.size();
  double up = -INFINITY, low = INFINITY;
  for (std::size_t t = 0; t < n; ++t) {
    double grad = p.linear[t];
    for (std::size_t s = 0; s < n; ++s) {
      grad += p.sign[t] * p.sign[s] * p.kernel(static_cast<long>(t), static_cast<long>(s)) * alpha[s];
    }
    const double value = -p.sign[t] * grad;
    const bool in_up = (p.sign[t] == 1 && alpha[t] < p.C) || (p.sign[t] == -1 && alpha[t] > 0.0);
    const bool in_low = (p.sign[t] == 1 && alpha[t] > 0.0) || (p.sign[t] == -1 && alpha[t] < p.C);
    if (in_up) up = std::max(up, value);
    if (in_low) low = std::min(low, value);
  }
  return up - low;
}

}  // namespace

TEST_CASE("rbf kernel", "[svm]") {
  const Eigen::VectorXd a = Eigen::Vector2d(0.0, 0.0);
  const Eigen::VectorXd b = Eigen::Vector2d(1.0, 1.0);
  REQUIRE(rbf(a, a, 0.7) == 1.0);
  REQUIRE(rbf(a, b, 0.5) == Catch::Approx(std::exp(-1.0)));
}

TEST_CASE("two-point problem matches the closed form", "[svm]") {
  Eigen::MatrixXd X(2, 1);
  X << -1.0, 1.0;
  const auto m = train_classifier(X, {1, -1}, 10.0, 1.0, 1e-8);
  const double alpha = 1.0 / (1.0 - std::exp(-4.0));
  REQUIRE(m.rho == Catch::Approx(0.0).margin(1e-6));
  double total = 0.0;
  for (double c : m.coef) total += std::abs(c);
  REQUIRE(total == Catch::Approx(2.0 * alpha).epsilon(1e-6));
  Eigen::VectorXd left(1), right(1);
  left << -1.0;
  right << 1.0;
  REQUIRE(m.decision(left) == Catch::Approx(1.0).epsilon(1e-6));
  REQUIRE(m.decision(right) == Catch::Approx(-1.0).epsilon(1e-6));
}

TEST_CASE("solutions satisfy the optimality conditions", "[svm][property]") {
  Rng rng(12);
  for (int trial = 0; trial < 20; ++trial) {
    const int n = 6 + static_cast<int>(rng.below(15));
    const Eigen::MatrixXd X = srcsel::testing::random_gaussian(n, 2, rng);
    DualProblem p;
    p.kernel = rbf_gram(X, 0.5);
    p.C = 0.5 + 2.0 * rng.uniform();
    for (int i = 0; i < n; ++i) {
      p.sign.push_back(X(i, 0) + 0.3 * rng.normal() > 0.0 ? 1 : -1);
      p.linear.push_back(-1.0);
    }
    const auto sol = solve(p, 1e-6);
    REQUIRE(sol.converged);
    double balance = 0.0;
    for (int i = 0; i < n; ++i) {
      REQUIRE(sol.alpha[static_cast<std::size_t>(i)] >= 0.0);
      REQUIRE(sol.alpha[static_cast<std::size_t>(i)] <= p.C + 1e-12);
      balance += p.sign[static_cast<std::size_t>(i)] * sol.alpha[static_cast<std::size_t>(i)];
    }
    REQUIRE(std::abs(balance) < 1e-9);
    REQUIRE(kkt_gap(p, sol.alpha) < 1e-5);
  }
}

TEST_CASE("classifier separates a margin", "[svm]") {
  Eigen::MatrixXd X(20, 1);
  std::vector<int> y;
  for (int i = 0; i < 10; ++i) {
    X(i, 0) = -1.0 - 0.2 * i;
    y.push_back(1);
  }
  for (int i = 10; i < 20; ++i) {
    X(i, 0) = 1.0 + 0.2 * (i - 10);
    y.push_back(-1);
  }
  const auto m = train_classifier(X, y, 1.0, 1.0);
  for (int i = 0; i < 20; ++i) {
    const Eigen::VectorXd x = X.row(i).transpose();
    REQUIRE((m.decision(x) > 0.0) == (y[static_cast<std::size_t>(i)] == 1));
  }
}

TEST_CASE("regressor stays within the tube", "[svm]") {
  Eigen::MatrixXd X(21, 1);
  std::vector<double> y;
  for (int i = 0; i <= 20; ++i) {
    X(i, 0) = i / 20.0;
    y.push_back(-X(i, 0));
  }
  const auto m = train_regressor(X, y, 1.0, 0.1, 1.0);
  for (double x : {0.1, 0.5, 0.9}) {
    Eigen::VectorXd v(1);
    v << x;
    REQUIRE(std::abs(m.decision(v) + x) <= 0.15);
  }
}

TEST_CASE("machines check input width", "[svm]") {
  Eigen::MatrixXd X(2, 2);
  X << 0, 0, 1, 1;
  const auto m = train_classifier(X, {1, -1}, 1.0, 1.0);
  REQUIRE_THROWS_AS(m.decision(Eigen::VectorXd::Zero(3)), DimensionError);
  REQUIRE_THROWS_AS(train_classifier(X, {1}, 1.0, 1.0), DimensionError);
}
