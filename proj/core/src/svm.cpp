#include "srcsel/svm.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "srcsel/common.hpp"

namespace srcsel::svm {
namespace {

constexpr double kTau = 1e-12;
constexpr double kInf = std::numeric_limits<double>::infinity();

Eigen::MatrixXd gram(const Eigen::MatrixXd& X, double gamma) {
  const long n = X.rows();
  Eigen::MatrixXd K(n, n);
  for (long i = 0; i < n; ++i) {
    for (long j = i; j < n; ++j) {
      K(i, j) = K(j, i) = rbf(X.row(i).transpose(), X.row(j).transpose(), gamma);
    }
  }
  return K;
}

KernelMachine collect(const Eigen::MatrixXd& X, const std::vector<double>& coef, double rho, double gamma) {
  KernelMachine machine;
  machine.rho = rho;
  machine.gamma = gamma;
  std::vector<long> keep;
  for (std::size_t i = 0; i < coef.size(); ++i) {
    if (coef[i] != 0.0) keep.push_back(static_cast<long>(i));
  }
  machine.vectors.resize(static_cast<long>(keep.size()), X.cols());
  for (std::size_t r = 0; r < keep.size(); ++r) {
    machine.vectors.row(static_cast<long>(r)) = X.row(keep[r]);
    machine.coef.push_back(coef[static_cast<std::size_t>(keep[r])]);
  }
  return machine;
}

}  // namespace

double rbf(const Eigen::VectorXd& a, const Eigen::VectorXd& b, double gamma) {
  return std::exp(-gamma * (a - b).squaredNorm());
}

double KernelMachine::decision(const Eigen::VectorXd& x) const {
  if (x.size() != vectors.cols() && vectors.rows() > 0) {
    throw DimensionError("kernel machine expects " + std::to_string(vectors.cols()) + " features, got " +
                         std::to_string(x.size()));
  }
  double sum = 0.0;
  for (long i = 0; i < vectors.rows(); ++i) {
    sum += coef[static_cast<std::size_t>(i)] * rbf(vectors.row(i).transpose(), x, gamma);
  }
  return sum - rho;
}

DualSolution solve(const DualProblem& problem, double tolerance, std::size_t max_iterations) {
  const std::size_t n = problem.linear.size();
  if (problem.sign.size() != n || static_cast<std::size_t>(problem.kernel.rows()) != n ||
      static_cast<std::size_t>(problem.kernel.cols()) != n) {
    throw DimensionError("svm::solve: inconsistent problem dimensions");
  }
  if (!(problem.C > 0.0)) throw ConfigError("svm::solve: C must be positive");
  if (max_iterations == 0) max_iterations = std::max<std::size_t>(10000000, 100 * n);

  const double C = problem.C;
  const auto& y = problem.sign;
  auto Q = [&](std::size_t i, std::size_t j) {
    return static_cast<double>(y[i] * y[j]) * problem.kernel(static_cast<long>(i), static_cast<long>(j));
  };

  DualSolution sol;
  sol.alpha.assign(n, 0.0);
  std::vector<double> G = problem.linear;  // gradient Qa + p at a = 0
  auto upper = [&](std::size_t i) { return sol.alpha[i] >= C; };
  auto lower = [&](std::size_t i) { return sol.alpha[i] <= 0.0; };

  while (sol.iterations < max_iterations) {
    // Working set: i maximizes the violation, j maximizes the second-order decrease.
    double gmax = -kInf, gmax2 = -kInf;
    std::size_t i = n, j = n;
    for (std::size_t t = 0; t < n; ++t) {
      if (y[t] == +1) {
        if (!upper(t) && -G[t] >= gmax) { gmax = -G[t]; i = t; }
      } else {
        if (!lower(t) && G[t] >= gmax) { gmax = G[t]; i = t; }
      }
    }
    double best = kInf;
    for (std::size_t t = 0; t < n && i < n; ++t) {
      double grad_diff = 0.0, quad = 0.0;
      if (y[t] == +1) {
        if (lower(t)) continue;
        grad_diff = gmax + G[t];
        gmax2 = std::max(gmax2, G[t]);
        quad = Q(i, i) + Q(t, t) - 2.0 * y[i] * Q(i, t);
      } else {
        if (upper(t)) continue;
        grad_diff = gmax - G[t];
        gmax2 = std::max(gmax2, -G[t]);
        quad = Q(i, i) + Q(t, t) + 2.0 * y[i] * Q(i, t);
      }
      if (grad_diff > 0.0) {
        const double obj = -(grad_diff * grad_diff) / (quad > 0.0 ? quad : kTau);
        if (obj <= best) { best = obj; j = t; }
      }
    }
    if (i == n || j == n || gmax + gmax2 < tolerance) {
      sol.converged = true;
      break;
    }
    ++sol.iterations;

    const double old_i = sol.alpha[i], old_j = sol.alpha[j];
    double& ai = sol.alpha[i];
    double& aj = sol.alpha[j];
    if (y[i] != y[j]) {
      double quad = Q(i, i) + Q(j, j) + 2.0 * Q(i, j);
      if (quad <= 0.0) quad = kTau;
      const double delta = (-G[i] - G[j]) / quad;
      const double diff = ai - aj;
      ai += delta;
      aj += delta;
      if (diff > 0.0) {
        if (aj < 0.0) { aj = 0.0; ai = diff; }
      } else {
        if (ai < 0.0) { ai = 0.0; aj = -diff; }
      }
      if (diff > 0.0) {
        if (ai > C) { ai = C; aj = C - diff; }
      } else {
        if (aj > C) { aj = C; ai = C + diff; }
      }
    } else {
      double quad = Q(i, i) + Q(j, j) - 2.0 * Q(i, j);
      if (quad <= 0.0) quad = kTau;
      const double delta = (G[i] - G[j]) / quad;
      const double sum = ai + aj;
      ai -= delta;
      aj += delta;
      if (sum > C) {
        if (ai > C) { ai = C; aj = sum - C; }
      } else {
        if (aj < 0.0) { aj = 0.0; ai = sum; }
      }
      if (sum > C) {
        if (aj > C) { aj = C; ai = sum - C; }
      } else {
        if (ai < 0.0) { ai = 0.0; aj = sum; }
      }
    }
    const double di = ai - old_i, dj = aj - old_j;
    for (std::size_t t = 0; t < n; ++t) G[t] += Q(i, t) * di + Q(j, t) * dj;
  }

  // Offset from free variables, or the midpoint of the feasible interval.
  double ub = kInf, lb = -kInf, sum_free = 0.0;
  std::size_t free = 0;
  for (std::size_t t = 0; t < n; ++t) {
    const double yg = y[t] * G[t];
    if (upper(t)) {
      if (y[t] == -1) ub = std::min(ub, yg); else lb = std::max(lb, yg);
    } else if (lower(t)) {
      if (y[t] == +1) ub = std::min(ub, yg); else lb = std::max(lb, yg);
    } else {
      ++free;
      sum_free += yg;
    }
  }
  sol.rho = free > 0 ? sum_free / static_cast<double>(free) : (ub + lb) / 2.0;
  return sol;
}

KernelMachine train_classifier(const Eigen::MatrixXd& X, const std::vector<int>& labels, double C, double gamma,
                               double tolerance) {
  const std::size_t n = labels.size();
  if (static_cast<std::size_t>(X.rows()) != n) throw DimensionError("train_classifier: label count mismatch");
  DualProblem problem{gram(X, gamma), std::vector<double>(n, -1.0), labels, C};
  const DualSolution sol = solve(problem, tolerance);
  std::vector<double> coef(n);
  for (std::size_t i = 0; i < n; ++i) coef[i] = labels[i] * sol.alpha[i];
  return collect(X, coef, sol.rho, gamma);
}

KernelMachine train_regressor(const Eigen::MatrixXd& X, const std::vector<double>& targets, double C, double epsilon,
                              double gamma, double tolerance) {
  const std::size_t n = targets.size();
  if (static_cast<std::size_t>(X.rows()) != n) throw DimensionError("train_regressor: target count mismatch");
  // Two copies of every point: alpha (sign +1) and alpha* (sign -1).
  const Eigen::MatrixXd K = gram(X, gamma);
  DualProblem problem;
  problem.kernel.resize(static_cast<long>(2 * n), static_cast<long>(2 * n));
  for (std::size_t a = 0; a < 2 * n; ++a) {
    for (std::size_t b = 0; b < 2 * n; ++b) {
      problem.kernel(static_cast<long>(a), static_cast<long>(b)) = K(static_cast<long>(a % n), static_cast<long>(b % n));
    }
  }
  problem.linear.resize(2 * n);
  problem.sign.resize(2 * n);
  for (std::size_t i = 0; i < n; ++i) {
    problem.linear[i] = epsilon - targets[i];
    problem.sign[i] = +1;
    problem.linear[i + n] = epsilon + targets[i];
    problem.sign[i + n] = -1;
  }
  problem.C = C;
  const DualSolution sol = solve(problem, tolerance);
  std::vector<double> coef(n);
  for (std::size_t i = 0; i < n; ++i) coef[i] = sol.alpha[i] - sol.alpha[i + n];
  return collect(X, coef, sol.rho, gamma);
}

}  // namespace srcsel::svm
