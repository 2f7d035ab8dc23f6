#pragma once

// Support-vector training by sequential minimal optimization with
// second-order working-set selection, for C-SVC and epsilon-SVR.

#include <cstdint>
#include <vector>

#include <Eigen/Dense>

namespace srcsel::svm {

/// exp(-gamma * |a - b|^2)
double rbf(const Eigen::VectorXd& a, const Eigen::VectorXd& b, double gamma);

/// Dual problem  min 0.5 a'Qa + p'a  s.t.  y'a = 0,  0 <= a_i <= C,
/// where Q_ij = y_i y_j K_ij and y_i is +1 or -1.
struct DualProblem {
  Eigen::MatrixXd kernel;  // K, not yet multiplied by the labels
  std::vector<double> linear;
  std::vector<int> sign;
  double C = 1.0;
};

struct DualSolution {
  std::vector<double> alpha;
  double rho = 0.0;  // decision = sum_i y_i a_i K(x_i, x) - rho
  std::size_t iterations = 0;
  bool converged = false;
};

/// Stops when the maximal KKT violation drops below `tolerance`.
DualSolution solve(const DualProblem& problem, double tolerance = 1e-3, std::size_t max_iterations = 0);

/// Kernel expansion sum_i coef_i K(sv_i, x) - rho.
struct KernelMachine {
  Eigen::MatrixXd vectors;  // one support vector per row
  std::vector<double> coef;
  double rho = 0.0;
  double gamma = 1.0;

  double decision(const Eigen::VectorXd& x) const;
};

/// Binary classifier; `labels` are +1 / -1 and the decision is positive for +1.
KernelMachine train_classifier(const Eigen::MatrixXd& X, const std::vector<int>& labels, double C, double gamma,
                               double tolerance = 1e-3);

/// Epsilon-insensitive regression; the decision value is the estimate.
KernelMachine train_regressor(const Eigen::MatrixXd& X, const std::vector<double>& targets, double C, double epsilon,
                              double gamma, double tolerance = 1e-3);

}  // namespace srcsel::svm
