#pragma once

#include <cmath>
#include <cstddef>
#include <vector>

#include <Eigen/Eigenvalues>

#include "ddsim/error.hpp"

namespace ddsim {

struct QuadratureRule {
  std::vector<double> nodes;
  std::vector<double> weights;  // sum to 1
};

/// Gauss-Hermite rule for a standard normal variable (physicists' nodes
/// scaled by sqrt(2)), via Golub-Welsch on the symmetric Jacobi matrix.
inline QuadratureRule gauss_hermite_normal(std::size_t n) {
  if (n == 0) throw ConfigError("quadrature order must be positive");
  Eigen::VectorXd diag = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(n));
  Eigen::VectorXd sub(static_cast<Eigen::Index>(n > 1 ? n - 1 : 0));
  for (Eigen::Index k = 0; k < sub.size(); ++k) sub[k] = std::sqrt(static_cast<double>(k + 1) / 2.0);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver;
  solver.computeFromTridiagonal(diag, sub, Eigen::ComputeEigenvectors);
  if (solver.info() != Eigen::Success) throw SimulationError("Gauss-Hermite eigen-decomposition failed");

  QuadratureRule rule;
  rule.nodes.resize(n);
  rule.weights.resize(n);
  double total = 0.0;
  for (std::size_t k = 0; k < n; ++k) {
    const auto kk = static_cast<Eigen::Index>(k);
    rule.nodes[k] = std::sqrt(2.0) * solver.eigenvalues()[kk];
    const double v0 = solver.eigenvectors()(0, kk);
    rule.weights[k] = v0 * v0;
    total += rule.weights[k];
  }
  for (auto& w : rule.weights) w /= total;
  // the eigenvalue solver leaves the symmetric nodes off by rounding; enforce it
  for (std::size_t k = 0; k < n / 2; ++k) {
    const double x = 0.5 * (rule.nodes[n - 1 - k] - rule.nodes[k]);
    const double w = 0.5 * (rule.weights[n - 1 - k] + rule.weights[k]);
    rule.nodes[k] = -x;
    rule.nodes[n - 1 - k] = x;
    rule.weights[k] = rule.weights[n - 1 - k] = w;
  }
  if (n % 2 == 1) rule.nodes[n / 2] = 0.0;
  return rule;
}

}  // namespace ddsim
