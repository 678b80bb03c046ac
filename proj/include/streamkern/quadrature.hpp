#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <vector>

namespace streamkern {

struct QuadratureRule {
  std::vector<double> nodes;
  std::vector<double> weights;

  template <typename F>
  double integrate(F&& f) const {
    double acc = 0.0;
    for (std::size_t i = 0; i < nodes.size(); ++i) acc += weights[i] * f(nodes[i]);
    return acc;
  }
};

namespace detail {

// Golub-Welsch: nodes are eigenvalues of the symmetric tridiagonal Jacobi
// matrix (zero diagonal for both rules below), weights are mu0 * v0^2.
inline QuadratureRule golub_welsch(const Eigen::VectorXd& offdiag, double mu0) {
  const int n = static_cast<int>(offdiag.size()) + 1;
  Eigen::MatrixXd jacobi = Eigen::MatrixXd::Zero(n, n);
  for (int i = 0; i + 1 < n; ++i) {
    jacobi(i, i + 1) = offdiag(i);
    jacobi(i + 1, i) = offdiag(i);
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(jacobi);
  QuadratureRule rule;
  rule.nodes.resize(n);
  rule.weights.resize(n);
  for (int i = 0; i < n; ++i) {
    rule.nodes[i] = es.eigenvalues()(i);
    const double v0 = es.eigenvectors()(0, i);
    rule.weights[i] = mu0 * v0 * v0;
  }
  return rule;
}

}  // namespace detail

// n-point Gauss-Legendre on [-1,1] (weight function 1).
inline QuadratureRule gauss_legendre(int n) {
  Eigen::VectorXd b(n - 1);
  for (int k = 1; k < n; ++k) b(k - 1) = k / std::sqrt(4.0 * k * k - 1.0);
  return detail::golub_welsch(b, 2.0);
}

// Gauss-Legendre mapped to [0,1].
inline QuadratureRule gauss_legendre_01(int n) {
  QuadratureRule rule = gauss_legendre(n);
  for (auto& x : rule.nodes) x = 0.5 * (x + 1.0);
  for (auto& w : rule.weights) w *= 0.5;
  return rule;
}

// n-point Gauss-Hermite, weight e^{-x^2} on the real line.
inline QuadratureRule gauss_hermite(int n) {
  Eigen::VectorXd b(n - 1);
  for (int k = 1; k < n; ++k) b(k - 1) = std::sqrt(0.5 * k);
  return detail::golub_welsch(b, std::sqrt(M_PI));
}

}  // namespace streamkern
