#pragma once

// Independent reference computations for checking the streaming estimator.
// Everything here rebuilds matrices from history and solves with dense
// factorizations; nothing reuses the rank-one/block update paths.

#include <Eigen/Dense>

#include "streamkern/projection.hpp"

namespace oracles {

inline Eigen::MatrixXd rebuild_design(const streamkern::ProjectionState& state,
                                      streamkern::index_t basis) {
  const std::int64_t rows = state.sample_count();
  Eigen::MatrixXd design(rows, basis);
  for (std::int64_t i = 0; i < rows; ++i)
    for (streamkern::index_t j = 1; j <= basis; ++j)
      design(i, j - 1) = state.config().system.basis_eval(j, state.history_x(i));
  return design;
}

inline Eigen::VectorXd rebuild_response(const streamkern::ProjectionState& state) {
  const std::int64_t rows = state.sample_count();
  Eigen::VectorXd y(rows);
  for (std::int64_t i = 0; i < rows; ++i) y(i) = state.history_y(i);
  return y;
}

// Normal-equations refit from scratch with a dense factorization.
inline Eigen::VectorXd dense_refit(const streamkern::ProjectionState& state) {
  const Eigen::MatrixXd design = rebuild_design(state, state.basis_count());
  const Eigen::MatrixXd gram = design.transpose() * design;
  const Eigen::VectorXd rhs = design.transpose() * rebuild_response(state);
  return gram.ldlt().solve(rhs);
}

inline Eigen::MatrixXd dense_inverse_gram(const streamkern::ProjectionState& state) {
  const Eigen::MatrixXd design = rebuild_design(state, state.basis_count());
  const Eigen::MatrixXd gram = design.transpose() * design;
  return gram.inverse();
}

// Column recursion for theta when basis N+1 joins: from the pre-add state,
//   theta' = [theta; 0] + (v^T residual / k) [-Phi b; 1]
// with v the new column over history, b = Psi^T v, k the Schur pivot.
inline Eigen::VectorXd column_recursion_theta(const streamkern::ProjectionState& pre_add) {
  const streamkern::index_t basis = pre_add.basis_count();
  const std::int64_t rows = pre_add.sample_count();
  const Eigen::MatrixXd design = rebuild_design(pre_add, basis);
  Eigen::VectorXd newcol(rows);
  for (std::int64_t i = 0; i < rows; ++i)
    newcol(i) = pre_add.config().system.basis_eval(basis + 1, pre_add.history_x(i));
  const Eigen::VectorXd y = rebuild_response(pre_add);
  const Eigen::VectorXd residual = y - design * pre_add.theta();
  const Eigen::VectorXd b = design.transpose() * newcol;
  const Eigen::VectorXd phib = pre_add.phi() * b;
  const double pivot = newcol.squaredNorm() - b.dot(phib);
  const double scale = newcol.dot(residual) / pivot;
  Eigen::VectorXd out(basis + 1);
  out.head(basis) = pre_add.theta() - scale * phib;
  out(basis) = scale;
  return out;
}

inline double relative_gap(const Eigen::VectorXd& got, const Eigen::VectorXd& want) {
  const double scale = std::max(1.0, want.norm());
  return (got - want).norm() / scale;
}

}  // namespace oracles
