#pragma once

// Fast invariant suite behind `streamkern verify`: orthonormality quadrature,
// the incremental-vs-direct oracle, both recursion consistency checks, and
// the schedule. Reference values are computed from scratch here (dense
// factorizations, quadrature), never through the update paths they check.

#include <Eigen/Dense>
#include <cmath>
#include <sstream>
#include <string>
#include <vector>

#include "streamkern/eigensystems.hpp"
#include "streamkern/projection.hpp"
#include "streamkern/rng.hpp"
#include "streamkern/simulate.hpp"

namespace streamkern {

struct VerifyResult {
  std::string name;
  bool pass = false;
  std::string detail;
};

namespace detail_verify {

inline double orthonormality_defect(const EigenSystem& sys, index_t count, int nodes_per_dim) {
  const MeasureQuadrature quad = sys.measure().quadrature(nodes_per_dim);
  std::vector<double> row(count);
  Eigen::MatrixXd gram = Eigen::MatrixXd::Zero(count, count);
  for (std::size_t q = 0; q < quad.size(); ++q) {
    sys.basis_row(quad.node(q), count, row);
    for (index_t i = 0; i < count; ++i)
      for (index_t j = i; j < count; ++j) gram(i, j) += quad.weights[q] * row[i] * row[j];
  }
  double worst = 0.0;
  for (index_t i = 0; i < count; ++i)
    for (index_t j = i; j < count; ++j)
      worst = std::max(worst, std::abs(gram(i, j) - (i == j ? 1.0 : 0.0)));
  return worst;
}

struct StreamCheck {
  double max_oracle_gap = 0.0;
  double max_row_gap = 0.0;
  double max_column_gap = 0.0;
  int add_events = 0;
};

// One Ex2-style stream; at every step compare theta to a dense refit, the row
// recursion to Phi s, and block additions to the column recursion.
inline StreamCheck run_stream_check(int n_total, std::uint64_t seed) {
  EstimatorConfig cfg{EigenSystem::sobolev_min(), 1.0, 1, 0.5, 1};
  ProjectionState state(cfg);
  CounterRng xrng = CounterRng::substream(seed, {0, kSubstreamX});
  CounterRng nrng = CounterRng::substream(seed, {0, kSubstreamNoise});
  StreamCheck out;
  for (int n = 1; n <= n_total; ++n) {
    const double x = xrng.next_uniform();
    const double y = regression_truth(ExampleId::Ex2, std::span<const double>(&x, 1)) +
                     nrng.next_normal(5.0);
    const ProjectionState prev = state;
    const ObserveResult res = state.observe(x, y);
    if (!state.initialized()) continue;

    // Dense normal-equations refit from history.
    const std::int64_t rows = state.sample_count();
    const index_t basis = state.basis_count();
    Eigen::MatrixXd design(rows, basis);
    Eigen::VectorXd response(rows);
    std::vector<double> row(basis);
    for (std::int64_t i = 0; i < rows; ++i) {
      cfg.system.basis_row(state.history_x(i), basis, row);
      for (index_t j = 0; j < basis; ++j) design(i, j) = row[j];
      response(i) = state.history_y(i);
    }
    const Eigen::VectorXd direct =
        (design.transpose() * design).ldlt().solve(design.transpose() * response);
    const double scale = std::max(1.0, direct.norm());
    out.max_oracle_gap = std::max(out.max_oracle_gap, (state.theta() - direct).norm() / scale);

    if (prev.initialized() && res.bases_added == 0 && !res.initialized_now) {
      Eigen::VectorXd psi(prev.basis_count());
      cfg.system.basis_row(std::span<const double>(&x, 1), prev.basis_count(),
                           std::span<double>(psi.data(), psi.size()));
      const double residual = y - prev.theta().dot(psi);
      const Eigen::VectorXd rec = theta_row_recursion(prev.theta(), state.phi(), psi, residual);
      out.max_row_gap =
          std::max(out.max_row_gap, (rec - state.theta()).norm() / std::max(1.0, state.theta().norm()));
    }

    if (prev.initialized() && res.bases_added == 1) {
      // Pre-add state: replay the row update with a frozen schedule.
      ProjectionSnapshot snap = prev.snapshot();
      snap.c = 1e30;
      ProjectionState pre = ProjectionState::restore(snap);
      pre.observe(x, y);
      const index_t nb = pre.basis_count();
      Eigen::MatrixXd pre_design(rows, nb);
      Eigen::VectorXd newcol(rows);
      std::vector<double> pre_row(nb);
      for (std::int64_t i = 0; i < rows; ++i) {
        cfg.system.basis_row(pre.history_x(i), nb, pre_row);
        for (index_t j = 0; j < nb; ++j) pre_design(i, j) = pre_row[j];
        newcol(i) = cfg.system.basis_eval(nb + 1, pre.history_x(i));
      }
      const Eigen::VectorXd residual = response - pre_design * pre.theta();
      const Eigen::VectorXd b = pre_design.transpose() * newcol;
      const Eigen::VectorXd phib = pre.phi() * b;
      const double pivot = newcol.squaredNorm() - b.dot(phib);
      const double step = newcol.dot(residual) / pivot;
      Eigen::VectorXd want(nb + 1);
      want.head(nb) = pre.theta() - step * phib;
      want(nb) = step;
      out.max_column_gap = std::max(
          out.max_column_gap, (state.theta() - want).norm() / std::max(1.0, want.norm()));
      ++out.add_events;
    }
  }
  return out;
}

inline std::string format_gap(double v) {
  std::ostringstream ss;
  ss.precision(2);
  ss << std::scientific << v;
  return ss.str();
}

}  // namespace detail_verify

inline std::vector<VerifyResult> run_verify_suite(const std::string& filter = "") {
  std::vector<VerifyResult> results;
  const auto add = [&](const std::string& name, bool pass, const std::string& detail) {
    if (!filter.empty() && name.find(filter) == std::string::npos) return;
    results.push_back({name, pass, detail});
  };
  const auto wanted = [&](const std::string& name) {
    return filter.empty() || name.find(filter) != std::string::npos;
  };

  struct OrthoCase {
    const char* label;
    EigenSystem system;
    int nodes;
  };
  const OrthoCase ortho_cases[] = {
      {"ortho:sobolev_min", EigenSystem::sobolev_min(), 0},
      {"ortho:periodic_bernoulli", EigenSystem::periodic_bernoulli(), 0},
      {"ortho:gaussian", EigenSystem::gaussian(1.0, 1.0), 0},
      {"ortho:tensor_sobolev_2d", EigenSystem::tensor_product(EigenSystem::sobolev_min(), 2), 96},
  };
  for (const OrthoCase& oc : ortho_cases) {
    if (!wanted(oc.label)) continue;
    const double defect = detail_verify::orthonormality_defect(oc.system, 20, oc.nodes);
    add(oc.label, defect < 1e-6,
        "max |<psi_i,psi_j> - delta_ij| = " + detail_verify::format_gap(defect));
  }

  if (wanted("oracle:incremental_vs_direct") || wanted("recursion:row") ||
      wanted("recursion:column")) {
    const detail_verify::StreamCheck check = detail_verify::run_stream_check(300, 12345);
    add("oracle:incremental_vs_direct", check.max_oracle_gap < 1e-8,
        "max relative theta gap = " + detail_verify::format_gap(check.max_oracle_gap) +
            " over 300 streamed observations");
    add("recursion:row", check.max_row_gap < 1e-9,
        "max gap row-recursion vs Phi s = " + detail_verify::format_gap(check.max_row_gap));
    add("recursion:column", check.max_column_gap < 1e-8 && check.add_events >= 4,
        "max gap column-recursion vs block update = " +
            detail_verify::format_gap(check.max_column_gap) + " over " +
            std::to_string(check.add_events) + " additions");
  }

  if (wanted("schedule")) {
    bool ok = schedule_threshold(2, 1.0, 1, 0.5) == 4 && schedule_threshold(3, 1.0, 1, 0.5) == 13;
    double worst = 0.0;
    index_t basis = 1;
    for (std::int64_t n = 1; n <= 100000 && ok; n = (n < 2000 ? n + 1 : n + 211)) {
      while (schedule_threshold(basis + 1, 1.0, 1, 0.5) <= n) ++basis;
      worst = std::max(worst, std::abs(static_cast<double>(basis) - std::cbrt(n / 0.5)));
      if (worst > 1.0) ok = false;
    }
    add("schedule", ok, "max |N - (n/c)^{1/3}| = " + detail_verify::format_gap(worst));
  }

  return results;
}

}  // namespace streamkern
