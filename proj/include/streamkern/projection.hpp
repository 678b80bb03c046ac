#pragma once

// Streaming least-squares projection estimator.
//
// The estimator maintains the empirical risk minimizer over
// span(psi_1, ..., psi_N) as observations arrive:
//
//   row update      Phi <- Phi - (Phi psi)(Phi psi)^T / (1 + psi^T Phi psi)
//   basis addition  block inversion with Schur pivot k = c - b^T Phi b,
//                   where c = |v|^2, b = Psi^T v, v the new basis column
//                   evaluated over the covariate history.
//
// Phi is the inverse Gram matrix (Psi^T Psi)^{-1}, s = Psi^T Y, and
// theta = Phi s after every update. The basis count follows the schedule
// N(n) = max{ N : floor(c N^{(2 alpha + d)/d}) <= n }, floored at n0.
//
// The Gram matrix is singular until enough rows accumulate, so the first
// n0 + warm_buffer observations are buffered and Phi is then formed by a
// direct inversion; streaming updates take over from there. Degenerate
// basis additions (pivot below jitter_tol) are deferred and retried on each
// subsequent observation, so the schedule holds up to slack one.

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "streamkern/eigensystems.hpp"
#include "streamkern/errors.hpp"

namespace streamkern {

struct EstimatorConfig {
  EigenSystem system;
  double alpha = 1.0;  // smoothness; requires alpha > d/2
  int d = 1;           // covariate dimension
  double c = 1.0;      // schedule constant
  index_t n0 = 1;      // initial basis count
  double clamp = std::numeric_limits<double>::infinity();
  double jitter_tol = 1e-10;
  int warm_buffer = 3;  // observations buffered beyond n0 before init

  // The alpha > d/2 requirement belongs to the default schedule exponent; a
  // custom schedule (the stacked additive design) carries its own rate.
  void validate(bool check_rate_condition = true) const {
    if (check_rate_condition && !(alpha > 0.5 * d))
      throw ConfigError("estimator requires alpha > d/2");
    if (!(c > 0.0)) throw ConfigError("schedule constant c must be positive");
    if (n0 < 1) throw ConfigError("initial basis count must be >= 1");
    if (d != system.dimension())
      throw ConfigError("config dimension does not match the eigensystem");
  }
};

// Sample count at which the basis count first reaches `basis`:
// floor(c * basis^{(2 alpha + d)/d}).
inline std::int64_t schedule_threshold(index_t basis, double alpha, int d, double c) {
  const long double e = (2.0L * static_cast<long double>(alpha) + d) / d;
  const long double v =
      static_cast<long double>(c) * std::pow(static_cast<long double>(basis), e);
  if (v >= 9.0e18L) return std::numeric_limits<std::int64_t>::max();
  return static_cast<std::int64_t>(std::floor(v * (1.0L + 1e-13L) + 1e-9L));
}

// Largest N with floor(c N^{(2 alpha + d)/d}) <= n, floored at n0.
inline index_t schedule_basis_count(std::int64_t n, double alpha, int d, double c,
                                    index_t n0 = 1) {
  index_t basis = n0;
  while (schedule_threshold(basis + 1, alpha, d, c) <= n) ++basis;
  return basis;
}

// (Psi^T Psi + psi psi^T)^{-1} from Phi = (Psi^T Psi)^{-1} by Sherman-Morrison.
// Throws DegeneratePivotError when 1 + psi^T Phi psi falls at or below
// jitter_tol (unreachable for SPD Phi; kept as the contract for callers that
// defer).
inline Eigen::MatrixXd sherman_morrison_update(const Eigen::MatrixXd& phi,
                                               const Eigen::VectorXd& psi,
                                               double jitter_tol = 1e-10) {
  const Eigen::VectorXd w = phi * psi;
  const double den = 1.0 + psi.dot(w);
  if (!(den > jitter_tol))
    throw DegeneratePivotError("Sherman-Morrison denominator below tolerance");
  Eigen::MatrixXd out = phi;
  out.noalias() -= (w / den) * w.transpose();
  return out;
}

// Row recursion for theta: with Phi already row-updated, the new coefficient
// vector is theta + Phi psi (y - f(x)). Equals Phi s; exposed as the
// cross-check path.
inline Eigen::VectorXd theta_row_recursion(const Eigen::VectorXd& theta_prev,
                                           const Eigen::MatrixXd& phi_updated,
                                           const Eigen::VectorXd& psi, double residual) {
  return theta_prev + phi_updated * psi * residual;
}

struct ObserveResult {
  bool initialized_now = false;
  int bases_added = 0;
  bool basis_deferred = false;
  // Row update hit a degenerate pivot; the observation was rolled back and
  // the state is unchanged.
  bool row_deferred = false;
};

// Raw state record, sufficient to resume streaming bit-exactly.
struct ProjectionSnapshot {
  std::string kernel_id;
  double alpha = 1.0;
  int d = 1;
  double c = 1.0;
  index_t n0 = 1;
  double clamp = std::numeric_limits<double>::infinity();
  double jitter_tol = 1e-10;
  int warm_buffer = 3;
  std::int64_t n = 0;
  index_t basis = 0;
  bool initialized = false;
  std::uint64_t flops = 0;
  std::vector<double> theta;
  std::vector<double> moment;
  std::vector<double> phi_upper;  // row-major upper triangle, N(N+1)/2 values
  std::vector<double> xs;
  std::vector<double> ys;
};

class ProjectionState {
 public:
  // Maps a sample count to the target basis count. The default is the
  // config schedule; the additive model installs a stacked variant.
  using ScheduleFn = std::function<index_t(std::int64_t)>;

  explicit ProjectionState(EstimatorConfig cfg, ScheduleFn schedule = {})
      : cfg_(std::move(cfg)), custom_schedule_(std::move(schedule)) {
    cfg_.validate(!custom_schedule_);
    sched_basis_ = cfg_.n0;
    next_threshold_ = schedule_threshold(sched_basis_ + 1, cfg_.alpha, cfg_.d, cfg_.c);
  }

  const EstimatorConfig& config() const { return cfg_; }
  bool initialized() const { return initialized_; }
  index_t basis_count() const { return N_; }
  std::int64_t sample_count() const { return n_; }
  const Eigen::MatrixXd& phi() const { return Phi_; }
  const Eigen::VectorXd& moment() const { return s_; }
  const Eigen::VectorXd& theta() const { return theta_; }
  std::uint64_t flops() const { return flops_; }

  std::span<const double> history_x(std::int64_t i) const {
    return std::span<const double>(xs_.data() + i * cfg_.d, cfg_.d);
  }
  double history_y(std::int64_t i) const { return ys_[i]; }

  ObserveResult observe(std::span<const double> x, double y) {
    ObserveResult result;
    xs_.insert(xs_.end(), x.begin(), x.end());
    ys_.push_back(y);
    ++n_;

    if (!initialized_) {
      if (n_ >= cfg_.n0 + cfg_.warm_buffer && try_initialize()) {
        result.initialized_now = true;
        result.bases_added = grow_to_target(result.basis_deferred);
        refresh_theta();
      }
      return result;
    }

    const index_t n_basis = N_;
    Eigen::Map<Eigen::VectorXd> psi(row_scratch(n_basis), n_basis);
    cfg_.system.basis_row(x, n_basis, std::span<double>(psi.data(), n_basis));
    flops_ += 2 * static_cast<std::uint64_t>(n_basis);

    work_.resize(n_basis);
    work_.noalias() = Phi_ * psi;
    const double den = 1.0 + psi.dot(work_);
    flops_ += static_cast<std::uint64_t>(n_basis) * n_basis + n_basis;
    if (!(den > cfg_.jitter_tol)) {
      xs_.resize(xs_.size() - cfg_.d);
      ys_.pop_back();
      --n_;
      result.row_deferred = true;
      return result;
    }
    Phi_.selfadjointView<Eigen::Lower>().rankUpdate(work_, -1.0 / den);
    mirror_upper();
    s_.noalias() += y * psi;
    flops_ += static_cast<std::uint64_t>(n_basis) * n_basis + 2 * n_basis;

    result.bases_added = grow_to_target(result.basis_deferred);
    refresh_theta();
    return result;
  }

  ObserveResult observe(double x, double y) {
    return observe(std::span<const double>(&x, 1), y);
  }

  double predict(std::span<const double> x) const {
    if (!initialized_) throw NotReadyError("projection estimator not initialized yet");
    Eigen::VectorXd psi(N_);
    cfg_.system.basis_row(x, N_, std::span<double>(psi.data(), static_cast<std::size_t>(N_)));
    const double value = theta_.dot(psi);
    return std::clamp(value, -cfg_.clamp, cfg_.clamp);
  }

  double predict(double x) const { return predict(std::span<const double>(&x, 1)); }

  ProjectionSnapshot snapshot() const {
    ProjectionSnapshot snap;
    snap.kernel_id = cfg_.system.id();
    snap.alpha = cfg_.alpha;
    snap.d = cfg_.d;
    snap.c = cfg_.c;
    snap.n0 = cfg_.n0;
    snap.clamp = cfg_.clamp;
    snap.jitter_tol = cfg_.jitter_tol;
    snap.warm_buffer = cfg_.warm_buffer;
    snap.n = n_;
    snap.basis = N_;
    snap.initialized = initialized_;
    snap.flops = flops_;
    snap.theta.assign(theta_.data(), theta_.data() + theta_.size());
    snap.moment.assign(s_.data(), s_.data() + s_.size());
    for (index_t i = 0; i < N_; ++i)
      for (index_t j = i; j < N_; ++j) snap.phi_upper.push_back(Phi_(i, j));
    snap.xs = xs_;
    snap.ys = ys_;
    return snap;
  }

  // Rebuilds a state from a snapshot. The kernel is re-parsed from its id
  // unless an explicit system (e.g. a stacked additive one) is supplied.
  static ProjectionState restore(const ProjectionSnapshot& snap,
                                 std::optional<EigenSystem> system = {},
                                 ScheduleFn schedule = {}) {
    EstimatorConfig cfg{system ? *system : EigenSystem::parse(snap.kernel_id),
                        snap.alpha,
                        snap.d,
                        snap.c,
                        snap.n0,
                        snap.clamp,
                        snap.jitter_tol,
                        snap.warm_buffer};
    ProjectionState state(std::move(cfg), std::move(schedule));
    state.n_ = snap.n;
    state.N_ = snap.basis;
    state.initialized_ = snap.initialized;
    state.flops_ = snap.flops;
    state.xs_ = snap.xs;
    state.ys_ = snap.ys;
    state.theta_ = Eigen::Map<const Eigen::VectorXd>(snap.theta.data(), snap.theta.size());
    state.s_ = Eigen::Map<const Eigen::VectorXd>(snap.moment.data(), snap.moment.size());
    if (snap.phi_upper.size() !=
        static_cast<std::size_t>(snap.basis) * (snap.basis + 1) / 2)
      throw ConfigError("snapshot Phi triangle has wrong length");
    state.Phi_.resize(snap.basis, snap.basis);
    std::size_t pos = 0;
    for (index_t i = 0; i < snap.basis; ++i)
      for (index_t j = i; j < snap.basis; ++j) {
        state.Phi_(i, j) = snap.phi_upper[pos];
        state.Phi_(j, i) = snap.phi_upper[pos];
        ++pos;
      }
    // The schedule cache is a pure function of n; rebuild it.
    state.sched_basis_ = schedule_basis_count(state.n_, state.cfg_.alpha, state.cfg_.d,
                                              state.cfg_.c, state.cfg_.n0);
    state.next_threshold_ = schedule_threshold(state.sched_basis_ + 1, state.cfg_.alpha,
                                               state.cfg_.d, state.cfg_.c);
    return state;
  }

  // Feeds a batch through the streaming path and requires initialization to
  // have happened by the end. The resulting state is identical to a pure
  // streaming run over the same observations.
  void warm_start(std::span<const double> xs_flat, std::span<const double> ys) {
    if (n_ != 0) throw ConfigError("warm_start requires a fresh state");
    const std::int64_t count = static_cast<std::int64_t>(ys.size());
    if (xs_flat.size() != ys.size() * static_cast<std::size_t>(cfg_.d))
      throw ConfigError("warm start covariate batch has wrong length");
    if (count < cfg_.n0 + cfg_.warm_buffer)
      throw InitializationError("warm start batch smaller than n0 + buffer");
    for (std::int64_t i = 0; i < count; ++i)
      observe(xs_flat.subspan(i * cfg_.d, cfg_.d), ys[i]);
    if (!initialized_)
      throw InitializationError("warm start batch produced a singular Gram matrix");
  }

 private:
  bool try_initialize() {
    const std::int64_t rows = n_;
    const index_t n_basis = cfg_.n0;
    Eigen::MatrixXd design(rows, n_basis);
    std::vector<double> row(n_basis);
    for (std::int64_t i = 0; i < rows; ++i) {
      cfg_.system.basis_row(history_x(i), n_basis, std::span<double>(row.data(), row.size()));
      for (index_t j = 0; j < n_basis; ++j) design(i, j) = row[j];
    }
    Eigen::MatrixXd gram = design.transpose() * design;
    flops_ += static_cast<std::uint64_t>(rows) * n_basis * (n_basis + 2);
    Eigen::FullPivLU<Eigen::MatrixXd> lu(gram);
    lu.setThreshold(cfg_.jitter_tol);
    if (!lu.isInvertible()) return false;
    Phi_ = lu.inverse();
    Phi_ = 0.5 * (Phi_ + Phi_.transpose().eval());
    s_.noalias() = design.transpose() * Eigen::Map<const Eigen::VectorXd>(ys_.data(), rows);
    flops_ += static_cast<std::uint64_t>(n_basis) * n_basis * n_basis +
              static_cast<std::uint64_t>(rows) * n_basis;
    N_ = n_basis;
    initialized_ = true;
    return true;
  }

  // Adds scheduled basis functions; returns how many were added and flags a
  // deferral when the Schur pivot is degenerate. Caller refreshes theta.
  int grow_to_target(bool& deferred) {
    int added = 0;
    while (N_ < schedule_target() && n_ >= N_ + 1) {
      if (!add_basis()) {
        deferred = true;
        break;
      }
      ++added;
    }
    return added;
  }

  index_t schedule_target() {
    if (custom_schedule_) return custom_schedule_(n_);
    while (n_ >= next_threshold_) {
      ++sched_basis_;
      next_threshold_ = schedule_threshold(sched_basis_ + 1, cfg_.alpha, cfg_.d, cfg_.c);
    }
    return sched_basis_;
  }

  bool add_basis() {
    const index_t n_basis = N_;
    const std::int64_t rows = n_;
    Eigen::VectorXd newcol(rows);
    for (std::int64_t i = 0; i < rows; ++i)
      newcol(i) = cfg_.system.basis_eval(n_basis + 1, history_x(i));
    const double corner = newcol.squaredNorm();
    flops_ += static_cast<std::uint64_t>(rows) * (2 * cfg_.d + 1);

    Eigen::VectorXd b = Eigen::VectorXd::Zero(n_basis);
    std::vector<double> row(n_basis);
    for (std::int64_t i = 0; i < rows; ++i) {
      cfg_.system.basis_row(history_x(i), n_basis, std::span<double>(row.data(), row.size()));
      const double vi = newcol(i);
      for (index_t j = 0; j < n_basis; ++j) b(j) += vi * row[j];
    }
    flops_ += static_cast<std::uint64_t>(rows) * n_basis * 3;

    work_.resize(n_basis);
    work_.noalias() = Phi_ * b;  // Phi b
    const double pivot = corner - b.dot(work_);
    flops_ += static_cast<std::uint64_t>(n_basis) * n_basis + n_basis;
    if (!(pivot > cfg_.jitter_tol)) return false;

    Eigen::MatrixXd grown(n_basis + 1, n_basis + 1);
    grown.topLeftCorner(n_basis, n_basis) = Phi_;
    grown.topLeftCorner(n_basis, n_basis)
        .selfadjointView<Eigen::Lower>()
        .rankUpdate(work_, 1.0 / pivot);
    grown.topLeftCorner(n_basis, n_basis).triangularView<Eigen::StrictlyUpper>() =
        grown.topLeftCorner(n_basis, n_basis).transpose();
    grown.block(0, n_basis, n_basis, 1) = -work_ / pivot;
    grown.block(n_basis, 0, 1, n_basis) = grown.block(0, n_basis, n_basis, 1).transpose();
    grown(n_basis, n_basis) = 1.0 / pivot;
    Phi_.swap(grown);
    flops_ += static_cast<std::uint64_t>(n_basis) * n_basis + 2 * n_basis;

    double tail = 0.0;
    for (std::int64_t i = 0; i < rows; ++i) tail += newcol(i) * ys_[i];
    flops_ += static_cast<std::uint64_t>(rows);
    s_.conservativeResize(n_basis + 1);
    s_(n_basis) = tail;
    ++N_;
    return true;
  }

  void refresh_theta() {
    theta_.resize(N_);
    theta_.noalias() = Phi_ * s_;
    flops_ += static_cast<std::uint64_t>(N_) * N_;
  }

  void mirror_upper() {
    Phi_.triangularView<Eigen::StrictlyUpper>() = Phi_.transpose();
  }

  double* row_scratch(index_t count) {
    if (static_cast<index_t>(scratch_.size()) < count) scratch_.resize(count);
    return scratch_.data();
  }

  EstimatorConfig cfg_;
  ScheduleFn custom_schedule_;
  index_t N_ = 0;
  std::int64_t n_ = 0;
  bool initialized_ = false;
  Eigen::MatrixXd Phi_;
  Eigen::VectorXd s_;
  Eigen::VectorXd theta_;
  Eigen::VectorXd work_;
  std::vector<double> scratch_;
  std::vector<double> xs_;
  std::vector<double> ys_;
  std::uint64_t flops_ = 0;
  index_t sched_basis_ = 1;
  std::int64_t next_threshold_ = 0;
};

}  // namespace streamkern
