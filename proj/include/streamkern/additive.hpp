#pragma once

// Additive-model extension: d component functions, each expanded in the same
// one-dimensional eigensystem, fitted jointly by the streaming least-squares
// machinery on a stacked n x (N d) design.
//
// Stacked feature layout: an optional global intercept column (hoisted from a
// polynomial-augmented per-coordinate system, which would otherwise
// contribute d identical constant columns), then levels interleaved by
// coordinate:
//
//   [1?, psi_1(x^(1)) ... psi_1(x^(d)), psi_2(x^(1)) ... psi_2(x^(d)), ...]
//
// where psi_l is the l-th non-constant basis function of the per-coordinate
// system. When the one-dimensional schedule fires, one level joins, i.e. d
// columns are appended by d successive block additions.

#include <cmath>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "streamkern/eigensystems.hpp"
#include "streamkern/errors.hpp"
#include "streamkern/projection.hpp"

namespace streamkern {

namespace detail {

class StackedAdditiveSystem final : public KernelSystem {
 public:
  StackedAdditiveSystem(EigenSystem per_coordinate, int d)
      : per_(std::move(per_coordinate)), d_(d) {
    if (per_.dimension() != 1)
      throw ConfigError("additive model requires a one-dimensional per-coordinate system");
    if (d_ < 1) throw ConfigError("additive model dimension must be >= 1");
    skip_ = per_.parametric_count() >= 1 ? 1 : 0;  // hoist the constant
  }

  bool has_intercept() const { return skip_ == 1; }
  int offset() const { return skip_; }
  const EigenSystem& per_coordinate() const { return per_; }

  std::string id() const override {
    return "additive:" + std::to_string(d_) + ":" + per_.id();
  }
  int dimension() const override { return d_; }
  index_t parametric_count() const override { return skip_; }

  index_t stacked_count(index_t levels) const { return skip_ + levels * d_; }

  double eigenvalue(index_t j) const override {
    check_index(j);
    if (skip_ == 1 && j == 1) return 1.0;
    const index_t t = j - 1 - skip_;
    return per_.eigenvalue(t / d_ + 1 + skip_);
  }

  double basis_eval(index_t j, std::span<const double> x) const override {
    check_index(j);
    if (skip_ == 1 && j == 1) return 1.0;
    const index_t t = j - 1 - skip_;
    const index_t level = t / d_ + 1;
    const int coord = static_cast<int>(t % d_);
    return per_.basis_eval(level + skip_, std::span<const double>(&x[coord], 1));
  }

  void basis_row(std::span<const double> x, index_t count, std::span<double> out) const override {
    if (count == 0) return;
    index_t pos = 0;
    if (skip_ == 1) out[pos++] = 1.0;
    if (pos >= count) return;
    const index_t levels = (count - pos + d_ - 1) / d_;
    std::vector<double> buf(levels + skip_);
    for (int k = 0; k < d_; ++k) {
      per_.basis_row(std::span<const double>(&x[k], 1), levels + skip_,
                     std::span<double>(buf.data(), buf.size()));
      for (index_t l = 0; l < levels; ++l) {
        const index_t j = pos + l * d_ + k;
        if (j < count) out[j] = buf[l + skip_];
      }
    }
  }

  // Additive kernel: sum of the per-coordinate kernels (intercept handled as
  // a fixed column, not through the kernel).
  double kernel_eval(std::span<const double> x, std::span<const double> z) const override {
    double acc = 0.0;
    for (int k = 0; k < d_; ++k)
      acc += per_.kernel_eval(std::span<const double>(&x[k], 1),
                              std::span<const double>(&z[k], 1));
    return acc;
  }

  WorkingMeasure measure() const override {
    const WorkingMeasure m = per_.measure();
    return WorkingMeasure(m.kind(), d_, m.alpha());
  }

 private:
  EigenSystem per_;
  int d_;
  index_t skip_;
};

}  // namespace detail

struct AdditiveConfig {
  EigenSystem per_coordinate;
  int d = 1;
  double alpha = 2.0;  // per-coordinate smoothness
  double c = 0.2;      // one-dimensional schedule constant
  index_t n0_levels = 1;
  double clamp = std::numeric_limits<double>::infinity();
  double jitter_tol = 1e-10;
  int warm_buffer = 3;

  void validate() const {
    if (!(alpha > 0.5)) throw ConfigError("additive model requires alpha > 1/2");
    if (!(c > 0.0)) throw ConfigError("schedule constant c must be positive");
    if (n0_levels < 1) throw ConfigError("initial level count must be >= 1");
  }
};

class AdditiveState {
 public:
  explicit AdditiveState(AdditiveConfig cfg)
      : cfg_(std::move(cfg)),
        stacked_(std::make_shared<detail::StackedAdditiveSystem>(cfg_.per_coordinate, cfg_.d)),
        inner_(make_inner(cfg_, stacked_)) {
    cfg_.validate();
  }

  const AdditiveConfig& config() const { return cfg_; }
  const ProjectionState& inner() const { return inner_; }
  int dimension() const { return cfg_.d; }
  bool initialized() const { return inner_.initialized(); }
  std::int64_t sample_count() const { return inner_.sample_count(); }
  index_t stacked_basis_count() const { return inner_.basis_count(); }

  // Basis functions per coordinate currently in the model.
  index_t levels() const {
    return (inner_.basis_count() - stacked_->offset()) / cfg_.d;
  }

  ObserveResult observe(std::span<const double> x, double y) { return inner_.observe(x, y); }

  double predict(std::span<const double> x) const { return inner_.predict(x); }

  double intercept() const {
    if (!inner_.initialized()) throw NotReadyError("additive estimator not initialized yet");
    return stacked_->has_intercept() ? inner_.theta()(0) : 0.0;
  }

  // Fitted component for coordinate k (1-based): u -> sum_l theta_{l,k} psi_l(u).
  std::function<double(double)> component_function(int k) const {
    if (k < 1 || k > cfg_.d) throw ConfigError("component coordinate out of range");
    if (!inner_.initialized()) throw NotReadyError("additive estimator not initialized yet");
    const index_t level_count = levels();
    const index_t skip = stacked_->offset();
    std::vector<double> coeffs(level_count);
    for (index_t l = 0; l < level_count; ++l) coeffs[l] = inner_.theta()(skip + l * cfg_.d + k - 1);
    EigenSystem per = cfg_.per_coordinate;
    return [coeffs = std::move(coeffs), per, skip](double u) {
      double acc = 0.0;
      for (std::size_t l = 0; l < coeffs.size(); ++l)
        acc += coeffs[l] * per.basis_eval(static_cast<index_t>(l) + 1 + skip, u);
      return acc;
    };
  }

  struct Snapshot {
    std::string per_kernel_id;
    int d = 1;
    index_t n0_levels = 1;
    ProjectionSnapshot inner;
  };

  Snapshot snapshot() const {
    Snapshot snap;
    snap.per_kernel_id = cfg_.per_coordinate.id();
    snap.d = cfg_.d;
    snap.n0_levels = cfg_.n0_levels;
    snap.inner = inner_.snapshot();
    return snap;
  }

  static AdditiveState restore(const Snapshot& snap) {
    AdditiveConfig cfg{EigenSystem::parse(snap.per_kernel_id),
                       snap.d,
                       snap.inner.alpha,
                       snap.inner.c,
                       snap.n0_levels,
                       snap.inner.clamp,
                       snap.inner.jitter_tol,
                       snap.inner.warm_buffer};
    AdditiveState state(cfg);
    state.inner_ = ProjectionState::restore(
        snap.inner, EigenSystem(std::static_pointer_cast<const detail::KernelSystem>(state.stacked_)),
        make_schedule(cfg, state.stacked_->offset()));
    return state;
  }

 private:
  static ProjectionState::ScheduleFn make_schedule(const AdditiveConfig& cfg, index_t offset) {
    const double alpha = cfg.alpha;
    const double c = cfg.c;
    const int d = cfg.d;
    const index_t n0_levels = cfg.n0_levels;
    return [alpha, c, d, n0_levels, offset](std::int64_t n) {
      return offset + d * schedule_basis_count(n, alpha, 1, c, n0_levels);
    };
  }

  static ProjectionState make_inner(const AdditiveConfig& cfg,
                                    const std::shared_ptr<detail::StackedAdditiveSystem>& sys) {
    cfg.validate();
    EstimatorConfig inner_cfg{
        EigenSystem(std::static_pointer_cast<const detail::KernelSystem>(sys)),
        cfg.alpha,
        cfg.d,
        cfg.c,
        sys->stacked_count(cfg.n0_levels),
        cfg.clamp,
        cfg.jitter_tol,
        cfg.warm_buffer};
    return ProjectionState(std::move(inner_cfg), make_schedule(cfg, sys->offset()));
  }

  AdditiveConfig cfg_;
  std::shared_ptr<detail::StackedAdditiveSystem> stacked_;
  ProjectionState inner_;
};

}  // namespace streamkern
