#pragma once

// Closed-form Mercer eigensystems for the kernel catalog.
//
// Each system fixes a working measure and an orthonormal basis of
// eigenfunctions under it:
//
//   sobolev_min          K(s,t) = min{s,t} on [0,1], measure Unif[0,1].
//                        lambda_j = 4/((2j-1)^2 pi^2),
//                        psi_j(x) = sqrt(2) sin((2j-1) pi x / 2).
//   periodic_bernoulli   K(s,t) = -B4({s-t})/24 on [0,1], measure Unif[0,1].
//                        Basis enumerated sin_1, cos_1, sin_2, cos_2, ...
//                        with psi = sqrt(2) sin(2 pi m x), sqrt(2) cos(2 pi m x)
//                        and lambda = 1/(2 pi m)^4 repeated for the pair.
//                        (The common tabulation pairs 2/(2 pi m)^4 with the
//                        unnormalized trig functions; both expand the same
//                        kernel, this one keeps the basis orthonormal.)
//   gaussian             K(x,z) = exp(-eps^2 (x-z)^2) on R, measure with
//                        density a/sqrt(pi) exp(-a^2 x^2). Hermite-type
//                        eigenfunctions, geometric eigenvalues.
//   tensor:<base>:<d>    products over coordinates, eigenvalues sorted by a
//                        best-first walk over the multi-index lattice.
//   poly<k>+<base>       monomials 1, x, ..., x^k prepended as fixed
//                        parametric terms ahead of the base enumeration.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <memory>
#include <numbers>
#include <queue>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "streamkern/errors.hpp"
#include "streamkern/quadrature.hpp"

namespace streamkern {

using index_t = std::int64_t;

// Quadrature against a working measure: sum_i w_i f(x_i) ~ integral f d(rho).
// Nodes are flattened with stride `dim`.
struct MeasureQuadrature {
  int dim = 1;
  std::vector<double> nodes;
  std::vector<double> weights;

  std::size_t size() const { return weights.size(); }
  std::span<const double> node(std::size_t i) const {
    return std::span<const double>(nodes.data() + i * dim, dim);
  }
};

// Working measure of an eigensystem: iid product of a 1-d factor.
class WorkingMeasure {
 public:
  enum class Kind { UniformUnit, GaussianDensity };

  WorkingMeasure(Kind kind, int dim, double alpha = 1.0)
      : kind_(kind), dim_(dim), alpha_(alpha) {}

  Kind kind() const { return kind_; }
  int dimension() const { return dim_; }
  double alpha() const { return alpha_; }

  double density(std::span<const double> x) const {
    double p = 1.0;
    for (double xi : x) {
      switch (kind_) {
        case Kind::UniformUnit:
          p *= (xi >= 0.0 && xi <= 1.0) ? 1.0 : 0.0;
          break;
        case Kind::GaussianDensity:
          p *= alpha_ / std::sqrt(std::numbers::pi) * std::exp(-alpha_ * alpha_ * xi * xi);
          break;
      }
    }
    return p;
  }

  // Tensorized rule; nodes_per_dim defaults to 256 Gauss-Legendre on [0,1]
  // and 128 Gauss-Hermite for the Gaussian factor.
  MeasureQuadrature quadrature(int nodes_per_dim = 0) const {
    QuadratureRule base;
    if (kind_ == Kind::UniformUnit) {
      base = gauss_legendre_01(nodes_per_dim > 0 ? nodes_per_dim : 256);
    } else {
      base = gauss_hermite(nodes_per_dim > 0 ? nodes_per_dim : 128);
      for (auto& x : base.nodes) x /= alpha_;
      for (auto& w : base.weights) w /= std::sqrt(std::numbers::pi);
    }
    MeasureQuadrature q;
    q.dim = dim_;
    const std::size_t m = base.nodes.size();
    std::size_t total = 1;
    for (int k = 0; k < dim_; ++k) total *= m;
    q.nodes.resize(total * dim_);
    q.weights.assign(total, 1.0);
    std::vector<std::size_t> idx(dim_, 0);
    for (std::size_t i = 0; i < total; ++i) {
      for (int k = 0; k < dim_; ++k) {
        q.nodes[i * dim_ + k] = base.nodes[idx[k]];
        q.weights[i] *= base.weights[idx[k]];
      }
      for (int k = dim_ - 1; k >= 0; --k) {
        if (++idx[k] < m) break;
        idx[k] = 0;
      }
    }
    return q;
  }

 private:
  Kind kind_;
  int dim_;
  double alpha_;
};

// Fourth Bernoulli polynomial, B4(x) = x^4 - 2x^3 + x^2 - 1/30.
inline double bernoulli4(double x) {
  return ((x - 2.0) * x + 1.0) * x * x - 1.0 / 30.0;
}

namespace detail {

class KernelSystem {
 public:
  virtual ~KernelSystem() = default;
  virtual std::string id() const = 0;
  virtual int dimension() const = 0;
  virtual double eigenvalue(index_t j) const = 0;
  virtual double basis_eval(index_t j, std::span<const double> x) const = 0;
  virtual double kernel_eval(std::span<const double> x, std::span<const double> z) const = 0;
  virtual WorkingMeasure measure() const = 0;
  // Leading fixed parametric terms (polynomial augmentation); these are not
  // Mercer eigenfunctions and are exempt from eigenvalue ordering.
  virtual index_t parametric_count() const { return 0; }

  // Evaluates psi_1..psi_count at x. Subclasses with trigonometric bases
  // override with rotation recurrences; this is the generic path.
  virtual void basis_row(std::span<const double> x, index_t count, std::span<double> out) const {
    for (index_t j = 1; j <= count; ++j) out[j - 1] = basis_eval(j, x);
  }

 protected:
  void check_index(index_t j) const {
    if (j < 1) throw ConfigError("basis index must be >= 1");
  }
};

class SobolevMinSystem final : public KernelSystem {
 public:
  std::string id() const override { return "sobolev_min"; }
  int dimension() const override { return 1; }

  double eigenvalue(index_t j) const override {
    check_index(j);
    const double q = (2.0 * static_cast<double>(j) - 1.0) * std::numbers::pi;
    return 4.0 / (q * q);
  }

  double basis_eval(index_t j, std::span<const double> x) const override {
    check_index(j);
    return std::numbers::sqrt2 * std::sin((2.0 * static_cast<double>(j) - 1.0) *
                                          std::numbers::pi * x[0] / 2.0);
  }

  double kernel_eval(std::span<const double> x, std::span<const double> z) const override {
    return std::min(x[0], z[0]);
  }

  WorkingMeasure measure() const override {
    return WorkingMeasure(WorkingMeasure::Kind::UniformUnit, 1);
  }

  void basis_row(std::span<const double> x, index_t count, std::span<double> out) const override {
    // sin((2j-1)u) for u = pi x / 2, by rotation through 2u per step.
    const double u = std::numbers::pi * x[0] / 2.0;
    double s = std::sin(u), c = std::cos(u);
    const double s2 = std::sin(2.0 * u), c2 = std::cos(2.0 * u);
    for (index_t j = 0; j < count; ++j) {
      out[j] = std::numbers::sqrt2 * s;
      const double sn = s * c2 + c * s2;
      c = c * c2 - s * s2;
      s = sn;
    }
  }
};

class PeriodicBernoulliSystem final : public KernelSystem {
 public:
  std::string id() const override { return "periodic_bernoulli"; }
  int dimension() const override { return 1; }

  double eigenvalue(index_t j) const override {
    check_index(j);
    const index_t m = (j + 1) / 2;
    const double q = 2.0 * std::numbers::pi * static_cast<double>(m);
    const double q2 = q * q;
    return 1.0 / (q2 * q2);
  }

  double basis_eval(index_t j, std::span<const double> x) const override {
    check_index(j);
    const index_t m = (j + 1) / 2;
    const double arg = 2.0 * std::numbers::pi * static_cast<double>(m) * x[0];
    return std::numbers::sqrt2 * (j % 2 == 1 ? std::sin(arg) : std::cos(arg));
  }

  double kernel_eval(std::span<const double> x, std::span<const double> z) const override {
    const double u = x[0] - z[0];
    return -bernoulli4(u - std::floor(u)) / 24.0;
  }

  WorkingMeasure measure() const override {
    return WorkingMeasure(WorkingMeasure::Kind::UniformUnit, 1);
  }

  void basis_row(std::span<const double> x, index_t count, std::span<double> out) const override {
    const double u = 2.0 * std::numbers::pi * x[0];
    double s = std::sin(u), c = std::cos(u);
    const double s1 = s, c1 = c;
    for (index_t j = 0; j < count; ++j) {
      out[j] = std::numbers::sqrt2 * (j % 2 == 0 ? s : c);
      if (j % 2 == 1) {
        const double sn = s * c1 + c * s1;
        c = c * c1 - s * s1;
        s = sn;
      }
    }
  }
};

class GaussianSystem final : public KernelSystem {
 public:
  GaussianSystem(double alpha_meas, double eps) : alpha_(alpha_meas), eps_(eps) {
    if (alpha_ <= 0.0 || eps_ <= 0.0)
      throw ConfigError("gaussian system requires alpha_meas > 0 and eps > 0");
    beta_ = std::pow(1.0 + 4.0 * eps_ * eps_ / (alpha_ * alpha_), 0.25);
    delta_sq_ = 0.5 * alpha_ * alpha_ * (beta_ * beta_ - 1.0);
    const double denom = alpha_ * alpha_ + delta_sq_ + eps_ * eps_;
    lambda1_ = std::sqrt(alpha_ * alpha_ / denom);
    ratio_ = eps_ * eps_ / denom;
  }

  std::string id() const override { return "gaussian"; }
  int dimension() const override { return 1; }

  double eigenvalue(index_t j) const override {
    check_index(j);
    return lambda1_ * std::pow(ratio_, static_cast<double>(j - 1));
  }

  // psi_j(x) = gamma_j exp(-delta^2 x^2) H_{j-1}(alpha beta x). The gamma_j
  // normalization is folded into a three-term recurrence on
  // h_k = H_k / sqrt(2^k k!), which stays bounded where Gamma(j) overflows.
  double basis_eval(index_t j, std::span<const double> x) const override {
    check_index(j);
    const double u = alpha_ * beta_ * x[0];
    double hm1 = 0.0, h = 1.0;
    for (index_t k = 0; k + 1 < j; ++k) {
      const double hn = u * std::sqrt(2.0 / (k + 1.0)) * h -
                        std::sqrt(static_cast<double>(k) / (k + 1.0)) * hm1;
      hm1 = h;
      h = hn;
    }
    return std::sqrt(beta_) * std::exp(-delta_sq_ * x[0] * x[0]) * h;
  }

  void basis_row(std::span<const double> x, index_t count, std::span<double> out) const override {
    const double u = alpha_ * beta_ * x[0];
    const double envelope = std::sqrt(beta_) * std::exp(-delta_sq_ * x[0] * x[0]);
    double hm1 = 0.0, h = 1.0;
    for (index_t k = 0; k < count; ++k) {
      out[k] = envelope * h;
      const double hn = u * std::sqrt(2.0 / (k + 1.0)) * h -
                        std::sqrt(static_cast<double>(k) / (k + 1.0)) * hm1;
      hm1 = h;
      h = hn;
    }
  }

  double kernel_eval(std::span<const double> x, std::span<const double> z) const override {
    const double d = x[0] - z[0];
    return std::exp(-eps_ * eps_ * d * d);
  }

  WorkingMeasure measure() const override {
    return WorkingMeasure(WorkingMeasure::Kind::GaussianDensity, 1, alpha_);
  }

 private:
  double alpha_, eps_, beta_, delta_sq_, lambda1_, ratio_;
};

class TensorProductSystem final : public KernelSystem {
 public:
  TensorProductSystem(std::shared_ptr<const KernelSystem> base, int d, index_t max_terms)
      : base_(std::move(base)), d_(d) {
    if (d_ < 1) throw ConfigError("tensor product dimension must be >= 1");
    if (base_->dimension() != 1)
      throw ConfigError("tensor product base system must be one-dimensional");
    if (base_->parametric_count() != 0)
      throw ConfigError("tensor product over a polynomial-augmented base is unsupported");
    build_table(max_terms);
  }

  std::string id() const override { return "tensor:" + base_->id() + ":" + std::to_string(d_); }
  int dimension() const override { return d_; }

  double eigenvalue(index_t j) const override {
    check_table(j);
    return table_[j - 1].value;
  }

  double basis_eval(index_t j, std::span<const double> x) const override {
    check_table(j);
    double p = 1.0;
    for (int l = 0; l < d_; ++l)
      p *= base_->basis_eval(table_[j - 1].index[l], std::span<const double>(&x[l], 1));
    return p;
  }

  double kernel_eval(std::span<const double> x, std::span<const double> z) const override {
    double p = 1.0;
    for (int l = 0; l < d_; ++l)
      p *= base_->kernel_eval(std::span<const double>(&x[l], 1),
                              std::span<const double>(&z[l], 1));
    return p;
  }

  WorkingMeasure measure() const override {
    const WorkingMeasure m = base_->measure();
    return WorkingMeasure(m.kind(), d_, m.alpha());
  }

  const std::vector<index_t>& multi_index(index_t j) const {
    check_table(j);
    return table_[j - 1].index;
  }

 private:
  struct Entry {
    double value;
    std::vector<index_t> index;
  };

  // Best-first walk over the multi-index lattice with a max-heap: pop the
  // largest product eigenvalue, push its coordinate successors, deduplicate.
  // Ties break lexicographically so the enumeration is deterministic.
  void build_table(index_t max_terms) {
    struct HeapLess {
      bool operator()(const Entry& a, const Entry& b) const {
        if (a.value != b.value) return a.value < b.value;
        return a.index > b.index;
      }
    };
    std::priority_queue<Entry, std::vector<Entry>, HeapLess> heap;
    std::set<std::vector<index_t>> seen;
    std::vector<index_t> ones(d_, 1);
    heap.push(Entry{product_value(ones), ones});
    seen.insert(ones);
    table_.reserve(max_terms);
    while (!heap.empty() && static_cast<index_t>(table_.size()) < max_terms) {
      Entry top = heap.top();
      heap.pop();
      for (int l = 0; l < d_; ++l) {
        std::vector<index_t> next = top.index;
        ++next[l];
        if (seen.insert(next).second) heap.push(Entry{product_value(next), next});
      }
      table_.push_back(std::move(top));
    }
  }

  double product_value(const std::vector<index_t>& idx) const {
    double v = 1.0;
    for (index_t j : idx) v *= base_->eigenvalue(j);
    return v;
  }

  void check_table(index_t j) const {
    check_index(j);
    if (j > static_cast<index_t>(table_.size()))
      throw ConfigError("tensor product index exceeds precomputed table (" +
                        std::to_string(table_.size()) + " terms)");
  }

  std::shared_ptr<const KernelSystem> base_;
  int d_;
  std::vector<Entry> table_;
};

class PolyAugmentedSystem final : public KernelSystem {
 public:
  PolyAugmentedSystem(std::shared_ptr<const KernelSystem> base, int degree)
      : base_(std::move(base)), degree_(degree) {
    if (degree_ < 0 || degree_ > 2)
      throw ConfigError("polynomial augmentation supports degree 0, 1, 2");
    if (base_->dimension() != 1)
      throw ConfigError("polynomial augmentation requires a one-dimensional base");
    if (base_->parametric_count() != 0)
      throw ConfigError("cannot augment an already augmented system");
  }

  std::string id() const override {
    return "poly" + std::to_string(degree_) + "+" + base_->id();
  }
  int dimension() const override { return 1; }
  index_t parametric_count() const override { return degree_ + 1; }

  // Parametric terms carry a conventional value of 1; they are fixed columns,
  // not Mercer eigenvalues.
  double eigenvalue(index_t j) const override {
    check_index(j);
    if (j <= degree_ + 1) return 1.0;
    return base_->eigenvalue(j - degree_ - 1);
  }

  double basis_eval(index_t j, std::span<const double> x) const override {
    check_index(j);
    if (j <= degree_ + 1) {
      double v = 1.0;
      for (index_t m = 1; m < j; ++m) v *= x[0];
      return v;
    }
    return base_->basis_eval(j - degree_ - 1, x);
  }

  void basis_row(std::span<const double> x, index_t count, std::span<double> out) const override {
    const index_t head = std::min<index_t>(count, degree_ + 1);
    double v = 1.0;
    for (index_t j = 0; j < head; ++j) {
      out[j] = v;
      v *= x[0];
    }
    if (count > head) base_->basis_row(x, count - head, out.subspan(head));
  }

  double kernel_eval(std::span<const double> x, std::span<const double> z) const override {
    double poly = 0.0, xp = 1.0, zp = 1.0;
    for (int m = 0; m <= degree_; ++m) {
      poly += xp * zp;
      xp *= x[0];
      zp *= z[0];
    }
    return poly + base_->kernel_eval(x, z);
  }

  WorkingMeasure measure() const override { return base_->measure(); }

 private:
  std::shared_ptr<const KernelSystem> base_;
  int degree_;
};

}  // namespace detail

// Immutable value handle over a kernel eigensystem. Safe to copy and to read
// concurrently; all catalog data is fixed at construction.
class EigenSystem {
 public:
  // Extension point for composed systems (e.g. stacked additive designs).
  explicit EigenSystem(std::shared_ptr<const detail::KernelSystem> impl)
      : impl_(std::move(impl)) {}

  std::string id() const { return impl_->id(); }
  int dimension() const { return impl_->dimension(); }
  index_t parametric_count() const { return impl_->parametric_count(); }
  WorkingMeasure measure() const { return impl_->measure(); }

  double eigenvalue(index_t j) const { return impl_->eigenvalue(j); }

  double basis_eval(index_t j, std::span<const double> x) const {
    return impl_->basis_eval(j, x);
  }
  double basis_eval(index_t j, double x) const {
    return impl_->basis_eval(j, std::span<const double>(&x, 1));
  }

  void basis_row(std::span<const double> x, index_t count, std::span<double> out) const {
    impl_->basis_row(x, count, out);
  }

  double kernel_eval(std::span<const double> x, std::span<const double> z) const {
    return impl_->kernel_eval(x, z);
  }
  double kernel_eval(double x, double z) const {
    return impl_->kernel_eval(std::span<const double>(&x, 1), std::span<const double>(&z, 1));
  }

  double mercer_partial_sum(std::span<const double> x, std::span<const double> z,
                            index_t terms) const {
    double acc = 0.0;
    for (index_t j = 1; j <= terms; ++j)
      acc += impl_->eigenvalue(j) * impl_->basis_eval(j, x) * impl_->basis_eval(j, z);
    return acc;
  }
  double mercer_partial_sum(double x, double z, index_t terms) const {
    return mercer_partial_sum(std::span<const double>(&x, 1), std::span<const double>(&z, 1),
                              terms);
  }

  static EigenSystem sobolev_min() {
    return EigenSystem(std::make_shared<detail::SobolevMinSystem>());
  }
  static EigenSystem periodic_bernoulli() {
    return EigenSystem(std::make_shared<detail::PeriodicBernoulliSystem>());
  }
  static EigenSystem gaussian(double alpha_meas = 1.0, double eps = 1.0) {
    return EigenSystem(std::make_shared<detail::GaussianSystem>(alpha_meas, eps));
  }
  static EigenSystem tensor_product(const EigenSystem& base, int d, index_t max_terms = 4096) {
    return EigenSystem(std::make_shared<detail::TensorProductSystem>(base.impl_, d, max_terms));
  }
  static EigenSystem poly_augmented(const EigenSystem& base, int degree) {
    return EigenSystem(std::make_shared<detail::PolyAugmentedSystem>(base.impl_, degree));
  }

  // Kernel ids used in config files: "sobolev_min", "periodic_bernoulli",
  // "gaussian" (optionally "gaussian:<alpha>:<eps>"), "tensor:<base>:<d>",
  // "poly<k>+<base>".
  static EigenSystem parse(const std::string& kernel_id) {
    if (kernel_id == "sobolev_min") return sobolev_min();
    if (kernel_id == "periodic_bernoulli") return periodic_bernoulli();
    if (kernel_id == "gaussian") return gaussian();
    if (kernel_id.rfind("gaussian:", 0) == 0) {
      const std::string rest = kernel_id.substr(9);
      const auto colon = rest.find(':');
      if (colon == std::string::npos)
        throw ConfigError("expected gaussian:<alpha_meas>:<eps>, got '" + kernel_id + "'");
      return gaussian(parse_double(rest.substr(0, colon), kernel_id),
                      parse_double(rest.substr(colon + 1), kernel_id));
    }
    if (kernel_id.rfind("tensor:", 0) == 0) {
      const std::string rest = kernel_id.substr(7);
      const auto colon = rest.rfind(':');
      if (colon == std::string::npos)
        throw ConfigError("expected tensor:<base>:<d>, got '" + kernel_id + "'");
      const int d = static_cast<int>(parse_double(rest.substr(colon + 1), kernel_id));
      return tensor_product(parse(rest.substr(0, colon)), d);
    }
    if (kernel_id.rfind("poly", 0) == 0) {
      const auto plus = kernel_id.find('+');
      if (plus != std::string::npos && plus > 4) {
        const int degree = static_cast<int>(parse_double(kernel_id.substr(4, plus - 4), kernel_id));
        return poly_augmented(parse(kernel_id.substr(plus + 1)), degree);
      }
    }
    throw ConfigError("unknown kernel id '" + kernel_id + "'");
  }

 private:
  static double parse_double(const std::string& s, const std::string& ctx) {
    try {
      std::size_t pos = 0;
      const double v = std::stod(s, &pos);
      if (pos != s.size()) throw ConfigError("trailing characters");
      return v;
    } catch (const std::exception&) {
      throw ConfigError("bad numeric field '" + s + "' in kernel id '" + ctx + "'");
    }
  }

  std::shared_ptr<const detail::KernelSystem> impl_;
};

}  // namespace streamkern
