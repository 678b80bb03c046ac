#pragma once

// Reference estimators for the benchmark comparisons.
//
// Kernel ridge regression solves (K + n lambda I) a = Y once per fit (the
// loss is divided by n, hence the n lambda scaling) and predicts with
// sum_i a_i K(X_i, .). It is batch-only: refitting per sample is the O(n^4)
// cost the streaming estimator avoids, so the harness refits it at
// checkpoints only.
//
// The functional SGD baseline keeps raw weights for
//   f~_n = f~_{n-1} + gamma_n [Y_n - f~_{n-1}(X_n)] K_{X_n},
//   gamma_n = gamma0 n^{-1/2},
// and Polyak-averaged weights for f^_n = (1/(n+1)) sum_{k<=n} f~_k. A raw
// weight born at step i appears in every f~_k for k >= i, so the running sum
// of weight vectors updates in O(n); evaluating f~_{n-1}(X_n) costs n - 1
// kernel evaluations, which is the linear per-step cost the benchmark
// contrasts with the projection estimator.

#include <Eigen/Dense>
#include <cmath>
#include <cstdint>
#include <span>
#include <vector>

#include "streamkern/eigensystems.hpp"
#include "streamkern/errors.hpp"

namespace streamkern {

class KrrModel {
 public:
  KrrModel(EigenSystem kernel, std::vector<double> xs_flat, Eigen::VectorXd dual,
           double lambda)
      : kernel_(std::move(kernel)), xs_(std::move(xs_flat)), dual_(std::move(dual)),
        lambda_(lambda) {}

  const Eigen::VectorXd& dual() const { return dual_; }
  double lambda() const { return lambda_; }
  std::int64_t size() const { return dual_.size(); }

  double predict(std::span<const double> x) const {
    const int d = kernel_.dimension();
    double acc = 0.0;
    for (std::int64_t i = 0; i < dual_.size(); ++i)
      acc += dual_(i) * kernel_.kernel_eval(std::span<const double>(xs_.data() + i * d, d), x);
    return acc;
  }
  double predict(double x) const { return predict(std::span<const double>(&x, 1)); }

 private:
  EigenSystem kernel_;
  std::vector<double> xs_;
  Eigen::VectorXd dual_;
  double lambda_;
};

inline KrrModel krr_fit(std::span<const double> xs_flat, std::span<const double> ys,
                        const EigenSystem& kernel, double lambda) {
  const std::int64_t n = static_cast<std::int64_t>(ys.size());
  if (n < 1) throw ConfigError("KRR requires at least one observation");
  if (!(lambda > 0.0)) throw ConfigError("KRR requires lambda > 0");
  const int d = kernel.dimension();
  Eigen::MatrixXd gram(n, n);
  for (std::int64_t i = 0; i < n; ++i) {
    const std::span<const double> xi(xs_flat.data() + i * d, d);
    for (std::int64_t j = i; j < n; ++j) {
      const double v = kernel.kernel_eval(xi, std::span<const double>(xs_flat.data() + j * d, d));
      gram(i, j) = v;
      gram(j, i) = v;
    }
  }
  gram.diagonal().array() += static_cast<double>(n) * lambda;
  const Eigen::LDLT<Eigen::MatrixXd> ldlt(gram);
  if (ldlt.info() != Eigen::Success)
    throw ConfigError("KRR factorization failed");
  const Eigen::VectorXd y = Eigen::Map<const Eigen::VectorXd>(ys.data(), n);
  return KrrModel(kernel, std::vector<double>(xs_flat.begin(), xs_flat.end()),
                  ldlt.solve(y), lambda);
}

class SgdModel {
 public:
  SgdModel(EigenSystem kernel, double gamma0) : kernel_(std::move(kernel)), gamma0_(gamma0) {
    if (!(gamma0_ > 0.0)) throw ConfigError("SGD requires gamma0 > 0");
  }

  std::int64_t size() const { return static_cast<std::int64_t>(raw_.size()); }
  std::uint64_t kernel_evals() const { return kernel_evals_; }
  const std::vector<double>& raw_weights() const { return raw_; }
  const std::vector<double>& weight_sums() const { return sum_; }

  void step(std::span<const double> x, double y) {
    const std::int64_t n = size() + 1;
    // f~_{n-1}(X_n): n-1 kernel evaluations against the support set.
    double fitted = 0.0;
    const int d = kernel_.dimension();
    for (std::int64_t i = 0; i + 1 < n; ++i)
      fitted += raw_[i] * kernel_.kernel_eval(std::span<const double>(xs_.data() + i * d, d), x);
    kernel_evals_ += static_cast<std::uint64_t>(n - 1);
    const double gamma = gamma0_ / std::sqrt(static_cast<double>(n));
    xs_.insert(xs_.end(), x.begin(), x.end());
    raw_.push_back(gamma * (y - fitted));
    // Running sum over iterates: each existing weight joins one more f~_k.
    sum_.push_back(0.0);
    for (std::size_t i = 0; i < raw_.size(); ++i) sum_[i] += raw_[i];
  }
  void step(double x, double y) { step(std::span<const double>(&x, 1), y); }

  // Polyak-averaged estimator f^_n = (1/(n+1)) sum_{k=0}^n f~_k.
  double predict(std::span<const double> x) const {
    const int d = kernel_.dimension();
    const double scale = 1.0 / (static_cast<double>(size()) + 1.0);
    double acc = 0.0;
    for (std::int64_t i = 0; i < size(); ++i)
      acc += sum_[i] * kernel_.kernel_eval(std::span<const double>(xs_.data() + i * d, d), x);
    return scale * acc;
  }
  double predict(double x) const { return predict(std::span<const double>(&x, 1)); }

  // The last (non-averaged) iterate f~_n.
  double predict_raw(std::span<const double> x) const {
    const int d = kernel_.dimension();
    double acc = 0.0;
    for (std::int64_t i = 0; i < size(); ++i)
      acc += raw_[i] * kernel_.kernel_eval(std::span<const double>(xs_.data() + i * d, d), x);
    return acc;
  }

 private:
  EigenSystem kernel_;
  double gamma0_;
  std::vector<double> xs_;
  std::vector<double> raw_;   // weight of K_{X_i} in f~_n
  std::vector<double> sum_;   // sum over k of the weight of K_{X_i} in f~_k
  std::uint64_t kernel_evals_ = 0;
};

}  // namespace streamkern
