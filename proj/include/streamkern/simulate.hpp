#pragma once

// Simulation harness: data-generating processes, Monte Carlo L2 error,
// CPU-time instrumentation, and convergence-slope fitting.
//
// Each repetition is one continuous stream. Estimators are updated online in
// blocks between checkpoints (KRR is refit at checkpoints only), update time
// is measured per estimator with the thread CPU clock, and Monte Carlo
// evaluation is done strictly outside the timed regions. At a fixed
// (repetition, checkpoint) every estimator is scored on the identical
// evaluation sample. The whole experiment is a pure function of spec + seed
// apart from the recorded CPU times.

#include <time.h>

#include <atomic>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <functional>
#include <istream>
#include <numbers>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <thread>
#include <vector>

#include "streamkern/additive.hpp"
#include "streamkern/baselines.hpp"
#include "streamkern/eigensystems.hpp"
#include "streamkern/errors.hpp"
#include "streamkern/projection.hpp"
#include "streamkern/rng.hpp"

namespace streamkern {

enum class ExampleId { Ex1, Ex2, ExA1, ExA2, Additive10 };

inline std::string to_string(ExampleId id) {
  switch (id) {
    case ExampleId::Ex1: return "ex1";
    case ExampleId::Ex2: return "ex2";
    case ExampleId::ExA1: return "exA1";
    case ExampleId::ExA2: return "exA2";
    case ExampleId::Additive10: return "additive10";
  }
  return "?";
}

inline ExampleId parse_example_id(const std::string& s) {
  if (s == "ex1") return ExampleId::Ex1;
  if (s == "ex2") return ExampleId::Ex2;
  if (s == "exA1" || s == "exa1") return ExampleId::ExA1;
  if (s == "exA2" || s == "exa2") return ExampleId::ExA2;
  if (s == "additive10") return ExampleId::Additive10;
  throw ConfigError("unknown example id '" + s + "'");
}

struct CovariateLaw {
  enum class Kind { UniformUnit, TiltedLinear, ProductUniform };
  Kind kind = Kind::UniformUnit;
  int dim = 1;

  void sample(CounterRng& rng, std::span<double> out) const {
    switch (kind) {
      case Kind::UniformUnit:
        out[0] = rng.next_uniform();
        break;
      case Kind::TiltedLinear: {
        // density (x + 1/2) on [0,1]; CDF F(x) = (x^2 + x)/2, inverted.
        const double u = rng.next_uniform();
        out[0] = 0.5 * (std::sqrt(1.0 + 8.0 * u) - 1.0);
        break;
      }
      case Kind::ProductUniform:
        for (int k = 0; k < dim; ++k) out[k] = rng.next_uniform();
        break;
    }
  }
};

struct NoiseLaw {
  enum class Kind { UniformSym, Gaussian, StudentT };
  Kind kind = Kind::Gaussian;
  double scale = 1.0;  // half-width (uniform), sd (gaussian), scale (t)
  double nu = 2.1;     // t degrees of freedom

  double sample(CounterRng& rng) const {
    switch (kind) {
      case Kind::UniformSym: return scale * (2.0 * rng.next_uniform() - 1.0);
      case Kind::Gaussian: return rng.next_normal(scale);
      case Kind::StudentT: return rng.next_student_t(nu, scale);
    }
    return 0.0;
  }
};

inline double regression_truth(ExampleId id, std::span<const double> x) {
  switch (id) {
    case ExampleId::Ex1:
      return bernoulli4(x[0]);
    case ExampleId::Ex2: {
      const double u = 12.0 * x[0] - 6.0;
      return (6.0 * x[0] - 3.0) * std::sin(u) + std::cos(u) * std::cos(u);
    }
    case ExampleId::ExA1:
      return 1.0 + (x[0] >= 0.5 ? x[0] - 0.5 : 0.0) + 2.0 * (x[0] >= 0.2 ? x[0] - 0.2 : 0.0);
    case ExampleId::ExA2: {
      const double u = 12.0 * x[0] - 6.0;
      double v = 1.0 + (6.0 * x[0] - 3.0) * std::sin(u) + std::cos(u) * std::cos(u);
      if (x[0] >= 0.5) v += 10.0 * (x[0] - 0.5) * (x[0] - 0.5);
      return v;
    }
    case ExampleId::Additive10: {
      double acc = 0.0;
      for (int k = 1; k <= 10; ++k) {
        const double e = k / 20.0;
        acc += std::sin(2.0 * std::numbers::pi / std::pow(x[k - 1] + 0.1, e)) -
               std::sin(2.0 * std::numbers::pi / std::pow(0.1, e));
      }
      return acc;
    }
  }
  throw ConfigError("unknown example id");
}

inline std::vector<std::int64_t> log_grid(std::int64_t n_min, std::int64_t n_max,
                                          int per_decade = 12) {
  std::vector<std::int64_t> grid;
  const double step = 1.0 / per_decade;
  for (double e = std::log10(static_cast<double>(n_min));; e += step) {
    std::int64_t n = static_cast<std::int64_t>(std::llround(std::pow(10.0, e)));
    n = std::min(n, n_max);
    if (grid.empty() || n > grid.back()) grid.push_back(n);
    if (n >= n_max) break;
  }
  return grid;
}

struct ExperimentSpec {
  std::string name = "custom";
  ExampleId example = ExampleId::Ex2;
  std::string kernel_id = "sobolev_min";  // per-coordinate system when additive
  double alpha = 1.0;
  int d = 1;
  double c = 0.5;
  index_t n0 = 1;
  double clamp = std::numeric_limits<double>::infinity();
  bool additive = false;
  index_t n0_levels = 1;
  CovariateLaw covariates;
  NoiseLaw noise;
  std::vector<std::int64_t> n_grid = log_grid(100, 10000);
  int repetitions = 15;
  int mc_points = 1000;
  std::uint64_t seed = 1;
  bool use_projection = true;
  bool use_sgd = false;
  bool use_krr = false;
  double sgd_gamma0 = 1.0;
  std::int64_t sgd_max_n = 30000;
  double krr_lambda0 = 0.1;
  double krr_lambda_exp = -2.0 / 3.0;
  std::int64_t krr_max_n = 4000;

  void validate() const {
    if (n_grid.empty()) throw ConfigError("empty sample-size grid");
    for (std::size_t i = 1; i < n_grid.size(); ++i)
      if (n_grid[i] <= n_grid[i - 1]) throw ConfigError("n_grid must be strictly increasing");
    if (repetitions < 1) throw ConfigError("repetitions must be >= 1");
    if (mc_points < 1) throw ConfigError("mc_points must be >= 1");
    if (covariates.dim != d) throw ConfigError("covariate law dimension does not match d");
  }
};

struct CurveCell {
  std::string estimator;
  int rep = 0;
  std::int64_t n = 0;
  std::int64_t basis = 0;
  double sq_l2_error = 0.0;
  std::int64_t cum_cpu_ns = 0;
  bool failed = false;
};

struct ErrorCurve {
  std::vector<CurveCell> cells;
};

inline std::int64_t thread_cpu_ns() {
  timespec ts{};
  clock_gettime(CLOCK_THREAD_CPUTIME_ID, &ts);
  return static_cast<std::int64_t>(ts.tv_sec) * 1000000000ll + ts.tv_nsec;
}

// Monte Carlo squared L2(rho_X) error on mc_points fresh draws.
template <typename Predict, typename Truth>
double l2_error(Predict&& predict, Truth&& truth, const CovariateLaw& law, int mc_points,
                CounterRng rng) {
  std::vector<double> z(law.dim);
  double acc = 0.0;
  for (int i = 0; i < mc_points; ++i) {
    law.sample(rng, z);
    const double diff = predict(std::span<const double>(z.data(), z.size())) -
                        truth(std::span<const double>(z.data(), z.size()));
    acc += diff * diff;
  }
  return acc / mc_points;
}

namespace detail_sim {

using PredictFn = std::function<double(std::span<const double>)>;

struct EstimatorTrack {
  std::string name;
  bool live = false;
  bool failed = false;
  std::int64_t cum_ns = 0;
};

inline int worker_count(int max_workers, int repetitions, bool serial) {
  if (serial) return 1;
  if (max_workers > 0) return std::min(max_workers, repetitions);
  if (const char* env = std::getenv("STREAMKERN_THREADS")) {
    const int v = std::atoi(env);
    if (v > 0) return std::min(v, repetitions);
  }
  const unsigned hw = std::thread::hardware_concurrency();
  return std::min<int>(hw > 0 ? static_cast<int>(hw) : 1, repetitions);
}

inline std::vector<CurveCell> run_repetition(const ExperimentSpec& spec, int rep) {
  std::vector<CurveCell> cells;
  CounterRng xrng = CounterRng::substream(spec.seed, {static_cast<std::uint64_t>(rep), kSubstreamX});
  CounterRng nrng =
      CounterRng::substream(spec.seed, {static_cast<std::uint64_t>(rep), kSubstreamNoise});

  std::optional<ProjectionState> projection;
  std::optional<AdditiveState> additive;
  std::optional<SgdModel> sgd;
  std::optional<KrrModel> krr;
  EigenSystem system = EigenSystem::parse(spec.kernel_id);

  EstimatorTrack proj_track{"projection", spec.use_projection};
  EstimatorTrack sgd_track{"sgd", spec.use_sgd};
  EstimatorTrack krr_track{"krr", spec.use_krr};

  if (spec.use_projection) {
    if (spec.additive) {
      AdditiveConfig cfg{system, spec.d, spec.alpha, spec.c, spec.n0_levels, spec.clamp};
      additive.emplace(cfg);
    } else {
      EstimatorConfig cfg{system, spec.alpha, spec.d, spec.c, spec.n0, spec.clamp};
      projection.emplace(cfg);
    }
  }
  if (spec.use_sgd) sgd.emplace(system, spec.sgd_gamma0);

  std::vector<double> krr_xs, krr_ys;
  const auto truth = [&spec](std::span<const double> x) {
    return regression_truth(spec.example, x);
  };

  std::vector<double> block_x, block_y;
  std::vector<double> xi(spec.d);
  std::int64_t prev = 0;
  for (const std::int64_t n_k : spec.n_grid) {
    // One continuous stream; draws do not depend on the estimator roster.
    const std::int64_t count = n_k - prev;
    block_x.resize(count * spec.d);
    block_y.resize(count);
    for (std::int64_t i = 0; i < count; ++i) {
      spec.covariates.sample(xrng, xi);
      std::copy(xi.begin(), xi.end(), block_x.begin() + i * spec.d);
      block_y[i] = truth(xi) + spec.noise.sample(nrng);
    }
    if (spec.use_krr) {
      krr_xs.insert(krr_xs.end(), block_x.begin(), block_x.end());
      krr_ys.insert(krr_ys.end(), block_y.begin(), block_y.end());
    }

    if (proj_track.live && !proj_track.failed) {
      const std::int64_t t0 = thread_cpu_ns();
      try {
        for (std::int64_t i = 0; i < count; ++i) {
          const std::span<const double> x(block_x.data() + i * spec.d, spec.d);
          if (additive)
            additive->observe(x, block_y[i]);
          else
            projection->observe(x, block_y[i]);
        }
      } catch (const std::exception&) {
        proj_track.failed = true;
      }
      proj_track.cum_ns += thread_cpu_ns() - t0;
    }

    if (sgd_track.live && !sgd_track.failed && prev < spec.sgd_max_n) {
      const std::int64_t feed = std::min(count, spec.sgd_max_n - prev);
      const std::int64_t t0 = thread_cpu_ns();
      try {
        for (std::int64_t i = 0; i < feed; ++i)
          sgd->step(std::span<const double>(block_x.data() + i * spec.d, spec.d), block_y[i]);
      } catch (const std::exception&) {
        sgd_track.failed = true;
      }
      sgd_track.cum_ns += thread_cpu_ns() - t0;
    }

    if (krr_track.live && !krr_track.failed && n_k <= spec.krr_max_n) {
      const double lambda = spec.krr_lambda0 * std::pow(static_cast<double>(n_k), spec.krr_lambda_exp);
      const std::int64_t t0 = thread_cpu_ns();
      try {
        krr.emplace(krr_fit(krr_xs, krr_ys, system, lambda));
      } catch (const std::exception&) {
        krr_track.failed = true;
      }
      krr_track.cum_ns += thread_cpu_ns() - t0;
    }

    // Evaluation, outside the timed update windows, on a shared sample.
    const CounterRng eval_rng = CounterRng::substream(
        spec.seed, {static_cast<std::uint64_t>(rep), kSubstreamEval,
                    static_cast<std::uint64_t>(n_k)});
    const auto score = [&](EstimatorTrack& track, const PredictFn& predict,
                           std::int64_t basis) {
      CurveCell cell{track.name, rep, n_k, basis, 0.0, track.cum_ns, false};
      if (track.failed) {
        cell.failed = true;
        cell.sq_l2_error = std::numeric_limits<double>::quiet_NaN();
      } else {
        try {
          cell.sq_l2_error = l2_error(predict, truth, spec.covariates, spec.mc_points, eval_rng);
        } catch (const NotReadyError&) {
          // Not initialized at this checkpoint; the cell is NA but the
          // estimator keeps streaming.
          cell.failed = true;
          cell.sq_l2_error = std::numeric_limits<double>::quiet_NaN();
        } catch (const std::exception&) {
          track.failed = true;
          cell.failed = true;
          cell.sq_l2_error = std::numeric_limits<double>::quiet_NaN();
        }
      }
      cells.push_back(std::move(cell));
    };

    if (proj_track.live) {
      const std::int64_t basis = additive ? additive->stacked_basis_count()
                                          : (projection ? projection->basis_count() : 0);
      score(proj_track,
            [&](std::span<const double> x) {
              return additive ? additive->predict(x) : projection->predict(x);
            },
            basis);
    }
    if (sgd_track.live && n_k <= spec.sgd_max_n)
      score(sgd_track, [&](std::span<const double> x) { return sgd->predict(x); }, sgd->size());
    if (krr_track.live && n_k <= spec.krr_max_n)
      score(krr_track, [&](std::span<const double> x) { return krr->predict(x); }, n_k);

    prev = n_k;
  }
  return cells;
}

}  // namespace detail_sim

// Runs all repetitions, in parallel unless serial is set (STREAMKERN_THREADS
// caps the workers). Output cell order is deterministic.
inline ErrorCurve run_experiment(const ExperimentSpec& spec, bool serial = false,
                                 int max_workers = 0) {
  spec.validate();
  const int workers = detail_sim::worker_count(max_workers, spec.repetitions, serial);
  std::vector<std::vector<CurveCell>> per_rep(spec.repetitions);
  std::atomic<int> next{0};
  const auto work = [&] {
    for (;;) {
      const int rep = next.fetch_add(1);
      if (rep >= spec.repetitions) return;
      per_rep[rep] = detail_sim::run_repetition(spec, rep);
    }
  };
  if (workers <= 1) {
    work();
  } else {
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (int w = 0; w < workers; ++w) pool.emplace_back(work);
    for (auto& t : pool) t.join();
  }

  ErrorCurve curve;
  for (const char* name : {"projection", "sgd", "krr"})
    for (int rep = 0; rep < spec.repetitions; ++rep)
      for (const CurveCell& cell : per_rep[rep])
        if (cell.estimator == name) curve.cells.push_back(cell);
  return curve;
}

struct SlopeFit {
  double slope = 0.0;
  double stderr_slope = 0.0;
  int points = 0;
};

// OLS slope of log10(mean squared error) on log10 n, over repetition-averaged
// checkpoints inside [n_min, n_max].
inline SlopeFit fit_loglog_slope(const ErrorCurve& curve, const std::string& estimator,
                                 double n_min, double n_max) {
  std::vector<std::pair<std::int64_t, std::pair<double, int>>> buckets;  // n -> (sum, count)
  for (const CurveCell& cell : curve.cells) {
    if (cell.estimator != estimator || cell.failed) continue;
    if (cell.n < n_min || cell.n > n_max) continue;
    auto it = std::find_if(buckets.begin(), buckets.end(),
                           [&](const auto& b) { return b.first == cell.n; });
    if (it == buckets.end()) {
      buckets.push_back({cell.n, {cell.sq_l2_error, 1}});
    } else {
      it->second.first += cell.sq_l2_error;
      it->second.second += 1;
    }
  }
  if (buckets.size() < 3)
    throw ConfigError("slope fit needs at least 3 checkpoints in range");
  std::vector<double> lx, ly;
  for (const auto& [n, agg] : buckets) {
    const double mean = agg.first / agg.second;
    if (!(mean > 0.0)) continue;
    lx.push_back(std::log10(static_cast<double>(n)));
    ly.push_back(std::log10(mean));
  }
  const std::size_t k = lx.size();
  if (k < 3) throw ConfigError("slope fit needs at least 3 positive points in range");
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < k; ++i) {
    mx += lx[i];
    my += ly[i];
  }
  mx /= k;
  my /= k;
  double sxx = 0.0, sxy = 0.0;
  for (std::size_t i = 0; i < k; ++i) {
    sxx += (lx[i] - mx) * (lx[i] - mx);
    sxy += (lx[i] - mx) * (ly[i] - my);
  }
  SlopeFit fit;
  fit.slope = sxy / sxx;
  fit.points = static_cast<int>(k);
  double rss = 0.0;
  for (std::size_t i = 0; i < k; ++i) {
    const double r = ly[i] - my - fit.slope * (lx[i] - mx);
    rss += r * r;
  }
  fit.stderr_slope = k > 2 ? std::sqrt(rss / (k - 2) / sxx) : 0.0;
  return fit;
}

inline constexpr const char* kCsvHeader = "estimator,rep,n,N,sq_l2_error,cum_cpu_ns";

namespace detail_sim {

inline std::string format_double(double v) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

}  // namespace detail_sim

inline void write_csv(const ErrorCurve& curve, std::ostream& os) {
  os << kCsvHeader << '\n';
  for (const CurveCell& cell : curve.cells) {
    os << cell.estimator << ',' << cell.rep << ',' << cell.n << ',' << cell.basis << ',';
    if (cell.failed)
      os << "NA";
    else
      os << detail_sim::format_double(cell.sq_l2_error);
    os << ',' << cell.cum_cpu_ns << '\n';
  }
}

inline ErrorCurve read_csv(std::istream& is) {
  std::string line;
  if (!std::getline(is, line)) throw ConfigError("empty CSV");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != kCsvHeader)
    throw ConfigError("unexpected CSV header '" + line + "'");
  ErrorCurve curve;
  int lineno = 1;
  while (std::getline(is, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::vector<std::string> fields;
    std::size_t start = 0;
    for (;;) {
      const std::size_t comma = line.find(',', start);
      fields.push_back(line.substr(start, comma - start));
      if (comma == std::string::npos) break;
      start = comma + 1;
    }
    if (fields.size() != 6)
      throw ConfigError("CSV line " + std::to_string(lineno) + " has " +
                        std::to_string(fields.size()) + " fields");
    CurveCell cell;
    cell.estimator = fields[0];
    try {
      cell.rep = std::stoi(fields[1]);
      cell.n = std::stoll(fields[2]);
      cell.basis = std::stoll(fields[3]);
      if (fields[4] == "NA") {
        cell.failed = true;
        cell.sq_l2_error = std::numeric_limits<double>::quiet_NaN();
      } else {
        cell.sq_l2_error = std::stod(fields[4]);
      }
      cell.cum_cpu_ns = std::stoll(fields[5]);
    } catch (const std::exception&) {
      throw ConfigError("malformed CSV line " + std::to_string(lineno));
    }
    curve.cells.push_back(std::move(cell));
  }
  return curve;
}

}  // namespace streamkern
