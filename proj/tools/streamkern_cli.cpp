// streamkern: run the streaming-regression benchmarks, verify the invariant
// suite, fit convergence slopes, and save/resume estimator snapshots.
//
//   streamkern run --preset ex2 --seed 7 --out ex2.csv
//   streamkern verify --filter ortho
//   streamkern slope ex2.csv --nmin 1000 --nmax 100000
//   streamkern snapshot --preset ex2 --n 500 --out state.ope1
//   streamkern snapshot --resume state.ope1 --preset ex2 --n 1000 --out later.ope1
//
// Exit codes: 0 success, 1 runtime estimator failure (or failed verification),
// 2 usage/config errors.

#include <CLI11.hpp>

#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "streamkern/presets.hpp"
#include "streamkern/simulate.hpp"
#include "streamkern/snapshot.hpp"
#include "streamkern/verify.hpp"

namespace {

using namespace streamkern;

struct CommonOpts {
  std::string preset_name;
  std::string config_path;
  std::int64_t seed = -1;
};

ExperimentSpec resolve_spec(const CommonOpts& opts) {
  if (!opts.preset_name.empty() && !opts.config_path.empty())
    throw ConfigError("pass either --preset or --config, not both");
  ExperimentSpec spec;
  if (!opts.preset_name.empty())
    spec = preset(opts.preset_name);
  else if (!opts.config_path.empty())
    spec = load_config(opts.config_path);
  else
    throw ConfigError("one of --preset or --config is required");
  if (opts.seed >= 0) spec.seed = static_cast<std::uint64_t>(opts.seed);
  return spec;
}

int cmd_run(const CommonOpts& opts, const std::string& out_path, bool serial) {
  const ExperimentSpec spec = resolve_spec(opts);
  const ErrorCurve curve = run_experiment(spec, serial);

  const std::string path = out_path.empty() ? spec.name + ".csv" : out_path;
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("cannot open output file '" + path + "'");
  write_csv(curve, out);
  out.close();

  const double n_max = static_cast<double>(spec.n_grid.back());
  const double n_min = std::max(static_cast<double>(spec.n_grid.front()), n_max / 100.0);
  bool any_failed = false;
  std::printf("%-12s %10s %14s %12s %8s\n", "estimator", "final n", "final error", "slope",
              "stderr");
  for (const char* name : {"projection", "sgd", "krr"}) {
    double final_err = 0.0;
    int final_count = 0;
    std::int64_t final_n = 0;
    int rows = 0;
    for (const CurveCell& cell : curve.cells) {
      if (cell.estimator != name) continue;
      ++rows;
      if (cell.failed) {
        any_failed = true;
        continue;
      }
      if (cell.n > final_n) {
        final_n = cell.n;
        final_err = cell.sq_l2_error;
        final_count = 1;
      } else if (cell.n == final_n) {
        final_err += cell.sq_l2_error;
        ++final_count;
      }
    }
    if (rows == 0) continue;
    std::string slope = "n/a", se = "";
    try {
      const SlopeFit fit = fit_loglog_slope(curve, name, n_min, n_max);
      char buf[32];
      std::snprintf(buf, sizeof(buf), "%.3f", fit.slope);
      slope = buf;
      std::snprintf(buf, sizeof(buf), "%.3f", fit.stderr_slope);
      se = buf;
    } catch (const ConfigError&) {
    }
    if (final_count > 0)
      std::printf("%-12s %10lld %14.6g %12s %8s\n", name, static_cast<long long>(final_n),
                  final_err / final_count, slope.c_str(), se.c_str());
    else
      std::printf("%-12s %10s %14s %12s %8s\n", name, "-", "NA", slope.c_str(), se.c_str());
  }
  std::printf("wrote %s (%zu rows)\n", path.c_str(), curve.cells.size());
  return any_failed ? 1 : 0;
}

int cmd_verify(const std::string& filter) {
  const std::vector<VerifyResult> results = run_verify_suite(filter);
  if (results.empty()) {
    std::fprintf(stderr, "no verification properties match filter '%s'\n", filter.c_str());
    return 2;
  }
  bool all_pass = true;
  for (const VerifyResult& r : results) {
    std::printf("[%s] %-28s %s\n", r.pass ? "PASS" : "FAIL", r.name.c_str(), r.detail.c_str());
    all_pass = all_pass && r.pass;
  }
  return all_pass ? 0 : 1;
}

int cmd_slope(const std::string& csv_path, double n_min, double n_max) {
  std::ifstream in(csv_path, std::ios::binary);
  if (!in) throw ConfigError("cannot open CSV file '" + csv_path + "'");
  const ErrorCurve curve = read_csv(in);
  if (n_max <= 0) {
    for (const CurveCell& cell : curve.cells) n_max = std::max(n_max, static_cast<double>(cell.n));
  }
  std::vector<std::string> names;
  for (const CurveCell& cell : curve.cells)
    if (std::find(names.begin(), names.end(), cell.estimator) == names.end())
      names.push_back(cell.estimator);
  std::printf("%-12s %10s %10s %7s\n", "estimator", "slope", "stderr", "points");
  bool any = false;
  for (const std::string& name : names) {
    try {
      const SlopeFit fit = fit_loglog_slope(curve, name, n_min, n_max);
      std::printf("%-12s %10.4f %10.4f %7d\n", name.c_str(), fit.slope, fit.stderr_slope,
                  fit.points);
      any = true;
    } catch (const ConfigError&) {
      std::printf("%-12s %10s %10s %7s\n", name.c_str(), "n/a", "n/a", "0");
    }
  }
  if (!any) throw ConfigError("no estimator has enough checkpoints in range");
  return 0;
}

int cmd_snapshot(const CommonOpts& opts, const std::string& resume_path, std::int64_t n_target,
                 const std::string& out_path) {
  const ExperimentSpec spec = resolve_spec(opts);
  if (out_path.empty()) throw ConfigError("snapshot requires --out");
  if (n_target < 1) throw ConfigError("snapshot requires --n >= 1");

  CounterRng xrng = CounterRng::substream(spec.seed, {0, kSubstreamX});
  CounterRng nrng = CounterRng::substream(spec.seed, {0, kSubstreamNoise});
  std::vector<double> xi(spec.d);

  std::optional<ProjectionState> projection;
  std::optional<AdditiveState> additive;
  const EigenSystem system = EigenSystem::parse(spec.kernel_id);
  std::int64_t start = 0;
  if (!resume_path.empty()) {
    std::ifstream in(resume_path, std::ios::binary);
    if (!in) throw ConfigError("cannot open snapshot '" + resume_path + "'");
    if (spec.additive)
      additive.emplace(load_additive_state(in));
    else
      projection.emplace(load_projection_state(in));
    start = spec.additive ? additive->sample_count() : projection->sample_count();
    if (start > n_target)
      throw ConfigError("snapshot already has " + std::to_string(start) + " observations");
    // Fast-forward the data stream past the part already seen.
    for (std::int64_t i = 0; i < start; ++i) {
      spec.covariates.sample(xrng, xi);
      (void)spec.noise.sample(nrng);
    }
  } else if (spec.additive) {
    additive.emplace(AdditiveConfig{system, spec.d, spec.alpha, spec.c, spec.n0_levels,
                                    spec.clamp});
  } else {
    projection.emplace(EstimatorConfig{system, spec.alpha, spec.d, spec.c, spec.n0, spec.clamp});
  }

  for (std::int64_t i = start; i < n_target; ++i) {
    spec.covariates.sample(xrng, xi);
    const double y =
        regression_truth(spec.example, std::span<const double>(xi.data(), xi.size())) +
        spec.noise.sample(nrng);
    if (additive)
      additive->observe(xi, y);
    else
      projection->observe(xi, y);
  }

  std::ofstream out(out_path, std::ios::binary);
  if (!out) throw ConfigError("cannot open output file '" + out_path + "'");
  if (additive)
    save_snapshot(*additive, out);
  else
    save_snapshot(*projection, out);
  const std::int64_t basis =
      additive ? additive->stacked_basis_count() : projection->basis_count();
  std::printf("snapshot: n=%lld N=%lld -> %s\n", static_cast<long long>(n_target),
              static_cast<long long>(basis), out_path.c_str());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"streaming kernel projection regression benchmarks"};
  app.require_subcommand(1);

  CommonOpts run_opts, snap_opts;
  std::string run_out, snap_out, snap_resume, verify_filter, slope_csv;
  bool serial = false;
  std::int64_t snap_n = 1000;
  double nmin = 0.0, nmax = 0.0;

  CLI::App* run = app.add_subcommand("run", "run an experiment and write a CSV");
  run->add_option("--preset", run_opts.preset_name, "built-in experiment name");
  run->add_option("--config", run_opts.config_path, "key = value config file");
  run->add_option("--out", run_out, "output CSV path (default <name>.csv)");
  run->add_option("--seed", run_opts.seed, "seed override");
  run->add_flag("--serial", serial, "single worker, for timing-sensitive runs");

  CLI::App* verify = app.add_subcommand("verify", "run the fast invariant suite");
  verify->add_option("--filter", verify_filter, "only properties whose name contains this");

  CLI::App* slope = app.add_subcommand("slope", "fit log-log slopes from a CSV");
  slope->add_option("csv", slope_csv, "CSV produced by run")->required();
  slope->add_option("--nmin", nmin, "lower end of the fit range");
  slope->add_option("--nmax", nmax, "upper end of the fit range");

  CLI::App* snapshot = app.add_subcommand("snapshot", "stream and save estimator state");
  snapshot->add_option("--preset", snap_opts.preset_name, "built-in experiment name");
  snapshot->add_option("--config", snap_opts.config_path, "key = value config file");
  snapshot->add_option("--seed", snap_opts.seed, "seed override");
  snapshot->add_option("--n", snap_n, "total observations to stream");
  snapshot->add_option("--out", snap_out, "snapshot output path");
  snapshot->add_option("--resume", snap_resume, "resume from an existing snapshot");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_name() == "CallForHelp" || e.get_name() == "CallForAllHelp")
      return app.exit(e);
    std::fprintf(stderr, "%s\n", e.what());
    return 2;
  }

  try {
    if (run->parsed()) return cmd_run(run_opts, run_out, serial);
    if (verify->parsed()) return cmd_verify(verify_filter);
    if (slope->parsed()) return cmd_slope(slope_csv, nmin, nmax);
    if (snapshot->parsed()) return cmd_snapshot(snap_opts, snap_resume, snap_n, snap_out);
  } catch (const ConfigError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "runtime error: %s\n", e.what());
    return 1;
  }
  return 2;
}
