#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <cmath>
#include <sstream>
#include <vector>

#include "streamkern/presets.hpp"
#include "streamkern/quadrature.hpp"
#include "streamkern/simulate.hpp"

using namespace streamkern;
using Catch::Approx;

TEST_CASE("tilted covariate law") {
  CovariateLaw law{CovariateLaw::Kind::TiltedLinear, 1};
  CounterRng rng = CounterRng::substream(101, {0});
  const int n = 100000;
  double mean = 0.0, below_half = 0.0;
  double x = 0.0;
  for (int i = 0; i < n; ++i) {
    law.sample(rng, std::span<double>(&x, 1));
    REQUIRE(x >= 0.0);
    REQUIRE(x <= 1.0);
    mean += x;
    if (x <= 0.5) below_half += 1.0;
  }
  mean /= n;
  below_half /= n;
  // E[X] = int x (x + 1/2) dx = 7/12; F(1/2) = 3/8.
  CHECK(mean == Approx(7.0 / 12.0).margin(0.005));
  CHECK(below_half == Approx(0.375).margin(0.01));
}

TEST_CASE("noise laws") {
  SECTION("bounded uniform") {
    NoiseLaw law{NoiseLaw::Kind::UniformSym, 0.02};
    CounterRng rng = CounterRng::substream(103, {0});
    for (int i = 0; i < 10000; ++i) CHECK(std::abs(law.sample(rng)) <= 0.02);
  }

  SECTION("gaussian sd and mean") {
    NoiseLaw law{NoiseLaw::Kind::Gaussian, 5.0};
    CounterRng rng = CounterRng::substream(103, {1});
    const int n = 1000000;
    double mean = 0.0, sq = 0.0;
    for (int i = 0; i < n; ++i) {
      const double e = law.sample(rng);
      mean += e;
      sq += e * e;
    }
    mean /= n;
    sq /= n;
    CHECK(std::abs(mean) < 0.02);
    CHECK(std::sqrt(sq) == Approx(5.0).margin(0.02));
  }

  SECTION("student t(2.1) tail exceeds the variance-matched gaussian") {
    NoiseLaw law{NoiseLaw::Kind::StudentT, 1.0, 2.1};
    CounterRng rng = CounterRng::substream(103, {2});
    const int n = 200000;
    std::vector<double> abs_draws(n);
    double mean = 0.0;
    for (int i = 0; i < n; ++i) {
      const double e = law.sample(rng);
      abs_draws[i] = std::abs(e);
      mean += e;
    }
    CHECK(std::abs(mean / n) < 0.1);
    std::nth_element(abs_draws.begin(), abs_draws.begin() + n - n / 1000, abs_draws.end());
    const double q999 = abs_draws[n - n / 1000];
    // Matched normal: sd = sqrt(nu/(nu-2)) = sqrt(21), |z|_{0.999} = 3.2905 sd.
    CHECK(q999 > std::sqrt(2.1 / 0.1) * 3.2905);
  }
}

TEST_CASE("regression truths") {
  const double x0 = 0.0;
  CHECK(regression_truth(ExampleId::Ex1, std::span<const double>(&x0, 1)) ==
        Approx(-1.0 / 30.0).epsilon(1e-14));
  const double xh = 0.5;
  CHECK(regression_truth(ExampleId::Ex2, std::span<const double>(&xh, 1)) == Approx(1.0));
  const double xa = 0.1;
  CHECK(regression_truth(ExampleId::ExA1, std::span<const double>(&xa, 1)) == Approx(1.0));
  const double xb = 0.6;
  CHECK(regression_truth(ExampleId::ExA1, std::span<const double>(&xb, 1)) ==
        Approx(1.0 + 0.1 + 0.8).epsilon(1e-14));
  CHECK(regression_truth(ExampleId::ExA2, std::span<const double>(&xh, 1)) == Approx(2.0));
  const std::vector<double> zeros(10, 0.0);
  CHECK(regression_truth(ExampleId::Additive10, zeros) == Approx(0.0).margin(1e-13));
}

TEST_CASE("monte carlo L2 error") {
  const CovariateLaw uniform{CovariateLaw::Kind::UniformUnit, 1};
  const auto truth = [](std::span<const double> x) {
    return regression_truth(ExampleId::Ex1, x);
  };

  SECTION("exact predictions give zero") {
    CHECK(l2_error(truth, truth, uniform, 500, CounterRng::substream(107, {0})) == 0.0);
  }

  SECTION("constant offset gives its square exactly") {
    const auto shifted = [&](std::span<const double> x) { return truth(x) + 1.0; };
    CHECK(l2_error(shifted, truth, uniform, 777, CounterRng::substream(107, {1})) ==
          Approx(1.0).epsilon(1e-12));
  }

  SECTION("zero predictor against Ex1 matches the quadrature oracle") {
    // int_0^1 B4(x)^2 dx by 256-node Gauss-Legendre (equals 1/2100).
    const QuadratureRule rule = gauss_legendre_01(256);
    const double oracle = rule.integrate([](double x) {
      const double b = bernoulli4(x);
      return b * b;
    });
    CHECK(oracle == Approx(1.0 / 2100.0).epsilon(1e-12));
    const auto zero = [](std::span<const double>) { return 0.0; };
    const double mc = l2_error(zero, truth, uniform, 20000, CounterRng::substream(107, {2}));
    CHECK(mc == Approx(oracle).margin(3e-5));
  }
}

TEST_CASE("log grid") {
  const std::vector<std::int64_t> grid = log_grid(100, 100000, 12);
  CHECK(grid.front() == 100);
  CHECK(grid.back() == 100000);
  for (std::size_t i = 1; i < grid.size(); ++i) CHECK(grid[i] > grid[i - 1]);
  CHECK(grid.size() >= 36);
}

TEST_CASE("slope fitting") {
  SECTION("exact power law") {
    ErrorCurve curve;
    for (int rep = 0; rep < 2; ++rep)
      for (std::int64_t n : {100, 200, 400, 800, 1600})
        curve.cells.push_back({"projection", rep, n, 4, 1.0 / n, 0, false});
    const SlopeFit fit = fit_loglog_slope(curve, "projection", 100, 1600);
    CHECK(fit.slope == Approx(-1.0).margin(1e-12));
    CHECK(fit.stderr_slope == Approx(0.0).margin(1e-12));
    CHECK(fit.points == 5);
  }

  SECTION("constant curve") {
    ErrorCurve curve;
    for (std::int64_t n : {100, 1000, 10000})
      curve.cells.push_back({"projection", 0, n, 4, 0.25, 0, false});
    CHECK(fit_loglog_slope(curve, "projection", 100, 10000).slope == Approx(0.0).margin(1e-12));
  }

  SECTION("too few points in range") {
    ErrorCurve curve;
    for (std::int64_t n : {100, 1000})
      curve.cells.push_back({"projection", 0, n, 4, 0.25, 0, false});
    CHECK_THROWS_AS(fit_loglog_slope(curve, "projection", 100, 10000), ConfigError);
    CHECK_THROWS_AS(fit_loglog_slope(curve, "sgd", 100, 10000), ConfigError);
  }
}

TEST_CASE("run_experiment shape and determinism") {
  ExperimentSpec spec = preset("ex2");
  spec.repetitions = 1;
  spec.n_grid = {100};
  spec.use_sgd = false;
  spec.use_krr = false;
  spec.mc_points = 200;

  SECTION("single cell for a single checkpoint") {
    const ErrorCurve curve = run_experiment(spec);
    REQUIRE(curve.cells.size() == 1);
    CHECK(curve.cells[0].estimator == "projection");
    CHECK(curve.cells[0].n == 100);
    CHECK(curve.cells[0].basis == schedule_basis_count(100, 1.0, 1, 0.5));
    CHECK(!curve.cells[0].failed);
  }

  SECTION("same seed twice gives bitwise-identical errors") {
    spec.repetitions = 3;
    spec.n_grid = {50, 120, 300};
    const ErrorCurve a = run_experiment(spec);
    const ErrorCurve b = run_experiment(spec);
    REQUIRE(a.cells.size() == b.cells.size());
    for (std::size_t i = 0; i < a.cells.size(); ++i) {
      CHECK(a.cells[i].sq_l2_error == b.cells[i].sq_l2_error);
      CHECK(a.cells[i].basis == b.cells[i].basis);
    }
  }

  SECTION("serial and parallel runs agree on the statistical payload") {
    spec.repetitions = 4;
    spec.n_grid = {60, 150};
    const ErrorCurve serial = run_experiment(spec, /*serial=*/true);
    const ErrorCurve parallel = run_experiment(spec, false, 4);
    REQUIRE(serial.cells.size() == parallel.cells.size());
    for (std::size_t i = 0; i < serial.cells.size(); ++i) {
      CHECK(serial.cells[i].estimator == parallel.cells[i].estimator);
      CHECK(serial.cells[i].rep == parallel.cells[i].rep);
      CHECK(serial.cells[i].n == parallel.cells[i].n);
      CHECK(serial.cells[i].sq_l2_error == parallel.cells[i].sq_l2_error);
    }
  }

  SECTION("adding estimators never perturbs the projection column") {
    spec.repetitions = 2;
    spec.n_grid = {80, 200};
    const ErrorCurve solo = run_experiment(spec);
    ExperimentSpec both = spec;
    both.use_sgd = true;
    both.sgd_gamma0 = 5.0;
    const ErrorCurve joint = run_experiment(both);
    std::vector<double> solo_errs, joint_errs;
    for (const CurveCell& cell : solo.cells)
      if (cell.estimator == "projection") solo_errs.push_back(cell.sq_l2_error);
    for (const CurveCell& cell : joint.cells)
      if (cell.estimator == "projection") joint_errs.push_back(cell.sq_l2_error);
    REQUIRE(solo_errs.size() == joint_errs.size());
    for (std::size_t i = 0; i < solo_errs.size(); ++i) CHECK(solo_errs[i] == joint_errs[i]);
    CHECK(joint.cells.size() == 2 * solo.cells.size());
  }

  SECTION("pre-initialization checkpoint yields NA then recovers") {
    spec.n_grid = {2, 100};
    const ErrorCurve curve = run_experiment(spec);
    REQUIRE(curve.cells.size() == 2);
    CHECK(curve.cells[0].failed);
    CHECK(!curve.cells[1].failed);
  }

  SECTION("cumulative cpu time is non-decreasing within a repetition") {
    spec.repetitions = 2;
    spec.n_grid = {50, 150, 400, 1000};
    spec.use_sgd = true;
    spec.sgd_gamma0 = 5.0;
    const ErrorCurve curve = run_experiment(spec);
    for (const char* name : {"projection", "sgd"}) {
      for (int rep = 0; rep < 2; ++rep) {
        std::int64_t last = -1;
        for (const CurveCell& cell : curve.cells) {
          if (cell.estimator != name || cell.rep != rep) continue;
          CHECK(cell.cum_cpu_ns >= last);
          last = cell.cum_cpu_ns;
        }
      }
    }
  }

  SECTION("evaluation cost stays outside the update clock") {
    spec.repetitions = 1;
    spec.n_grid = {40, 400};
    ExperimentSpec heavy = spec;
    heavy.mc_points = 40000;
    spec.mc_points = 20;
    const std::int64_t light_ns = run_experiment(spec).cells.back().cum_cpu_ns;
    const std::int64_t heavy_ns = run_experiment(heavy).cells.back().cum_cpu_ns;
    // A 2000x heavier evaluation load must not show up in update time.
    // (CPU accounting is tick-quantized, hence the absolute allowance.)
    CHECK(heavy_ns < 5 * light_ns + 50000000);
  }
}

TEST_CASE("csv round trip") {
  ExperimentSpec spec = preset("ex2");
  spec.repetitions = 2;
  spec.n_grid = {2, 60, 150};  // first checkpoint yields NA cells
  spec.mc_points = 100;
  spec.use_sgd = false;
  spec.use_krr = true;
  spec.krr_max_n = 100;
  const ErrorCurve curve = run_experiment(spec);

  std::stringstream buffer;
  write_csv(curve, buffer);
  const std::string text = buffer.str();
  CHECK(text.rfind("estimator,rep,n,N,sq_l2_error,cum_cpu_ns\n", 0) == 0);
  CHECK(text.find("NA") != std::string::npos);
  CHECK(text.find('\r') == std::string::npos);

  const ErrorCurve parsed = read_csv(buffer);
  REQUIRE(parsed.cells.size() == curve.cells.size());
  for (std::size_t i = 0; i < curve.cells.size(); ++i) {
    CHECK(parsed.cells[i].estimator == curve.cells[i].estimator);
    CHECK(parsed.cells[i].n == curve.cells[i].n);
    CHECK(parsed.cells[i].failed == curve.cells[i].failed);
    if (!curve.cells[i].failed)
      CHECK(parsed.cells[i].sq_l2_error == curve.cells[i].sq_l2_error);  // bit-exact round trip
  }

  SECTION("malformed inputs") {
    std::stringstream bad1("wrong,header\n");
    CHECK_THROWS_AS(read_csv(bad1), ConfigError);
    std::stringstream bad2("estimator,rep,n,N,sq_l2_error,cum_cpu_ns\nprojection,0,10\n");
    CHECK_THROWS_AS(read_csv(bad2), ConfigError);
    std::stringstream bad3("estimator,rep,n,N,sq_l2_error,cum_cpu_ns\nprojection,0,10,2,x,0\n");
    CHECK_THROWS_AS(read_csv(bad3), ConfigError);
  }
}

TEST_CASE("presets and config files") {
  SECTION("all presets validate") {
    for (const std::string& name : preset_names()) {
      const ExperimentSpec spec = preset(name);
      spec.validate();
      CHECK(spec.name == name);
    }
    CHECK_THROWS_AS(preset("nope"), ConfigError);
  }

  SECTION("published constants") {
    const ExperimentSpec ex1 = preset("ex1");
    CHECK(ex1.c == Approx(0.2));
    CHECK(ex1.alpha == 2.0);
    CHECK(ex1.sgd_gamma0 == 128.0);
    CHECK(ex1.krr_lambda0 == Approx(1e-3));
    CHECK(ex1.krr_lambda_exp == Approx(-0.8));
    CHECK(ex1.noise.kind == NoiseLaw::Kind::UniformSym);
    CHECK(ex1.noise.scale == Approx(0.02));

    const ExperimentSpec ex2 = preset("ex2");
    CHECK(ex2.c == Approx(0.5));
    CHECK(ex2.sgd_gamma0 == 5.0);
    CHECK(ex2.krr_lambda0 == Approx(0.1));
    CHECK(ex2.covariates.kind == CovariateLaw::Kind::TiltedLinear);
    CHECK(ex2.noise.scale == Approx(5.0));

    const ExperimentSpec add = preset("additive10");
    CHECK(add.additive);
    CHECK(add.d == 10);
    CHECK(add.c == Approx(0.2));
    CHECK(add.n_grid.back() == 30000);
  }

  SECTION("config overrides a preset") {
    std::stringstream cfg(
        "# heavy-tail variant\n"
        "preset = ex2\n"
        "reps = 3\n"
        "estimators = projection\n"
        "noise = student_t\n"
        "noise_nu = 2.1\n"
        "noise_scale = 1\n"
        "n_min = 100\n"
        "n_max = 2000\n"
        "seed = 9\n");
    const ExperimentSpec spec = parse_config(cfg);
    CHECK(spec.repetitions == 3);
    CHECK(spec.noise.kind == NoiseLaw::Kind::StudentT);
    CHECK(spec.noise.nu == Approx(2.1));
    CHECK(!spec.use_sgd);
    CHECK(!spec.use_krr);
    CHECK(spec.n_grid.front() == 100);
    CHECK(spec.n_grid.back() == 2000);
    CHECK(spec.seed == 9);
    CHECK(spec.c == Approx(0.5));  // inherited from ex2
  }

  SECTION("bad configs raise") {
    std::stringstream bad1("preset = ex2\nwat = 1\n");
    CHECK_THROWS_AS(parse_config(bad1), ConfigError);
    std::stringstream bad2("preset = ex2\nreps = many\n");
    CHECK_THROWS_AS(parse_config(bad2), ConfigError);
    std::stringstream bad3("preset = ex2\nnot a kv line\n");
    CHECK_THROWS_AS(parse_config(bad3), ConfigError);
  }
}
