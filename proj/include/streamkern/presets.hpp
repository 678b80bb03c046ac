#pragma once

// Built-in experiment presets carrying the published simulation constants,
// plus a flat key = value config-file reader that can start from a preset and
// override fields.

#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "streamkern/errors.hpp"
#include "streamkern/simulate.hpp"

namespace streamkern {

inline std::vector<std::string> preset_names() {
  return {"ex1", "ex2", "exA1", "exA2", "additive10"};
}

inline ExperimentSpec preset(const std::string& name) {
  ExperimentSpec spec;
  spec.name = name;
  spec.repetitions = 15;
  spec.mc_points = 1000;
  spec.seed = 1;
  if (name == "ex1") {
    spec.example = ExampleId::Ex1;
    spec.kernel_id = "periodic_bernoulli";
    spec.alpha = 2.0;
    spec.c = 0.2;
    spec.n0 = 1;
    spec.covariates = {CovariateLaw::Kind::UniformUnit, 1};
    spec.noise = {NoiseLaw::Kind::UniformSym, 0.02};
    spec.n_grid = log_grid(100, 100000);
    spec.use_sgd = true;
    spec.use_krr = true;
    spec.sgd_gamma0 = 128.0;
    spec.krr_lambda0 = 1e-3;
    spec.krr_lambda_exp = -0.8;
  } else if (name == "ex2") {
    spec.example = ExampleId::Ex2;
    spec.kernel_id = "sobolev_min";
    spec.alpha = 1.0;
    spec.c = 0.5;
    spec.n0 = 1;
    spec.covariates = {CovariateLaw::Kind::TiltedLinear, 1};
    spec.noise = {NoiseLaw::Kind::Gaussian, 5.0};
    spec.n_grid = log_grid(100, 100000);
    spec.use_sgd = true;
    spec.use_krr = true;
    spec.sgd_gamma0 = 5.0;
    spec.krr_lambda0 = 0.1;
    spec.krr_lambda_exp = -2.0 / 3.0;
  } else if (name == "exA1") {
    spec.example = ExampleId::ExA1;
    spec.kernel_id = "poly0+sobolev_min";
    spec.alpha = 1.0;
    spec.c = 0.5;
    spec.n0 = 2;
    spec.covariates = {CovariateLaw::Kind::TiltedLinear, 1};
    spec.noise = {NoiseLaw::Kind::Gaussian, 1.0};
    spec.n_grid = log_grid(100, 100000);
  } else if (name == "exA2") {
    spec.example = ExampleId::ExA2;
    spec.kernel_id = "poly2+periodic_bernoulli";
    spec.alpha = 2.0;
    spec.c = 1.0 / 30.0;
    spec.n0 = 4;
    spec.covariates = {CovariateLaw::Kind::UniformUnit, 1};
    spec.noise = {NoiseLaw::Kind::UniformSym, 5.0};
    spec.n_grid = log_grid(100, 100000);
  } else if (name == "additive10") {
    spec.example = ExampleId::Additive10;
    spec.kernel_id = "poly2+periodic_bernoulli";
    spec.additive = true;
    spec.d = 10;
    spec.alpha = 2.0;
    spec.c = 0.2;
    spec.n0_levels = 2;
    spec.covariates = {CovariateLaw::Kind::ProductUniform, 10};
    spec.noise = {NoiseLaw::Kind::Gaussian, 5.0};
    spec.n_grid = log_grid(100, 30000);
  } else {
    throw ConfigError("unknown preset '" + name + "'");
  }
  return spec;
}

namespace detail_cfg {

inline std::string trim(const std::string& s) {
  const auto a = s.find_first_not_of(" \t\r");
  if (a == std::string::npos) return "";
  const auto b = s.find_last_not_of(" \t\r");
  return s.substr(a, b - a + 1);
}

inline double to_double(const std::string& v, const std::string& key) {
  try {
    std::size_t pos = 0;
    const double x = std::stod(v, &pos);
    if (pos != v.size()) throw std::invalid_argument(v);
    return x;
  } catch (const std::exception&) {
    throw ConfigError("bad numeric value '" + v + "' for key '" + key + "'");
  }
}

inline std::int64_t to_int(const std::string& v, const std::string& key) {
  try {
    std::size_t pos = 0;
    const std::int64_t x = std::stoll(v, &pos);
    if (pos != v.size()) throw std::invalid_argument(v);
    return x;
  } catch (const std::exception&) {
    throw ConfigError("bad integer value '" + v + "' for key '" + key + "'");
  }
}

inline bool to_bool(const std::string& v, const std::string& key) {
  if (v == "1" || v == "true" || v == "yes") return true;
  if (v == "0" || v == "false" || v == "no") return false;
  throw ConfigError("bad boolean value '" + v + "' for key '" + key + "'");
}

}  // namespace detail_cfg

// Flat key = value document. '#' starts a comment. A `preset` key (processed
// first) seeds the spec; every other key overrides one field.
inline ExperimentSpec parse_config(std::istream& is) {
  std::vector<std::pair<std::string, std::string>> entries;
  std::string line;
  int lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = detail_cfg::trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError("config line " + std::to_string(lineno) + " is not key = value");
    entries.emplace_back(detail_cfg::trim(line.substr(0, eq)),
                         detail_cfg::trim(line.substr(eq + 1)));
  }

  ExperimentSpec spec;
  std::int64_t n_min = 100, n_max = 0;
  int per_decade = 12;
  bool grid_touched = false;
  for (const auto& [key, value] : entries)
    if (key == "preset") spec = preset(value);

  using detail_cfg::to_bool;
  using detail_cfg::to_double;
  using detail_cfg::to_int;
  for (const auto& [key, value] : entries) {
    if (key == "preset") {
    } else if (key == "name") {
      spec.name = value;
    } else if (key == "truth") {
      spec.example = parse_example_id(value);
    } else if (key == "kernel") {
      spec.kernel_id = value;
    } else if (key == "alpha") {
      spec.alpha = to_double(value, key);
    } else if (key == "d") {
      spec.d = static_cast<int>(to_int(value, key));
      spec.covariates.dim = spec.d;
    } else if (key == "c") {
      spec.c = to_double(value, key);
    } else if (key == "n0") {
      spec.n0 = to_int(value, key);
    } else if (key == "n0_levels") {
      spec.n0_levels = to_int(value, key);
    } else if (key == "clamp") {
      spec.clamp = to_double(value, key);
    } else if (key == "additive") {
      spec.additive = to_bool(value, key);
    } else if (key == "covariate") {
      if (value == "uniform")
        spec.covariates.kind = CovariateLaw::Kind::UniformUnit;
      else if (value == "tilted")
        spec.covariates.kind = CovariateLaw::Kind::TiltedLinear;
      else if (value == "product_uniform")
        spec.covariates.kind = CovariateLaw::Kind::ProductUniform;
      else
        throw ConfigError("unknown covariate law '" + value + "'");
    } else if (key == "noise") {
      if (value == "uniform")
        spec.noise.kind = NoiseLaw::Kind::UniformSym;
      else if (value == "normal")
        spec.noise.kind = NoiseLaw::Kind::Gaussian;
      else if (value == "student_t")
        spec.noise.kind = NoiseLaw::Kind::StudentT;
      else
        throw ConfigError("unknown noise law '" + value + "'");
    } else if (key == "noise_sd" || key == "noise_scale") {
      spec.noise.scale = to_double(value, key);
    } else if (key == "noise_nu") {
      spec.noise.nu = to_double(value, key);
    } else if (key == "n_min") {
      n_min = to_int(value, key);
      grid_touched = true;
    } else if (key == "n_max") {
      n_max = to_int(value, key);
      grid_touched = true;
    } else if (key == "points_per_decade") {
      per_decade = static_cast<int>(to_int(value, key));
      grid_touched = true;
    } else if (key == "reps") {
      spec.repetitions = static_cast<int>(to_int(value, key));
    } else if (key == "mc_points") {
      spec.mc_points = static_cast<int>(to_int(value, key));
    } else if (key == "seed") {
      spec.seed = static_cast<std::uint64_t>(to_int(value, key));
    } else if (key == "estimators") {
      spec.use_projection = spec.use_sgd = spec.use_krr = false;
      std::stringstream ss(value);
      std::string item;
      while (std::getline(ss, item, ',')) {
        item = detail_cfg::trim(item);
        if (item == "projection")
          spec.use_projection = true;
        else if (item == "sgd")
          spec.use_sgd = true;
        else if (item == "krr")
          spec.use_krr = true;
        else
          throw ConfigError("unknown estimator '" + item + "'");
      }
    } else if (key == "sgd_gamma0") {
      spec.sgd_gamma0 = to_double(value, key);
    } else if (key == "sgd_max_n") {
      spec.sgd_max_n = to_int(value, key);
    } else if (key == "krr_lambda0") {
      spec.krr_lambda0 = to_double(value, key);
    } else if (key == "krr_lambda_exp") {
      spec.krr_lambda_exp = to_double(value, key);
    } else if (key == "krr_max_n") {
      spec.krr_max_n = to_int(value, key);
    } else {
      throw ConfigError("unknown config key '" + key + "'");
    }
  }
  if (grid_touched) {
    if (n_max <= 0) n_max = spec.n_grid.empty() ? 10000 : spec.n_grid.back();
    spec.n_grid = log_grid(n_min, n_max, per_decade);
  }
  spec.validate();
  return spec;
}

inline ExperimentSpec load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file '" + path + "'");
  return parse_config(in);
}

}  // namespace streamkern
