#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "splitroa/optim.h"

namespace splitroa::cli {

/// Configuration error; `field` is the dotted path of the offending entry.
class ConfigError : public std::runtime_error {
 public:
  ConfigError(const std::string& field, const std::string& message)
      : std::runtime_error("config field '" + field + "': " + message), field(field) {}
  std::string field;
};

struct BenchmarkConfig {
  /// Parameter-count sweep at `count_degree`.
  std::vector<int> param_counts{2, 4, 6};
  int count_degree = 4;
  /// Degree sweep at `degree_params` parameters.
  std::vector<int> degrees{4, 6};
  int degree_params = 6;
  std::vector<GradMethod> methods{GradMethod::kQr, GradMethod::kLsqr, GradMethod::kFd};
  /// "state" spreads the parameters over the state axes, "time" uses time splits.
  std::string split_kind = "state";
};

struct RunConfig {
  SystemSpec system;
  int degree = 4;
  SplitConfig splits;
  OptimizerConfig optimizer;
  double tol = 1e-9;
  int max_solver_iters = 300;
  std::uint64_t seed = 0;
  std::string out_dir = ".";
  std::int64_t mc_samples = 100000;
  int grid_resolution = 101;
  BenchmarkConfig benchmark;
  int threads = 1;
};

/// Parses a JSON configuration; throws ConfigError naming the field.
RunConfig parse_config(const std::string& json_text);
RunConfig load_config(const std::string& path);

/// Polynomial from a list of {"exponents": [...], "coeff": c} terms.
Polynomial parse_polynomial(const std::string& json_text, int nvars);

SplitProblem make_problem(const RunConfig& config);

}  // namespace splitroa::cli
