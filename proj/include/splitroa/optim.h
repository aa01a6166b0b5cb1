#pragma once

#include <functional>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

#include "splitroa/paramdiff.h"

namespace splitroa {

struct OptimizerConfig {
  double stepsize = 0.05;
  double beta1 = 0.8;
  double beta2 = 0.9;
  double eps = 1e-8;
  int max_iters = 100;
  /// Minimal separation between adjacent splits and to the ends of their
  /// interval, as a fraction of the interval length.
  double min_gap_fraction = 1e-3;
  GradMethod grad_method = GradMethod::kQr;
  FDConfig fd;
  /// Consecutive failed solves before the run is aborted.
  int max_consecutive_failures = 3;

  void validate() const;
};

struct AdamState {
  std::vector<double> m;
  std::vector<double> v;
  int t = 0;
};

/// Sorts each group, then clamps its splits left to right so that they keep
/// `min_gap_fraction` of the group interval from each other and from its ends.
std::vector<double> project_feasible(std::span<const double> theta, const ParameterBounds& bounds,
                                     double min_gap_fraction);

/// One ADAM update with bias correction followed by project_feasible.
std::vector<double> adam_step(std::span<const double> theta, AdamState& state,
                              std::span<const double> gradient, const OptimizerConfig& config,
                              const ParameterBounds& bounds);

struct TraceEntry {
  int iteration = 0;
  std::vector<double> theta;
  /// NaN when the solve failed.
  double value = std::numeric_limits<double>::quiet_NaN();
  std::vector<double> gradient;
  double seconds = 0.0;
  double margin = 0.0;
  bool fallback = false;
  bool failed = false;
  std::string message;
};

struct OptimizationTrace {
  std::string system;
  int degree = 0;
  SplitLayout layout;
  std::vector<TraceEntry> entries;
  /// Index of the best successful entry, -1 if none.
  int best_index = -1;
  bool aborted = false;

  const TraceEntry& best() const;
  /// Best value after each entry (non-increasing).
  std::vector<double> best_so_far() const;
  std::vector<std::vector<double>> theta_path() const;
  std::vector<double> values() const;
};

class OptimizationAborted : public std::runtime_error {
 public:
  OptimizationAborted(const std::string& what, OptimizationTrace trace)
      : std::runtime_error(what), trace(std::move(trace)) {}
  OptimizationTrace trace;
};

using IterationCallback = std::function<void(const TraceEntry&)>;

/// Runs `config.max_iters` ADAM steps from theta0 (max_iters + 1 evaluations
/// when nothing fails). A failed solve is logged, the iterate is replaced by a
/// step from the last good point with half the previous step size, and the run
/// aborts with OptimizationAborted after too many consecutive failures.
OptimizationTrace optimize(const SplitProblem& problem, std::span<const double> theta0,
                           const OptimizerConfig& config, const IterationCallback& on_iteration = {});

struct PathEvaluation {
  /// NaN where the solve failed.
  std::vector<double> values;
  std::vector<double> seconds;
  std::vector<std::string> messages;

  /// Smallest finite value and its index (-1 if none).
  std::pair<double, int> best() const;
};

/// Solves `problem` (typically at a higher degree) at every entry of the path.
PathEvaluation evaluate_along_path(const SplitProblem& problem,
                                   const std::vector<std::vector<double>>& path,
                                   const IterationCallback& on_entry = {});

struct GridRow {
  std::vector<double> theta;
  double value = std::numeric_limits<double>::quiet_NaN();
};

struct GridResult {
  std::vector<GridRow> rows;
  std::vector<double> best_theta;
  double best_value = std::numeric_limits<double>::quiet_NaN();
};

inline constexpr std::size_t kGridCap = 2000;

/// Exhaustive search over the product of per-parameter candidate values,
/// skipping combinations that are unsorted within a group or not strictly
/// inside the group interval. Throws std::invalid_argument when the number of
/// admissible points exceeds `cap`.
GridResult grid_search(const SplitProblem& problem, const std::vector<std::vector<double>>& axes,
                       std::size_t cap = kGridCap, const IterationCallback& on_point = {});

/// Trace serialization.
std::string trace_to_json(const OptimizationTrace& trace);
OptimizationTrace trace_from_json(const std::string& text);
/// Header iteration,value,best_value,theta_0..; 17 significant digits.
std::string trace_to_csv(const OptimizationTrace& trace);

}  // namespace splitroa
