#include "splitroa/optim.h"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>

#include "json.hpp"
#include "splitroa/csv.h"

namespace splitroa {

namespace {

using Clock = std::chrono::steady_clock;
constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

nlohmann::json real_or_null(double v) {
  return std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(nullptr);
}

double real_from(const nlohmann::json& j) {
  return j.is_null() ? kNaN : j.get<double>();
}

}  // namespace

void OptimizerConfig::validate() const {
  if (!(stepsize > 0.0)) throw std::invalid_argument("stepsize must be positive");
  if (!(beta1 >= 0.0 && beta1 < 1.0)) throw std::invalid_argument("beta1 must lie in [0, 1)");
  if (!(beta2 >= 0.0 && beta2 < 1.0)) throw std::invalid_argument("beta2 must lie in [0, 1)");
  if (!(eps > 0.0)) throw std::invalid_argument("eps must be positive");
  if (max_iters < 0) throw std::invalid_argument("max_iters must be non-negative");
  if (!(min_gap_fraction >= 0.0 && min_gap_fraction < 0.5)) {
    throw std::invalid_argument("min_gap must lie in [0, 0.5)");
  }
  if (max_consecutive_failures < 1) {
    throw std::invalid_argument("max_consecutive_failures must be at least 1");
  }
  fd.validate();
}

std::vector<double> project_feasible(std::span<const double> theta, const ParameterBounds& bounds,
                                     double min_gap_fraction) {
  if (theta.size() != bounds.lo.size()) {
    throw std::invalid_argument("project_feasible: parameter count mismatch");
  }
  std::vector<double> out(theta.begin(), theta.end());
  std::size_t start = 0;
  while (start < out.size()) {
    std::size_t end = start;
    while (end < out.size() && bounds.group[end] == bounds.group[start]) ++end;
    const double lo = bounds.lo[start];
    const double hi = bounds.hi[start];
    const double gap = min_gap_fraction * (hi - lo);
    std::sort(out.begin() + static_cast<std::ptrdiff_t>(start),
              out.begin() + static_cast<std::ptrdiff_t>(end));
    double prev = lo;
    for (std::size_t i = start; i < end; ++i) {
      const double remaining = static_cast<double>(end - i);
      const double upper = hi - gap * remaining;
      out[i] = std::clamp(out[i], std::min(prev + gap, upper), upper);
      prev = out[i];
    }
    start = end;
  }
  return out;
}

std::vector<double> adam_step(std::span<const double> theta, AdamState& state,
                              std::span<const double> gradient, const OptimizerConfig& config,
                              const ParameterBounds& bounds) {
  const std::size_t n = theta.size();
  if (gradient.size() != n) throw std::invalid_argument("adam_step: gradient size mismatch");
  for (double g : gradient) {
    if (!std::isfinite(g)) throw std::invalid_argument("adam_step: gradient is not finite");
  }
  if (state.m.empty()) {
    state.m.assign(n, 0.0);
    state.v.assign(n, 0.0);
  }
  state.t += 1;
  const double c1 = 1.0 - std::pow(config.beta1, state.t);
  const double c2 = 1.0 - std::pow(config.beta2, state.t);
  std::vector<double> next(theta.begin(), theta.end());
  for (std::size_t i = 0; i < n; ++i) {
    state.m[i] = config.beta1 * state.m[i] + (1.0 - config.beta1) * gradient[i];
    state.v[i] = config.beta2 * state.v[i] + (1.0 - config.beta2) * gradient[i] * gradient[i];
    const double mhat = state.m[i] / c1;
    const double vhat = state.v[i] / c2;
    next[i] -= config.stepsize * mhat / (std::sqrt(vhat) + config.eps);
  }
  return project_feasible(next, bounds, config.min_gap_fraction);
}

const TraceEntry& OptimizationTrace::best() const {
  if (best_index < 0) throw std::logic_error("trace has no successful entry");
  return entries[static_cast<std::size_t>(best_index)];
}

std::vector<double> OptimizationTrace::best_so_far() const {
  std::vector<double> out;
  double best = kNaN;
  for (const auto& e : entries) {
    if (!e.failed && (std::isnan(best) || e.value < best)) best = e.value;
    out.push_back(best);
  }
  return out;
}

std::vector<std::vector<double>> OptimizationTrace::theta_path() const {
  std::vector<std::vector<double>> out;
  for (const auto& e : entries) out.push_back(e.theta);
  return out;
}

std::vector<double> OptimizationTrace::values() const {
  std::vector<double> out;
  for (const auto& e : entries) out.push_back(e.value);
  return out;
}

OptimizationTrace optimize(const SplitProblem& problem, std::span<const double> theta0,
                           const OptimizerConfig& config, const IterationCallback& on_iteration) {
  config.validate();
  const ParameterBounds bounds = parameter_bounds(problem.sys, problem.layout);
  if (theta0.size() != bounds.lo.size()) {
    throw std::invalid_argument("optimize: theta0 does not match the split layout");
  }
  OptimizationTrace trace;
  trace.system = problem.sys.name;
  trace.degree = problem.degree;
  trace.layout = problem.layout;

  std::vector<double> theta(theta0.begin(), theta0.end());
  AdamState state;
  // Last successful point, its gradient and the ADAM state before stepping from it.
  std::vector<double> good_theta;
  std::vector<double> good_grad;
  AdamState good_state;
  double step = config.stepsize;
  int failures = 0;

  for (int it = 0; it <= config.max_iters; ++it) {
    TraceEntry entry;
    entry.iteration = it;
    entry.theta = theta;
    const auto start = Clock::now();
    try {
      GradientResult g = gradient(problem, theta, config.fd, config.grad_method);
      entry.value = g.value;
      entry.gradient = g.gradient;
      entry.margin = g.diagnostics.differentiability.min_margin;
      entry.fallback = g.diagnostics.fallback;
      entry.message = g.diagnostics.note;
    } catch (const SolveFailure& e) {
      entry.failed = true;
      entry.message = e.what();
    }
    entry.seconds = seconds_since(start);
    trace.entries.push_back(entry);
    if (!entry.failed &&
        (trace.best_index < 0 || entry.value < trace.best().value)) {
      trace.best_index = static_cast<int>(trace.entries.size()) - 1;
    }
    if (on_iteration) on_iteration(trace.entries.back());

    if (entry.failed) {
      ++failures;
      if (failures >= config.max_consecutive_failures || good_theta.empty()) {
        trace.aborted = true;
        throw OptimizationAborted("optimization aborted after " + std::to_string(failures) +
                                      " consecutive solve failure(s): " + entry.message,
                                  std::move(trace));
      }
      if (it == config.max_iters) break;
      step *= 0.5;
      state = good_state;
      OptimizerConfig halved = config;
      halved.stepsize = step;
      theta = adam_step(good_theta, state, good_grad, halved, bounds);
      continue;
    }

    failures = 0;
    step = config.stepsize;
    if (it == config.max_iters) break;
    good_theta = theta;
    good_grad = entry.gradient;
    good_state = state;
    theta = adam_step(theta, state, entry.gradient, config, bounds);
  }
  return trace;
}

std::pair<double, int> PathEvaluation::best() const {
  double best = kNaN;
  int index = -1;
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (std::isfinite(values[i]) && (index < 0 || values[i] < best)) {
      best = values[i];
      index = static_cast<int>(i);
    }
  }
  return {best, index};
}

PathEvaluation evaluate_along_path(const SplitProblem& problem,
                                   const std::vector<std::vector<double>>& path,
                                   const IterationCallback& on_entry) {
  PathEvaluation out;
  for (std::size_t i = 0; i < path.size(); ++i) {
    const auto start = Clock::now();
    TraceEntry entry;
    entry.iteration = static_cast<int>(i);
    entry.theta = path[i];
    try {
      entry.value = evaluate(problem, path[i]).value;
    } catch (const std::exception& e) {
      entry.failed = true;
      entry.message = e.what();
    }
    entry.seconds = seconds_since(start);
    out.values.push_back(entry.value);
    out.seconds.push_back(entry.seconds);
    out.messages.push_back(entry.message);
    if (on_entry) on_entry(entry);
  }
  return out;
}

GridResult grid_search(const SplitProblem& problem, const std::vector<std::vector<double>>& axes,
                       std::size_t cap, const IterationCallback& on_point) {
  const ParameterBounds bounds = parameter_bounds(problem.sys, problem.layout);
  if (axes.size() != bounds.lo.size()) {
    throw std::invalid_argument("grid_search: need one candidate list per parameter");
  }
  for (const auto& a : axes) {
    if (a.empty()) throw std::invalid_argument("grid_search: empty candidate list");
  }
  auto admissible = [&](const std::vector<double>& theta) {
    for (std::size_t i = 0; i < theta.size(); ++i) {
      if (!(theta[i] > bounds.lo[i] && theta[i] < bounds.hi[i])) return false;
      if (i > 0 && bounds.group[i] == bounds.group[i - 1] && !(theta[i] > theta[i - 1])) {
        return false;
      }
    }
    return true;
  };

  std::vector<std::vector<double>> points;
  std::vector<std::size_t> idx(axes.size(), 0);
  std::vector<double> theta(axes.size());
  while (true) {
    for (std::size_t i = 0; i < axes.size(); ++i) theta[i] = axes[i][idx[i]];
    if (admissible(theta)) {
      points.push_back(theta);
      if (points.size() > cap) {
        throw std::invalid_argument("grid_search: more than " + std::to_string(cap) +
                                    " admissible grid points");
      }
    }
    std::size_t k = 0;
    while (k < axes.size() && ++idx[k] == axes[k].size()) idx[k++] = 0;
    if (k == axes.size()) break;
  }

  GridResult out;
  for (std::size_t i = 0; i < points.size(); ++i) {
    GridRow row;
    row.theta = points[i];
    TraceEntry entry;
    entry.iteration = static_cast<int>(i);
    entry.theta = points[i];
    const auto start = Clock::now();
    try {
      row.value = evaluate(problem, points[i]).value;
    } catch (const std::exception& e) {
      entry.failed = true;
      entry.message = e.what();
    }
    entry.value = row.value;
    entry.seconds = seconds_since(start);
    if (std::isfinite(row.value) && (out.best_theta.empty() || row.value < out.best_value)) {
      out.best_value = row.value;
      out.best_theta = row.theta;
    }
    out.rows.push_back(std::move(row));
    if (on_point) on_point(entry);
  }
  return out;
}

std::string trace_to_json(const OptimizationTrace& trace) {
  nlohmann::json j;
  j["system"] = trace.system;
  j["degree"] = trace.degree;
  j["layout"] = {{"time_count", trace.layout.time_count},
                 {"axis_counts", trace.layout.axis_counts}};
  j["best_index"] = trace.best_index;
  j["aborted"] = trace.aborted;
  nlohmann::json entries = nlohmann::json::array();
  for (const auto& e : trace.entries) {
    nlohmann::json g = nlohmann::json::array();
    for (double v : e.gradient) g.push_back(real_or_null(v));
    entries.push_back({{"iteration", e.iteration},
                       {"theta", e.theta},
                       {"value", real_or_null(e.value)},
                       {"gradient", g},
                       {"seconds", e.seconds},
                       {"margin", real_or_null(e.margin)},
                       {"fallback", e.fallback},
                       {"failed", e.failed},
                       {"message", e.message}});
  }
  j["entries"] = entries;
  return j.dump(1) + "\n";
}

OptimizationTrace trace_from_json(const std::string& text) {
  const nlohmann::json j = nlohmann::json::parse(text);
  OptimizationTrace t;
  t.system = j.value("system", "");
  t.degree = j.value("degree", 0);
  t.layout.time_count = j.at("layout").at("time_count").get<int>();
  t.layout.axis_counts = j.at("layout").at("axis_counts").get<std::vector<int>>();
  t.best_index = j.value("best_index", -1);
  t.aborted = j.value("aborted", false);
  for (const auto& e : j.at("entries")) {
    TraceEntry entry;
    entry.iteration = e.at("iteration").get<int>();
    entry.theta = e.at("theta").get<std::vector<double>>();
    entry.value = real_from(e.at("value"));
    for (const auto& g : e.at("gradient")) entry.gradient.push_back(real_from(g));
    entry.seconds = e.value("seconds", 0.0);
    entry.margin = e.contains("margin") ? real_from(e.at("margin")) : 0.0;
    entry.fallback = e.value("fallback", false);
    entry.failed = e.value("failed", false);
    entry.message = e.value("message", "");
    t.entries.push_back(std::move(entry));
  }
  return t;
}

std::string trace_to_csv(const OptimizationTrace& trace) {
  std::vector<std::string> header{"iteration", "value", "best_value"};
  const std::size_t n = trace.layout.size();
  for (std::size_t i = 0; i < n; ++i) header.push_back("theta_" + std::to_string(i));
  std::string out = csv_line(header) + "\n";
  const std::vector<double> best = trace.best_so_far();
  for (std::size_t r = 0; r < trace.entries.size(); ++r) {
    const auto& e = trace.entries[r];
    std::vector<std::string> cells{std::to_string(e.iteration), format_real(e.value),
                                   format_real(best[r])};
    for (double v : e.theta) cells.push_back(format_real(v));
    out += csv_line(cells) + "\n";
  }
  return out;
}

}  // namespace splitroa
