#include "commands.h"

#include <chrono>
#include <cmath>
#include <filesystem>
#include <iostream>
#include <numeric>

#include "json.hpp"
#include "splitroa/csv.h"
#include "splitroa/roa.h"

namespace splitroa::cli {
namespace {

using nlohmann::json;
using Clock = std::chrono::steady_clock;

std::ostream& log_of(const CommandContext& ctx) { return ctx.log ? *ctx.log : std::cerr; }

std::string out_file(const RunConfig& cfg, const std::string& name) {
  std::filesystem::create_directories(cfg.out_dir);
  return (std::filesystem::path(cfg.out_dir) / name).string();
}

json real_or_null(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

json solution_report(const ConicSolution& sol, const ConicProgram& program) {
  const auto kkt = kkt_residuals(program, sol);
  return {{"status", to_string(sol.status)},
          {"reduced_accuracy", sol.reduced_accuracy},
          {"message", sol.message},
          {"iterations", sol.iterations},
          {"solve_seconds", sol.solve_time},
          {"primal_objective", real_or_null(sol.primal_obj)},
          {"dual_objective", real_or_null(sol.dual_obj)},
          {"relative_gap", real_or_null(std::abs(sol.primal_obj + sol.dual_obj) / (1.0 + std::abs(sol.primal_obj)))},
          {"kkt", {{"primal", kkt.primal}, {"dual", kkt.dual}, {"complementarity", kkt.complementarity}}},
          {"rows", program.rows()},
          {"cols", program.cols()}};
}

double cosine(const std::vector<double>& a, const std::vector<double>& b) {
  const double ab = std::inner_product(a.begin(), a.end(), b.begin(), 0.0);
  const double aa = std::inner_product(a.begin(), a.end(), a.begin(), 0.0);
  const double bb = std::inner_product(b.begin(), b.end(), b.begin(), 0.0);
  return ab / std::sqrt(aa * bb);
}

void write_trace_files(const RunConfig& cfg, const OptimizationTrace& trace) {
  write_text_file(out_file(cfg, "trace.json"), trace_to_json(trace));
  write_text_file(out_file(cfg, "trace.csv"), trace_to_csv(trace));
}

void write_best_certificate(const CommandContext& ctx, const SplitProblem& problem,
                            const OptimizationTrace& trace) {
  if (trace.best_index < 0) return;
  const auto eval = evaluate(problem, trace.best().theta);
  write_text_file(out_file(ctx.config, "best_certificate.json"),
                  certificate_to_json(extract_certificate(eval.compiled, eval.solution)));
}

int eval_path_mode(const CommandContext& ctx) {
  const RunConfig& cfg = ctx.config;
  std::ostream& log = log_of(ctx);
  OptimizationTrace trace;
  try {
    trace = trace_from_json(read_text_file(ctx.eval_path));
  } catch (const std::exception& e) {
    throw ConfigError("--eval-path", e.what());
  }
  SplitProblem problem = make_problem(cfg);
  problem.layout = trace.layout;
  if (trace.layout.axis_counts.size() != static_cast<std::size_t>(cfg.system.n)) {
    throw ConfigError("--eval-path", "trace layout does not match the configured system");
  }
  const auto path = trace.theta_path();
  log << "evaluating degree " << problem.degree << " along " << path.size() << " path entries\n";
  const auto result = evaluate_along_path(problem, path, [&](const TraceEntry& e) {
    log << "  entry " << e.iteration << " value " << format_real(e.value) << " (" << e.seconds << " s)"
        << (e.failed ? " failed: " + e.message : std::string()) << "\n";
  });
  std::vector<std::string> header{"entry", "source_iteration", "value", "seconds"};
  for (std::size_t k = 0; k < trace.layout.size(); ++k) header.push_back("theta_" + std::to_string(k));
  std::string csv = csv_line(header) + "\n";
  json j;
  j["degree"] = problem.degree;
  j["source_degree"] = trace.degree;
  j["entries"] = json::array();
  for (std::size_t i = 0; i < path.size(); ++i) {
    std::vector<std::string> row{std::to_string(i), std::to_string(trace.entries[i].iteration),
                                 format_real(result.values[i]), format_real(result.seconds[i])};
    for (double t : path[i]) row.push_back(format_real(t));
    csv += csv_line(row) + "\n";
    j["entries"].push_back({{"source_iteration", trace.entries[i].iteration},
                            {"theta", path[i]},
                            {"value", real_or_null(result.values[i])},
                            {"seconds", result.seconds[i]},
                            {"message", result.messages[i]}});
  }
  const auto [best, index] = result.best();
  j["best_value"] = real_or_null(best);
  j["best_entry"] = index;
  write_text_file(out_file(cfg, "path_eval.csv"), csv);
  write_text_file(out_file(cfg, "path_eval.json"), j.dump(1));
  if (index < 0) {
    log << "no path entry could be solved\n";
    return kExitSolver;
  }
  log << "best degree-" << problem.degree << " value " << format_real(best) << " at entry " << index << "\n";
  return kExitOk;
}

struct Timed {
  GradientResult result;
  double seconds = std::numeric_limits<double>::quiet_NaN();
  std::string error;
};

Timed timed_gradient(const SplitProblem& problem, std::span<const double> theta, const FDConfig& fd,
                     GradMethod method) {
  Timed t;
  const auto start = Clock::now();
  try {
    t.result = gradient(problem, theta, fd, method);
    t.seconds = std::chrono::duration<double>(Clock::now() - start).count();
  } catch (const std::exception& e) {
    t.error = e.what();
  }
  return t;
}

SplitConfig benchmark_splits(const SystemSpec& sys, const BenchmarkConfig& b, int count) {
  if (b.split_kind == "time") {
    return equidistant_splits(sys, count, std::vector<int>(static_cast<std::size_t>(sys.n), 0));
  }
  return spread_state_splits(sys, count);
}

}  // namespace

SplitConfig spread_state_splits(const SystemSpec& sys, int count) {
  std::vector<int> counts(static_cast<std::size_t>(sys.n), count / sys.n);
  for (int i = 0; i < count % sys.n; ++i) ++counts[static_cast<std::size_t>(i)];
  return equidistant_splits(sys, 0, counts);
}

int cmd_solve(const CommandContext& ctx) {
  const RunConfig& cfg = ctx.config;
  std::ostream& log = log_of(ctx);
  const SplitProblem problem = make_problem(cfg);
  const auto theta = flatten_theta(cfg.splits);
  const CompiledProgram compiled = problem.compile_at(theta);
  log << "compiled degree " << cfg.degree << " program: " << compiled.program.rows() << " rows, "
      << compiled.program.cols() << " columns\n";
  const ConicSolution sol = solve(compiled.program, problem.solver);
  json report = solution_report(sol, compiled.program);
  report["theta"] = theta;
  write_text_file(out_file(cfg, "solve_report.json"), report.dump(1));
  log << "status " << to_string(sol.status) << " (" << sol.message << "), objective "
      << format_real(sol.primal_obj) << ", " << sol.iterations << " iterations\n";
  if (!usable(sol)) return kExitSolver;

  const PiecewiseCertificate cert = extract_certificate(compiled, sol);
  write_text_file(out_file(cfg, "certificate.json"), certificate_to_json(cert));
  RoaEstimate est = mc_volume(cert, cfg.mc_samples, cfg.seed);
  est.objective = sol.primal_obj;
  const json estimate = {{"objective", est.objective},
                         {"mc_volume", est.mc_volume},
                         {"nsamples", est.nsamples},
                         {"seed", est.seed},
                         {"inside", est.inside},
                         {"domain_volume", est.domain_volume},
                         {"status", to_string(sol.status)}};
  write_text_file(out_file(cfg, "estimate.json"), estimate.dump(1));
  if (cfg.system.n >= 2) {
    write_text_file(out_file(cfg, "grid.csv"),
                    export_grid(cert, 0.0, cfg.grid_resolution, cfg.grid_resolution));
  } else {
    log << "grid.csv skipped: the grid export needs at least two state axes\n";
  }
  log << "mc volume " << format_real(est.mc_volume) << " of " << format_real(est.domain_volume) << "\n";
  return kExitOk;
}

int cmd_optimize(const CommandContext& ctx) {
  if (!ctx.eval_path.empty()) return eval_path_mode(ctx);
  const RunConfig& cfg = ctx.config;
  std::ostream& log = log_of(ctx);
  const SplitProblem problem = make_problem(cfg);
  const auto theta0 = flatten_theta(cfg.splits);
  if (theta0.empty()) throw ConfigError("splits", "optimization needs at least one split");

  OptimizationTrace partial;
  partial.system = problem.sys.name;
  partial.degree = problem.degree;
  partial.layout = problem.layout;
  auto on_iteration = [&](const TraceEntry& e) {
    partial.entries.push_back(e);
    if (!e.failed && (partial.best_index < 0 || e.value < partial.best().value)) {
      partial.best_index = static_cast<int>(partial.entries.size()) - 1;
    }
    write_trace_files(cfg, partial);
    log << "iter " << e.iteration << " value " << format_real(e.value) << " (" << e.seconds << " s)"
        << (e.failed ? " failed: " + e.message : std::string()) << "\n";
  };
  try {
    const OptimizationTrace trace = optimize(problem, theta0, cfg.optimizer, on_iteration);
    write_trace_files(cfg, trace);
    write_best_certificate(ctx, problem, trace);
    log << "best value " << format_real(trace.best().value) << " at iteration "
        << trace.best().iteration << "\n";
    return kExitOk;
  } catch (const OptimizationAborted& e) {
    write_trace_files(cfg, e.trace);
    try {
      write_best_certificate(ctx, problem, e.trace);
    } catch (const std::exception&) {
    }
    log << e.what() << "\n";
    return kExitAborted;
  }
}

int cmd_gradcheck(const CommandContext& ctx) {
  const RunConfig& cfg = ctx.config;
  std::ostream& log = log_of(ctx);
  const SplitProblem problem = make_problem(cfg);
  const auto theta = flatten_theta(cfg.splits);
  if (theta.empty()) throw ConfigError("splits", "gradcheck needs at least one split");
  const std::vector<GradMethod> methods{GradMethod::kQr, GradMethod::kLsqr, GradMethod::kFd};
  std::vector<Timed> results;
  for (GradMethod m : methods) {
    results.push_back(timed_gradient(problem, theta, cfg.optimizer.fd, m));
    if (!results.back().error.empty()) {
      log << to_string(m) << " failed: " << results.back().error << "\n";
      return kExitSolver;
    }
  }
  std::vector<std::string> header{"method", "seconds", "value", "converged"};
  for (std::size_t k = 0; k < theta.size(); ++k) header.push_back("grad_" + std::to_string(k));
  std::string csv = csv_line(header) + "\n";
  json j;
  j["theta"] = theta;
  j["methods"] = json::object();
  for (std::size_t i = 0; i < methods.size(); ++i) {
    const auto& r = results[i];
    std::vector<std::string> row{to_string(methods[i]), format_real(r.seconds), format_real(r.result.value),
                                 r.result.diagnostics.lsqr_converged ? "true" : "false"};
    for (double g : r.result.gradient) row.push_back(format_real(g));
    csv += csv_line(row) + "\n";
    j["methods"][to_string(methods[i])] = {
        {"gradient", r.result.gradient},
        {"seconds", r.seconds},
        {"value", r.result.value},
        {"route_discrepancy", r.result.diagnostics.max_route_discrepancy},
        {"fallback", r.result.diagnostics.fallback},
        {"lsqr_converged", r.result.diagnostics.lsqr_converged},
        {"note", r.result.diagnostics.note}};
  }
  std::string pairs = csv_line({"method_a", "method_b", "cosine", "max_abs_diff"}) + "\n";
  j["pairs"] = json::array();
  for (std::size_t a = 0; a < methods.size(); ++a) {
    for (std::size_t b = a + 1; b < methods.size(); ++b) {
      const auto& ga = results[a].result.gradient;
      const auto& gb = results[b].result.gradient;
      double diff = 0.0;
      for (std::size_t k = 0; k < ga.size(); ++k) diff = std::max(diff, std::abs(ga[k] - gb[k]));
      const double cos = cosine(ga, gb);
      pairs += csv_line({to_string(methods[a]), to_string(methods[b]), format_real(cos), format_real(diff)}) + "\n";
      j["pairs"].push_back({{"a", to_string(methods[a])}, {"b", to_string(methods[b])},
                            {"cosine", real_or_null(cos)}, {"max_abs_diff", diff}});
    }
  }
  write_text_file(out_file(cfg, "gradcheck.csv"), csv);
  write_text_file(out_file(cfg, "gradcheck_pairs.csv"), pairs);
  write_text_file(out_file(cfg, "gradcheck.json"), j.dump(1));
  std::cout << csv << pairs;
  return kExitOk;
}

int cmd_benchmark(const CommandContext& ctx) {
  const RunConfig& cfg = ctx.config;
  const BenchmarkConfig& b = cfg.benchmark;
  std::ostream& log = log_of(ctx);
  auto problem_for = [&](int degree, int count) {
    RunConfig c = cfg;
    c.degree = degree;
    c.splits = benchmark_splits(cfg.system, b, count);
    return std::pair{make_problem(c), flatten_theta(c.splits)};
  };

  if (!b.param_counts.empty()) {
    const auto [warm, theta] = problem_for(b.count_degree, b.param_counts.front());
    log << "warm-up round\n";
    for (GradMethod m : b.methods) timed_gradient(warm, theta, cfg.optimizer.fd, m);
  }

  std::string csv = csv_line({"sweep", "method", "n_theta", "degree", "seconds"}) + "\n";
  auto run_cell = [&](const char* sweep, int degree, int count) {
    const auto [problem, theta] = problem_for(degree, count);
    for (GradMethod m : b.methods) {
      const Timed t = timed_gradient(problem, theta, cfg.optimizer.fd, m);
      log << sweep << " " << to_string(m) << " n_theta=" << count << " d=" << degree << ": "
          << (t.error.empty() ? format_real(t.seconds) + " s" : "failed: " + t.error) << "\n";
      csv += csv_line({sweep, to_string(m), std::to_string(count), std::to_string(degree),
                       t.error.empty() ? format_real(t.seconds) : std::string()}) +
             "\n";
      write_text_file(out_file(cfg, "benchmark.csv"), csv);
    }
  };
  for (int count : b.param_counts) run_cell("n_theta", b.count_degree, count);
  for (int degree : b.degrees) run_cell("degree", degree, b.degree_params);
  write_text_file(out_file(cfg, "benchmark.csv"), csv);
  std::cout << csv;
  return kExitOk;
}

}  // namespace splitroa::cli
