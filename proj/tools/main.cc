#include <iostream>

#include "CLI11.hpp"
#include "commands.h"
#include "splitroa/paramdiff.h"

namespace {

struct Flags {
  std::string config;
  std::optional<int> degree;
  std::optional<std::string> grad;
  std::optional<int> iters;
  std::optional<std::uint64_t> seed;
  std::string eval_path;
  std::optional<std::string> out;
  std::optional<double> tol;
  int threads = 1;
};

void add_common(CLI::App* sub, Flags& f) {
  sub->add_option("--config", f.config, "JSON run configuration")->required();
  sub->add_option("--degree", f.degree, "relaxation degree d");
  sub->add_option("--grad", f.grad, "gradient method")->check(CLI::IsMember({"qr", "lsqr", "fd"}));
  sub->add_option("--iters", f.iters, "ADAM iterations")->check(CLI::NonNegativeNumber);
  sub->add_option("--seed", f.seed, "seed for sampling");
  sub->add_option("--out", f.out, "output directory");
  sub->add_option("--tol", f.tol, "solver tolerance")->check(CLI::PositiveNumber);
  sub->add_option("--threads", f.threads, "worker cap")->check(CLI::PositiveNumber);
}

splitroa::cli::CommandContext make_context(const Flags& f) {
  using splitroa::cli::ConfigError;
  splitroa::cli::CommandContext ctx;
  ctx.config = splitroa::cli::load_config(f.config);
  auto& c = ctx.config;
  if (f.degree) {
    if (*f.degree < 2 || *f.degree % 2 != 0) throw ConfigError("--degree", "must be even and >= 2");
    c.degree = *f.degree;
  }
  if (f.grad) c.optimizer.grad_method = splitroa::parse_grad_method(*f.grad);
  if (f.iters) c.optimizer.max_iters = *f.iters;
  if (f.seed) c.seed = *f.seed;
  if (f.out) c.out_dir = *f.out;
  if (f.tol) c.tol = *f.tol;
  c.threads = f.threads;
  ctx.eval_path = f.eval_path;
  return ctx;
}

}  // namespace

int main(int argc, char** argv) {
  using namespace splitroa::cli;
  CLI::App app{"Split region-of-attraction SOS programs with optimized split positions"};
  app.require_subcommand(1);
  Flags flags;
  auto* solve = app.add_subcommand("solve", "solve one split SOS program and export the certificate");
  auto* optimize = app.add_subcommand("optimize", "optimize split positions with ADAM");
  auto* gradcheck = app.add_subcommand("gradcheck", "compare qr, lsqr and fd gradients at one point");
  auto* benchmark = app.add_subcommand("benchmark", "time the gradient methods over parameter counts and degrees");
  for (auto* sub : {solve, optimize, gradcheck, benchmark}) add_common(sub, flags);
  optimize->add_option("--eval-path", flags.eval_path,
                       "evaluate the configured degree along the path stored in a trace.json");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitConfig;
  }

  try {
    const CommandContext ctx = make_context(flags);
    if (*solve) return cmd_solve(ctx);
    if (*optimize) return cmd_optimize(ctx);
    if (*gradcheck) return cmd_gradcheck(ctx);
    return cmd_benchmark(ctx);
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitSolver;
  }
}
