#include "splitroa/paramdiff.h"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <sstream>

namespace splitroa {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

}  // namespace

void FDConfig::validate() const {
  auto check = [](const std::vector<double>& s, const std::string& where) {
    if (s.empty()) throw std::invalid_argument(where + ": stencil is empty");
    std::vector<double> sorted = s;
    std::sort(sorted.begin(), sorted.end());
    for (std::size_t i = 0; i < sorted.size(); ++i) {
      if (sorted[i] == 0.0) throw std::invalid_argument(where + ": zero step in stencil");
      if (sorted[i] != -sorted[sorted.size() - 1 - i]) {
        throw std::invalid_argument(where + ": stencil must be symmetric about 0");
      }
    }
  };
  check(steps, "steps");
  for (const auto& [k, s] : overrides) check(s, "override " + std::to_string(k));
  if (!(eps_f > 0.0)) throw std::invalid_argument("eps_f must be positive");
  if (max_shrinks < 0 || !(shrink_factor > 1.0)) {
    throw std::invalid_argument("shrink settings must be max_shrinks >= 0, shrink_factor > 1");
  }
}

CompiledProgram SplitProblem::compile_at(std::span<const double> theta) const {
  const SplitConfig cfg = unflatten_theta(layout, theta);
  return compile(sys, build_decomposition(sys, cfg), degree, compile_options);
}

void require_same_structure(const ConicProgram& a, const ConicProgram& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    std::ostringstream os;
    os << "structural mismatch: dimensions " << a.rows() << "x" << a.cols() << " vs " << b.rows()
       << "x" << b.cols();
    throw StructuralMismatchError(os.str());
  }
  if (a.cones != b.cones) throw StructuralMismatchError("structural mismatch: cone lists differ");
  if (!a.A.isCompressed() || !b.A.isCompressed()) {
    throw StructuralMismatchError("structural mismatch: matrices must be compressed");
  }
  if (a.A.nonZeros() != b.A.nonZeros() ||
      !std::equal(a.A.outerIndexPtr(), a.A.outerIndexPtr() + a.A.outerSize() + 1,
                  b.A.outerIndexPtr()) ||
      !std::equal(a.A.innerIndexPtr(), a.A.innerIndexPtr() + a.A.nonZeros(),
                  b.A.innerIndexPtr())) {
    throw StructuralMismatchError("structural mismatch: sparsity patterns of A differ");
  }
}

bool perturbation_valid(const SplitProblem& problem, std::span<const double> theta, int k,
                        double step) {
  const ParameterBounds bounds = parameter_bounds(problem.sys, problem.layout);
  const auto ku = static_cast<std::size_t>(k);
  const double v = theta[ku] + step;
  if (!(v > bounds.lo[ku] && v < bounds.hi[ku])) return false;
  if (ku > 0 && bounds.group[ku - 1] == bounds.group[ku] && v < theta[ku - 1]) return false;
  if (ku + 1 < theta.size() && bounds.group[ku + 1] == bounds.group[ku] && v > theta[ku + 1]) {
    return false;
  }
  return true;
}

DataDerivative data_derivative(const SplitProblem& problem, std::span<const double> theta, int k,
                               const FDConfig& fd, const ConicProgram* base) {
  fd.validate();
  if (k < 0 || static_cast<std::size_t>(k) >= theta.size()) {
    throw std::out_of_range("data_derivative: direction index out of range");
  }
  std::optional<CompiledProgram> own;
  if (base == nullptr) {
    own = problem.compile_at(theta);
    base = &own->program;
  }
  std::vector<double> steps = fd.steps;
  if (auto it = fd.overrides.find(k); it != fd.overrides.end()) steps = it->second;

  int shrinks = 0;
  auto all_valid = [&] {
    return std::all_of(steps.begin(), steps.end(),
                       [&](double e) { return perturbation_valid(problem, theta, k, e); });
  };
  while (!all_valid()) {
    if (shrinks == fd.max_shrinks) {
      throw std::invalid_argument("data_derivative: parameter " + std::to_string(k) +
                                  " cannot be perturbed without reordering splits or leaving "
                                  "the domain");
    }
    for (double& e : steps) e /= fd.shrink_factor;
    ++shrinks;
  }

  DataDerivative dd;
  dd.dA = base->A;
  std::fill(dd.dA.valuePtr(), dd.dA.valuePtr() + dd.dA.nonZeros(), 0.0);
  dd.db = Eigen::VectorXd::Zero(base->rows());
  dd.dc = Eigen::VectorXd::Zero(base->cols());
  const double inv_count = 1.0 / static_cast<double>(steps.size());
  std::vector<double> shifted(theta.begin(), theta.end());
  for (double e : steps) {
    shifted[static_cast<std::size_t>(k)] = theta[static_cast<std::size_t>(k)] + e;
    const CompiledProgram cp = problem.compile_at(shifted);
    require_same_structure(*base, cp.program);
    const double wgt = inv_count / e;
    for (Eigen::Index j = 0; j < dd.dA.nonZeros(); ++j) {
      dd.dA.valuePtr()[j] += wgt * (cp.program.A.valuePtr()[j] - base->A.valuePtr()[j]);
    }
    dd.db += wgt * (cp.program.b - base->b);
    dd.dc += wgt * (cp.program.c - base->c);
  }
  return dd;
}

Evaluation evaluate(const SplitProblem& problem, std::span<const double> theta) {
  Evaluation ev;
  ev.compiled = problem.compile_at(theta);
  ev.solution = solve(ev.compiled.program, problem.solver);
  if (!usable(ev.solution)) {
    throw SolveFailure(std::string("solve failed: ") + to_string(ev.solution.status) + " (" +
                       ev.solution.message + ")");
  }
  ev.value = ev.solution.primal_obj;
  return ev;
}

const char* to_string(GradMethod method) {
  switch (method) {
    case GradMethod::kQr: return "qr";
    case GradMethod::kLsqr: return "lsqr";
    case GradMethod::kFd: return "fd";
  }
  return "?";
}

GradMethod parse_grad_method(const std::string& name) {
  if (name == "qr") return GradMethod::kQr;
  if (name == "lsqr") return GradMethod::kLsqr;
  if (name == "fd") return GradMethod::kFd;
  throw std::invalid_argument("unknown gradient method '" + name + "' (expected qr, lsqr or fd)");
}

namespace {

GradientResult fd_from_base(const SplitProblem& problem, std::span<const double> theta,
                            double eps_f, double base_value) {
  GradientResult res;
  res.value = base_value;
  std::vector<double> shifted(theta.begin(), theta.end());
  for (std::size_t k = 0; k < theta.size(); ++k) {
    double step = eps_f;
    if (!perturbation_valid(problem, theta, static_cast<int>(k), step)) step = -eps_f;
    if (!perturbation_valid(problem, theta, static_cast<int>(k), step)) {
      throw SolveFailure("gradient_fd: parameter " + std::to_string(k) + " cannot be perturbed",
                         static_cast<int>(k));
    }
    shifted[k] = theta[k] + step;
    double value = 0.0;
    try {
      value = evaluate(problem, shifted).value;
    } catch (const SolveFailure& e) {
      throw SolveFailure(std::string(e.what()) + " in direction " + std::to_string(k),
                         static_cast<int>(k));
    }
    shifted[k] = theta[k];
    res.gradient.push_back((value - base_value) / step);
  }
  return res;
}

}  // namespace

GradientResult gradient_fd(const SplitProblem& problem, std::span<const double> theta,
                           double eps_f) {
  const auto start = Clock::now();
  const double base = evaluate(problem, theta).value;
  GradientResult res = fd_from_base(problem, theta, eps_f, base);
  res.diagnostics.seconds_solve = seconds_since(start);
  return res;
}

GradientResult gradient_analytic(const SplitProblem& problem, std::span<const double> theta,
                                 const FDConfig& fd, GradMethod method, bool estimate_rank) {
  if (method == GradMethod::kFd) return gradient_fd(problem, theta, fd.eps_f);
  GradientResult res;
  auto t0 = Clock::now();
  Evaluation ev = evaluate(problem, theta);
  res.value = ev.value;
  res.diagnostics.seconds_solve = seconds_since(t0);
  if (theta.empty()) return res;

  const ConicProgram& prog = ev.compiled.program;
  res.diagnostics.differentiability = check_differentiability(prog, ev.solution);

  auto fallback = [&](const std::string& why) {
    GradientResult fb = fd_from_base(problem, theta, fd.eps_f, ev.value);
    fb.diagnostics.differentiability = res.diagnostics.differentiability;
    fb.diagnostics.fallback = true;
    fb.diagnostics.subgradient_quality = true;
    fb.diagnostics.note = why;
    fb.diagnostics.seconds_solve = res.diagnostics.seconds_solve;
    return fb;
  };
  if (res.diagnostics.differentiability.flagged) {
    return fallback("strict complementarity margin below threshold");
  }

  t0 = Clock::now();
  std::vector<DataDerivative> dD;
  dD.reserve(theta.size());
  for (std::size_t k = 0; k < theta.size(); ++k) {
    dD.push_back(data_derivative(problem, theta, static_cast<int>(k), fd, &prog));
  }
  res.diagnostics.seconds_data = seconds_since(t0);

  t0 = Clock::now();
  SensitivitySystem sys;
  try {
    sys = assemble_sensitivity(prog, build_embedding(ev.solution), dD);
  } catch (const NondifferentiableError& e) {
    return fallback(e.what());
  }
  if (method == GradMethod::kQr) {
    res.dz = solve_dz_qr(sys, true);
    res.diagnostics.qr_damping = sys.qr_damping;
    if (estimate_rank) res.diagnostics.qr_rank = qr_rank(sys);
  } else {
    LsqrResult lr = solve_dz_lsqr(sys);
    res.dz = std::move(lr.dz);
    res.diagnostics.lsqr_iterations = std::move(lr.iterations);
    res.diagnostics.lsqr_converged = lr.all_converged;
  }
  for (std::size_t k = 0; k < theta.size(); ++k) {
    const SolutionDerivative sd = solution_derivative(sys, prog, ev.solution,
                                                      res.dz.col(static_cast<Eigen::Index>(k)), dD[k]);
    res.gradient.push_back(sd.dp_primal);
    res.dp_primal.push_back(sd.dp_primal);
    res.dp_dual.push_back(sd.dp_dual);
    res.diagnostics.max_route_discrepancy =
        std::max(res.diagnostics.max_route_discrepancy, sd.discrepancy);
    res.diagnostics.conditioning_warning =
        res.diagnostics.conditioning_warning || sd.conditioning_warning;
  }
  res.diagnostics.seconds_linear = seconds_since(t0);
  return res;
}

GradientResult gradient(const SplitProblem& problem, std::span<const double> theta,
                        const FDConfig& fd, GradMethod method) {
  if (method == GradMethod::kFd) return gradient_fd(problem, theta, fd.eps_f);
  return gradient_analytic(problem, theta, fd, method);
}

}  // namespace splitroa
