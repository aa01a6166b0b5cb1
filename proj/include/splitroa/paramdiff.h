#pragma once

#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "splitroa/cone.h"
#include "splitroa/diffcone.h"
#include "splitroa/model.h"
#include "splitroa/soscomp.h"

namespace splitroa {

struct FDConfig {
  /// Forward step of the value-level finite-difference gradient.
  double eps_f = 1e-4;
  /// Data-level stencil; must be symmetric about 0 and free of zeros.
  std::vector<double> steps{-1e-5, 1e-5};
  /// Per-parameter stencil overrides keyed by flattened index.
  std::map<int, std::vector<double>> overrides;
  int max_shrinks = 3;
  double shrink_factor = 10.0;

  /// Throws std::invalid_argument on a zero or asymmetric stencil.
  void validate() const;
};

class StructuralMismatchError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class SolveFailure : public std::runtime_error {
 public:
  SolveFailure(const std::string& what, int direction = -1)
      : std::runtime_error(what), direction(direction) {}
  int direction;
};

/// The split problem at a fixed layout: everything needed to go from a
/// flattened parameter vector to a compiled program.
struct SplitProblem {
  SystemSpec sys;
  SplitLayout layout;
  int degree = 4;
  SolverSettings solver;
  CompileOptions compile_options;

  CompiledProgram compile_at(std::span<const double> theta) const;
};

/// Throws StructuralMismatchError unless both programs share dimensions,
/// cones and the sparsity pattern of A.
void require_same_structure(const ConicProgram& a, const ConicProgram& b);

/// Stencil average of (D(theta + eps e_k) - D(theta)) / eps. `base` is the
/// program at theta when already available. Steps that would reorder splits or
/// leave the domain are shrunk by `shrink_factor` up to `max_shrinks` times.
DataDerivative data_derivative(const SplitProblem& problem, std::span<const double> theta, int k,
                               const FDConfig& fd, const ConicProgram* base = nullptr);

struct Evaluation {
  double value = 0.0;
  ConicSolution solution;
  CompiledProgram compiled;
};

/// Compiles and solves at theta; throws SolveFailure unless the solution is usable.
Evaluation evaluate(const SplitProblem& problem, std::span<const double> theta);

enum class GradMethod { kQr, kLsqr, kFd };

const char* to_string(GradMethod method);
GradMethod parse_grad_method(const std::string& name);

struct GradientDiagnostics {
  DifferentiabilityReport differentiability;
  double max_route_discrepancy = 0.0;
  bool conditioning_warning = false;
  /// Finite-difference fallback used at a nondifferentiable point.
  bool fallback = false;
  bool subgradient_quality = false;
  /// Estimated rank of M; -1 unless requested.
  long qr_rank = -1;
  double qr_damping = 0.0;
  std::vector<int> lsqr_iterations;
  bool lsqr_converged = true;
  double seconds_solve = 0.0;
  double seconds_data = 0.0;
  double seconds_linear = 0.0;
  std::string note;
};

struct GradientResult {
  std::vector<double> gradient;
  double value = 0.0;
  GradientDiagnostics diagnostics;
  /// Primal-route and dual-route value derivatives per direction.
  std::vector<double> dp_primal;
  std::vector<double> dp_dual;
  /// dz columns (analytic methods only).
  Eigen::MatrixXd dz;
};

/// Gradient of the optimal value through the differentiated conic program.
GradientResult gradient_analytic(const SplitProblem& problem, std::span<const double> theta,
                                 const FDConfig& fd, GradMethod method = GradMethod::kQr,
                                 bool estimate_rank = false);

/// Forward differences of the optimal value (n_theta + 1 solves); a step that
/// would leave the feasible ordering is taken backwards instead.
GradientResult gradient_fd(const SplitProblem& problem, std::span<const double> theta,
                           double eps_f);

/// Dispatches on the method (kFd uses fd.eps_f).
GradientResult gradient(const SplitProblem& problem, std::span<const double> theta,
                        const FDConfig& fd, GradMethod method);

/// True when theta + step * e_k keeps every group sorted strictly inside its bounds.
bool perturbation_valid(const SplitProblem& problem, std::span<const double> theta, int k,
                        double step);

}  // namespace splitroa
