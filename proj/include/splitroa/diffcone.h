#pragma once

#include <cstdint>
#include <memory>
#include <span>
#include <stdexcept>
#include <vector>

#include "splitroa/cone.h"

namespace splitroa {

/// z = (u | v | w) = (x, y - s, 1).
struct EmbeddingPoint {
  Eigen::VectorXd z;
  int n = 0;
  int m = 0;

  double w() const { return z(z.size() - 1); }
  Eigen::VectorXd u() const { return z.head(n); }
  Eigen::VectorXd v() const { return z.segment(n, m); }
};

EmbeddingPoint build_embedding(const ConicSolution& sol);

/// A perturbation of the program data along one parameter direction.
struct DataDerivative {
  SparseMatrix dA;
  Eigen::VectorXd db;
  Eigen::VectorXd dc;
};

DataDerivative zero_data_derivative(const ConicProgram& p);

/// Opaque handle to a sparse QR factorization of M.
class QrFactorization;

struct SensitivitySystem {
  SensitivitySystem();
  ~SensitivitySystem();
  SensitivitySystem(SensitivitySystem&&) noexcept;
  SensitivitySystem& operator=(SensitivitySystem&&) noexcept;

  int n = 0;
  int m = 0;
  EmbeddingPoint point;
  std::vector<Cone> cones;
  SparseMatrix M;
  /// Derivative of the embedding projection at z.
  SparseMatrix D;
  /// One column per direction: -dQ_k Pi(z / |w|), so that M dz_k = rhs_k.
  Eigen::MatrixXd rhs;
  std::unique_ptr<QrFactorization> qr;
  /// Estimated rank of M (-1 until qr_rank is called).
  long rank = -1;
  /// Absolute damping mu of the factorization in `qr`.
  double qr_damping = 0.0;
};

/// Builds M = ((Q - I) D + I) / w and the right-hand sides. Throws
/// NondifferentiableError when the projection is not differentiable at z.
SensitivitySystem assemble_sensitivity(const ConicProgram& p, const EmbeddingPoint& z,
                                       std::span<const DataDerivative> dD);

/// The dense Q of the embedding (small programs and tests only).
Eigen::MatrixXd embedding_q(const ConicProgram& p);

class RankDeficientError : public std::runtime_error {
 public:
  RankDeficientError(const std::string& what, long rank, long size)
      : std::runtime_error(what), rank(rank), size(size) {}
  long rank;
  long size;
};

/// Damping of the QR route relative to the largest column norm of M.
inline constexpr double kQrDamping = 1e-10;

/// Solves M dz_k = rhs_k for all columns by one sparse QR factorization of
/// [M; mu I], kept in `sys.qr` and reused across columns. Directions with
/// singular values well above mu are solved exactly and null directions are
/// suppressed, as in a minimum-norm solution. M always annihilates z, which
/// leaves dx and dy unchanged, so rank N - 1 counts as full rank; unless
/// `allow_rank_deficient`, a lower estimated rank throws RankDeficientError.
Eigen::MatrixXd solve_dz_qr(SensitivitySystem& sys, bool allow_rank_deficient = false);

/// Rank of M estimated by a separate rank-revealing QR (cached in `sys.rank`).
long qr_rank(SensitivitySystem& sys);

struct LsqrResult {
  Eigen::MatrixXd dz;
  std::vector<int> iterations;
  std::vector<bool> converged;
  bool all_converged = true;
};

/// Column-by-column LSQR on M; non-converged columns keep their last iterate.
LsqrResult solve_dz_lsqr(const SensitivitySystem& sys, int maxiter = 1000, double atol = 1e-12,
                         double btol = 1e-12);

struct LsqrColumn {
  Eigen::VectorXd x;
  int iterations = 0;
  bool converged = false;
};

/// Paige-Saunders LSQR for min |A x - b|.
LsqrColumn lsqr(const SparseMatrix& A, const Eigen::VectorXd& b, int maxiter, double atol,
                double btol);

struct SolutionDerivative {
  Eigen::VectorXd dx;
  Eigen::VectorXd dy;
  double dp_primal = 0.0;  ///< dc'x + c'dx
  double dp_dual = 0.0;    ///< -(db'y + b'dy), since p* = -b'y
  double discrepancy = 0.0;
  bool conditioning_warning = false;
};

/// Relative route disagreement above which a conditioning warning is raised.
inline constexpr double kRouteTolerance = 1e-4;

SolutionDerivative solution_derivative(const SensitivitySystem& sys, const ConicProgram& p,
                                       const ConicSolution& sol, const Eigen::VectorXd& dz,
                                       const DataDerivative& dD);

/// Same, computing the projection derivative at z itself.
SolutionDerivative solution_derivative(const ConicProgram& p, const ConicSolution& sol,
                                       const EmbeddingPoint& z, const Eigen::VectorXd& dz,
                                       const DataDerivative& dD);

struct DifferentiabilityReport {
  /// min |eig(Y - S)| per PSD block.
  std::vector<double> psd_margins;
  /// min |y - s| per nonnegative cone.
  std::vector<double> nonneg_margins;
  double w = 1.0;
  double min_margin = 0.0;
  bool flagged = false;
};

DifferentiabilityReport check_differentiability(const ConicProgram& p, const ConicSolution& sol,
                                                double threshold = 1e-6);

/// Instrumentation: how often M was assembled and factorized and how many
/// right-hand sides were back-substituted.
struct DiffCounters {
  std::int64_t assemblies = 0;
  std::int64_t factorizations = 0;
  std::int64_t back_substitutions = 0;
};

DiffCounters diff_counters();
void reset_diff_counters();

}  // namespace splitroa
