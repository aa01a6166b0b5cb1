#pragma once

#include <filesystem>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/SparseCore>

namespace splitroa {

using SparseMatrix = Eigen::SparseMatrix<double, Eigen::ColMajor, int>;

enum class ConeKind { kZero, kNonneg, kPsd };

/// One factor of the product cone K. For kPsd `size` is the matrix side r and
/// the cone occupies r(r+1)/2 slots in svec layout.
struct Cone {
  ConeKind kind = ConeKind::kZero;
  int size = 0;

  int slots() const { return kind == ConeKind::kPsd ? size * (size + 1) / 2 : size; }
  friend bool operator==(const Cone&, const Cone&) = default;
};

const char* to_string(ConeKind kind);

/// minimize c'x  s.t.  Ax + s = b, s in K     (dual: minimize b'y s.t. A'y + c = 0,
/// y in K*). Cones are ordered zero, then nonneg, then PSD.
struct ConicProgram {
  SparseMatrix A;
  Eigen::VectorXd b;
  Eigen::VectorXd c;
  std::vector<Cone> cones;

  int rows() const { return static_cast<int>(A.rows()); }
  int cols() const { return static_cast<int>(A.cols()); }
  /// Throws std::invalid_argument on inconsistent dimensions or cone order.
  void validate() const;
};

enum class SolveStatus { kOptimal, kInfeasible, kUnbounded, kInaccurate };

const char* to_string(SolveStatus status);

struct ConicSolution {
  Eigen::VectorXd x;
  Eigen::VectorXd y;
  Eigen::VectorXd s;
  SolveStatus status = SolveStatus::kInaccurate;
  double primal_obj = 0.0;  ///< c'x
  double dual_obj = 0.0;    ///< b'y (so p* = -d* at optimality)
  int iterations = 0;
  double solve_time = 0.0;
  std::string message;
  /// The backend stopped at its reduced-accuracy tolerances.
  bool reduced_accuracy = false;
};

/// Optimal, or inaccurate only in the sense of reduced accuracy.
inline bool usable(const ConicSolution& sol) {
  return sol.status == SolveStatus::kOptimal ||
         (sol.status == SolveStatus::kInaccurate && sol.reduced_accuracy);
}

struct SolverSettings {
  double tol = 1e-9;
  int max_iter = 300;
  bool verbose = false;
};

/// Solves through the Clarabel interior-point backend, converting between the
/// lower-triangular svec layout used here and the backend's packing. Never
/// throws on solver failure; the status carries the outcome.
ConicSolution solve(const ConicProgram& program, const SolverSettings& settings = {});

struct KktResiduals {
  double primal = 0.0;        ///< |Ax + s - b|_inf
  double dual = 0.0;          ///< |A'y + c|_inf
  double complementarity = 0.0;  ///< |s'y|
  double primal_cone = 0.0;   ///< distance of s from K (inf norm)
  double dual_cone = 0.0;     ///< distance of y from K*
};

KktResiduals kkt_residuals(const ConicProgram& program, const ConicSolution& sol);

// --- Symmetric matrix packing -------------------------------------------------

inline int svec_size(int side) { return side * (side + 1) / 2; }
/// Inverse of svec_size; throws when `slots` is not triangular.
int svec_side(int slots);
/// Lower triangle, column-major, off-diagonals scaled by sqrt(2).
Eigen::VectorXd svec(const Eigen::MatrixXd& sym);
Eigen::MatrixXd unsvec(std::span<const double> packed, int side);
inline Eigen::MatrixXd unsvec(const Eigen::VectorXd& packed, int side) {
  return unsvec(std::span<const double>(packed.data(), static_cast<std::size_t>(packed.size())), side);
}

// --- Projections --------------------------------------------------------------

/// Thrown when a projection derivative is requested at a kink.
class NondifferentiableError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Euclidean projection onto the PSD cone (input is symmetrized first).
Eigen::MatrixXd project_psd(const Eigen::MatrixXd& X);

/// Directional derivative of project_psd at a nonsingular X. Throws
/// NondifferentiableError when min |lambda| < 1e-9 (1 + |X|_2).
Eigen::MatrixXd dproject_psd(const Eigen::MatrixXd& X, const Eigen::MatrixXd& dir);

/// Singularity threshold used by dproject_psd.
double psd_singularity_tolerance(const Eigen::MatrixXd& X);

/// Projection onto R^n x K* x R_+ for z = (u | v | w) with `n` leading free
/// entries. The dual of the zero cone is the whole space.
Eigen::VectorXd project_embedding(const Eigen::VectorXd& z, int n, std::span<const Cone> cones);

Eigen::VectorXd dproject_embedding(const Eigen::VectorXd& z, const Eigen::VectorXd& dir, int n,
                                   std::span<const Cone> cones);

/// The derivative of project_embedding as a sparse block-diagonal matrix.
SparseMatrix dproject_embedding_matrix(const Eigen::VectorXd& z, int n,
                                       std::span<const Cone> cones);

/// Projection onto K* alone (v-part of the embedding).
Eigen::VectorXd project_dual_cone(const Eigen::VectorXd& v, std::span<const Cone> cones);

// --- Exchange format ----------------------------------------------------------

/// Writes `<path>` (JSON header: dimensions, b, c, cones) and `<path>.bin`
/// (nnz little-endian int64 rows, nnz int64 cols, nnz float64 values).
void export_program(const ConicProgram& program, const std::filesystem::path& path);
ConicProgram import_program(const std::filesystem::path& path);

}  // namespace splitroa
