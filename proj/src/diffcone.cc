#include "splitroa/diffcone.h"

#include <algorithm>
#include <atomic>
#include <cmath>

#include <Eigen/Eigenvalues>
#include <SuiteSparseQR.hpp>

namespace splitroa {

namespace {

std::atomic<std::int64_t> g_assemblies{0};
std::atomic<std::int64_t> g_factorizations{0};
std::atomic<std::int64_t> g_back_substitutions{0};

using LongSparse = Eigen::SparseMatrix<double, Eigen::ColMajor, SuiteSparse_long>;

SparseMatrix build_q(const ConicProgram& p) {
  const int n = p.cols();
  const int m = p.rows();
  const int N = n + m + 1;
  std::vector<Eigen::Triplet<double>> trip;
  trip.reserve(static_cast<std::size_t>(2 * p.A.nonZeros() + 2 * (n + m)));
  for (int k = 0; k < p.A.outerSize(); ++k) {
    for (SparseMatrix::InnerIterator it(p.A, k); it; ++it) {
      const int i = static_cast<int>(it.row());
      const int j = static_cast<int>(it.col());
      trip.emplace_back(j, n + i, it.value());
      trip.emplace_back(n + i, j, -it.value());
    }
  }
  for (int j = 0; j < n; ++j) {
    if (p.c(j) != 0.0) {
      trip.emplace_back(j, N - 1, p.c(j));
      trip.emplace_back(N - 1, j, -p.c(j));
    }
  }
  for (int i = 0; i < m; ++i) {
    if (p.b(i) != 0.0) {
      trip.emplace_back(n + i, N - 1, p.b(i));
      trip.emplace_back(N - 1, n + i, -p.b(i));
    }
  }
  SparseMatrix Q(N, N);
  Q.setFromTriplets(trip.begin(), trip.end());
  return Q;
}

// dQ * q for dQ built from (dA, db, dc).
Eigen::VectorXd apply_dq(const DataDerivative& dd, const Eigen::VectorXd& q, int n, int m) {
  const Eigen::VectorXd qx = q.head(n);
  const Eigen::VectorXd qy = q.segment(n, m);
  const double qw = q(n + m);
  Eigen::VectorXd out(n + m + 1);
  out.head(n) = dd.dA.transpose() * qy + dd.dc * qw;
  out.segment(n, m) = -(dd.dA * qx) + dd.db * qw;
  out(n + m) = -dd.dc.dot(qx) - dd.db.dot(qy);
  return out;
}

double min_abs_eig(std::span<const double> packed, int side) {
  if (side == 0) return std::numeric_limits<double>::infinity();
  const Eigen::MatrixXd X = unsvec(packed, side);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(X, Eigen::EigenvaluesOnly);
  return es.eigenvalues().cwiseAbs().minCoeff();
}

}  // namespace

class QrFactorization {
 public:
  QrFactorization(const SparseMatrix& M, double relative_damping) {
    cholmod_l_start(&cc_);
    const Eigen::Index N = M.cols();
    double max_norm = 0.0;
    for (Eigen::Index j = 0; j < M.outerSize(); ++j) max_norm = std::max(max_norm, M.col(j).norm());
    damping_ = relative_damping * std::max(max_norm, 1.0);
    std::vector<Eigen::Triplet<double, SuiteSparse_long>> trips;
    trips.reserve(static_cast<std::size_t>(M.nonZeros() + N));
    for (Eigen::Index j = 0; j < M.outerSize(); ++j) {
      for (SparseMatrix::InnerIterator it(M, j); it; ++it) trips.emplace_back(it.row(), j, it.value());
      if (damping_ > 0.0) trips.emplace_back(M.rows() + j, j, damping_);
    }
    rows_ = M.rows();
    stacked_.resize(rows_ + (damping_ > 0.0 ? N : 0), N);
    stacked_.setFromTriplets(trips.begin(), trips.end());
    stacked_.makeCompressed();

    cholmod_sparse A{};
    A.nrow = static_cast<std::size_t>(stacked_.rows());
    A.ncol = static_cast<std::size_t>(stacked_.cols());
    A.nzmax = static_cast<std::size_t>(stacked_.nonZeros());
    A.p = stacked_.outerIndexPtr();
    A.i = stacked_.innerIndexPtr();
    A.x = stacked_.valuePtr();
    A.stype = 0;
    A.itype = CHOLMOD_LONG;
    A.xtype = CHOLMOD_REAL;
    A.dtype = CHOLMOD_DOUBLE;
    A.sorted = 1;
    A.packed = 1;
    const double tol = damping_ > 0.0 ? 0.0 : SPQR_DEFAULT_TOL;
    factor_ = SuiteSparseQR_factorize<double>(SPQR_ORDERING_DEFAULT, tol, &A, &cc_);
    if (factor_ == nullptr) {
      cholmod_l_finish(&cc_);
      throw std::runtime_error("sparse QR factorization failed");
    }
    g_factorizations.fetch_add(1);
  }

  ~QrFactorization() {
    SuiteSparseQR_free<double>(&factor_, &cc_);
    cholmod_l_finish(&cc_);
  }

  QrFactorization(const QrFactorization&) = delete;
  QrFactorization& operator=(const QrFactorization&) = delete;

  long rank() const { return static_cast<long>(cc_.SPQR_istat[4]); }
  double damping() const { return damping_; }

  Eigen::MatrixXd solve(const Eigen::MatrixXd& B) {
    Eigen::MatrixXd padded = Eigen::MatrixXd::Zero(stacked_.rows(), B.cols());
    padded.topRows(rows_) = B;
    cholmod_dense rhs{};
    rhs.nrow = static_cast<std::size_t>(padded.rows());
    rhs.ncol = static_cast<std::size_t>(padded.cols());
    rhs.nzmax = rhs.nrow * rhs.ncol;
    rhs.d = rhs.nrow;
    rhs.x = padded.data();
    rhs.xtype = CHOLMOD_REAL;
    rhs.dtype = CHOLMOD_DOUBLE;
    cholmod_dense* y = SuiteSparseQR_qmult<double>(SPQR_QTX, factor_, &rhs, &cc_);
    if (y == nullptr) throw std::runtime_error("sparse QR solve failed");
    cholmod_dense* x = SuiteSparseQR_solve<double>(SPQR_RETX_EQUALS_B, factor_, y, &cc_);
    cholmod_l_free_dense(&y, &cc_);
    if (x == nullptr) throw std::runtime_error("sparse QR solve failed");
    Eigen::MatrixXd X = Eigen::Map<Eigen::MatrixXd>(static_cast<double*>(x->x),
                                                    static_cast<Eigen::Index>(x->nrow),
                                                    static_cast<Eigen::Index>(x->ncol));
    cholmod_l_free_dense(&x, &cc_);
    return X;
  }

 private:
  cholmod_common cc_{};
  LongSparse stacked_;
  Eigen::Index rows_ = 0;
  double damping_ = 0.0;
  SuiteSparseQR_factorization<double>* factor_ = nullptr;
};

SensitivitySystem::SensitivitySystem() = default;
SensitivitySystem::~SensitivitySystem() = default;
SensitivitySystem::SensitivitySystem(SensitivitySystem&&) noexcept = default;
SensitivitySystem& SensitivitySystem::operator=(SensitivitySystem&&) noexcept = default;

EmbeddingPoint build_embedding(const ConicSolution& sol) {
  EmbeddingPoint e;
  e.n = static_cast<int>(sol.x.size());
  e.m = static_cast<int>(sol.y.size());
  e.z.resize(e.n + e.m + 1);
  e.z.head(e.n) = sol.x;
  e.z.segment(e.n, e.m) = sol.y - sol.s;
  e.z(e.n + e.m) = 1.0;
  return e;
}

DataDerivative zero_data_derivative(const ConicProgram& p) {
  DataDerivative d;
  d.dA.resize(p.rows(), p.cols());
  d.db = Eigen::VectorXd::Zero(p.rows());
  d.dc = Eigen::VectorXd::Zero(p.cols());
  return d;
}

Eigen::MatrixXd embedding_q(const ConicProgram& p) { return Eigen::MatrixXd(build_q(p)); }

SensitivitySystem assemble_sensitivity(const ConicProgram& p, const EmbeddingPoint& z,
                                       std::span<const DataDerivative> dD) {
  const int n = p.cols();
  const int m = p.rows();
  const int N = n + m + 1;
  if (z.z.size() != N) throw std::invalid_argument("assemble_sensitivity: embedding size mismatch");
  SensitivitySystem sys;
  sys.n = n;
  sys.m = m;
  sys.point = z;
  sys.cones = p.cones;
  sys.D = dproject_embedding_matrix(z.z, n, p.cones);

  const SparseMatrix Q = build_q(p);
  SparseMatrix I(N, N);
  I.setIdentity();
  const double w = z.w();
  sys.M = ((Q - I) * sys.D + I) / w;
  sys.M.makeCompressed();
  g_assemblies.fetch_add(1);

  const Eigen::VectorXd pz = project_embedding(z.z / std::abs(w), n, p.cones);
  sys.rhs.resize(N, static_cast<Eigen::Index>(dD.size()));
  for (std::size_t k = 0; k < dD.size(); ++k) {
    const auto& dd = dD[k];
    if (dd.dA.rows() != m || dd.dA.cols() != n || dd.db.size() != m || dd.dc.size() != n) {
      throw std::invalid_argument("assemble_sensitivity: data derivative has wrong shape");
    }
    sys.rhs.col(static_cast<Eigen::Index>(k)) = -apply_dq(dd, pz, n, m);
  }
  return sys;
}

long qr_rank(SensitivitySystem& sys) {
  if (sys.rank < 0) sys.rank = QrFactorization(sys.M, 0.0).rank();
  return sys.rank;
}

Eigen::MatrixXd solve_dz_qr(SensitivitySystem& sys, bool allow_rank_deficient) {
  const long N = sys.M.rows();
  if (sys.rhs.cols() == 0) return Eigen::MatrixXd(N, 0);
  if (!allow_rank_deficient) {
    const long rank = qr_rank(sys);
    if (rank < N - 1) {
      throw RankDeficientError("sensitivity matrix is rank deficient: estimated rank " +
                                   std::to_string(rank) + " of " + std::to_string(N),
                               rank, N);
    }
  }
  if (!sys.qr) {
    sys.qr = std::make_unique<QrFactorization>(sys.M, kQrDamping);
    sys.qr_damping = sys.qr->damping();
  }
  Eigen::MatrixXd dz = sys.qr->solve(sys.rhs);
  g_back_substitutions.fetch_add(sys.rhs.cols());
  return dz;
}

LsqrColumn lsqr(const SparseMatrix& A, const Eigen::VectorXd& b, int maxiter, double atol,
                double btol) {
  LsqrColumn out;
  out.x = Eigen::VectorXd::Zero(A.cols());
  Eigen::VectorXd u = b;
  double beta = u.norm();
  const double bnorm = beta;
  if (beta == 0.0) {
    out.converged = true;
    return out;
  }
  u /= beta;
  Eigen::VectorXd v = A.transpose() * u;
  double alpha = v.norm();
  if (alpha == 0.0) {
    out.converged = true;
    return out;
  }
  v /= alpha;
  Eigen::VectorXd w = v;
  double phibar = beta;
  double rhobar = alpha;
  double anorm2 = 0.0;
  for (int it = 1; it <= maxiter; ++it) {
    u = A * v - alpha * u;
    beta = u.norm();
    anorm2 += alpha * alpha + beta * beta;
    if (beta > 0.0) {
      u /= beta;
      v = A.transpose() * u - beta * v;
      alpha = v.norm();
      if (alpha > 0.0) v /= alpha;
    } else {
      alpha = 0.0;
    }
    const double rho = std::hypot(rhobar, beta);
    const double c = rhobar / rho;
    const double s = beta / rho;
    const double theta = s * alpha;
    rhobar = -c * alpha;
    const double phi = c * phibar;
    phibar = s * phibar;
    out.x += (phi / rho) * w;
    w = v - (theta / rho) * w;
    out.iterations = it;

    const double rnorm = phibar;
    const double arnorm = phibar * alpha * std::abs(c);
    const double anorm = std::sqrt(anorm2);
    const double xnorm = out.x.norm();
    if (rnorm <= btol * bnorm + atol * anorm * xnorm ||
        arnorm <= atol * anorm * rnorm || alpha == 0.0) {
      out.converged = true;
      break;
    }
  }
  return out;
}

LsqrResult solve_dz_lsqr(const SensitivitySystem& sys, int maxiter, double atol, double btol) {
  LsqrResult res;
  const Eigen::Index N = sys.M.rows();
  res.dz.resize(N, sys.rhs.cols());
  for (Eigen::Index k = 0; k < sys.rhs.cols(); ++k) {
    LsqrColumn col = lsqr(sys.M, sys.rhs.col(k), maxiter, atol, btol);
    res.dz.col(k) = col.x;
    res.iterations.push_back(col.iterations);
    res.converged.push_back(col.converged);
    res.all_converged = res.all_converged && col.converged;
  }
  return res;
}

namespace {

SolutionDerivative derivative_from_d(const SparseMatrix& D, int n, int m, const ConicProgram& p,
                                     const ConicSolution& sol, const Eigen::VectorXd& dz,
                                     const DataDerivative& dD) {
  SolutionDerivative out;
  const Eigen::VectorXd du = dz.head(n);
  const Eigen::VectorXd dv = dz.segment(n, m);
  const double dw = dz(n + m);
  out.dx = du - sol.x * dw;
  const SparseMatrix Dv = D.block(n, n, m, m);
  out.dy = Dv * dv - sol.y * dw;
  out.dp_primal = dD.dc.dot(sol.x) + p.c.dot(out.dx);
  out.dp_dual = -(dD.db.dot(sol.y) + p.b.dot(out.dy));
  const double scale = std::max({1e-12, std::abs(out.dp_primal), std::abs(out.dp_dual)});
  out.discrepancy = std::abs(out.dp_primal - out.dp_dual) / scale;
  out.conditioning_warning = out.discrepancy > kRouteTolerance;
  return out;
}

}  // namespace

SolutionDerivative solution_derivative(const SensitivitySystem& sys, const ConicProgram& p,
                                       const ConicSolution& sol, const Eigen::VectorXd& dz,
                                       const DataDerivative& dD) {
  return derivative_from_d(sys.D, sys.n, sys.m, p, sol, dz, dD);
}

SolutionDerivative solution_derivative(const ConicProgram& p, const ConicSolution& sol,
                                       const EmbeddingPoint& z, const Eigen::VectorXd& dz,
                                       const DataDerivative& dD) {
  const SparseMatrix D = dproject_embedding_matrix(z.z, z.n, p.cones);
  return derivative_from_d(D, z.n, z.m, p, sol, dz, dD);
}

DifferentiabilityReport check_differentiability(const ConicProgram& p, const ConicSolution& sol,
                                                double threshold) {
  DifferentiabilityReport r;
  const Eigen::VectorXd v = sol.y - sol.s;
  r.w = 1.0;
  r.min_margin = std::abs(r.w);
  Eigen::Index off = 0;
  for (const auto& cone : p.cones) {
    const Eigen::Index len = cone.slots();
    if (cone.kind == ConeKind::kNonneg && len > 0) {
      const double mg = v.segment(off, len).cwiseAbs().minCoeff();
      r.nonneg_margins.push_back(mg);
      r.min_margin = std::min(r.min_margin, mg);
    } else if (cone.kind == ConeKind::kPsd) {
      const double mg = min_abs_eig(
          std::span<const double>(v.data() + off, static_cast<std::size_t>(len)), cone.size);
      r.psd_margins.push_back(mg);
      r.min_margin = std::min(r.min_margin, mg);
    }
    off += len;
  }
  r.flagged = r.min_margin <= threshold;
  return r;
}

DiffCounters diff_counters() {
  return {g_assemblies.load(), g_factorizations.load(), g_back_substitutions.load()};
}

void reset_diff_counters() {
  g_assemblies = 0;
  g_factorizations = 0;
  g_back_substitutions = 0;
}

}  // namespace splitroa
