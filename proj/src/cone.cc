#include "splitroa/cone.h"

#include <algorithm>
#include <bit>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <iomanip>
#include <limits>
#include <sstream>

#include <Eigen/Eigenvalues>
#include "json.hpp"

extern "C" {

struct ClarabelCapiSettings {
  std::uint32_t max_iter;
  std::int32_t verbose;
  double tol_gap_abs;
  double tol_gap_rel;
  double tol_feas;
  double tol_ktratio;
  std::uint32_t max_threads;
};

struct ClarabelCapiInfo {
  std::int32_t status;
  std::uint32_t iterations;
  double primal_obj;
  double dual_obj;
  double r_prim;
  double r_dual;
  double solve_time;
};

int clarabel_capi_solve(std::size_t n, std::size_t m, const std::size_t* a_colptr,
                        const std::size_t* a_rowval, const double* a_nzval, const double* b,
                        const double* c, std::size_t ncones, const std::int32_t* cone_kind,
                        const std::size_t* cone_dim, const ClarabelCapiSettings* settings,
                        double* x, double* z, double* s, ClarabelCapiInfo* info);
}

namespace splitroa {

namespace {

constexpr double kSqrt2 = 1.4142135623730951;

int cone_rank(ConeKind kind) {
  switch (kind) {
    case ConeKind::kZero: return 0;
    case ConeKind::kNonneg: return 1;
    case ConeKind::kPsd: return 2;
  }
  return 3;
}

// Position of lower-triangle entry (i, j), i >= j, in svec order.
inline int svec_index(int i, int j, int side) { return j * side - j * (j - 1) / 2 + (i - j); }

// Position of the same entry in column-major upper-triangle packing.
inline int triu_index(int i, int j) { return i * (i + 1) / 2 + j; }

// For every row of the program, its row in the backend's layout.
std::vector<int> backend_row_permutation(std::span<const Cone> cones) {
  std::vector<int> perm;
  int offset = 0;
  for (const auto& cone : cones) {
    if (cone.kind == ConeKind::kPsd) {
      const int r = cone.size;
      std::vector<int> local(static_cast<std::size_t>(svec_size(r)));
      for (int j = 0; j < r; ++j) {
        for (int i = j; i < r; ++i) {
          local[static_cast<std::size_t>(svec_index(i, j, r))] = offset + triu_index(i, j);
        }
      }
      perm.insert(perm.end(), local.begin(), local.end());
    } else {
      for (int k = 0; k < cone.size; ++k) perm.push_back(offset + k);
    }
    offset += cone.slots();
  }
  return perm;
}

struct SymEig {
  Eigen::VectorXd values;
  Eigen::MatrixXd vectors;
};

SymEig sym_eig(const Eigen::MatrixXd& X) {
  if (!X.allFinite()) throw std::runtime_error("eigendecomposition: non-finite input");
  const Eigen::MatrixXd sym = 0.5 * (X + X.transpose());
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(sym);
  if (es.info() != Eigen::Success) throw std::runtime_error("eigendecomposition failed");
  return {es.eigenvalues(), es.eigenvectors()};
}

Eigen::MatrixXd dproject_psd_eig(const SymEig& e, const Eigen::MatrixXd& dir) {
  const Eigen::Index r = e.values.size();
  Eigen::MatrixXd B(r, r);
  for (Eigen::Index i = 0; i < r; ++i) {
    for (Eigen::Index j = 0; j < r; ++j) {
      const double li = e.values(i);
      const double lj = e.values(j);
      if (li > 0.0 && lj > 0.0) {
        B(i, j) = 1.0;
      } else if (li < 0.0 && lj < 0.0) {
        B(i, j) = 0.0;
      } else {
        B(i, j) = (std::max(li, 0.0) - std::max(lj, 0.0)) / (li - lj);
      }
    }
  }
  const Eigen::MatrixXd sym = 0.5 * (dir + dir.transpose());
  const Eigen::MatrixXd inner = e.vectors.transpose() * sym * e.vectors;
  return e.vectors * B.cwiseProduct(inner) * e.vectors.transpose();
}

void check_psd_differentiable(const SymEig& e, double tol) {
  const double min_abs = e.values.cwiseAbs().minCoeff();
  if (min_abs < tol) {
    std::ostringstream os;
    os << "PSD projection is not differentiable: min |eigenvalue| = " << min_abs
       << " below tolerance " << tol;
    throw NondifferentiableError(os.str());
  }
}

constexpr double kScalarKinkTol = 1e-12;

void check_scalar_differentiable(double v, const char* what) {
  if (std::abs(v) <= kScalarKinkTol) {
    throw NondifferentiableError(std::string("projection is not differentiable: ") + what +
                                 " coordinate at 0");
  }
}

double distance_to_psd(std::span<const double> packed, int side) {
  const Eigen::MatrixXd X = unsvec(packed, side);
  const SymEig e = sym_eig(X);
  return std::max(0.0, -e.values.minCoeff());
}

}  // namespace

const char* to_string(ConeKind kind) {
  switch (kind) {
    case ConeKind::kZero: return "zero";
    case ConeKind::kNonneg: return "nonneg";
    case ConeKind::kPsd: return "psd";
  }
  return "?";
}

const char* to_string(SolveStatus status) {
  switch (status) {
    case SolveStatus::kOptimal: return "optimal";
    case SolveStatus::kInfeasible: return "infeasible";
    case SolveStatus::kUnbounded: return "unbounded";
    case SolveStatus::kInaccurate: return "inaccurate";
  }
  return "?";
}

void ConicProgram::validate() const {
  if (b.size() != A.rows()) throw std::invalid_argument("conic program: b length != rows of A");
  if (c.size() != A.cols()) throw std::invalid_argument("conic program: c length != cols of A");
  long slots = 0;
  int last_rank = 0;
  for (const auto& cone : cones) {
    if (cone.size < 0) throw std::invalid_argument("conic program: negative cone size");
    const int rank = cone_rank(cone.kind);
    if (rank < last_rank) {
      throw std::invalid_argument("conic program: cones must be ordered zero, nonneg, psd");
    }
    last_rank = rank;
    slots += cone.slots();
  }
  if (slots != A.rows()) throw std::invalid_argument("conic program: cone slots != rows of A");
}

int svec_side(int slots) {
  const int r = static_cast<int>(std::lround((std::sqrt(8.0 * slots + 1.0) - 1.0) / 2.0));
  if (svec_size(r) != slots) throw std::invalid_argument("svec_side: not a triangular number");
  return r;
}

Eigen::VectorXd svec(const Eigen::MatrixXd& sym) {
  const int r = static_cast<int>(sym.rows());
  if (sym.cols() != r) throw std::invalid_argument("svec: matrix must be square");
  Eigen::VectorXd out(svec_size(r));
  int k = 0;
  for (int j = 0; j < r; ++j) {
    out(k++) = sym(j, j);
    for (int i = j + 1; i < r; ++i) out(k++) = kSqrt2 * 0.5 * (sym(i, j) + sym(j, i));
  }
  return out;
}

Eigen::MatrixXd unsvec(std::span<const double> packed, int side) {
  if (static_cast<int>(packed.size()) != svec_size(side)) {
    throw std::invalid_argument("unsvec: length does not match side");
  }
  Eigen::MatrixXd out(side, side);
  std::size_t k = 0;
  for (int j = 0; j < side; ++j) {
    out(j, j) = packed[k++];
    for (int i = j + 1; i < side; ++i) {
      const double v = packed[k++] / kSqrt2;
      out(i, j) = v;
      out(j, i) = v;
    }
  }
  return out;
}

Eigen::MatrixXd project_psd(const Eigen::MatrixXd& X) {
  const SymEig e = sym_eig(X);
  return e.vectors * e.values.cwiseMax(0.0).asDiagonal() * e.vectors.transpose();
}

double psd_singularity_tolerance(const Eigen::MatrixXd& X) {
  const SymEig e = sym_eig(X);
  const double norm2 = e.values.size() ? e.values.cwiseAbs().maxCoeff() : 0.0;
  return 1e-9 * (1.0 + norm2);
}

Eigen::MatrixXd dproject_psd(const Eigen::MatrixXd& X, const Eigen::MatrixXd& dir) {
  const SymEig e = sym_eig(X);
  const double norm2 = e.values.size() ? e.values.cwiseAbs().maxCoeff() : 0.0;
  check_psd_differentiable(e, 1e-9 * (1.0 + norm2));
  return dproject_psd_eig(e, dir);
}

Eigen::VectorXd project_dual_cone(const Eigen::VectorXd& v, std::span<const Cone> cones) {
  Eigen::VectorXd out(v.size());
  Eigen::Index off = 0;
  for (const auto& cone : cones) {
    const Eigen::Index len = cone.slots();
    switch (cone.kind) {
      case ConeKind::kZero:
        out.segment(off, len) = v.segment(off, len);
        break;
      case ConeKind::kNonneg:
        out.segment(off, len) = v.segment(off, len).cwiseMax(0.0);
        break;
      case ConeKind::kPsd: {
        const Eigen::MatrixXd X = unsvec(
            std::span<const double>(v.data() + off, static_cast<std::size_t>(len)), cone.size);
        out.segment(off, len) = svec(project_psd(X));
        break;
      }
    }
    off += len;
  }
  return out;
}

Eigen::VectorXd project_embedding(const Eigen::VectorXd& z, int n, std::span<const Cone> cones) {
  Eigen::VectorXd out(z.size());
  const Eigen::Index m = z.size() - n - 1;
  out.head(n) = z.head(n);
  out.segment(n, m) = project_dual_cone(z.segment(n, m), cones);
  out(z.size() - 1) = std::max(z(z.size() - 1), 0.0);
  return out;
}

Eigen::VectorXd dproject_embedding(const Eigen::VectorXd& z, const Eigen::VectorXd& dir, int n,
                                   std::span<const Cone> cones) {
  return dproject_embedding_matrix(z, n, cones) * dir;
}

SparseMatrix dproject_embedding_matrix(const Eigen::VectorXd& z, int n,
                                       std::span<const Cone> cones) {
  const Eigen::Index N = z.size();
  std::vector<Eigen::Triplet<double>> trip;
  trip.reserve(static_cast<std::size_t>(N));
  for (int i = 0; i < n; ++i) trip.emplace_back(i, i, 1.0);
  Eigen::Index off = n;
  for (const auto& cone : cones) {
    const int len = cone.slots();
    switch (cone.kind) {
      case ConeKind::kZero:
        for (int k = 0; k < len; ++k) trip.emplace_back(off + k, off + k, 1.0);
        break;
      case ConeKind::kNonneg:
        for (int k = 0; k < len; ++k) {
          const double v = z(off + k);
          check_scalar_differentiable(v, "nonnegative cone");
          if (v > 0.0) trip.emplace_back(off + k, off + k, 1.0);
        }
        break;
      case ConeKind::kPsd: {
        const int r = cone.size;
        const Eigen::MatrixXd X = unsvec(
            std::span<const double>(z.data() + off, static_cast<std::size_t>(len)), r);
        const SymEig e = sym_eig(X);
        const double norm2 = e.values.size() ? e.values.cwiseAbs().maxCoeff() : 0.0;
        check_psd_differentiable(e, 1e-9 * (1.0 + norm2));
        Eigen::VectorXd unit = Eigen::VectorXd::Zero(len);
        for (int col = 0; col < len; ++col) {
          unit.setZero();
          unit(col) = 1.0;
          const Eigen::VectorXd image = svec(dproject_psd_eig(e, unsvec(unit, r)));
          for (int row = 0; row < len; ++row) {
            if (image(row) != 0.0) trip.emplace_back(off + row, off + col, image(row));
          }
        }
        break;
      }
    }
    off += len;
  }
  check_scalar_differentiable(z(N - 1), "normalization");
  if (z(N - 1) > 0.0) trip.emplace_back(N - 1, N - 1, 1.0);
  SparseMatrix D(N, N);
  D.setFromTriplets(trip.begin(), trip.end());
  return D;
}

ConicSolution solve(const ConicProgram& program, const SolverSettings& settings) {
  program.validate();
  const int m = program.rows();
  const int n = program.cols();
  const std::vector<int> perm = backend_row_permutation(program.cones);

  std::vector<std::size_t> colptr(static_cast<std::size_t>(n) + 1, 0);
  std::vector<std::size_t> rowval;
  std::vector<double> nzval;
  rowval.reserve(static_cast<std::size_t>(program.A.nonZeros()));
  nzval.reserve(static_cast<std::size_t>(program.A.nonZeros()));
  std::vector<std::pair<int, double>> column;
  for (int j = 0; j < n; ++j) {
    column.clear();
    for (SparseMatrix::InnerIterator it(program.A, j); it; ++it) {
      column.emplace_back(perm[static_cast<std::size_t>(it.row())], it.value());
    }
    std::sort(column.begin(), column.end());
    for (const auto& [row, value] : column) {
      rowval.push_back(static_cast<std::size_t>(row));
      nzval.push_back(value);
    }
    colptr[static_cast<std::size_t>(j) + 1] = rowval.size();
  }
  std::vector<double> b(static_cast<std::size_t>(m));
  for (int i = 0; i < m; ++i) b[static_cast<std::size_t>(perm[static_cast<std::size_t>(i)])] = program.b(i);

  std::vector<std::int32_t> kinds;
  std::vector<std::size_t> dims;
  for (const auto& cone : program.cones) {
    if (cone.size == 0) continue;
    kinds.push_back(cone_rank(cone.kind));
    dims.push_back(static_cast<std::size_t>(cone.size));
  }

  ClarabelCapiSettings cfg{};
  cfg.max_iter = static_cast<std::uint32_t>(settings.max_iter);
  cfg.verbose = settings.verbose ? 1 : 0;
  cfg.tol_gap_abs = settings.tol;
  cfg.tol_gap_rel = settings.tol;
  cfg.tol_feas = settings.tol;
  cfg.tol_ktratio = 1e-6;
  cfg.max_threads = 1;

  std::vector<double> x(static_cast<std::size_t>(n)), zb(static_cast<std::size_t>(m)),
      sb(static_cast<std::size_t>(m));
  ClarabelCapiInfo info{};
  ConicSolution sol;
  const auto start = std::chrono::steady_clock::now();
  const int rc = clarabel_capi_solve(
      static_cast<std::size_t>(n), static_cast<std::size_t>(m), colptr.data(), rowval.data(),
      nzval.data(), b.data(), program.c.data(), kinds.size(), kinds.data(), dims.data(), &cfg,
      x.data(), zb.data(), sb.data(), &info);
  sol.solve_time =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  if (rc != 0) {
    sol.status = SolveStatus::kInaccurate;
    sol.message = "solver rejected the problem data";
    sol.x = Eigen::VectorXd::Zero(n);
    sol.y = Eigen::VectorXd::Zero(m);
    sol.s = Eigen::VectorXd::Zero(m);
    return sol;
  }

  sol.x = Eigen::Map<const Eigen::VectorXd>(x.data(), n);
  sol.y.resize(m);
  sol.s.resize(m);
  for (int i = 0; i < m; ++i) {
    const auto p = static_cast<std::size_t>(perm[static_cast<std::size_t>(i)]);
    sol.y(i) = zb[p];
    sol.s(i) = sb[p];
  }
  sol.iterations = static_cast<int>(info.iterations);
  sol.primal_obj = program.c.dot(sol.x);
  sol.dual_obj = program.b.dot(sol.y);

  static const char* const kNames[] = {
      "unsolved",         "solved",         "primal infeasible",     "dual infeasible",
      "almost solved",    "almost primal infeasible", "almost dual infeasible",
      "max iterations",   "max time",       "numerical error",       "insufficient progress",
      "callback terminated"};
  const int code = info.status;
  sol.message = (code >= 0 && code < 12) ? kNames[code] : "unknown";
  switch (code) {
    case 1: sol.status = SolveStatus::kOptimal; break;
    case 2: sol.status = SolveStatus::kInfeasible; break;
    case 3: sol.status = SolveStatus::kUnbounded; break;
    case 4:
      sol.status = SolveStatus::kInaccurate;
      sol.reduced_accuracy = true;
      break;
    default: sol.status = SolveStatus::kInaccurate; break;
  }
  if (!sol.x.allFinite() || !sol.y.allFinite() || !sol.s.allFinite()) {
    sol.status = SolveStatus::kInaccurate;
    sol.reduced_accuracy = false;
    sol.message += " (non-finite iterate)";
  }
  return sol;
}

KktResiduals kkt_residuals(const ConicProgram& program, const ConicSolution& sol) {
  KktResiduals r;
  r.primal = (program.A * sol.x + sol.s - program.b).lpNorm<Eigen::Infinity>();
  r.dual = (program.A.transpose() * sol.y + program.c).lpNorm<Eigen::Infinity>();
  r.complementarity = std::abs(sol.s.dot(sol.y));
  Eigen::Index off = 0;
  for (const auto& cone : program.cones) {
    const Eigen::Index len = cone.slots();
    const auto sseg = sol.s.segment(off, len);
    const auto yseg = sol.y.segment(off, len);
    switch (cone.kind) {
      case ConeKind::kZero:
        if (len) r.primal_cone = std::max(r.primal_cone, sseg.cwiseAbs().maxCoeff());
        break;
      case ConeKind::kNonneg:
        if (len) {
          r.primal_cone = std::max(r.primal_cone, (-sseg).maxCoeff());
          r.dual_cone = std::max(r.dual_cone, (-yseg).maxCoeff());
        }
        break;
      case ConeKind::kPsd:
        r.primal_cone = std::max(
            r.primal_cone,
            distance_to_psd(std::span<const double>(sol.s.data() + off, static_cast<std::size_t>(len)),
                            cone.size));
        r.dual_cone = std::max(
            r.dual_cone,
            distance_to_psd(std::span<const double>(sol.y.data() + off, static_cast<std::size_t>(len)),
                            cone.size));
        break;
    }
    off += len;
  }
  r.primal_cone = std::max(r.primal_cone, 0.0);
  r.dual_cone = std::max(r.dual_cone, 0.0);
  return r;
}

namespace {

static_assert(std::endian::native == std::endian::little,
              "binary sidecar assumes a little-endian host");

std::filesystem::path sidecar_path(const std::filesystem::path& path) {
  std::filesystem::path p = path;
  p += ".bin";
  return p;
}

}  // namespace

void export_program(const ConicProgram& program, const std::filesystem::path& path) {
  program.validate();
  nlohmann::json j;
  j["format"] = "splitroa-conic-v1";
  j["rows"] = program.rows();
  j["cols"] = program.cols();
  j["nnz"] = program.A.nonZeros();
  j["b"] = std::vector<double>(program.b.data(), program.b.data() + program.b.size());
  j["c"] = std::vector<double>(program.c.data(), program.c.data() + program.c.size());
  j["cones"] = nlohmann::json::array();
  for (const auto& cone : program.cones) {
    j["cones"].push_back({{"kind", to_string(cone.kind)}, {"size", cone.size}});
  }
  j["sidecar"] = sidecar_path(path).filename().string();
  {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    out << std::setprecision(17) << j.dump(1) << '\n';
  }

  std::vector<std::int64_t> rows, cols;
  std::vector<double> vals;
  for (int k = 0; k < program.A.outerSize(); ++k) {
    for (SparseMatrix::InnerIterator it(program.A, k); it; ++it) {
      rows.push_back(it.row());
      cols.push_back(it.col());
      vals.push_back(it.value());
    }
  }
  std::ofstream bin(sidecar_path(path), std::ios::binary);
  if (!bin) throw std::runtime_error("cannot write " + sidecar_path(path).string());
  const auto bytes = [](const auto& v) {
    return static_cast<std::streamsize>(v.size() * sizeof(v[0]));
  };
  bin.write(reinterpret_cast<const char*>(rows.data()), bytes(rows));
  bin.write(reinterpret_cast<const char*>(cols.data()), bytes(cols));
  bin.write(reinterpret_cast<const char*>(vals.data()), bytes(vals));
}

ConicProgram import_program(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read " + path.string());
  const nlohmann::json j = nlohmann::json::parse(in);
  ConicProgram p;
  const int m = j.at("rows").get<int>();
  const int n = j.at("cols").get<int>();
  const auto nnz = j.at("nnz").get<std::int64_t>();
  const auto b = j.at("b").get<std::vector<double>>();
  const auto c = j.at("c").get<std::vector<double>>();
  p.b = Eigen::Map<const Eigen::VectorXd>(b.data(), static_cast<Eigen::Index>(b.size()));
  p.c = Eigen::Map<const Eigen::VectorXd>(c.data(), static_cast<Eigen::Index>(c.size()));
  for (const auto& cj : j.at("cones")) {
    const std::string kind = cj.at("kind").get<std::string>();
    Cone cone;
    if (kind == "zero") cone.kind = ConeKind::kZero;
    else if (kind == "nonneg") cone.kind = ConeKind::kNonneg;
    else if (kind == "psd") cone.kind = ConeKind::kPsd;
    else throw std::runtime_error("unknown cone kind '" + kind + "'");
    cone.size = cj.at("size").get<int>();
    p.cones.push_back(cone);
  }

  std::filesystem::path bin_path = path.parent_path() / j.at("sidecar").get<std::string>();
  std::ifstream bin(bin_path, std::ios::binary);
  if (!bin) throw std::runtime_error("cannot read " + bin_path.string());
  std::vector<std::int64_t> rows(static_cast<std::size_t>(nnz)), cols(static_cast<std::size_t>(nnz));
  std::vector<double> vals(static_cast<std::size_t>(nnz));
  bin.read(reinterpret_cast<char*>(rows.data()), nnz * 8);
  bin.read(reinterpret_cast<char*>(cols.data()), nnz * 8);
  bin.read(reinterpret_cast<char*>(vals.data()), nnz * 8);
  if (!bin) throw std::runtime_error("truncated sidecar " + bin_path.string());
  std::vector<Eigen::Triplet<double>> trip;
  trip.reserve(static_cast<std::size_t>(nnz));
  for (std::size_t k = 0; k < rows.size(); ++k) {
    trip.emplace_back(static_cast<int>(rows[k]), static_cast<int>(cols[k]), vals[k]);
  }
  p.A.resize(m, n);
  p.A.setFromTriplets(trip.begin(), trip.end());
  p.validate();
  return p;
}

}  // namespace splitroa
