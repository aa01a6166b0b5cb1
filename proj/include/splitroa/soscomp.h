#pragma once

#include <string>
#include <vector>

#include "splitroa/cone.h"
#include "splitroa/model.h"
#include "splitroa/poly.h"

namespace splitroa {

/// Affine frame of one interval or one axis of a box: global = center + scale * local,
/// with the piece occupying local coordinates [-rho, rho]. rho is 1 except for
/// boxes thinner than `min_scale_fraction` of the domain.
struct AxisFrame {
  double center = 0.0;
  double scale = 1.0;
  double rho = 1.0;
};

struct LocalGeometry {
  std::vector<std::vector<AxisFrame>> boxes;  ///< [box][axis]
  std::vector<AxisFrame> intervals;
};

struct CompileOptions {
  /// Lower bound on a frame scale relative to the domain half-width.
  double min_scale_fraction = 1e-3;
};

LocalGeometry local_geometry(const SystemSpec& sys, const Decomposition& dec,
                             const CompileOptions& options = {});

enum class Family { kFlow, kInitial, kFinal, kBound, kTimeInterface, kFaceInterface };

const char* to_string(Family family);

/// Coefficients of a decision polynomial (v_{i,k} or w_i) in the local frame.
struct PolyBlock {
  int box = 0;
  int interval = -1;  ///< -1 for w blocks
  int col_offset = 0;
  MonomialBasis basis;
};

/// One SOS Gram matrix. `multiplies` is the index into the owning constraint's
/// description list, or -1 for the free SOS term; -2 marks the flow multiplier
/// of a face constraint.
struct GramBlock {
  int constraint = 0;
  int multiplies = -1;
  int col_offset = 0;
  int psd_row_offset = 0;
  MonomialBasis basis;
};

struct ConstraintRecord {
  Family family = Family::kFlow;
  int box = -1;
  int interval = -1;
  int neighbor = -1;
  int sign = 1;  ///< +1 / -1 for the two face constraints
  int row_offset = 0;
  std::vector<Monomial> row_monomials;
  int degree_budget = 0;
  std::vector<int> grams;
  /// Set descriptions paired with the multipliers, in the local frame of the
  /// compiled geometry.
  std::vector<Polynomial> descriptions;
};

struct CompiledProgram {
  ConicProgram program;
  int degree = 0;
  int nvars = 0;
  Decomposition decomposition;
  LocalGeometry geometry;
  std::vector<PolyBlock> v_blocks;  ///< index box * num_intervals + interval
  std::vector<PolyBlock> w_blocks;
  std::vector<GramBlock> grams;
  std::vector<ConstraintRecord> constraints;

  const PolyBlock& v_block(int box, int interval) const {
    return v_blocks[static_cast<std::size_t>(box * decomposition.num_intervals() + interval)];
  }
};

/// Compiles the split SOS program of degree `d` into standard conic form.
/// Rows and the sparsity pattern of A depend only on the split counts, the
/// system and d (entries may be stored zeros at a particular geometry).
CompiledProgram compile(const SystemSpec& sys, const Decomposition& dec, int d,
                        const CompileOptions& options = {});

/// Piecewise certificate in global coordinates. Polynomials live in the
/// ambient variable space of the system (no dependence on u).
struct PiecewiseCertificate {
  Decomposition decomposition;
  int degree = 0;
  int nvars = 0;
  std::vector<std::vector<Polynomial>> v;  ///< [box][interval]
  std::vector<Polynomial> w;               ///< [box]
};

/// Reads v and w from a solution. Throws std::runtime_error on an infeasible or
/// unbounded status.
PiecewiseCertificate extract_certificate(const CompiledProgram& cp, const ConicSolution& sol);

/// Certificate from a raw variable vector (no status check).
PiecewiseCertificate certificate_from_vector(const CompiledProgram& cp, const Eigen::VectorXd& x);

/// Local polynomial of a decision block read from x.
Polynomial block_polynomial(const PolyBlock& block, const Eigen::VectorXd& x, int nvars);

/// beta' G beta for a Gram block read from x.
Polynomial gram_polynomial(const GramBlock& gram, const Eigen::VectorXd& x, int nvars);

}  // namespace splitroa
