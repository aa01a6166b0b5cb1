#include <gtest/gtest.h>

#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <random>

#include "splitroa/roa.h"
#include "splitroa/soscomp.h"

using namespace splitroa;

namespace {

int svec_total(const CompiledProgram& cp) {
  int total = 0;
  for (const auto& c : cp.program.cones) {
    if (c.kind == ConeKind::kPsd) total += c.slots();
  }
  return total;
}

CompiledProgram compile_di(int time_splits, std::vector<int> state_splits, int d = 4) {
  const auto sys = double_integrator();
  return compile(sys, build_decomposition(sys, equidistant_splits(sys, time_splits, state_splits)), d);
}

Eigen::VectorXd random_vector(int size, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  Eigen::VectorXd x(size);
  for (int i = 0; i < size; ++i) x(i) = u(rng);
  return x;
}

int count_family(const CompiledProgram& cp, Family f) {
  return static_cast<int>(std::count_if(cp.constraints.begin(), cp.constraints.end(),
                                        [f](const ConstraintRecord& r) { return r.family == f; }));
}

}  // namespace

TEST(Compile, DoubleIntegratorWithoutSplits) {
  const auto cp = compile_di(0, {0, 0});
  // Ambient variables (t, x1, x2, u); v has degree 4 in (t, x), w degree 4 in x.
  ASSERT_EQ(cp.v_blocks.size(), 1u);
  EXPECT_EQ(cp.v_blocks[0].basis.size(), binomial(3 + 4, 3));
  ASSERT_EQ(cp.w_blocks.size(), 1u);
  EXPECT_EQ(cp.w_blocks[0].basis.size(), binomial(2 + 4, 2));

  int flow = -1;
  for (std::size_t i = 0; i < cp.constraints.size(); ++i) {
    if (cp.constraints[i].family == Family::kFlow) flow = static_cast<int>(i);
  }
  ASSERT_GE(flow, 0);
  const auto& rec = cp.constraints[static_cast<std::size_t>(flow)];
  EXPECT_EQ(rec.row_monomials.size(), binomial(4 + 4, 4));
  // Free SOS term over monomials of degree <= 2 in four variables.
  EXPECT_EQ(cp.grams[static_cast<std::size_t>(rec.grams[0])].basis.size(), 15u);

  // Coefficient columns plus one svec block per Gram matrix; one zero row per
  // coefficient identity plus the PSD rows.
  EXPECT_EQ(cp.program.cols(), 35 + 15 + svec_total(cp));
  int identity_rows = 0;
  for (const auto& r : cp.constraints) identity_rows += static_cast<int>(r.row_monomials.size());
  EXPECT_EQ(cp.program.cones.front().kind, ConeKind::kZero);
  EXPECT_EQ(cp.program.cones.front().size, identity_rows);
  EXPECT_EQ(cp.program.rows(), identity_rows + svec_total(cp));
  EXPECT_EQ(cp.program.rows(), 400);
  EXPECT_EQ(cp.program.cols(), 335);
  EXPECT_EQ(count_family(cp, Family::kTimeInterface), 0);
  EXPECT_EQ(count_family(cp, Family::kFaceInterface), 0);
}

TEST(Compile, OneSpatialSplitAddsFaceConstraintsOnly) {
  const auto cp = compile_di(0, {1, 0});
  EXPECT_EQ(cp.v_blocks.size(), 2u);
  EXPECT_EQ(cp.w_blocks.size(), 2u);
  EXPECT_EQ(count_family(cp, Family::kTimeInterface), 0);
  EXPECT_EQ(count_family(cp, Family::kFlow), 2);
  // Both orientations of the single face, once per time interval.
  int plus = 0, minus = 0;
  for (const auto& r : cp.constraints) {
    if (r.family != Family::kFaceInterface) continue;
    EXPECT_EQ(r.neighbor, 0);
    EXPECT_EQ(r.interval, 0);
    (r.sign > 0 ? plus : minus)++;
  }
  EXPECT_EQ(plus, 1);
  EXPECT_EQ(minus, 1);
}

TEST(Compile, TimeSplitAddsContinuityConstraint) {
  const auto cp = compile_di(1, {0, 0});
  EXPECT_EQ(cp.v_blocks.size(), 2u);
  EXPECT_EQ(cp.w_blocks.size(), 1u);
  EXPECT_EQ(count_family(cp, Family::kTimeInterface), 1);
  EXPECT_EQ(count_family(cp, Family::kFlow), 2);
  EXPECT_EQ(count_family(cp, Family::kInitial), 1);
  EXPECT_EQ(count_family(cp, Family::kFinal), 1);
  EXPECT_EQ(count_family(cp, Family::kFaceInterface), 0);
}

TEST(Compile, StructureIndependentOfSplitPositions) {
  const auto sys = double_integrator();
  const auto base = compile(sys, build_decomposition(sys, equidistant_splits(sys, 1, {1, 1})), 4);
  std::mt19937_64 rng(21);
  std::uniform_real_distribution<double> jitter(-0.15, 0.15);
  for (int trial = 0; trial < 10; ++trial) {
    SplitConfig th = equidistant_splits(sys, 1, {1, 1});
    th.time_splits[0] += jitter(rng);
    th.state_splits[0][0] += jitter(rng);
    th.state_splits[1][0] += jitter(rng);
    const auto cp = compile(sys, build_decomposition(sys, th), 4);
    EXPECT_EQ(cp.program.cones, base.program.cones);
    ASSERT_EQ(cp.program.A.nonZeros(), base.program.A.nonZeros());
    bool same = true;
    for (int k = 0; k < cp.program.A.outerSize() + 1; ++k) {
      same = same && cp.program.A.outerIndexPtr()[k] == base.program.A.outerIndexPtr()[k];
    }
    for (int k = 0; k < cp.program.A.nonZeros(); ++k) {
      same = same && cp.program.A.innerIndexPtr()[k] == base.program.A.innerIndexPtr()[k];
    }
    EXPECT_TRUE(same);
  }
}

TEST(Compile, DegreeTooSmallOrOddThrows) {
  EXPECT_THROW(compile_di(0, {0, 0}, 0), std::invalid_argument);
  EXPECT_THROW(compile_di(0, {0, 0}, 3), std::invalid_argument);
}

TEST(Extract, GlobalPolynomialsMatchLocalBlocks) {
  const auto cp = compile_di(1, {1, 0});
  const auto x = random_vector(cp.program.cols(), 3);
  const auto cert = certificate_from_vector(cp, x);
  const auto& dec = cp.decomposition;
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> unit(-1.0, 1.0);
  for (int i = 0; i < dec.num_boxes(); ++i) {
    const auto& frames = cp.geometry.boxes[static_cast<std::size_t>(i)];
    for (int k = 0; k < dec.num_intervals(); ++k) {
      const auto& tf = cp.geometry.intervals[static_cast<std::size_t>(k)];
      const auto local = block_polynomial(cp.v_block(i, k), x, cp.nvars);
      for (int trial = 0; trial < 5; ++trial) {
        std::vector<double> loc(static_cast<std::size_t>(cp.nvars), 0.0), glob(loc.size(), 0.0);
        loc[0] = tf.rho * unit(rng);
        glob[0] = tf.center + tf.scale * loc[0];
        for (int p = 0; p < 2; ++p) {
          const auto& f = frames[static_cast<std::size_t>(p)];
          loc[static_cast<std::size_t>(1 + p)] = f.rho * unit(rng);
          glob[static_cast<std::size_t>(1 + p)] = f.center + f.scale * loc[static_cast<std::size_t>(1 + p)];
        }
        const double a = local.evaluate(loc);
        const double b = cert.v[static_cast<std::size_t>(i)][static_cast<std::size_t>(k)].evaluate(glob);
        EXPECT_NEAR(a, b, 1e-10 * (1 + std::abs(a)));
        glob[3] = 0.37;
        EXPECT_NEAR(cert.v[static_cast<std::size_t>(i)][static_cast<std::size_t>(k)].evaluate(glob), b, 1e-12)
            << "certificate must not depend on u";
      }
    }
  }
}

TEST(Objective, EqualsIntegralOfW) {
  const auto cp = compile_di(0, {1, 1});
  const auto x = random_vector(cp.program.cols(), 9);
  const auto cert = certificate_from_vector(cp, x);
  using boost::math::quadrature::gauss_kronrod;
  double integral = 0.0;
  for (int i = 0; i < cp.decomposition.num_boxes(); ++i) {
    const auto& box = cp.decomposition.boxes[static_cast<std::size_t>(i)];
    const auto& w = cert.w[static_cast<std::size_t>(i)];
    integral += gauss_kronrod<double, 15>::integrate(
        [&](double x1) {
          return gauss_kronrod<double, 15>::integrate(
              [&](double x2) {
                const std::vector<double> pt{0.0, x1, x2, 0.0};
                return w.evaluate(pt);
              },
              box[1].lo, box[1].hi, 0, 0);
        },
        box[0].lo, box[0].hi, 0, 0);
  }
  double cx = 0.0;
  for (const auto& wb : cp.w_blocks) {
    for (std::size_t a = 0; a < wb.basis.size(); ++a) {
      const int col = wb.col_offset + static_cast<int>(a);
      cx += cp.program.c(col) * x(col);
    }
  }
  EXPECT_NEAR(cx, integral, 1e-10 * (1 + std::abs(integral)));
  EXPECT_NEAR(cp.program.c.dot(x), cx, 1e-12 * (1 + std::abs(cx))) << "c is supported on w only";
}

TEST(Certificate, SolvedCertificateSatisfiesInitialAndBoundConstraints) {
  const auto cp = compile_di(0, {1, 0});
  const auto sol = solve(cp.program);
  ASSERT_TRUE(usable(sol));
  const auto cert = extract_certificate(cp, sol);
  std::mt19937_64 rng(13);
  const auto& sys = double_integrator();
  std::uniform_real_distribution<double> x1(sys.state_box[0].lo, sys.state_box[0].hi);
  std::uniform_real_distribution<double> x2(sys.state_box[1].lo, sys.state_box[1].hi);
  for (int trial = 0; trial < 200; ++trial) {
    const std::vector<double> x{x1(rng), x2(rng)};
    const auto boxes = cp.decomposition.boxes_containing(x);
    ASSERT_FALSE(boxes.empty());
    const std::vector<double> pt{0.0, x[0], x[1], 0.0};
    for (int i : boxes) {
      const double w = cert.w[static_cast<std::size_t>(i)].evaluate(pt);
      const double v = cert.v[static_cast<std::size_t>(i)][0].evaluate(pt);
      EXPECT_GE(w, -1e-6);
      EXPECT_GE(w, v + 1.0 - 1e-6);
    }
  }
}

TEST(Extract, InfeasibleStatusThrows) {
  const auto cp = compile_di(0, {0, 0});
  ConicSolution sol;
  sol.status = SolveStatus::kInfeasible;
  sol.x = Eigen::VectorXd::Zero(cp.program.cols());
  EXPECT_THROW(extract_certificate(cp, sol), std::runtime_error);
}
