#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "splitroa/poly.h"

namespace splitroa {

/// Polynomial control system with box state space, semialgebraic input and
/// target sets and a finite horizon. All polynomials live in the ambient
/// variable space (t, x_1..x_n, u_1..u_m).
struct SystemSpec {
  std::string name;
  int n = 0;
  int m = 0;
  std::vector<Polynomial> dynamics;
  Box state_box;
  /// Additional g^X_j(x) >= 0 beyond the box.
  std::vector<Polynomial> extra_state_constraints;
  /// Bounding box of U; used for sampling only.
  Box input_box;
  std::vector<Polynomial> input_constraints;
  std::vector<Polynomial> target_constraints;
  double horizon = 0.0;

  int nvars() const { return 1 + n + m; }
  static constexpr int t_var() { return 0; }
  int x_var(int i) const { return 1 + i; }
  int u_var(int j) const { return 1 + n + j; }
  /// Largest total degree among the dynamics components.
  int dynamics_degree() const;
  bool input_admissible(std::span<const double> u) const;

  /// Throws std::invalid_argument naming the offending field.
  void validate() const;
};

/// x1' = x2, x2' = u on [-0.7,0.7] x [-1.2,1.2], |u| <= 1, X_T = {0}, T = 1.
SystemSpec double_integrator();

/// x1' = u1, x2' = u2, x3' = u1 x2 - u2 x1 on the unit cube, |u|_2 <= 1,
/// X_T = {0}, T = 1.
SystemSpec brockett_integrator();

/// The target set {0} encoded as -|x|^2 >= 0.
Polynomial origin_target(int n, int m);

/// Interior split positions: time splits in (0, T) and per-axis state splits
/// inside the state box.
struct SplitConfig {
  std::vector<double> time_splits;
  std::vector<std::vector<double>> state_splits;

  std::size_t parameter_count() const;
  friend bool operator==(const SplitConfig&, const SplitConfig&) = default;
};

/// Shape of a SplitConfig; fixes the layout of the flattened parameter vector
/// (time splits first, then axes in order).
struct SplitLayout {
  int time_count = 0;
  std::vector<int> axis_counts;

  std::size_t size() const;
  friend bool operator==(const SplitLayout&, const SplitLayout&) = default;
};

SplitLayout layout_of(const SplitConfig& theta);
std::vector<double> flatten_theta(const SplitConfig& theta);
/// Re-sorts each group, so unordered input within an axis is accepted.
SplitConfig unflatten_theta(const SplitLayout& layout, std::span<const double> values);

/// Evenly spaced splits: `time_count` inside (0, T), `axis_counts[j]` inside
/// axis j of the state box.
SplitConfig equidistant_splits(const SystemSpec& sys, int time_count,
                               const std::vector<int>& axis_counts);

/// Group bounds of each flattened entry: [lo, hi] of the time horizon or of the
/// owning axis, plus the group id (-1 for time, axis index otherwise).
struct ParameterBounds {
  std::vector<double> lo;
  std::vector<double> hi;
  std::vector<int> group;
};
ParameterBounds parameter_bounds(const SystemSpec& sys, const SplitLayout& layout);

struct Neighbor {
  int a = 0;
  int b = 0;
  int axis = 0;
  /// Shared face; zero width on `axis`.
  Box face;
};

/// Grid decomposition of X x [0, T]. Boxes are indexed row-major over axes
/// (the last axis varies fastest); `b` is always on the positive side of `a`.
struct Decomposition {
  Box domain;
  double horizon = 0.0;
  std::vector<int> cells_per_axis;
  std::vector<Box> boxes;
  std::vector<std::vector<int>> cell_index;
  std::vector<Interval> intervals;
  std::vector<Neighbor> neighbors;

  int num_boxes() const { return static_cast<int>(boxes.size()); }
  int num_intervals() const { return static_cast<int>(intervals.size()); }
  /// Boxes whose closure contains x (several on shared faces).
  std::vector<int> boxes_containing(std::span<const double> x, double slack = 0.0) const;
  std::vector<int> intervals_containing(double t, double slack = 0.0) const;
};

Decomposition build_decomposition(const SystemSpec& sys, const SplitConfig& theta);

struct BoundaryFlowCheck {
  int neighbor = 0;
  int interval = 0;
  double min_abs = 0.0;
  double min_value = 0.0;
  double max_value = 0.0;
  bool flagged = false;
};

struct AssumptionReport {
  std::vector<BoundaryFlowCheck> boundaries;
  /// Per box: the description carries the per-axis quadratic bounds.
  std::vector<bool> box_quadratics_present;
  bool any_flagged = false;
};

/// Samples each boundary x interval x U and reports min |h^T f|. A boundary is
/// flagged when h^T f changes sign over the samples or nearly vanishes.
AssumptionReport check_assumptions(const SystemSpec& sys, const Decomposition& dec,
                                   int nsamples, std::uint64_t seed);

}  // namespace splitroa
