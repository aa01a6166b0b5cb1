#pragma once

#include <cstdint>
#include <limits>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "splitroa/model.h"
#include "splitroa/soscomp.h"

namespace splitroa {

class OutsideDomainError : public std::out_of_range {
 public:
  using std::out_of_range::out_of_range;
};

/// v(t, x) of the piece owning (t, x); on shared faces and time splits the
/// maximum over all adjacent pieces. Throws OutsideDomainError outside
/// X x [0, T].
double evaluate_certificate(const PiecewiseCertificate& cert, double t, std::span<const double> x);

struct RoaEstimate {
  /// The SDP optimal value (sum of the w moments); NaN when unknown.
  double objective = std::numeric_limits<double>::quiet_NaN();
  double mc_volume = 0.0;
  std::int64_t nsamples = 0;
  std::uint64_t seed = 0;
  /// Number of samples with v(0, x) >= 0.
  std::int64_t inside = 0;
  double domain_volume = 0.0;
};

/// Monte-Carlo volume of {x in X : v(0, x) >= 0} from uniform samples.
RoaEstimate mc_volume(const PiecewiseCertificate& cert, std::int64_t nsamples, std::uint64_t seed);

struct GridSlice {
  /// The two state axes spanned by the grid.
  int axis_a = 0;
  int axis_b = 1;
  /// Values of the remaining state coordinates (full-length, entries on the
  /// grid axes are ignored); empty means the box centers.
  std::vector<double> fixed;
};

/// CSV with header x1..xn,v: a row-major grid (axis_a outer, axis_b inner)
/// with `resolution` points per axis including both ends.
std::string export_grid(const PiecewiseCertificate& cert, double t, int resolution_a,
                        int resolution_b, const GridSlice& slice = {});

struct OracleOptions {
  /// Number of random piecewise-constant control signals tried.
  int budget = 64;
  int pieces = 50;
  int steps = 1000;
  double target_radius = 1e-3;
  /// Scan resolution of the switching time for scalar box inputs.
  int switch_scan = 400;
};

/// Sound inner test: true when some sampled control drives x0 to within
/// `target_radius` of X_T (all target constraints >= -radius^2) before time T
/// while staying in X, integrated by RK4. False is inconclusive.
bool oracle_certify_inner(const SystemSpec& sys, std::span<const double> x0, int budget,
                          std::uint64_t seed, const OracleOptions& options = {});

/// Draws uniform points of X until `count` of them are oracle-certified.
/// Gives up after `max_draws` draws.
std::vector<std::vector<double>> oracle_inner_points(const SystemSpec& sys, int count,
                                                     std::uint64_t seed, int budget,
                                                     int max_draws = 100000);

std::string certificate_to_json(const PiecewiseCertificate& cert);
PiecewiseCertificate certificate_from_json(const std::string& text);

}  // namespace splitroa
