#include "splitroa/model.h"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <stdexcept>

namespace splitroa {

int SystemSpec::dynamics_degree() const {
  int d = 0;
  for (const auto& f : dynamics) d = std::max(d, f.degree());
  return d;
}

bool SystemSpec::input_admissible(std::span<const double> u) const {
  std::vector<double> z(static_cast<std::size_t>(nvars()), 0.0);
  for (int j = 0; j < m; ++j) z[static_cast<std::size_t>(u_var(j))] = u[static_cast<std::size_t>(j)];
  for (const auto& g : input_constraints) {
    if (g.evaluate(z) < 0.0) return false;
  }
  return true;
}

void SystemSpec::validate() const {
  if (n < 1) throw std::invalid_argument("field 'n': state dimension must be >= 1");
  if (m < 0) throw std::invalid_argument("field 'm': input dimension must be >= 0");
  if (nvars() > kMaxVars) {
    throw std::invalid_argument("field 'n'/'m': too many variables (max " +
                                std::to_string(kMaxVars - 1) + " states + inputs)");
  }
  if (!(horizon > 0.0) || !std::isfinite(horizon)) {
    throw std::invalid_argument("field 'T': final time must be positive");
  }
  if (static_cast<int>(dynamics.size()) != n) {
    throw std::invalid_argument("field 'f': expected one polynomial per state");
  }
  if (static_cast<int>(state_box.size()) != n) {
    throw std::invalid_argument("field 'state_box': expected one interval per state");
  }
  for (const auto& iv : state_box) {
    if (!(iv.lo < iv.hi)) throw std::invalid_argument("field 'state_box': empty interval");
  }
  if (static_cast<int>(input_box.size()) != m) {
    throw std::invalid_argument("field 'input_box': expected one interval per input");
  }
  auto check_vars = [&](const std::vector<Polynomial>& ps, const char* field) {
    for (const auto& p : ps) {
      if (p.nvars() != nvars()) {
        throw std::invalid_argument(std::string("field '") + field +
                                    "': polynomial variable count must be 1 + n + m");
      }
    }
  };
  check_vars(dynamics, "f");
  check_vars(extra_state_constraints, "state_constraints");
  check_vars(input_constraints, "input_constraints");
  check_vars(target_constraints, "target_constraints");
}

Polynomial origin_target(int n, int m) {
  const int nv = 1 + n + m;
  Polynomial g(nv);
  for (int i = 0; i < n; ++i) {
    Monomial mono(nv);
    mono.set(1 + i, 2);
    g.add_term(mono, -1.0);
  }
  return g;
}

SystemSpec double_integrator() {
  SystemSpec s;
  s.name = "double-integrator";
  s.n = 2;
  s.m = 1;
  const int nv = s.nvars();
  s.dynamics = {Polynomial::variable(nv, s.x_var(1)), Polynomial::variable(nv, s.u_var(0))};
  s.state_box = {{-0.7, 0.7}, {-1.2, 1.2}};
  s.input_box = {{-1.0, 1.0}};
  Polynomial gu = Polynomial::constant(nv, 1.0);
  gu -= Polynomial::variable(nv, s.u_var(0)) * Polynomial::variable(nv, s.u_var(0));
  s.input_constraints = {gu};
  s.target_constraints = {origin_target(s.n, s.m)};
  s.horizon = 1.0;
  return s;
}

SystemSpec brockett_integrator() {
  SystemSpec s;
  s.name = "brockett";
  s.n = 3;
  s.m = 2;
  const int nv = s.nvars();
  auto var = [nv](int i) { return Polynomial::variable(nv, i); };
  const auto x1 = var(s.x_var(0));
  const auto x2 = var(s.x_var(1));
  const auto u1 = var(s.u_var(0));
  const auto u2 = var(s.u_var(1));
  s.dynamics = {u1, u2, u1 * x2 - u2 * x1};
  s.state_box = {{-1.0, 1.0}, {-1.0, 1.0}, {-1.0, 1.0}};
  s.input_box = {{-1.0, 1.0}, {-1.0, 1.0}};
  s.input_constraints = {Polynomial::constant(nv, 1.0) - u1 * u1 - u2 * u2};
  s.target_constraints = {origin_target(s.n, s.m)};
  s.horizon = 1.0;
  return s;
}

std::size_t SplitConfig::parameter_count() const {
  std::size_t c = time_splits.size();
  for (const auto& a : state_splits) c += a.size();
  return c;
}

std::size_t SplitLayout::size() const {
  std::size_t c = static_cast<std::size_t>(time_count);
  for (int a : axis_counts) c += static_cast<std::size_t>(a);
  return c;
}

SplitLayout layout_of(const SplitConfig& theta) {
  SplitLayout l;
  l.time_count = static_cast<int>(theta.time_splits.size());
  for (const auto& a : theta.state_splits) l.axis_counts.push_back(static_cast<int>(a.size()));
  return l;
}

std::vector<double> flatten_theta(const SplitConfig& theta) {
  std::vector<double> out;
  out.reserve(theta.parameter_count());
  std::vector<double> t = theta.time_splits;
  std::sort(t.begin(), t.end());
  out.insert(out.end(), t.begin(), t.end());
  for (auto axis : theta.state_splits) {
    std::sort(axis.begin(), axis.end());
    out.insert(out.end(), axis.begin(), axis.end());
  }
  return out;
}

SplitConfig unflatten_theta(const SplitLayout& layout, std::span<const double> values) {
  if (values.size() != layout.size()) {
    throw std::invalid_argument("unflatten_theta: vector length does not match layout");
  }
  SplitConfig c;
  std::size_t pos = 0;
  c.time_splits.assign(values.begin(), values.begin() + layout.time_count);
  std::sort(c.time_splits.begin(), c.time_splits.end());
  pos += static_cast<std::size_t>(layout.time_count);
  for (int count : layout.axis_counts) {
    std::vector<double> axis(values.begin() + static_cast<std::ptrdiff_t>(pos),
                             values.begin() + static_cast<std::ptrdiff_t>(pos) + count);
    std::sort(axis.begin(), axis.end());
    c.state_splits.push_back(std::move(axis));
    pos += static_cast<std::size_t>(count);
  }
  return c;
}

SplitConfig equidistant_splits(const SystemSpec& sys, int time_count,
                               const std::vector<int>& axis_counts) {
  if (static_cast<int>(axis_counts.size()) != sys.n) {
    throw std::invalid_argument("equidistant_splits: one count per state axis required");
  }
  SplitConfig c;
  for (int k = 1; k <= time_count; ++k) {
    c.time_splits.push_back(sys.horizon * k / (time_count + 1));
  }
  for (int j = 0; j < sys.n; ++j) {
    const auto& iv = sys.state_box[static_cast<std::size_t>(j)];
    const int cnt = axis_counts[static_cast<std::size_t>(j)];
    std::vector<double> axis;
    for (int k = 1; k <= cnt; ++k) axis.push_back(iv.lo + iv.width() * k / (cnt + 1));
    c.state_splits.push_back(std::move(axis));
  }
  return c;
}

ParameterBounds parameter_bounds(const SystemSpec& sys, const SplitLayout& layout) {
  ParameterBounds b;
  for (int k = 0; k < layout.time_count; ++k) {
    b.lo.push_back(0.0);
    b.hi.push_back(sys.horizon);
    b.group.push_back(-1);
  }
  for (std::size_t j = 0; j < layout.axis_counts.size(); ++j) {
    for (int k = 0; k < layout.axis_counts[j]; ++k) {
      b.lo.push_back(sys.state_box[j].lo);
      b.hi.push_back(sys.state_box[j].hi);
      b.group.push_back(static_cast<int>(j));
    }
  }
  return b;
}

namespace {

std::vector<Interval> split_interval(const Interval& full, const std::vector<double>& cuts,
                                     const char* what) {
  std::vector<Interval> out;
  double prev = full.lo;
  for (std::size_t k = 0; k < cuts.size(); ++k) {
    const double c = cuts[k];
    if (!(c > full.lo && c < full.hi)) {
      throw std::invalid_argument(std::string("build_decomposition: ") + what +
                                  " split outside the allowed range");
    }
    if (c < prev) {
      throw std::invalid_argument(std::string("build_decomposition: ") + what +
                                  " splits must be sorted ascending");
    }
    out.push_back({prev, c});
    prev = c;
  }
  out.push_back({prev, full.hi});
  return out;
}

}  // namespace

Decomposition build_decomposition(const SystemSpec& sys, const SplitConfig& theta) {
  if (static_cast<int>(theta.state_splits.size()) != sys.n) {
    throw std::invalid_argument("build_decomposition: one split list per state axis required");
  }
  Decomposition dec;
  dec.domain = sys.state_box;
  dec.horizon = sys.horizon;
  dec.intervals = split_interval({0.0, sys.horizon}, theta.time_splits, "time");

  std::vector<std::vector<Interval>> axis_cells;
  for (int j = 0; j < sys.n; ++j) {
    axis_cells.push_back(split_interval(sys.state_box[static_cast<std::size_t>(j)],
                                        theta.state_splits[static_cast<std::size_t>(j)],
                                        "state"));
    dec.cells_per_axis.push_back(static_cast<int>(axis_cells.back().size()));
  }

  // Row-major: the last axis varies fastest.
  std::vector<int> stride(static_cast<std::size_t>(sys.n), 1);
  for (int j = sys.n - 2; j >= 0; --j) {
    stride[static_cast<std::size_t>(j)] =
        stride[static_cast<std::size_t>(j) + 1] * dec.cells_per_axis[static_cast<std::size_t>(j) + 1];
  }
  const int total = stride[0] * dec.cells_per_axis[0];
  for (int idx = 0; idx < total; ++idx) {
    std::vector<int> multi(static_cast<std::size_t>(sys.n));
    Box box;
    int rem = idx;
    for (int j = 0; j < sys.n; ++j) {
      multi[static_cast<std::size_t>(j)] = rem / stride[static_cast<std::size_t>(j)];
      rem %= stride[static_cast<std::size_t>(j)];
      box.push_back(axis_cells[static_cast<std::size_t>(j)]
                              [static_cast<std::size_t>(multi[static_cast<std::size_t>(j)])]);
    }
    dec.boxes.push_back(std::move(box));
    dec.cell_index.push_back(std::move(multi));
  }
  for (int a = 0; a < total; ++a) {
    for (int j = 0; j < sys.n; ++j) {
      const auto& multi = dec.cell_index[static_cast<std::size_t>(a)];
      if (multi[static_cast<std::size_t>(j)] + 1 >= dec.cells_per_axis[static_cast<std::size_t>(j)]) {
        continue;
      }
      const int b = a + stride[static_cast<std::size_t>(j)];
      Box face = dec.boxes[static_cast<std::size_t>(a)];
      const double pos = face[static_cast<std::size_t>(j)].hi;
      face[static_cast<std::size_t>(j)] = {pos, pos};
      dec.neighbors.push_back({a, b, j, std::move(face)});
    }
  }
  return dec;
}

std::vector<int> Decomposition::boxes_containing(std::span<const double> x,
                                                 double slack) const {
  std::vector<int> out;
  for (std::size_t i = 0; i < boxes.size(); ++i) {
    bool inside = true;
    for (std::size_t j = 0; j < boxes[i].size(); ++j) {
      if (!boxes[i][j].contains(x[j], slack)) {
        inside = false;
        break;
      }
    }
    if (inside) out.push_back(static_cast<int>(i));
  }
  return out;
}

std::vector<int> Decomposition::intervals_containing(double t, double slack) const {
  std::vector<int> out;
  for (std::size_t k = 0; k < intervals.size(); ++k) {
    if (intervals[k].contains(t, slack)) out.push_back(static_cast<int>(k));
  }
  return out;
}

AssumptionReport check_assumptions(const SystemSpec& sys, const Decomposition& dec,
                                   int nsamples, std::uint64_t seed) {
  if (nsamples < 1) throw std::invalid_argument("check_assumptions: nsamples must be >= 1");
  AssumptionReport report;
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  auto sample_in = [&](const Interval& iv) { return iv.lo + iv.width() * unit(rng); };

  std::vector<double> z(static_cast<std::size_t>(sys.nvars()));
  std::vector<double> u(static_cast<std::size_t>(sys.m));
  for (std::size_t nb = 0; nb < dec.neighbors.size(); ++nb) {
    const auto& ngh = dec.neighbors[nb];
    const auto& hf = sys.dynamics[static_cast<std::size_t>(ngh.axis)];
    for (int k = 0; k < dec.num_intervals(); ++k) {
      BoundaryFlowCheck chk;
      chk.neighbor = static_cast<int>(nb);
      chk.interval = k;
      chk.min_abs = std::numeric_limits<double>::infinity();
      chk.min_value = std::numeric_limits<double>::infinity();
      chk.max_value = -std::numeric_limits<double>::infinity();
      int taken = 0;
      for (int s = 0; s < nsamples; ++s) {
        z[0] = sample_in(dec.intervals[static_cast<std::size_t>(k)]);
        for (int j = 0; j < sys.n; ++j) {
          z[static_cast<std::size_t>(sys.x_var(j))] = sample_in(ngh.face[static_cast<std::size_t>(j)]);
        }
        bool ok = false;
        for (int attempt = 0; attempt < 1000 && !ok; ++attempt) {
          for (int j = 0; j < sys.m; ++j) u[static_cast<std::size_t>(j)] = sample_in(sys.input_box[static_cast<std::size_t>(j)]);
          ok = sys.input_admissible(u);
        }
        if (!ok) continue;
        for (int j = 0; j < sys.m; ++j) z[static_cast<std::size_t>(sys.u_var(j))] = u[static_cast<std::size_t>(j)];
        const double v = hf.evaluate(z);
        chk.min_abs = std::min(chk.min_abs, std::abs(v));
        chk.min_value = std::min(chk.min_value, v);
        chk.max_value = std::max(chk.max_value, v);
        ++taken;
      }
      if (taken > 0) {
        const double scale = std::max(std::abs(chk.min_value), std::abs(chk.max_value));
        const bool sign_change = chk.min_value < 0.0 && chk.max_value > 0.0;
        chk.flagged = sign_change || chk.min_abs <= 1e-6 * (1.0 + scale);
      }
      report.any_flagged = report.any_flagged || chk.flagged;
      report.boundaries.push_back(chk);
    }
  }
  // Box descriptions always include g_p = R_p^2 - (x_p - c_p)^2 for every axis.
  report.box_quadratics_present.assign(dec.boxes.size(), true);
  return report;
}

}  // namespace splitroa
