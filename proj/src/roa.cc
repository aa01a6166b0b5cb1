#include "splitroa/roa.h"

#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>

#include "json.hpp"
#include "splitroa/csv.h"

namespace splitroa {
namespace {

constexpr double kMembershipSlack = 1e-12;

int state_dim(const PiecewiseCertificate& cert) {
  return static_cast<int>(cert.decomposition.domain.size());
}

std::vector<double> ambient_point(const PiecewiseCertificate& cert, double t,
                                  std::span<const double> x) {
  std::vector<double> p(static_cast<std::size_t>(cert.nvars), 0.0);
  p[0] = t;
  std::copy(x.begin(), x.end(), p.begin() + 1);
  return p;
}

std::vector<double> uniform_point(const Box& box, std::mt19937_64& rng) {
  std::vector<double> x(box.size());
  for (std::size_t i = 0; i < box.size(); ++i) {
    std::uniform_real_distribution<double> dist(box[i].lo, box[i].hi);
    x[i] = dist(rng);
  }
  return x;
}

// Piecewise-constant control on [0, T] with `values.size()` equal pieces.
struct Control {
  double horizon = 1.0;
  std::vector<double> breaks;  // interior switching times, increasing
  std::vector<std::vector<double>> values;

  const std::vector<double>& at(double t) const {
    std::size_t k = 0;
    while (k < breaks.size() && t >= breaks[k]) ++k;
    return values[k];
  }
};

class Simulator {
 public:
  Simulator(const SystemSpec& sys, const OracleOptions& options)
      : sys_(sys), options_(options), radius2_(options.target_radius * options.target_radius) {}

  // Smallest target deficit max_j(-g_j) seen while the trajectory stays in X;
  // <= radius^2 means the target was reached.
  double run(std::span<const double> x0, const Control& u) const {
    std::vector<double> x(x0.begin(), x0.end());
    if (!in_state_set(x)) return std::numeric_limits<double>::infinity();
    double best = deficit(0.0, x);
    if (best <= radius2_) return best;
    const double h = sys_.horizon / options_.steps;
    for (int s = 0; s < options_.steps; ++s) {
      double t0 = s * h;
      const double t1 = (s + 1) * h;
      for (double b : u.breaks) {
        if (b > t0 && b < t1) {
          rk4(t0, b - t0, x, u.at(t0));
          t0 = b;
        }
      }
      rk4(t0, t1 - t0, x, u.at(t0));
      if (!in_state_set(x)) return best;
      best = std::min(best, deficit(t1, x));
      if (best <= radius2_) return best;
    }
    return best;
  }

  double radius2() const { return radius2_; }

 private:
  std::vector<double> rhs(double t, std::span<const double> x, const std::vector<double>& u) const {
    point_[0] = t;
    std::copy(x.begin(), x.end(), point_.begin() + 1);
    std::copy(u.begin(), u.end(), point_.begin() + 1 + sys_.n);
    std::vector<double> f(static_cast<std::size_t>(sys_.n));
    for (int i = 0; i < sys_.n; ++i) f[static_cast<std::size_t>(i)] = sys_.dynamics[static_cast<std::size_t>(i)].evaluate(point_);
    return f;
  }

  void rk4(double t, double h, std::vector<double>& x, const std::vector<double>& u) const {
    if (h <= 0.0) return;
    const std::size_t n = x.size();
    std::vector<double> tmp(n);
    const auto k1 = rhs(t, x, u);
    for (std::size_t i = 0; i < n; ++i) tmp[i] = x[i] + 0.5 * h * k1[i];
    const auto k2 = rhs(t + 0.5 * h, tmp, u);
    for (std::size_t i = 0; i < n; ++i) tmp[i] = x[i] + 0.5 * h * k2[i];
    const auto k3 = rhs(t + 0.5 * h, tmp, u);
    for (std::size_t i = 0; i < n; ++i) tmp[i] = x[i] + h * k3[i];
    const auto k4 = rhs(t + h, tmp, u);
    for (std::size_t i = 0; i < n; ++i) x[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
  }

  bool in_state_set(std::span<const double> x) const {
    for (int i = 0; i < sys_.n; ++i) {
      if (!std::isfinite(x[static_cast<std::size_t>(i)]) ||
          !sys_.state_box[static_cast<std::size_t>(i)].contains(x[static_cast<std::size_t>(i)], kMembershipSlack)) {
        return false;
      }
    }
    if (sys_.extra_state_constraints.empty()) return true;
    std::fill(point_.begin(), point_.end(), 0.0);
    std::copy(x.begin(), x.end(), point_.begin() + 1);
    for (const auto& g : sys_.extra_state_constraints) {
      if (g.evaluate(point_) < -kMembershipSlack) return false;
    }
    return true;
  }

  double deficit(double t, std::span<const double> x) const {
    std::fill(point_.begin(), point_.end(), 0.0);
    point_[0] = t;
    std::copy(x.begin(), x.end(), point_.begin() + 1);
    double d = -std::numeric_limits<double>::infinity();
    for (const auto& g : sys_.target_constraints) d = std::max(d, -g.evaluate(point_));
    return d;
  }

  const SystemSpec& sys_;
  OracleOptions options_;
  double radius2_;
  mutable std::vector<double> point_ = std::vector<double>(static_cast<std::size_t>(sys_.nvars()), 0.0);
};

std::vector<double> sample_input(const SystemSpec& sys, std::mt19937_64& rng) {
  for (int attempt = 0; attempt < 1000; ++attempt) {
    auto u = uniform_point(sys.input_box, rng);
    if (sys.input_admissible(u)) return u;
  }
  std::vector<double> u(static_cast<std::size_t>(sys.m));
  for (int j = 0; j < sys.m; ++j) u[static_cast<std::size_t>(j)] = sys.input_box[static_cast<std::size_t>(j)].center();
  return u;
}

Control bang_bang(double horizon, double first, double second, double switch_time) {
  Control c;
  c.horizon = horizon;
  c.breaks = {switch_time};
  c.values = {{first}, {second}};
  return c;
}

bool bang_bang_search(const SystemSpec& sys, const Simulator& sim, std::span<const double> x0,
                      const OracleOptions& options) {
  const double lo = sys.input_box[0].lo;
  const double hi = sys.input_box[0].hi;
  const std::vector<double> vlo{lo};
  const std::vector<double> vhi{hi};
  if (!sys.input_admissible(vlo) || !sys.input_admissible(vhi)) return false;
  const double T = sys.horizon;
  const int scan = std::max(options.switch_scan, 2);
  for (const auto& [first, second] : {std::pair{hi, lo}, std::pair{lo, hi}}) {
    double best = std::numeric_limits<double>::infinity();
    double best_ts = 0.0;
    for (int k = 0; k <= scan; ++k) {
      const double ts = T * k / scan;
      const double d = sim.run(x0, bang_bang(T, first, second, ts));
      if (d <= sim.radius2()) return true;
      if (d < best) {
        best = d;
        best_ts = ts;
      }
    }
    if (!std::isfinite(best)) continue;
    double a = std::max(0.0, best_ts - T / scan);
    double b = std::min(T, best_ts + T / scan);
    const double phi = 0.5 * (std::sqrt(5.0) - 1.0);
    double c = b - phi * (b - a);
    double d = a + phi * (b - a);
    double fc = sim.run(x0, bang_bang(T, first, second, c));
    double fd = sim.run(x0, bang_bang(T, first, second, d));
    for (int it = 0; it < 40; ++it) {
      if (fc <= sim.radius2() || fd <= sim.radius2()) return true;
      if (fc < fd) {
        b = d;
        d = c;
        fd = fc;
        c = b - phi * (b - a);
        fc = sim.run(x0, bang_bang(T, first, second, c));
      } else {
        a = c;
        c = d;
        fc = fd;
        d = a + phi * (b - a);
        fd = sim.run(x0, bang_bang(T, first, second, d));
      }
    }
    if (fc <= sim.radius2() || fd <= sim.radius2()) return true;
  }
  return false;
}

nlohmann::json interval_json(const Interval& iv) { return nlohmann::json::array({iv.lo, iv.hi}); }

Interval interval_from(const nlohmann::json& j) { return {j.at(0).get<double>(), j.at(1).get<double>()}; }

nlohmann::json box_json(const Box& box) {
  nlohmann::json j = nlohmann::json::array();
  for (const auto& iv : box) j.push_back(interval_json(iv));
  return j;
}

Box box_from(const nlohmann::json& j) {
  Box box;
  for (const auto& e : j) box.push_back(interval_from(e));
  return box;
}

nlohmann::json polynomial_json(const Polynomial& p) {
  nlohmann::json terms = nlohmann::json::array();
  for (const auto& [mono, coeff] : p.terms()) {
    terms.push_back({{"exponents", mono.exponents()}, {"coeff", coeff}});
  }
  return {{"nvars", p.nvars()}, {"terms", terms}};
}

Polynomial polynomial_from(const nlohmann::json& j) {
  Polynomial p(j.at("nvars").get<int>());
  for (const auto& term : j.at("terms")) {
    const auto exps = term.at("exponents").get<std::vector<int>>();
    p.add_term(Monomial(std::span<const int>(exps)), term.at("coeff").get<double>());
  }
  return p;
}

}  // namespace

double evaluate_certificate(const PiecewiseCertificate& cert, double t, std::span<const double> x) {
  const auto& dec = cert.decomposition;
  if (static_cast<int>(x.size()) != state_dim(cert)) {
    throw std::invalid_argument("evaluate_certificate: state dimension mismatch");
  }
  const double tslack = kMembershipSlack * std::max(1.0, dec.horizon);
  const auto intervals = dec.intervals_containing(t, tslack);
  const auto boxes = dec.boxes_containing(x, kMembershipSlack);
  if (intervals.empty() || boxes.empty()) {
    throw OutsideDomainError("evaluate_certificate: point outside X x [0, T]");
  }
  const auto p = ambient_point(cert, t, x);
  double best = -std::numeric_limits<double>::infinity();
  for (int b : boxes) {
    for (int k : intervals) {
      best = std::max(best, cert.v[static_cast<std::size_t>(b)][static_cast<std::size_t>(k)].evaluate(p));
    }
  }
  return best;
}

RoaEstimate mc_volume(const PiecewiseCertificate& cert, std::int64_t nsamples, std::uint64_t seed) {
  if (nsamples <= 0) throw std::invalid_argument("mc_volume: nsamples must be positive");
  RoaEstimate est;
  est.nsamples = nsamples;
  est.seed = seed;
  est.domain_volume = box_volume(cert.decomposition.domain);
  std::mt19937_64 rng(seed);
  for (std::int64_t s = 0; s < nsamples; ++s) {
    const auto x = uniform_point(cert.decomposition.domain, rng);
    if (evaluate_certificate(cert, 0.0, x) >= 0.0) ++est.inside;
  }
  est.mc_volume = est.domain_volume * static_cast<double>(est.inside) / static_cast<double>(nsamples);
  return est;
}

std::string export_grid(const PiecewiseCertificate& cert, double t, int resolution_a,
                        int resolution_b, const GridSlice& slice) {
  const int n = state_dim(cert);
  if (resolution_a < 2 || resolution_b < 2) {
    throw std::invalid_argument("export_grid: resolution must be at least 2");
  }
  if (slice.axis_a < 0 || slice.axis_a >= n || slice.axis_b < 0 || slice.axis_b >= n ||
      slice.axis_a == slice.axis_b) {
    throw std::invalid_argument("export_grid: invalid slice axes");
  }
  const Box& dom = cert.decomposition.domain;
  std::vector<double> x(static_cast<std::size_t>(n));
  if (slice.fixed.empty()) {
    for (int i = 0; i < n; ++i) x[static_cast<std::size_t>(i)] = dom[static_cast<std::size_t>(i)].center();
  } else if (static_cast<int>(slice.fixed.size()) == n) {
    x = slice.fixed;
  } else {
    throw std::invalid_argument("export_grid: fixed coordinates must have length n");
  }
  std::vector<std::string> header;
  for (int i = 0; i < n; ++i) header.push_back("x" + std::to_string(i + 1));
  header.emplace_back("v");
  std::string out = csv_line(header) + "\n";
  const auto& ia = dom[static_cast<std::size_t>(slice.axis_a)];
  const auto& ib = dom[static_cast<std::size_t>(slice.axis_b)];
  for (int a = 0; a < resolution_a; ++a) {
    x[static_cast<std::size_t>(slice.axis_a)] =
        a + 1 == resolution_a ? ia.hi : ia.lo + ia.width() * a / (resolution_a - 1);
    for (int b = 0; b < resolution_b; ++b) {
      x[static_cast<std::size_t>(slice.axis_b)] =
          b + 1 == resolution_b ? ib.hi : ib.lo + ib.width() * b / (resolution_b - 1);
      std::vector<std::string> row;
      for (double xi : x) row.push_back(format_real(xi));
      row.push_back(format_real(evaluate_certificate(cert, t, x)));
      out += csv_line(row) + "\n";
    }
  }
  return out;
}

bool oracle_certify_inner(const SystemSpec& sys, std::span<const double> x0, int budget,
                          std::uint64_t seed, const OracleOptions& options) {
  if (static_cast<int>(x0.size()) != sys.n) {
    throw std::invalid_argument("oracle_certify_inner: state dimension mismatch");
  }
  if (options.steps < 1 || options.pieces < 1) {
    throw std::invalid_argument("oracle_certify_inner: steps and pieces must be positive");
  }
  const Simulator sim(sys, options);
  if (sys.m == 1 && bang_bang_search(sys, sim, x0, options)) return true;
  std::mt19937_64 rng(seed);
  const double T = sys.horizon;
  for (int trial = 0; trial < budget; ++trial) {
    Control c;
    c.horizon = T;
    for (int k = 1; k < options.pieces; ++k) c.breaks.push_back(T * k / options.pieces);
    for (int k = 0; k < options.pieces; ++k) c.values.push_back(sample_input(sys, rng));
    if (sim.run(x0, c) <= sim.radius2()) return true;
  }
  return false;
}

std::vector<std::vector<double>> oracle_inner_points(const SystemSpec& sys, int count,
                                                     std::uint64_t seed, int budget,
                                                     int max_draws) {
  std::mt19937_64 rng(seed);
  std::vector<std::vector<double>> points;
  for (int draw = 0; draw < max_draws && static_cast<int>(points.size()) < count; ++draw) {
    auto x = uniform_point(sys.state_box, rng);
    if (oracle_certify_inner(sys, x, budget, rng())) points.push_back(std::move(x));
  }
  return points;
}

std::string certificate_to_json(const PiecewiseCertificate& cert) {
  const auto& dec = cert.decomposition;
  nlohmann::json j;
  j["degree"] = cert.degree;
  j["nvars"] = cert.nvars;
  j["horizon"] = dec.horizon;
  j["domain"] = box_json(dec.domain);
  j["cells_per_axis"] = dec.cells_per_axis;
  j["boxes"] = nlohmann::json::array();
  for (const auto& b : dec.boxes) j["boxes"].push_back(box_json(b));
  j["cell_index"] = dec.cell_index;
  j["intervals"] = nlohmann::json::array();
  for (const auto& iv : dec.intervals) j["intervals"].push_back(interval_json(iv));
  j["neighbors"] = nlohmann::json::array();
  for (const auto& nb : dec.neighbors) {
    j["neighbors"].push_back({{"a", nb.a}, {"b", nb.b}, {"axis", nb.axis}, {"face", box_json(nb.face)}});
  }
  j["v"] = nlohmann::json::array();
  for (const auto& per_box : cert.v) {
    nlohmann::json row = nlohmann::json::array();
    for (const auto& p : per_box) row.push_back(polynomial_json(p));
    j["v"].push_back(row);
  }
  j["w"] = nlohmann::json::array();
  for (const auto& p : cert.w) j["w"].push_back(polynomial_json(p));
  return j.dump(1);
}

PiecewiseCertificate certificate_from_json(const std::string& text) {
  const auto j = nlohmann::json::parse(text);
  PiecewiseCertificate cert;
  cert.degree = j.at("degree").get<int>();
  cert.nvars = j.at("nvars").get<int>();
  auto& dec = cert.decomposition;
  dec.horizon = j.at("horizon").get<double>();
  dec.domain = box_from(j.at("domain"));
  dec.cells_per_axis = j.at("cells_per_axis").get<std::vector<int>>();
  for (const auto& b : j.at("boxes")) dec.boxes.push_back(box_from(b));
  dec.cell_index = j.at("cell_index").get<std::vector<std::vector<int>>>();
  for (const auto& iv : j.at("intervals")) dec.intervals.push_back(interval_from(iv));
  for (const auto& nb : j.at("neighbors")) {
    dec.neighbors.push_back({nb.at("a").get<int>(), nb.at("b").get<int>(), nb.at("axis").get<int>(),
                             box_from(nb.at("face"))});
  }
  for (const auto& row : j.at("v")) {
    std::vector<Polynomial> per_box;
    for (const auto& p : row) per_box.push_back(polynomial_from(p));
    cert.v.push_back(std::move(per_box));
  }
  for (const auto& p : j.at("w")) cert.w.push_back(polynomial_from(p));
  if (cert.v.size() != dec.boxes.size() || cert.w.size() != dec.boxes.size()) {
    throw std::runtime_error("certificate_from_json: polynomial count does not match the boxes");
  }
  for (const auto& per_box : cert.v) {
    if (per_box.size() != dec.intervals.size()) {
      throw std::runtime_error("certificate_from_json: polynomial count does not match the intervals");
    }
  }
  return cert;
}

}  // namespace splitroa
