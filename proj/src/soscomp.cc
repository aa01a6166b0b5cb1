#include "splitroa/soscomp.h"

#include <algorithm>
#include <cmath>
#include <map>
#include <stdexcept>

namespace splitroa {

namespace {

constexpr double kSqrt2 = 1.4142135623730951;

int even_floor(int v) { return v - (((v % 2) + 2) % 2); }

AxisFrame make_frame(const Interval& piece, double domain_half_width, double min_fraction) {
  AxisFrame f;
  f.center = piece.center();
  const double half = 0.5 * piece.width();
  f.scale = std::max(half, min_fraction * domain_half_width);
  f.rho = half / f.scale;
  return f;
}

// A fixed, topology-only geometry whose frames share no special values; the
// union of its structural nonzeros with those of the actual geometry gives a
// pattern that does not depend on where the splits sit.
LocalGeometry generic_geometry(int num_boxes, int n, int num_intervals) {
  LocalGeometry g;
  g.boxes.resize(static_cast<std::size_t>(num_boxes));
  for (int i = 0; i < num_boxes; ++i) {
    for (int p = 0; p < n; ++p) {
      AxisFrame f;
      f.center = 0.1372 + 0.0731 * (i + 1) + 0.0519 * (p + 1);
      f.scale = 0.6113 + 0.0137 * i + 0.0111 * p;
      f.rho = 0.9371 - 0.0013 * p - 0.0007 * i;
      g.boxes[static_cast<std::size_t>(i)].push_back(f);
    }
  }
  for (int k = 0; k < num_intervals; ++k) {
    AxisFrame f;
    f.center = 0.4129 + 0.0713 * k;
    f.scale = 0.5347 + 0.0173 * k;
    f.rho = 0.9733 - 0.0011 * k;
    g.intervals.push_back(f);
  }
  return g;
}

struct Triplet {
  int row;
  int col;
  double value;
};

// Geometry-independent skeleton of one constraint.
struct ConstraintPlan {
  Family family = Family::kFlow;
  int box = -1;
  int interval = -1;
  int neighbor = -1;
  int sign = 1;
  int budget = 0;
  VarMask mask{};
  std::vector<int> grams;
};

using RowKeyMap = std::map<Monomial, int, GradedLexLess>;

struct Accumulator {
  // Per constraint, monomial -> list of (col, value), plus constant terms.
  std::vector<std::map<Monomial, std::vector<std::pair<int, double>>, GradedLexLess>> rows;
  std::vector<std::map<Monomial, double, GradedLexLess>> rhs;

  explicit Accumulator(std::size_t nconstraints) : rows(nconstraints), rhs(nconstraints) {}

  void add(int cid, int col, const Polynomial& p, double factor) {
    auto& r = rows[static_cast<std::size_t>(cid)];
    for (const auto& [m, c] : p.terms()) r[m].emplace_back(col, factor * c);
  }
  void add_constant(int cid, const Monomial& m, double value) {
    rhs[static_cast<std::size_t>(cid)][m] += value;
    rows[static_cast<std::size_t>(cid)][m];
  }
};

class Compiler {
 public:
  Compiler(const SystemSpec& sys, const Decomposition& dec, int d)
      : sys_(sys), dec_(dec), d_(d), nv_(sys.nvars()) {}

  void plan(CompiledProgram& cp);
  void fill(const CompiledProgram& cp, const LocalGeometry& geo, Accumulator& acc,
            std::vector<std::vector<Polynomial>>* descriptions) const;

  const std::vector<ConstraintPlan>& plans() const { return plans_; }

 private:
  VarMask mask_tx() const;
  VarMask mask_x() const;
  VarMask mask_all() const;

  int add_constraint(CompiledProgram& cp, ConstraintPlan plan, const std::vector<int>& degrees,
                     int flow_degree);

  std::vector<AffineMap> frame_maps(const LocalGeometry& geo, int box, int interval) const;
  std::vector<Polynomial> box_descriptions(const LocalGeometry& geo, int box, int skip_axis,
                                           const std::vector<AffineMap>& maps,
                                           int fixed_var, double fixed_value) const;

  void emit_grams(const CompiledProgram& cp, int cid, const std::vector<Polynomial>& descriptions,
                  const Polynomial* flow_data, Accumulator& acc) const;
  void emit_block(const PolyBlock& block, int cid, double factor,
                  const std::vector<AffineMap>* restrict_maps, Accumulator& acc) const;

  const SystemSpec& sys_;
  const Decomposition& dec_;
  int d_;
  int nv_;
  int col_ = 0;
  std::vector<ConstraintPlan> plans_;
};

VarMask Compiler::mask_tx() const {
  VarMask m{};
  for (int v = 0; v <= sys_.n; ++v) m[static_cast<std::size_t>(v)] = true;
  return m;
}

VarMask Compiler::mask_x() const {
  VarMask m{};
  for (int i = 0; i < sys_.n; ++i) m[static_cast<std::size_t>(sys_.x_var(i))] = true;
  return m;
}

VarMask Compiler::mask_all() const {
  VarMask m{};
  for (int v = 0; v < nv_; ++v) m[static_cast<std::size_t>(v)] = true;
  return m;
}

int Compiler::add_constraint(CompiledProgram& cp, ConstraintPlan plan,
                             const std::vector<int>& degrees, int flow_degree) {
  const int cid = static_cast<int>(plans_.size());
  auto add_gram = [&](int multiplies, int gram_degree) {
    GramBlock g;
    g.constraint = cid;
    g.multiplies = multiplies;
    g.basis = monomial_basis(nv_, plan.mask, gram_degree / 2);
    g.col_offset = col_;
    col_ += svec_size(static_cast<int>(g.basis.size()));
    plan.grams.push_back(static_cast<int>(cp.grams.size()));
    cp.grams.push_back(std::move(g));
  };
  add_gram(-1, plan.budget);
  auto multiplier_degree = [&](int dg) {
    const int md = even_floor(plan.budget - dg);
    if (md < 0) {
      throw std::invalid_argument("compile: degree d = " + std::to_string(d_) +
                                  " too small for a multiplier of a degree-" +
                                  std::to_string(dg) + " term (" + to_string(plan.family) +
                                  " constraint)");
    }
    return md;
  };
  if (flow_degree >= 0) add_gram(-2, multiplier_degree(flow_degree));
  for (std::size_t j = 0; j < degrees.size(); ++j) {
    add_gram(static_cast<int>(j), multiplier_degree(degrees[j]));
  }
  plans_.push_back(std::move(plan));
  return cid;
}

void Compiler::plan(CompiledProgram& cp) {
  const int I = dec_.num_boxes();
  const int K = dec_.num_intervals();
  const int n = sys_.n;

  for (int i = 0; i < I; ++i) {
    for (int k = 0; k < K; ++k) {
      PolyBlock b;
      b.box = i;
      b.interval = k;
      b.basis = monomial_basis(nv_, mask_tx(), d_);
      b.col_offset = col_;
      col_ += static_cast<int>(b.basis.size());
      cp.v_blocks.push_back(std::move(b));
    }
  }
  for (int i = 0; i < I; ++i) {
    PolyBlock b;
    b.box = i;
    b.basis = monomial_basis(nv_, mask_x(), d_);
    b.col_offset = col_;
    col_ += static_cast<int>(b.basis.size());
    cp.w_blocks.push_back(std::move(b));
  }

  std::vector<int> box_deg(static_cast<std::size_t>(n), 2);
  for (const auto& g : sys_.extra_state_constraints) box_deg.push_back(g.degree());
  std::vector<int> input_deg;
  for (const auto& g : sys_.input_constraints) input_deg.push_back(g.degree());

  // Flow constraints.
  {
    std::vector<int> degs{2};
    degs.insert(degs.end(), box_deg.begin(), box_deg.end());
    degs.insert(degs.end(), input_deg.begin(), input_deg.end());
    for (int i = 0; i < I; ++i) {
      for (int k = 0; k < K; ++k) {
        ConstraintPlan p;
        p.family = Family::kFlow;
        p.box = i;
        p.interval = k;
        p.budget = even_floor(d_ + sys_.dynamics_degree());
        p.mask = mask_all();
        add_constraint(cp, p, degs, -1);
      }
    }
  }
  auto state_only = [&](Family fam, int i, int k, const std::vector<int>& degs) {
    ConstraintPlan p;
    p.family = fam;
    p.box = i;
    p.interval = k;
    p.budget = d_;
    p.mask = mask_x();
    add_constraint(cp, p, degs, -1);
  };
  for (int i = 0; i < I; ++i) state_only(Family::kInitial, i, 0, box_deg);
  {
    std::vector<int> degs;
    for (const auto& g : sys_.target_constraints) degs.push_back(g.degree());
    degs.insert(degs.end(), box_deg.begin(), box_deg.end());
    for (int i = 0; i < I; ++i) state_only(Family::kFinal, i, K - 1, degs);
  }
  for (int i = 0; i < I; ++i) state_only(Family::kBound, i, -1, box_deg);
  for (int i = 0; i < I; ++i) {
    for (int k = 0; k + 1 < K; ++k) state_only(Family::kTimeInterface, i, k, box_deg);
  }
  for (int nb = 0; nb < static_cast<int>(dec_.neighbors.size()); ++nb) {
    const int axis = dec_.neighbors[static_cast<std::size_t>(nb)].axis;
    std::vector<int> degs{2};
    for (int p = 0; p < n; ++p) {
      if (p != axis) degs.push_back(2);
    }
    for (const auto& g : sys_.extra_state_constraints) degs.push_back(g.degree());
    degs.insert(degs.end(), input_deg.begin(), input_deg.end());
    const int flow_deg = sys_.dynamics[static_cast<std::size_t>(axis)].degree();
    for (int k = 0; k < K; ++k) {
      for (int sign : {1, -1}) {
        ConstraintPlan p;
        p.family = Family::kFaceInterface;
        p.neighbor = nb;
        p.interval = k;
        p.sign = sign;
        p.budget = d_;
        p.mask = mask_all();
        p.mask[static_cast<std::size_t>(sys_.x_var(axis))] = false;
        add_constraint(cp, p, degs, flow_deg);
      }
    }
  }
}

std::vector<AffineMap> Compiler::frame_maps(const LocalGeometry& geo, int box, int interval) const {
  std::vector<AffineMap> maps(static_cast<std::size_t>(nv_));
  if (interval >= 0) {
    const auto& tf = geo.intervals[static_cast<std::size_t>(interval)];
    maps[0] = {tf.center, tf.scale};
  }
  for (int p = 0; p < sys_.n; ++p) {
    const auto& f = geo.boxes[static_cast<std::size_t>(box)][static_cast<std::size_t>(p)];
    maps[static_cast<std::size_t>(sys_.x_var(p))] = {f.center, f.scale};
  }
  return maps;
}

std::vector<Polynomial> Compiler::box_descriptions(const LocalGeometry& geo, int box,
                                                   int skip_axis,
                                                   const std::vector<AffineMap>& maps,
                                                   int fixed_var, double fixed_value) const {
  std::vector<Polynomial> out;
  for (int p = 0; p < sys_.n; ++p) {
    if (p == skip_axis) continue;
    const double rho = geo.boxes[static_cast<std::size_t>(box)][static_cast<std::size_t>(p)].rho;
    const Polynomial y = Polynomial::variable(nv_, sys_.x_var(p));
    out.push_back(Polynomial::constant(nv_, rho * rho) - y * y);
  }
  for (const auto& g : sys_.extra_state_constraints) {
    Polynomial local = g.substitute_affine(maps);
    if (fixed_var >= 0) local = local.fix_variable(fixed_var, fixed_value);
    out.push_back(std::move(local));
  }
  return out;
}

void Compiler::emit_block(const PolyBlock& block, int cid, double factor,
                          const std::vector<AffineMap>* restrict_maps, Accumulator& acc) const {
  for (std::size_t a = 0; a < block.basis.size(); ++a) {
    Polynomial p = Polynomial::monomial(block.basis[a]);
    if (restrict_maps != nullptr) p = p.substitute_affine(*restrict_maps);
    acc.add(cid, block.col_offset + static_cast<int>(a), p, factor);
  }
}

void Compiler::emit_grams(const CompiledProgram& cp, int cid,
                          const std::vector<Polynomial>& descriptions, const Polynomial* flow_data,
                          Accumulator& acc) const {
  for (int gi : plans_[static_cast<std::size_t>(cid)].grams) {
    const GramBlock& g = cp.grams[static_cast<std::size_t>(gi)];
    const Polynomial* data = nullptr;
    if (g.multiplies == -2) data = flow_data;
    else if (g.multiplies >= 0) data = &descriptions[static_cast<std::size_t>(g.multiplies)];
    const int side = static_cast<int>(g.basis.size());
    int e = 0;
    for (int c = 0; c < side; ++c) {
      for (int r = c; r < side; ++r, ++e) {
        const Monomial prod = g.basis[static_cast<std::size_t>(r)] * g.basis[static_cast<std::size_t>(c)];
        const double w = (r == c) ? -1.0 : -kSqrt2;
        if (data == nullptr) {
          acc.add(cid, g.col_offset + e, Polynomial::monomial(prod), w);
        } else {
          acc.add(cid, g.col_offset + e, Polynomial::monomial(prod) * *data, w);
        }
      }
    }
  }
}

void Compiler::fill(const CompiledProgram& cp, const LocalGeometry& geo, Accumulator& acc,
                    std::vector<std::vector<Polynomial>>* descriptions) const {
  const int K = dec_.num_intervals();
  const int n = sys_.n;
  const Monomial one(nv_);
  for (int cid = 0; cid < static_cast<int>(plans_.size()); ++cid) {
    const ConstraintPlan& p = plans_[static_cast<std::size_t>(cid)];
    std::vector<Polynomial> desc;
    Polynomial flow_data;
    bool has_flow = false;
    switch (p.family) {
      case Family::kFlow: {
        const auto maps = frame_maps(geo, p.box, p.interval);
        const auto& tf = geo.intervals[static_cast<std::size_t>(p.interval)];
        std::vector<Polynomial> ft;
        for (const auto& fj : sys_.dynamics) ft.push_back(fj.substitute_affine(maps));
        const PolyBlock& vb = cp.v_block(p.box, p.interval);
        for (std::size_t a = 0; a < vb.basis.size(); ++a) {
          const Polynomial beta = Polynomial::monomial(vb.basis[a]);
          Polynomial lie = beta.derivative(0);
          for (int j = 0; j < n; ++j) {
            const double ratio =
                tf.scale / geo.boxes[static_cast<std::size_t>(p.box)][static_cast<std::size_t>(j)].scale;
            const Polynomial dj = beta.derivative(sys_.x_var(j));
            if (!dj.is_zero()) lie += ratio * (dj * ft[static_cast<std::size_t>(j)]);
          }
          acc.add(cid, vb.col_offset + static_cast<int>(a), lie, -1.0);
        }
        const Polynomial tau = Polynomial::variable(nv_, 0);
        desc.push_back(Polynomial::constant(nv_, tf.rho * tf.rho) - tau * tau);
        auto bd = box_descriptions(geo, p.box, -1, maps, -1, 0.0);
        desc.insert(desc.end(), bd.begin(), bd.end());
        for (const auto& g : sys_.input_constraints) desc.push_back(g);
        break;
      }
      case Family::kInitial: {
        const auto maps = frame_maps(geo, p.box, -1);
        emit_block(cp.w_blocks[static_cast<std::size_t>(p.box)], cid, 1.0, nullptr, acc);
        std::vector<AffineMap> at(static_cast<std::size_t>(nv_));
        at[0] = {-geo.intervals[0].rho, 0.0};
        emit_block(cp.v_block(p.box, 0), cid, -1.0, &at, acc);
        acc.add_constant(cid, one, 1.0);
        desc = box_descriptions(geo, p.box, -1, maps, -1, 0.0);
        break;
      }
      case Family::kFinal: {
        const auto maps = frame_maps(geo, p.box, -1);
        std::vector<AffineMap> at(static_cast<std::size_t>(nv_));
        at[0] = {geo.intervals[static_cast<std::size_t>(K - 1)].rho, 0.0};
        emit_block(cp.v_block(p.box, K - 1), cid, 1.0, &at, acc);
        for (const auto& g : sys_.target_constraints) desc.push_back(g.substitute_affine(maps));
        auto bd = box_descriptions(geo, p.box, -1, maps, -1, 0.0);
        desc.insert(desc.end(), bd.begin(), bd.end());
        break;
      }
      case Family::kBound: {
        const auto maps = frame_maps(geo, p.box, -1);
        emit_block(cp.w_blocks[static_cast<std::size_t>(p.box)], cid, 1.0, nullptr, acc);
        desc = box_descriptions(geo, p.box, -1, maps, -1, 0.0);
        break;
      }
      case Family::kTimeInterface: {
        const auto maps = frame_maps(geo, p.box, -1);
        std::vector<AffineMap> end(static_cast<std::size_t>(nv_));
        end[0] = {geo.intervals[static_cast<std::size_t>(p.interval)].rho, 0.0};
        std::vector<AffineMap> start(static_cast<std::size_t>(nv_));
        start[0] = {-geo.intervals[static_cast<std::size_t>(p.interval + 1)].rho, 0.0};
        emit_block(cp.v_block(p.box, p.interval), cid, 1.0, &end, acc);
        emit_block(cp.v_block(p.box, p.interval + 1), cid, -1.0, &start, acc);
        desc = box_descriptions(geo, p.box, -1, maps, -1, 0.0);
        break;
      }
      case Family::kFaceInterface: {
        const Neighbor& nb = dec_.neighbors[static_cast<std::size_t>(p.neighbor)];
        const int j = nb.axis;
        const int yj = sys_.x_var(j);
        const double rho_a =
            geo.boxes[static_cast<std::size_t>(nb.a)][static_cast<std::size_t>(j)].rho;
        const double rho_b =
            geo.boxes[static_cast<std::size_t>(nb.b)][static_cast<std::size_t>(j)].rho;
        std::vector<AffineMap> on_a(static_cast<std::size_t>(nv_));
        on_a[static_cast<std::size_t>(yj)] = {rho_a, 0.0};
        std::vector<AffineMap> on_b(static_cast<std::size_t>(nv_));
        on_b[static_cast<std::size_t>(yj)] = {-rho_b, 0.0};
        emit_block(cp.v_block(nb.a, p.interval), cid, p.sign, &on_a, acc);
        emit_block(cp.v_block(nb.b, p.interval), cid, -p.sign, &on_b,
                   acc);
        const auto maps = frame_maps(geo, nb.a, p.interval);
        flow_data = sys_.dynamics[static_cast<std::size_t>(j)].substitute_affine(maps).fix_variable(
                        yj, rho_a) *
                    static_cast<double>(p.sign);
        has_flow = true;
        const auto& tf = geo.intervals[static_cast<std::size_t>(p.interval)];
        const Polynomial tau = Polynomial::variable(nv_, 0);
        desc.push_back(Polynomial::constant(nv_, tf.rho * tf.rho) - tau * tau);
        auto bd = box_descriptions(geo, nb.a, j, maps, yj, rho_a);
        desc.insert(desc.end(), bd.begin(), bd.end());
        for (const auto& g : sys_.input_constraints) desc.push_back(g);
        break;
      }
    }
    emit_grams(cp, cid, desc, has_flow ? &flow_data : nullptr, acc);
    if (descriptions != nullptr) descriptions->push_back(std::move(desc));
  }
}

double local_moment(const Monomial& m, const std::vector<AxisFrame>& frames, const SystemSpec& sys) {
  double r = 1.0;
  for (int p = 0; p < sys.n; ++p) {
    const int e = m[sys.x_var(p)];
    const double rho = frames[static_cast<std::size_t>(p)].rho;
    r *= (e % 2 == 1) ? 0.0 : 2.0 * std::pow(rho, e + 1) / (e + 1);
    r *= frames[static_cast<std::size_t>(p)].scale;
  }
  return r;
}

}  // namespace

const char* to_string(Family family) {
  switch (family) {
    case Family::kFlow: return "flow";
    case Family::kInitial: return "initial";
    case Family::kFinal: return "final";
    case Family::kBound: return "bound";
    case Family::kTimeInterface: return "time-interface";
    case Family::kFaceInterface: return "face-interface";
  }
  return "?";
}

LocalGeometry local_geometry(const SystemSpec& sys, const Decomposition& dec,
                             const CompileOptions& options) {
  LocalGeometry g;
  for (const auto& box : dec.boxes) {
    std::vector<AxisFrame> frames;
    for (int p = 0; p < sys.n; ++p) {
      frames.push_back(make_frame(box[static_cast<std::size_t>(p)],
                                  0.5 * dec.domain[static_cast<std::size_t>(p)].width(),
                                  options.min_scale_fraction));
    }
    g.boxes.push_back(std::move(frames));
  }
  for (const auto& iv : dec.intervals) {
    g.intervals.push_back(make_frame(iv, 0.5 * dec.horizon, options.min_scale_fraction));
  }
  return g;
}

CompiledProgram compile(const SystemSpec& sys, const Decomposition& dec, int d,
                        const CompileOptions& options) {
  if (d < 2 || d % 2 != 0) throw std::invalid_argument("compile: degree must be even and >= 2");
  sys.validate();
  CompiledProgram cp;
  cp.degree = d;
  cp.nvars = sys.nvars();
  cp.decomposition = dec;
  cp.geometry = local_geometry(sys, dec, options);

  Compiler compiler(sys, dec, d);
  compiler.plan(cp);
  const auto& plans = compiler.plans();

  const std::size_t nc = plans.size();
  Accumulator actual(nc);
  std::vector<std::vector<Polynomial>> descriptions;
  compiler.fill(cp, cp.geometry, actual, &descriptions);
  Accumulator generic(nc);
  compiler.fill(cp, generic_geometry(dec.num_boxes(), sys.n, dec.num_intervals()), generic,
                nullptr);

  int ncols = 0;
  for (const auto& g : cp.grams) ncols = std::max(ncols, g.col_offset + svec_size(static_cast<int>(g.basis.size())));
  for (const auto& b : cp.w_blocks) ncols = std::max(ncols, b.col_offset + static_cast<int>(b.basis.size()));

  std::vector<Triplet> trip;
  std::vector<double> rhs;
  int row = 0;
  for (std::size_t cid = 0; cid < nc; ++cid) {
    const ConstraintPlan& p = plans[cid];
    ConstraintRecord rec;
    rec.family = p.family;
    rec.box = p.box;
    rec.interval = p.interval;
    rec.neighbor = p.neighbor;
    rec.sign = p.sign;
    rec.degree_budget = p.budget;
    rec.grams = p.grams;
    rec.descriptions = std::move(descriptions[cid]);
    rec.row_offset = row;

    RowKeyMap keys;
    for (const auto& [m, _] : actual.rows[cid]) keys.emplace(m, 0);
    for (const auto& [m, _] : generic.rows[cid]) keys.emplace(m, 0);
    for (auto& [m, idx] : keys) {
      idx = row++;
      rec.row_monomials.push_back(m);
      auto it = actual.rhs[cid].find(m);
      rhs.push_back(it == actual.rhs[cid].end() ? 0.0 : it->second);
    }
    for (const auto& [m, entries] : actual.rows[cid]) {
      const int r = keys.at(m);
      for (const auto& [col, val] : entries) trip.push_back({r, col, val});
    }
    for (const auto& [m, entries] : generic.rows[cid]) {
      const int r = keys.at(m);
      for (const auto& [col, val] : entries) trip.push_back({r, col, 0.0});
    }
    cp.constraints.push_back(std::move(rec));
  }
  const int zero_rows = row;
  for (auto& g : cp.grams) {
    g.psd_row_offset = row;
    const int len = svec_size(static_cast<int>(g.basis.size()));
    for (int e = 0; e < len; ++e) {
      trip.push_back({row + e, g.col_offset + e, -1.0});
      rhs.push_back(0.0);
    }
    row += len;
  }

  ConicProgram& prog = cp.program;
  prog.A.resize(row, ncols);
  std::vector<Eigen::Triplet<double>> et;
  et.reserve(trip.size());
  for (const auto& t : trip) et.emplace_back(t.row, t.col, t.value);
  prog.A.setFromTriplets(et.begin(), et.end());
  prog.A.makeCompressed();
  prog.b = Eigen::Map<const Eigen::VectorXd>(rhs.data(), static_cast<Eigen::Index>(rhs.size()));
  prog.c = Eigen::VectorXd::Zero(ncols);
  for (const auto& wb : cp.w_blocks) {
    const auto& frames = cp.geometry.boxes[static_cast<std::size_t>(wb.box)];
    for (std::size_t a = 0; a < wb.basis.size(); ++a) {
      prog.c(wb.col_offset + static_cast<int>(a)) = local_moment(wb.basis[a], frames, sys);
    }
  }
  prog.cones.push_back({ConeKind::kZero, zero_rows});
  for (const auto& g : cp.grams) prog.cones.push_back({ConeKind::kPsd, static_cast<int>(g.basis.size())});
  prog.validate();
  return cp;
}

Polynomial block_polynomial(const PolyBlock& block, const Eigen::VectorXd& x, int nvars) {
  Polynomial p(nvars);
  for (std::size_t a = 0; a < block.basis.size(); ++a) {
    p.add_term(block.basis[a], x(block.col_offset + static_cast<int>(a)));
  }
  return p;
}

Polynomial gram_polynomial(const GramBlock& gram, const Eigen::VectorXd& x, int nvars) {
  const int side = static_cast<int>(gram.basis.size());
  const Eigen::MatrixXd G = unsvec(x.segment(gram.col_offset, svec_size(side)).eval(), side);
  Polynomial p(nvars);
  for (int c = 0; c < side; ++c) {
    for (int r = 0; r < side; ++r) {
      p.add_term(gram.basis[static_cast<std::size_t>(r)] * gram.basis[static_cast<std::size_t>(c)],
                 G(r, c));
    }
  }
  return p;
}

PiecewiseCertificate certificate_from_vector(const CompiledProgram& cp, const Eigen::VectorXd& x) {
  PiecewiseCertificate cert;
  cert.decomposition = cp.decomposition;
  cert.degree = cp.degree;
  cert.nvars = cp.nvars;
  const int I = cp.decomposition.num_boxes();
  const int K = cp.decomposition.num_intervals();
  const int n = static_cast<int>(cp.decomposition.domain.size());
  auto global_maps = [&](int box, int interval) {
    std::vector<AffineMap> maps(static_cast<std::size_t>(cp.nvars));
    if (interval >= 0) {
      const auto& tf = cp.geometry.intervals[static_cast<std::size_t>(interval)];
      maps[0] = {-tf.center / tf.scale, 1.0 / tf.scale};
    }
    for (int p = 0; p < n; ++p) {
      const auto& f = cp.geometry.boxes[static_cast<std::size_t>(box)][static_cast<std::size_t>(p)];
      maps[static_cast<std::size_t>(1 + p)] = {-f.center / f.scale, 1.0 / f.scale};
    }
    return maps;
  };
  cert.v.resize(static_cast<std::size_t>(I));
  for (int i = 0; i < I; ++i) {
    for (int k = 0; k < K; ++k) {
      cert.v[static_cast<std::size_t>(i)].push_back(
          block_polynomial(cp.v_block(i, k), x, cp.nvars).substitute_affine(global_maps(i, k)));
    }
    cert.w.push_back(block_polynomial(cp.w_blocks[static_cast<std::size_t>(i)], x, cp.nvars)
                         .substitute_affine(global_maps(i, -1)));
  }
  return cert;
}

PiecewiseCertificate extract_certificate(const CompiledProgram& cp, const ConicSolution& sol) {
  if (sol.status == SolveStatus::kInfeasible || sol.status == SolveStatus::kUnbounded) {
    throw std::runtime_error(std::string("extract_certificate: solution status is ") +
                             to_string(sol.status));
  }
  if (sol.x.size() != cp.program.cols()) {
    throw std::invalid_argument("extract_certificate: solution does not match the program");
  }
  return certificate_from_vector(cp, sol.x);
}

}  // namespace splitroa
