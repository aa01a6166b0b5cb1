#include "splitroa/poly.h"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>

namespace splitroa {

Monomial::Monomial(int nvars) {
  if (nvars < 0 || nvars > kMaxVars) {
    throw std::invalid_argument("Monomial: variable count out of range");
  }
  nvars_ = static_cast<std::uint8_t>(nvars);
}

Monomial::Monomial(std::initializer_list<int> exponents)
    : Monomial(std::span<const int>(exponents.begin(), exponents.size())) {}

Monomial::Monomial(std::span<const int> exponents)
    : Monomial(static_cast<int>(exponents.size())) {
  for (std::size_t i = 0; i < exponents.size(); ++i) {
    set(static_cast<int>(i), exponents[i]);
  }
}

int Monomial::degree() const {
  int d = 0;
  for (int i = 0; i < nvars_; ++i) d += exps_[static_cast<std::size_t>(i)];
  return d;
}

void Monomial::set(int var, int exponent) {
  if (var < 0 || var >= nvars_ || exponent < 0 || exponent > 255) {
    throw std::invalid_argument("Monomial::set: invalid variable or exponent");
  }
  exps_[static_cast<std::size_t>(var)] = static_cast<std::uint8_t>(exponent);
}

Monomial Monomial::operator*(const Monomial& other) const {
  if (other.nvars_ != nvars_) {
    throw std::invalid_argument("Monomial product: variable-count mismatch");
  }
  Monomial r(nvars_);
  for (int i = 0; i < nvars_; ++i) {
    r.set(i, (*this)[i] + other[i]);
  }
  return r;
}

std::vector<int> Monomial::exponents() const {
  std::vector<int> out(nvars_);
  for (int i = 0; i < nvars_; ++i) out[static_cast<std::size_t>(i)] = (*this)[i];
  return out;
}

std::string Monomial::to_string() const {
  std::ostringstream os;
  bool any = false;
  for (int i = 0; i < nvars_; ++i) {
    if ((*this)[i] == 0) continue;
    if (any) os << '*';
    os << 'z' << i;
    if ((*this)[i] > 1) os << '^' << (*this)[i];
    any = true;
  }
  if (!any) os << '1';
  return os.str();
}

bool GradedLexLess::operator()(const Monomial& a, const Monomial& b) const {
  const int da = a.degree();
  const int db = b.degree();
  if (da != db) return da < db;
  const int n = std::min(a.nvars(), b.nvars());
  for (int i = 0; i < n; ++i) {
    if (a[i] != b[i]) return a[i] > b[i];
  }
  return a.nvars() < b.nvars();
}

double box_volume(const Box& box) {
  double v = 1.0;
  for (const auto& iv : box) v *= iv.width();
  return v;
}

Polynomial::Polynomial(int nvars, TermMap terms) : nvars_(nvars) {
  for (auto& [m, c] : terms) add_term(m, c);
}

Polynomial Polynomial::constant(int nvars, double value) {
  Polynomial p(nvars);
  p.add_term(Monomial(nvars), value);
  return p;
}

Polynomial Polynomial::variable(int nvars, int var) {
  Monomial m(nvars);
  m.set(var, 1);
  return monomial(m);
}

Polynomial Polynomial::monomial(const Monomial& m, double coeff) {
  Polynomial p(m.nvars());
  p.add_term(m, coeff);
  return p;
}

int Polynomial::degree() const {
  int d = 0;
  for (const auto& [m, c] : terms_) d = std::max(d, m.degree());
  return d;
}

int Polynomial::degree_in(const VarMask& mask) const {
  int d = 0;
  for (const auto& [m, c] : terms_) {
    int s = 0;
    for (int i = 0; i < nvars_; ++i) {
      if (mask[static_cast<std::size_t>(i)]) s += m[i];
    }
    d = std::max(d, s);
  }
  return d;
}

double Polynomial::coefficient(const Monomial& m) const {
  auto it = terms_.find(m);
  return it == terms_.end() ? 0.0 : it->second;
}

void Polynomial::add_term(const Monomial& m, double coeff) {
  if (m.nvars() != nvars_) {
    throw std::invalid_argument("Polynomial: variable-count mismatch");
  }
  if (coeff == 0.0) return;
  auto [it, inserted] = terms_.try_emplace(m, coeff);
  if (!inserted) {
    it->second += coeff;
    if (it->second == 0.0) terms_.erase(it);
  }
}

double Polynomial::evaluate(std::span<const double> point) const {
  if (static_cast<int>(point.size()) != nvars_) {
    throw std::invalid_argument("Polynomial::evaluate: point dimension mismatch");
  }
  double sum = 0.0;
  for (const auto& [m, c] : terms_) {
    double term = c;
    for (int i = 0; i < nvars_; ++i) {
      for (int e = 0; e < m[i]; ++e) term *= point[static_cast<std::size_t>(i)];
    }
    sum += term;
  }
  return sum;
}

Polynomial Polynomial::derivative(int var) const {
  if (var < 0 || var >= nvars_) {
    throw std::invalid_argument("Polynomial::derivative: variable out of range");
  }
  Polynomial d(nvars_);
  for (const auto& [m, c] : terms_) {
    const int e = m[var];
    if (e == 0) continue;
    Monomial r = m;
    r.set(var, e - 1);
    d.add_term(r, c * e);
  }
  return d;
}

Polynomial Polynomial::substitute_affine(std::span<const AffineMap> maps) const {
  if (static_cast<int>(maps.size()) != nvars_) {
    throw std::invalid_argument("substitute_affine: one map per variable required");
  }
  int maxexp = 0;
  for (const auto& [m, c] : terms_) {
    for (int i = 0; i < nvars_; ++i) maxexp = std::max(maxexp, m[i]);
  }
  // expansion[i][e] = coefficients of y^k in (offset + scale*y)^e
  std::vector<std::vector<std::vector<double>>> expansion(
      static_cast<std::size_t>(nvars_));
  for (int i = 0; i < nvars_; ++i) {
    const auto& am = maps[static_cast<std::size_t>(i)];
    auto& ex = expansion[static_cast<std::size_t>(i)];
    ex.resize(static_cast<std::size_t>(maxexp) + 1);
    ex[0] = {1.0};
    for (int e = 1; e <= maxexp; ++e) {
      const auto& prev = ex[static_cast<std::size_t>(e - 1)];
      std::vector<double> cur(static_cast<std::size_t>(e) + 1, 0.0);
      for (std::size_t k = 0; k < prev.size(); ++k) {
        cur[k] += prev[k] * am.offset;
        cur[k + 1] += prev[k] * am.scale;
      }
      ex[static_cast<std::size_t>(e)] = std::move(cur);
    }
  }
  Polynomial out(nvars_);
  for (const auto& [m, c] : terms_) {
    // Expand one variable at a time into a running list of partial terms.
    std::vector<std::pair<Monomial, double>> partial{{Monomial(nvars_), c}};
    for (int i = 0; i < nvars_; ++i) {
      const int e = m[i];
      if (e == 0) continue;
      const auto& coeffs = expansion[static_cast<std::size_t>(i)][static_cast<std::size_t>(e)];
      std::vector<std::pair<Monomial, double>> next;
      next.reserve(partial.size() * coeffs.size());
      for (const auto& [pm, pc] : partial) {
        for (std::size_t k = 0; k < coeffs.size(); ++k) {
          if (coeffs[k] == 0.0) continue;
          Monomial nm = pm;
          nm.set(i, static_cast<int>(k));
          next.emplace_back(nm, pc * coeffs[k]);
        }
      }
      partial = std::move(next);
    }
    for (const auto& [pm, pc] : partial) out.add_term(pm, pc);
  }
  return out;
}

Polynomial Polynomial::fix_variable(int var, double value) const {
  std::vector<AffineMap> maps(static_cast<std::size_t>(nvars_));
  maps[static_cast<std::size_t>(var)] = AffineMap{value, 0.0};
  return substitute_affine(maps);
}

Polynomial Polynomial::operator-() const {
  Polynomial r = *this;
  for (auto& [m, c] : r.terms_) c = -c;
  return r;
}

void Polynomial::check_compatible(const Polynomial& other) const {
  if (other.nvars_ != nvars_) {
    throw std::invalid_argument("Polynomial arithmetic: variable-count mismatch (" +
                                std::to_string(nvars_) + " vs " +
                                std::to_string(other.nvars_) + ")");
  }
}

Polynomial& Polynomial::operator+=(const Polynomial& other) {
  check_compatible(other);
  for (const auto& [m, c] : other.terms_) add_term(m, c);
  return *this;
}

Polynomial& Polynomial::operator-=(const Polynomial& other) {
  check_compatible(other);
  for (const auto& [m, c] : other.terms_) add_term(m, -c);
  return *this;
}

Polynomial& Polynomial::operator*=(double s) {
  if (s == 0.0) {
    terms_.clear();
    return *this;
  }
  for (auto it = terms_.begin(); it != terms_.end();) {
    it->second *= s;
    if (it->second == 0.0) {
      it = terms_.erase(it);
    } else {
      ++it;
    }
  }
  return *this;
}

Polynomial operator*(const Polynomial& a, const Polynomial& b) {
  a.check_compatible(b);
  Polynomial r(a.nvars_);
  for (const auto& [ma, ca] : a.terms_) {
    for (const auto& [mb, cb] : b.terms_) r.add_term(ma * mb, ca * cb);
  }
  return r;
}

std::string Polynomial::to_string() const {
  if (terms_.empty()) return "0";
  std::ostringstream os;
  os.precision(17);
  bool first = true;
  for (const auto& [m, c] : terms_) {
    if (!first) os << " + ";
    os << c << '*' << m.to_string();
    first = false;
  }
  return os.str();
}

MonomialBasis::MonomialBasis(int nvars, int maxdeg, std::vector<Monomial> monomials)
    : nvars_(nvars), maxdeg_(maxdeg), monomials_(std::move(monomials)) {}

int MonomialBasis::index_of(const Monomial& m) const {
  auto it = std::lower_bound(monomials_.begin(), monomials_.end(), m, GradedLexLess{});
  if (it == monomials_.end() || !(*it == m)) return -1;
  return static_cast<int>(it - monomials_.begin());
}

namespace {

// Appends all exponent vectors of exactly `remaining` total degree over the
// active variables from position `var` onward, larger leading exponents first.
void enumerate_degree(int nvars, const VarMask& active, int var, int remaining,
                      Monomial& current, std::vector<Monomial>& out) {
  int next = var;
  while (next < nvars && !active[static_cast<std::size_t>(next)]) ++next;
  if (next >= nvars) {
    if (remaining == 0) out.push_back(current);
    return;
  }
  for (int e = remaining; e >= 0; --e) {
    current.set(next, e);
    enumerate_degree(nvars, active, next + 1, remaining - e, current, out);
  }
  current.set(next, 0);
}

}  // namespace

MonomialBasis monomial_basis(int nvars, const VarMask& active, int maxdeg) {
  if (nvars < 1 || nvars > kMaxVars || maxdeg < 0) {
    throw std::invalid_argument("monomial_basis: need nvars >= 1 and maxdeg >= 0");
  }
  std::vector<Monomial> out;
  Monomial current(nvars);
  for (int deg = 0; deg <= maxdeg; ++deg) {
    enumerate_degree(nvars, active, 0, deg, current, out);
  }
  return MonomialBasis(nvars, maxdeg, std::move(out));
}

MonomialBasis monomial_basis(int nvars, int maxdeg) {
  VarMask all{};
  all.fill(true);
  return monomial_basis(nvars, all, maxdeg);
}

Polynomial lie_derivative(const Polynomial& v, std::span<const Polynomial> f) {
  const int n = static_cast<int>(f.size());
  if (v.nvars() < 1 + n) {
    throw std::invalid_argument("lie_derivative: state dimension exceeds variable count");
  }
  Polynomial out = v.derivative(0);
  for (int i = 0; i < n; ++i) {
    if (f[static_cast<std::size_t>(i)].nvars() != v.nvars()) {
      throw std::invalid_argument("lie_derivative: vector field variable-count mismatch");
    }
    out += v.derivative(1 + i) * f[static_cast<std::size_t>(i)];
  }
  return out;
}

double box_moment(const Box& box, const Monomial& m) {
  if (static_cast<int>(box.size()) != m.nvars()) {
    throw std::invalid_argument("box_moment: dimension mismatch");
  }
  double r = 1.0;
  for (std::size_t i = 0; i < box.size(); ++i) {
    const int e = m[static_cast<int>(i)] + 1;
    r *= (std::pow(box[i].hi, e) - std::pow(box[i].lo, e)) / e;
  }
  return r;
}

std::vector<double> box_moments(const Box& box, const MonomialBasis& basis) {
  if (static_cast<int>(box.size()) != basis.nvars()) {
    throw std::invalid_argument("box_moments: basis must be over the box variables");
  }
  std::vector<double> out;
  out.reserve(basis.size());
  for (const auto& m : basis) out.push_back(box_moment(box, m));
  return out;
}

std::size_t binomial(int n, int k) {
  if (k < 0 || k > n) return 0;
  std::size_t r = 1;
  for (int i = 1; i <= k; ++i) {
    r = r * static_cast<std::size_t>(n - k + i) / static_cast<std::size_t>(i);
  }
  return r;
}

}  // namespace splitroa
