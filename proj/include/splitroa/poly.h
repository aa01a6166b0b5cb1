#pragma once

#include <array>
#include <cstdint>
#include <initializer_list>
#include <map>
#include <span>
#include <string>
#include <vector>

namespace splitroa {

/// Upper bound on the ambient variable count (t, x_1..x_n, u_1..u_m).
inline constexpr int kMaxVars = 10;

/// Flags a subset of the ambient variables.
using VarMask = std::array<bool, kMaxVars>;

/// Exponent vector over a fixed positional variable ordering.
class Monomial {
 public:
  Monomial() = default;
  explicit Monomial(int nvars);
  Monomial(std::initializer_list<int> exponents);
  explicit Monomial(std::span<const int> exponents);

  int nvars() const { return nvars_; }
  int degree() const;
  int operator[](int var) const { return exps_[static_cast<std::size_t>(var)]; }
  void set(int var, int exponent);

  Monomial operator*(const Monomial& other) const;
  std::vector<int> exponents() const;
  std::string to_string() const;

  friend bool operator==(const Monomial& a, const Monomial& b) = default;

 private:
  std::array<std::uint8_t, kMaxVars> exps_{};
  std::uint8_t nvars_ = 0;
};

/// Graded order: lower total degree first; within a degree, larger exponents
/// on earlier variables come first (so x1 precedes x2).
struct GradedLexLess {
  bool operator()(const Monomial& a, const Monomial& b) const;
};

struct Interval {
  double lo = 0.0;
  double hi = 0.0;
  double width() const { return hi - lo; }
  double center() const { return 0.5 * (lo + hi); }
  bool contains(double v, double slack = 0.0) const {
    return v >= lo - slack && v <= hi + slack;
  }
  friend bool operator==(const Interval&, const Interval&) = default;
};

using Box = std::vector<Interval>;

double box_volume(const Box& box);

/// Per-variable affine map var -> offset + scale * var.
struct AffineMap {
  double offset = 0.0;
  double scale = 1.0;
};

/// Sparse multivariate polynomial in canonical form: exact zeros are never
/// stored, so equality is term-map equality.
class Polynomial {
 public:
  using TermMap = std::map<Monomial, double, GradedLexLess>;

  Polynomial() = default;
  explicit Polynomial(int nvars) : nvars_(nvars) {}
  Polynomial(int nvars, TermMap terms);

  static Polynomial constant(int nvars, double value);
  static Polynomial variable(int nvars, int var);
  static Polynomial monomial(const Monomial& m, double coeff = 1.0);

  int nvars() const { return nvars_; }
  const TermMap& terms() const { return terms_; }
  bool is_zero() const { return terms_.empty(); }
  int degree() const;
  /// Highest exponent sum restricted to the variables flagged in `mask`.
  int degree_in(const VarMask& mask) const;
  double coefficient(const Monomial& m) const;
  void add_term(const Monomial& m, double coeff);

  double evaluate(std::span<const double> point) const;
  Polynomial derivative(int var) const;
  Polynomial substitute_affine(std::span<const AffineMap> maps) const;
  /// Fixes one variable to a value (the result no longer depends on it).
  Polynomial fix_variable(int var, double value) const;

  Polynomial operator-() const;
  Polynomial& operator+=(const Polynomial& other);
  Polynomial& operator-=(const Polynomial& other);
  Polynomial& operator*=(double s);
  friend Polynomial operator+(Polynomial a, const Polynomial& b) { return a += b; }
  friend Polynomial operator-(Polynomial a, const Polynomial& b) { return a -= b; }
  friend Polynomial operator*(Polynomial a, double s) { return a *= s; }
  friend Polynomial operator*(double s, Polynomial a) { return a *= s; }
  friend Polynomial operator*(const Polynomial& a, const Polynomial& b);
  friend bool operator==(const Polynomial& a, const Polynomial& b) {
    return a.nvars_ == b.nvars_ && a.terms_ == b.terms_;
  }

  std::string to_string() const;

 private:
  void check_compatible(const Polynomial& other) const;

  int nvars_ = 0;
  TermMap terms_;
};

/// All monomials of total degree <= maxdeg, increasing in graded order.
class MonomialBasis {
 public:
  MonomialBasis() = default;
  MonomialBasis(int nvars, int maxdeg, std::vector<Monomial> monomials);

  int nvars() const { return nvars_; }
  int maxdeg() const { return maxdeg_; }
  std::size_t size() const { return monomials_.size(); }
  const Monomial& operator[](std::size_t i) const { return monomials_[i]; }
  const std::vector<Monomial>& monomials() const { return monomials_; }
  /// Position of `m`, or -1 when absent.
  int index_of(const Monomial& m) const;

  auto begin() const { return monomials_.begin(); }
  auto end() const { return monomials_.end(); }

 private:
  int nvars_ = 0;
  int maxdeg_ = 0;
  std::vector<Monomial> monomials_;
};

MonomialBasis monomial_basis(int nvars, int maxdeg);

/// Basis over the variables flagged in `active`, embedded in an ambient space
/// of `nvars` variables (inactive exponents are zero).
MonomialBasis monomial_basis(int nvars, const VarMask& active, int maxdeg);

/// d/dt v + sum_i (d/dx_i v) f_i with t at position 0 and x_i at 1 + i.
Polynomial lie_derivative(const Polynomial& v, std::span<const Polynomial> f);

/// Lebesgue moments of `box` for each monomial of a basis over x.
std::vector<double> box_moments(const Box& box, const MonomialBasis& basis);

/// Moment of a single monomial over a box.
double box_moment(const Box& box, const Monomial& m);

std::size_t binomial(int n, int k);

}  // namespace splitroa
