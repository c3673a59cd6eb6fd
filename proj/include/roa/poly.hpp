#pragma once

// Sparse multivariate polynomials with real coefficients over dense exponent
// vectors. Terms are kept in graded-lexicographic order and zero coefficients
// are never stored.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <map>
#include <numeric>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "roa/error.hpp"

namespace roa {

class Monomial {
 public:
  Monomial() = default;
  explicit Monomial(std::size_t nvars) : exponents_(nvars, 0) {}
  explicit Monomial(std::vector<int> exponents) : exponents_(std::move(exponents)) {
    for (int e : exponents_) {
      if (e < 0) throw ContractViolation("Monomial: negative exponent");
    }
  }

  static Monomial variable(std::size_t nvars, std::size_t index, int power = 1) {
    Monomial m(nvars);
    m.exponents_.at(index) = power;
    return m;
  }

  std::size_t nvars() const { return exponents_.size(); }
  int degree() const { return std::accumulate(exponents_.begin(), exponents_.end(), 0); }
  int operator[](std::size_t i) const { return exponents_[i]; }
  const std::vector<int>& exponents() const { return exponents_; }

  Monomial operator*(const Monomial& other) const {
    if (other.nvars() != nvars()) throw ContractViolation("Monomial: dimension mismatch");
    Monomial out(*this);
    for (std::size_t i = 0; i < nvars(); ++i) out.exponents_[i] += other.exponents_[i];
    return out;
  }

  double evaluate(std::span<const double> x) const {
    double v = 1.0;
    for (std::size_t i = 0; i < exponents_.size(); ++i) {
      for (int k = 0; k < exponents_[i]; ++k) v *= x[i];
    }
    return v;
  }

  friend bool operator==(const Monomial&, const Monomial&) = default;

 private:
  std::vector<int> exponents_;
};

/// Graded-lexicographic order: lower total degree first; within a degree,
/// larger power of x1 first, then x2, ... (so 1, x1, x2, x1^2, x1*x2, x2^2).
struct GrlexLess {
  bool operator()(const Monomial& a, const Monomial& b) const {
    const int da = a.degree();
    const int db = b.degree();
    if (da != db) return da < db;
    return std::lexicographical_compare(b.exponents().begin(), b.exponents().end(),
                                        a.exponents().begin(), a.exponents().end());
  }
};

/// All monomials in `nvars` variables with min_degree <= degree <= max_degree,
/// in graded-lex order.
inline std::vector<Monomial> monomials_up_to(std::size_t nvars, int max_degree, int min_degree = 0) {
  std::vector<Monomial> out;
  if (max_degree < 0 || nvars == 0) return out;
  std::vector<int> e(nvars, 0);
  // Enumerate each total degree separately; within a degree walk exponent
  // vectors in descending lexicographic order.
  for (int deg = std::max(0, min_degree); deg <= max_degree; ++deg) {
    std::vector<std::vector<int>> level;
    std::vector<int> cur(nvars, 0);
    auto rec = [&](auto&& self, std::size_t var, int remaining) -> void {
      if (var + 1 == nvars) {
        cur[var] = remaining;
        level.push_back(cur);
        return;
      }
      for (int k = remaining; k >= 0; --k) {
        cur[var] = k;
        self(self, var + 1, remaining - k);
      }
    };
    rec(rec, 0, deg);
    for (auto& v : level) out.emplace_back(std::move(v));
  }
  return out;
}

class Polynomial {
 public:
  using TermMap = std::map<Monomial, double, GrlexLess>;

  Polynomial() = default;
  explicit Polynomial(std::size_t nvars) : nvars_(nvars) {
    if (nvars == 0) throw ContractViolation("Polynomial: nvars must be positive");
  }

  static Polynomial constant(std::size_t nvars, double c) {
    Polynomial p(nvars);
    p.add_term(Monomial(nvars), c);
    return p;
  }
  static Polynomial variable(std::size_t nvars, std::size_t index) {
    Polynomial p(nvars);
    p.add_term(Monomial::variable(nvars, index), 1.0);
    return p;
  }
  static Polynomial monomial(const Monomial& m, double c = 1.0) {
    Polynomial p(m.nvars());
    p.add_term(m, c);
    return p;
  }
  /// x1^2 + ... + xn^2
  static Polynomial squared_norm(std::size_t nvars) {
    Polynomial p(nvars);
    for (std::size_t i = 0; i < nvars; ++i) p.add_term(Monomial::variable(nvars, i, 2), 1.0);
    return p;
  }
  /// u_r(x) = r^2 - sum x_i^2; the ball B_r(0) is {u_r >= 0}.
  static Polynomial ball(std::size_t nvars, double radius) {
    return constant(nvars, radius * radius) - squared_norm(nvars);
  }

  std::size_t nvars() const { return nvars_; }
  const TermMap& terms() const { return terms_; }
  bool is_zero() const { return terms_.empty(); }
  std::size_t size() const { return terms_.size(); }

  int degree() const { return terms_.empty() ? 0 : terms_.rbegin()->first.degree(); }

  double coeff(const Monomial& m) const {
    auto it = terms_.find(m);
    return it == terms_.end() ? 0.0 : it->second;
  }

  /// Adds c*m, erasing the term if it cancels exactly.
  void add_term(const Monomial& m, double c) {
    if (m.nvars() != nvars_) throw ContractViolation("Polynomial: monomial dimension mismatch");
    if (c == 0.0) return;
    auto [it, inserted] = terms_.try_emplace(m, c);
    if (!inserted) {
      it->second += c;
      if (it->second == 0.0) terms_.erase(it);
    }
  }

  double evaluate(std::span<const double> x) const {
    if (x.size() != nvars_) throw ContractViolation("evaluate: point has wrong dimension");
    double v = 0.0;
    for (const auto& [m, c] : terms_) v += c * m.evaluate(x);
    return v;
  }

  Polynomial derivative(std::size_t var) const {
    if (var >= nvars_) throw ContractViolation("derivative: variable index out of range");
    Polynomial out(nvars_);
    for (const auto& [m, c] : terms_) {
      const int e = m[var];
      if (e == 0) continue;
      std::vector<int> ex = m.exponents();
      ex[var] -= 1;
      out.add_term(Monomial(std::move(ex)), c * e);
    }
    return out;
  }

  std::vector<Polynomial> gradient() const {
    std::vector<Polynomial> g;
    g.reserve(nvars_);
    for (std::size_t i = 0; i < nvars_; ++i) g.push_back(derivative(i));
    return g;
  }

  Polynomial& operator+=(const Polynomial& o) {
    check_same(o);
    for (const auto& [m, c] : o.terms_) add_term(m, c);
    return *this;
  }
  Polynomial& operator-=(const Polynomial& o) {
    check_same(o);
    for (const auto& [m, c] : o.terms_) add_term(m, -c);
    return *this;
  }
  Polynomial& operator*=(double s) {
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

  friend Polynomial operator+(Polynomial a, const Polynomial& b) { return a += b; }
  friend Polynomial operator-(Polynomial a, const Polynomial& b) { return a -= b; }
  friend Polynomial operator*(Polynomial a, double s) { return a *= s; }
  friend Polynomial operator*(double s, Polynomial a) { return a *= s; }
  friend Polynomial operator-(Polynomial a) { return a *= -1.0; }

  friend Polynomial operator*(const Polynomial& a, const Polynomial& b) {
    a.check_same(b);
    Polynomial out(a.nvars_);
    for (const auto& [ma, ca] : a.terms_) {
      for (const auto& [mb, cb] : b.terms_) out.add_term(ma * mb, ca * cb);
    }
    return out;
  }

  friend bool operator==(const Polynomial& a, const Polynomial& b) {
    return a.nvars_ == b.nvars_ && a.terms_ == b.terms_;
  }

 private:
  void check_same(const Polynomial& o) const {
    if (o.nvars_ != nvars_) throw ContractViolation("Polynomial: nvars mismatch");
  }

  std::size_t nvars_ = 1;
  TermMap terms_;
};

inline Polynomial poly_add(const Polynomial& a, const Polynomial& b) { return a + b; }
inline Polynomial poly_sub(const Polynomial& a, const Polynomial& b) { return a - b; }
inline Polynomial poly_mul(const Polynomial& a, const Polynomial& b) { return a * b; }

/// Largest coefficient gap over the union of both supports.
inline double coeff_max_abs_diff(const Polynomial& a, const Polynomial& b) {
  if (a.nvars() != b.nvars()) throw ContractViolation("coeff_max_abs_diff: nvars mismatch");
  double worst = 0.0;
  for (const auto& [m, c] : a.terms()) worst = std::max(worst, std::abs(c - b.coeff(m)));
  for (const auto& [m, c] : b.terms()) {
    if (a.terms().count(m) == 0) worst = std::max(worst, std::abs(c));
  }
  return worst;
}

class VectorField {
 public:
  VectorField() = default;
  explicit VectorField(std::vector<Polynomial> components, bool equilibrium_at_origin = true)
      : components_(std::move(components)), equilibrium_at_origin_(equilibrium_at_origin) {
    if (components_.empty()) throw ContractViolation("VectorField: no components");
    const std::size_t n = components_.size();
    for (const auto& c : components_) {
      if (c.nvars() != n) {
        throw ContractViolation("VectorField: component nvars must equal the number of components");
      }
    }
    if (equilibrium_at_origin_) {
      const std::vector<double> zero(n, 0.0);
      for (std::size_t i = 0; i < n; ++i) {
        if (components_[i].evaluate(zero) != 0.0) {
          throw ContractViolation("VectorField: component " + std::to_string(i + 1) +
                                  " does not vanish at the origin");
        }
      }
    }
  }

  std::size_t dimension() const { return components_.size(); }
  const std::vector<Polynomial>& components() const { return components_; }
  const Polynomial& operator[](std::size_t i) const { return components_[i]; }
  bool equilibrium_at_origin() const { return equilibrium_at_origin_; }

  int degree() const {
    int d = 0;
    for (const auto& c : components_) d = std::max(d, c.degree());
    return d;
  }

  void evaluate(std::span<const double> x, std::span<double> out) const {
    for (std::size_t i = 0; i < components_.size(); ++i) out[i] = components_[i].evaluate(x);
  }
  std::vector<double> evaluate(std::span<const double> x) const {
    std::vector<double> out(components_.size());
    evaluate(x, out);
    return out;
  }

  /// Dynamics in the coordinates z = c*x:  dz/dt = c * f(z / c).
  VectorField rescaled(double c) const {
    if (!(c > 0.0)) throw ContractViolation("VectorField::rescaled: factor must be positive");
    std::vector<Polynomial> out;
    for (const auto& comp : components_) {
      Polynomial p(dimension());
      for (const auto& [m, coef] : comp.terms()) p.add_term(m, coef * c * std::pow(c, -m.degree()));
      out.push_back(std::move(p));
    }
    return VectorField(std::move(out), equilibrium_at_origin_);
  }

 private:
  std::vector<Polynomial> components_;
  bool equilibrium_at_origin_ = true;
};

/// sum_i (dp/dx_i) * f_i, fully expanded.
inline Polynomial lie_derivative(const Polynomial& p, const VectorField& f) {
  if (p.nvars() != f.dimension()) throw ContractViolation("lie_derivative: dimension mismatch");
  Polynomial out(p.nvars());
  for (std::size_t i = 0; i < p.nvars(); ++i) {
    const Polynomial dp = p.derivative(i);
    if (!dp.is_zero()) out += dp * f[i];
  }
  return out;
}

inline std::vector<Polynomial> gradient(const Polynomial& p) { return p.gradient(); }

/// Flattened evaluator for hot loops (ODE right-hand sides, grid scans).
class CompiledPolynomial {
 public:
  CompiledPolynomial() = default;
  explicit CompiledPolynomial(const Polynomial& p) : nvars_(p.nvars()), max_exp_(0) {
    for (const auto& [m, c] : p.terms()) {
      coeffs_.push_back(c);
      for (std::size_t i = 0; i < nvars_; ++i) {
        exps_.push_back(m[i]);
        max_exp_ = std::max(max_exp_, m[i]);
      }
    }
  }

  double operator()(std::span<const double> x) const {
    // Power table per variable, then a dot product over terms.
    thread_local std::vector<double> powers;
    const std::size_t stride = static_cast<std::size_t>(max_exp_) + 1;
    powers.resize(nvars_ * stride);
    for (std::size_t i = 0; i < nvars_; ++i) {
      double v = 1.0;
      for (std::size_t k = 0; k < stride; ++k) {
        powers[i * stride + k] = v;
        v *= x[i];
      }
    }
    double s = 0.0;
    for (std::size_t t = 0; t < coeffs_.size(); ++t) {
      double term = coeffs_[t];
      for (std::size_t i = 0; i < nvars_; ++i) term *= powers[i * stride + exps_[t * nvars_ + i]];
      s += term;
    }
    return s;
  }

 private:
  std::size_t nvars_ = 0;
  int max_exp_ = 0;
  std::vector<double> coeffs_;
  std::vector<int> exps_;
};

class CompiledField {
 public:
  CompiledField() = default;
  explicit CompiledField(const VectorField& f) {
    for (const auto& c : f.components()) comps_.emplace_back(c);
  }
  std::size_t dimension() const { return comps_.size(); }
  void operator()(std::span<const double> x, std::span<double> out) const {
    for (std::size_t i = 0; i < comps_.size(); ++i) out[i] = comps_[i](x);
  }

 private:
  std::vector<CompiledPolynomial> comps_;
};

}  // namespace roa
