#pragma once

// Truncated multivariate Taylor series ("jets") in up to four variables.
//
// A Jet stores the coefficients of a polynomial in the offsets h_i = x_i - x*_i
// up to a total degree `order`.  Coefficients are dense, keyed by the
// graded-lexicographic position of the multi-index.  Arithmetic between jets
// requires equal (nvars, order); products drop every term above `order`.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "singfield/error.hpp"

namespace singfield {

inline constexpr unsigned kMaxJetVars = 4;
inline constexpr unsigned kMaxJetOrder = 8;

using MultiIndex = std::array<std::uint8_t, kMaxJetVars>;

inline unsigned total_degree(const MultiIndex& m) {
  return std::accumulate(m.begin(), m.end(), 0u);
}

/// Monomial table for one (nvars, order) pair.  Shared and immutable.
class JetLayout {
 public:
  static const JetLayout& get(unsigned nvars, unsigned order) {
    if (nvars == 0 || nvars > kMaxJetVars) {
      fail(Errc::ShapeMismatch, "jet variable count must be in 1.." + std::to_string(kMaxJetVars));
    }
    if (order > kMaxJetOrder) {
      fail(Errc::ShapeMismatch, "jet order " + std::to_string(order) + " exceeds cap " +
                                    std::to_string(kMaxJetOrder));
    }
    static const auto table = [] {
      std::vector<JetLayout> all;
      all.reserve(kMaxJetVars * (kMaxJetOrder + 1));
      for (unsigned n = 1; n <= kMaxJetVars; ++n) {
        for (unsigned k = 0; k <= kMaxJetOrder; ++k) all.emplace_back(JetLayout(n, k));
      }
      return all;
    }();
    return table[(nvars - 1) * (kMaxJetOrder + 1) + order];
  }

  unsigned nvars() const { return nvars_; }
  unsigned order() const { return order_; }
  std::size_t size() const { return monomials_.size(); }
  const MultiIndex& monomial(std::size_t i) const { return monomials_[i]; }
  unsigned degree(std::size_t i) const { return degrees_[i]; }
  /// One past the last monomial of total degree <= d.
  std::size_t end_of_degree(unsigned d) const { return degree_end_[std::min(d, order_)]; }
  std::size_t key(std::size_t i) const { return keys_[i]; }

  /// Position of `m`, or -1 when its degree exceeds the order.
  long index(const MultiIndex& m) const {
    if (total_degree(m) > order_) return -1;
    return lookup_[key_of(m)];
  }
  long index_of_key(std::size_t key) const { return lookup_[key]; }

  std::size_t key_of(const MultiIndex& m) const {
    std::size_t k = 0, stride = 1;
    for (unsigned v = 0; v < nvars_; ++v) {
      k += m[v] * stride;
      stride *= (order_ + 1);
    }
    return k;
  }

 private:
  JetLayout(unsigned nvars, unsigned order) : nvars_(nvars), order_(order) {
    for (unsigned d = 0; d <= order; ++d) {
      MultiIndex m{};
      append_degree(m, 0, d);
      degree_end_.push_back(monomials_.size());
    }
    std::size_t dense = 1;
    for (unsigned v = 0; v < nvars; ++v) dense *= (order + 1);
    lookup_.assign(dense, -1);
    for (std::size_t i = 0; i < monomials_.size(); ++i) {
      degrees_.push_back(total_degree(monomials_[i]));
      keys_.push_back(key_of(monomials_[i]));
      lookup_[keys_.back()] = static_cast<long>(i);
    }
  }

  // lexicographic within a degree: first variable's exponent descending
  void append_degree(MultiIndex& m, unsigned var, unsigned remaining) {
    if (var + 1 == nvars_) {
      m[var] = static_cast<std::uint8_t>(remaining);
      monomials_.push_back(m);
      return;
    }
    for (int e = static_cast<int>(remaining); e >= 0; --e) {
      m[var] = static_cast<std::uint8_t>(e);
      append_degree(m, var + 1, remaining - e);
    }
    m[var] = 0;
  }

  unsigned nvars_;
  unsigned order_;
  std::vector<MultiIndex> monomials_;
  std::vector<unsigned> degrees_;
  std::vector<std::size_t> degree_end_;
  std::vector<std::size_t> keys_;
  std::vector<long> lookup_;
};

class Jet {
 public:
  Jet() : Jet(1, 0) {}
  Jet(unsigned nvars, unsigned order)
      : layout_(&JetLayout::get(nvars, order)), c_(layout_->size(), 0.0) {}

  static Jet constant(unsigned nvars, unsigned order, double value) {
    Jet j(nvars, order);
    j.c_[0] = value;
    return j;
  }

  /// The coordinate function x_var expanded at a point whose var-th coordinate is `value`.
  static Jet variable(unsigned nvars, unsigned order, unsigned var, double value) {
    if (var >= nvars) fail(Errc::ShapeMismatch, "variable index out of range");
    Jet j = constant(nvars, order, value);
    if (order >= 1) {
      MultiIndex m{};
      m[var] = 1;
      j.c_[j.layout_->index(m)] = 1.0;
    }
    return j;
  }

  /// Coordinate jets for every variable at `point`.
  static std::vector<Jet> variables(std::span<const double> point, unsigned order) {
    std::vector<Jet> out;
    out.reserve(point.size());
    for (unsigned i = 0; i < point.size(); ++i) {
      out.push_back(variable(static_cast<unsigned>(point.size()), order, i, point[i]));
    }
    return out;
  }

  unsigned nvars() const { return layout_->nvars(); }
  unsigned order() const { return layout_->order(); }
  const JetLayout& layout() const { return *layout_; }
  std::span<const double> coefficients() const { return c_; }

  double value() const { return c_[0]; }

  double coeff(const MultiIndex& m) const {
    const long i = layout_->index(m);
    return i < 0 ? 0.0 : c_[static_cast<std::size_t>(i)];
  }
  void set_coeff(const MultiIndex& m, double v) {
    const long i = layout_->index(m);
    if (i < 0) fail(Errc::ShapeMismatch, "multi-index exceeds jet order");
    c_[static_cast<std::size_t>(i)] = v;
  }
  double coeff_at(std::size_t i) const { return c_[i]; }
  void set_coeff_at(std::size_t i, double v) { c_[i] = v; }

  /// Partial derivative value d^|m| / dx^m at the base point.
  double derivative(const MultiIndex& m) const {
    double f = 1.0;
    for (unsigned v = 0; v < kMaxJetVars; ++v) {
      for (unsigned k = 2; k <= m[v]; ++k) f *= k;
    }
    return coeff(m) * f;
  }

  /// d/dx_var; the result has order one lower.
  Jet partial(unsigned var) const {
    if (order() == 0) fail(Errc::ShapeMismatch, "cannot differentiate an order-0 jet");
    if (var >= nvars()) fail(Errc::ShapeMismatch, "variable index out of range");
    Jet out(nvars(), order() - 1);
    for (std::size_t i = 0; i < out.layout_->size(); ++i) {
      MultiIndex m = out.layout_->monomial(i);
      m[var] += 1;
      out.c_[i] = m[var] * coeff(m);
    }
    return out;
  }

  Jet truncated(unsigned new_order) const {
    if (new_order > order()) fail(Errc::ShapeMismatch, "truncation cannot raise the order");
    Jet out(nvars(), new_order);
    std::copy_n(c_.begin(), out.c_.size(), out.c_.begin());
    return out;
  }

  /// Same coefficients, zero-padded to a higher order.
  Jet padded(unsigned new_order) const {
    if (new_order < order()) return truncated(new_order);
    Jet out(nvars(), new_order);
    std::copy(c_.begin(), c_.end(), out.c_.begin());
    return out;
  }

  /// Copy with the constant term removed (the pure increment h).
  Jet increment() const {
    Jet out = *this;
    out.c_[0] = 0.0;
    return out;
  }

  bool same_shape(const Jet& o) const { return layout_ == o.layout_; }

  double max_abs() const {
    double m = 0;
    for (double v : c_) m = std::max(m, std::abs(v));
    return m;
  }

  Jet operator-() const {
    Jet out = *this;
    for (double& v : out.c_) v = -v;
    return out;
  }

  Jet& operator+=(const Jet& o) {
    check_shape(o);
    for (std::size_t i = 0; i < c_.size(); ++i) c_[i] += o.c_[i];
    return *this;
  }
  Jet& operator-=(const Jet& o) {
    check_shape(o);
    for (std::size_t i = 0; i < c_.size(); ++i) c_[i] -= o.c_[i];
    return *this;
  }
  Jet& operator*=(const Jet& o) { return *this = *this * o; }
  Jet& operator/=(const Jet& o) { return *this = *this / o; }

  Jet& operator+=(double s) {
    c_[0] += s;
    return *this;
  }
  Jet& operator-=(double s) {
    c_[0] -= s;
    return *this;
  }
  Jet& operator*=(double s) {
    for (double& v : c_) v *= s;
    return *this;
  }
  Jet& operator/=(double s) {
    for (double& v : c_) v /= s;
    return *this;
  }

  friend Jet operator+(Jet a, const Jet& b) { return a += b; }
  friend Jet operator-(Jet a, const Jet& b) { return a -= b; }
  friend Jet operator+(Jet a, double s) { return a += s; }
  friend Jet operator+(double s, Jet a) { return a += s; }
  friend Jet operator-(Jet a, double s) { return a -= s; }
  friend Jet operator-(double s, const Jet& a) { return (-a) += s; }
  friend Jet operator*(Jet a, double s) { return a *= s; }
  friend Jet operator*(double s, Jet a) { return a *= s; }
  friend Jet operator/(Jet a, double s) { return a /= s; }

  friend Jet operator*(const Jet& a, const Jet& b) {
    a.check_shape(b);
    const JetLayout& L = *a.layout_;
    Jet out(a.nvars(), a.order());
    const unsigned order = a.order();
    for (std::size_t i = 0; i < L.size(); ++i) {
      const double ai = a.c_[i];
      if (ai == 0.0) continue;
      const std::size_t jend = L.end_of_degree(order - L.degree(i));
      const std::size_t ki = L.key(i);
      for (std::size_t j = 0; j < jend; ++j) {
        const double bj = b.c_[j];
        if (bj == 0.0) continue;
        out.c_[static_cast<std::size_t>(L.index_of_key(ki + L.key(j)))] += ai * bj;
      }
    }
    return out;
  }

  friend Jet operator/(const Jet& a, const Jet& b) { return a * reciprocal(b); }
  friend Jet operator/(double s, const Jet& b) { return reciprocal(b) * s; }

  /// sum_k coeffs[k] * h^k with h = this - value(); coeffs are the Taylor
  /// coefficients of the outer function at value().
  Jet compose(std::span<const double> coeffs) const {
    const Jet h = increment();
    const std::size_t top = std::min<std::size_t>(coeffs.size(), order() + 1);
    Jet out = constant(nvars(), order(), top ? coeffs[top - 1] : 0.0);
    for (std::size_t k = top; k-- > 1;) {
      out = out * h;
      out.c_[0] += coeffs[k - 1];
    }
    return out;
  }

  static Jet reciprocal(const Jet& b) {
    const double b0 = b.value();
    if (b0 == 0.0) fail(Errc::DivisionBySingularSeries, "divisor has zero constant term");
    std::vector<double> coeffs(b.order() + 1);
    double p = 1.0 / b0;
    for (unsigned k = 0; k <= b.order(); ++k) {
      coeffs[k] = (k % 2 ? -p : p);
      p /= b0;
    }
    return b.compose(coeffs);
  }

 private:
  void check_shape(const Jet& o) const {
    if (layout_ != o.layout_) {
      fail(Errc::ShapeMismatch, "jet shapes differ: (" + std::to_string(nvars()) + "," +
                                    std::to_string(order()) + ") vs (" + std::to_string(o.nvars()) +
                                    "," + std::to_string(o.order()) + ")");
    }
  }

  const JetLayout* layout_;
  std::vector<double> c_;
};

// Elementary functions.  Each composes the outer Taylor series at the
// constant term with the increment.

inline Jet exp(const Jet& a) {
  std::vector<double> c(a.order() + 1);
  double v = std::exp(a.value());
  for (unsigned k = 0; k <= a.order(); ++k) {
    c[k] = v;
    v /= (k + 1);
  }
  return a.compose(c);
}

inline Jet log(const Jet& a) {
  const double a0 = a.value();
  if (!(a0 > 0.0)) fail(Errc::DomainError, "logarithm of non-positive value " + std::to_string(a0));
  std::vector<double> c(a.order() + 1);
  c[0] = std::log(a0);
  double p = 1.0;
  for (unsigned k = 1; k <= a.order(); ++k) {
    p /= a0;
    c[k] = (k % 2 ? 1.0 : -1.0) * p / k;
  }
  return a.compose(c);
}

/// Real power a^r for a positive constant term.
inline Jet pow(const Jet& a, double r) {
  const double a0 = a.value();
  if (!(a0 > 0.0)) {
    fail(Errc::DomainError, "real power of non-positive value " + std::to_string(a0));
  }
  std::vector<double> c(a.order() + 1);
  double binom = 1.0;
  for (unsigned k = 0; k <= a.order(); ++k) {
    c[k] = binom * std::pow(a0, r - k);
    binom *= (r - k) / (k + 1);
  }
  return a.compose(c);
}

inline Jet sqrt(const Jet& a) { return pow(a, 0.5); }

/// Integer power; negative exponents need a nonzero constant term.
inline Jet powi(const Jet& a, long n) {
  if (n < 0) return powi(Jet::reciprocal(a), -n);
  Jet result = Jet::constant(a.nvars(), a.order(), 1.0);
  Jet base = a;
  while (n > 0) {
    if (n & 1) result = result * base;
    n >>= 1;
    if (n) base = base * base;
  }
  return result;
}

inline Jet sin(const Jet& a) {
  std::vector<double> c(a.order() + 1);
  const double s = std::sin(a.value()), co = std::cos(a.value());
  const double cyc[4] = {s, co, -s, -co};
  double fact = 1.0;
  for (unsigned k = 0; k <= a.order(); ++k) {
    if (k > 0) fact *= k;
    c[k] = cyc[k % 4] / fact;
  }
  return a.compose(c);
}

inline Jet cos(const Jet& a) {
  std::vector<double> c(a.order() + 1);
  const double s = std::sin(a.value()), co = std::cos(a.value());
  const double cyc[4] = {co, -s, -co, s};
  double fact = 1.0;
  for (unsigned k = 0; k <= a.order(); ++k) {
    if (k > 0) fact *= k;
    c[k] = cyc[k % 4] / fact;
  }
  return a.compose(c);
}

/// |a| is smooth only away from a zero constant term.
inline Jet abs(const Jet& a) {
  if (a.value() == 0.0) fail(Errc::DomainError, "abs is not smooth at 0");
  return a.value() > 0 ? a : -a;
}

/// Substitute jets h_i for the variables of the polynomial `p`:
/// returns sum_m p_m * prod_i h_i^{m_i}, in the shape of the h_i.
inline Jet compose_polynomial(const Jet& p, std::span<const Jet> h) {
  if (h.size() != p.nvars()) fail(Errc::ShapeMismatch, "substitution arity mismatch");
  if (h.empty()) fail(Errc::ShapeMismatch, "empty substitution");
  for (const Jet& hi : h) {
    if (!hi.same_shape(h[0])) fail(Errc::ShapeMismatch, "substitution jets differ in shape");
  }
  const unsigned n = h[0].nvars(), order = h[0].order();
  std::vector<std::vector<Jet>> powers(h.size());
  for (std::size_t i = 0; i < h.size(); ++i) {
    powers[i].push_back(Jet::constant(n, order, 1.0));
    for (unsigned k = 1; k <= p.order(); ++k) powers[i].push_back(powers[i].back() * h[i]);
  }
  Jet out(n, order);
  const JetLayout& L = p.layout();
  for (std::size_t idx = 0; idx < L.size(); ++idx) {
    const double c = p.coeff_at(idx);
    if (c == 0.0) continue;
    Jet term = Jet::constant(n, order, c);
    const MultiIndex& m = L.monomial(idx);
    for (std::size_t i = 0; i < h.size(); ++i) {
      if (m[i]) term = term * powers[i][m[i]];
    }
    out += term;
  }
  return out;
}

}  // namespace singfield
