#pragma once

// Smooth scalar and vector fields on R^dim, evaluated as jets at a point.
//
// A field is a callable (point, order) -> jet(s).  Expression-backed fields
// compose the expression with coordinate jets; derived fields (Lagrangian
// lifts, model fields) evaluate their ingredients at a higher order and
// differentiate.

#include <cmath>
#include <functional>
#include <memory>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "singfield/expr.hpp"
#include "singfield/jet.hpp"
#include "singfield/series_field.hpp"

namespace singfield {

using Point = std::vector<double>;

inline double norm2(std::span<const double> v) {
  double s = 0;
  for (double x : v) s += x * x;
  return std::sqrt(s);
}

class ScalarField {
 public:
  using Fn = std::function<Jet(std::span<const double>, unsigned)>;
  using JetFn = std::function<Jet(std::span<const Jet>)>;

  ScalarField() = default;
  ScalarField(unsigned dim, Fn fn) : dim_(dim), fn_(std::make_shared<Fn>(std::move(fn))) {}

  /// Field given by a composition rule on coordinate jets.
  static ScalarField from_jets(unsigned dim, JetFn fn) {
    return ScalarField(dim, [fn = std::move(fn)](std::span<const double> x, unsigned order) {
      const std::vector<Jet> vars = Jet::variables(x, order);
      return fn(vars);
    });
  }

  static ScalarField from_expression(const Expression& e) {
    return from_jets(e.arity(), [e](std::span<const Jet> v) { return e.eval(v); });
  }

  unsigned dim() const { return dim_; }

  Jet jet(std::span<const double> x, unsigned order) const {
    check_point(x);
    return (*fn_)(x, order);
  }
  double value(std::span<const double> x) const { return jet(x, 0).value(); }

  std::vector<double> gradient(std::span<const double> x) const {
    const Jet j = jet(x, 1);
    std::vector<double> g(dim_);
    for (unsigned i = 0; i < dim_; ++i) {
      MultiIndex m{};
      m[i] = 1;
      g[i] = j.coeff(m);
    }
    return g;
  }

  ScalarField operator*(const ScalarField& o) const {
    auto a = *this, b = o;
    return ScalarField(dim_, [a, b](std::span<const double> x, unsigned order) {
      return a.jet(x, order) * b.jet(x, order);
    });
  }

 private:
  void check_point(std::span<const double> x) const {
    if (x.size() != dim_) fail(Errc::ShapeMismatch, "point dimension differs from field dimension");
  }

  unsigned dim_ = 0;
  std::shared_ptr<const Fn> fn_;
};

class VectorField {
 public:
  using Fn = std::function<std::vector<Jet>(std::span<const double>, unsigned)>;
  using JetFn = std::function<std::vector<Jet>(std::span<const Jet>)>;

  VectorField() = default;
  VectorField(unsigned dim, Fn fn) : dim_(dim), fn_(std::make_shared<Fn>(std::move(fn))) {}

  static VectorField from_jets(unsigned dim, JetFn fn) {
    return VectorField(dim, [fn = std::move(fn)](std::span<const double> x, unsigned order) {
      const std::vector<Jet> vars = Jet::variables(x, order);
      return fn(vars);
    });
  }

  static VectorField from_expressions(std::vector<Expression> comps) {
    if (comps.empty()) fail(Errc::ShapeMismatch, "vector field needs components");
    const unsigned dim = static_cast<unsigned>(comps.size());
    for (const Expression& e : comps) {
      if (e.arity() != dim) fail(Errc::ShapeMismatch, "component arity differs from field dimension");
    }
    return from_jets(dim, [comps = std::move(comps)](std::span<const Jet> v) {
      std::vector<Jet> out;
      out.reserve(comps.size());
      for (const Expression& e : comps) out.push_back(e.eval(v));
      return out;
    });
  }

  unsigned dim() const { return dim_; }

  std::vector<Jet> jets(std::span<const double> x, unsigned order) const {
    if (x.size() != dim_) fail(Errc::ShapeMismatch, "point dimension differs from field dimension");
    std::vector<Jet> out = (*fn_)(x, order);
    if (out.size() != dim_) fail(Errc::ShapeMismatch, "field returned wrong number of components");
    return out;
  }

  SeriesVectorField series(std::span<const double> x, unsigned order) const {
    return SeriesVectorField(Point(x.begin(), x.end()), jets(x, order));
  }

  std::vector<double> value(std::span<const double> x) const {
    std::vector<double> v;
    for (const Jet& j : jets(x, 0)) v.push_back(j.value());
    return v;
  }

  Eigen::MatrixXd jacobian(std::span<const double> x) const {
    const std::vector<Jet> js = jets(x, 1);
    Eigen::MatrixXd A(dim_, dim_);
    for (unsigned i = 0; i < dim_; ++i) {
      for (unsigned k = 0; k < dim_; ++k) {
        MultiIndex m{};
        m[k] = 1;
        A(i, k) = js[i].coeff(m);
      }
    }
    return A;
  }

  double divergence_at(std::span<const double> x) const { return divergence(series(x, 1)).value(); }

  /// phi * V, an orbitally equivalent field when phi never vanishes.
  VectorField scaled(const ScalarField& phi) const {
    auto v = *this;
    return VectorField(dim_, [v, phi](std::span<const double> x, unsigned order) {
      std::vector<Jet> js = v.jets(x, order);
      const Jet p = phi.jet(x, order);
      for (Jet& j : js) j = j * p;
      return js;
    });
  }

  VectorField scaled(double c) const {
    auto v = *this;
    return VectorField(dim_, [v, c](std::span<const double> x, unsigned order) {
      std::vector<Jet> js = v.jets(x, order);
      for (Jet& j : js) j *= c;
      return js;
    });
  }

 private:
  unsigned dim_ = 0;
  std::shared_ptr<const Fn> fn_;
};

/// L_V f as a jet of order `order` (V and f are expanded one order higher).
inline Jet lie_derivative(const ScalarField& f, const VectorField& v, std::span<const double> x,
                          unsigned order) {
  return lie_derivative(f.jet(x, order + 1), v.series(x, order + 1));
}

}  // namespace singfield
