#pragma once

#include <string>
#include <vector>

#include "singfield/jet.hpp"

namespace singfield {

/// Vector field expanded as one jet per component at a common base point.
/// All components share nvars == dim and the same order.
struct SeriesVectorField {
  std::vector<double> base;
  std::vector<Jet> components;
  std::vector<std::string> labels;

  SeriesVectorField() = default;
  SeriesVectorField(std::vector<double> base_point, std::vector<Jet> comps,
                    std::vector<std::string> names = {})
      : base(std::move(base_point)), components(std::move(comps)), labels(std::move(names)) {
    validate();
  }

  unsigned dim() const { return static_cast<unsigned>(components.size()); }
  unsigned order() const { return components.empty() ? 0 : components.front().order(); }
  const Jet& operator[](std::size_t i) const { return components[i]; }

  void validate() const {
    if (components.empty()) fail(Errc::ShapeMismatch, "series field has no components");
    for (const Jet& c : components) {
      if (c.nvars() != components.size() || !c.same_shape(components.front())) {
        fail(Errc::ShapeMismatch, "series field components must share nvars == dim and order");
      }
    }
    if (!base.empty() && base.size() != components.size()) {
      fail(Errc::ShapeMismatch, "base point dimension differs from field dimension");
    }
  }

  SeriesVectorField truncated(unsigned order) const {
    SeriesVectorField out = *this;
    for (Jet& c : out.components) c = c.truncated(order);
    return out;
  }
};

/// L_V U = sum_i V_i dU/dx_i.  Differentiation lowers the order by one, so the
/// result has order min(order(U), order(V)) - 1.
inline Jet lie_derivative(const Jet& u, const SeriesVectorField& v) {
  if (u.nvars() != v.dim()) fail(Errc::ShapeMismatch, "Lie derivative: nvars differs from dim");
  if (u.order() == 0 || v.order() == 0) fail(Errc::ShapeMismatch, "Lie derivative needs order >= 1");
  const unsigned order = std::min(u.order(), v.order()) - 1;
  Jet out(u.nvars(), order);
  for (unsigned i = 0; i < v.dim(); ++i) {
    out += v[i].truncated(order) * u.partial(i).truncated(order);
  }
  return out;
}

/// sum_i dV_i/dx_i as a jet of order order(V) - 1.
inline Jet divergence(const SeriesVectorField& v) {
  if (v.order() == 0) fail(Errc::ShapeMismatch, "divergence needs order >= 1");
  Jet out(v.dim(), v.order() - 1);
  for (unsigned i = 0; i < v.dim(); ++i) out += v[i].partial(i);
  return out;
}

}  // namespace singfield
