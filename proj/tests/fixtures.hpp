#pragma once

// Shared field fixtures: the radial node (x, y, z), the anisotropic node
// (2x, y, 0), and the divergence-free saddle (xi, -eta, 0).

#include <string>
#include <vector>

#include "singfield/fields.hpp"

namespace testsupport {

inline const std::vector<std::string> kXYZ{"x", "y", "z"};

inline singfield::VectorField field3(const std::string& a, const std::string& b, const std::string& c) {
  using singfield::Expression;
  return singfield::VectorField::from_expressions(
      {Expression::parse(a, kXYZ), Expression::parse(b, kXYZ), Expression::parse(c, kXYZ)});
}

inline singfield::ScalarField scalar3(const std::string& s) {
  return singfield::ScalarField::from_expression(singfield::Expression::parse(s, kXYZ));
}

inline singfield::VectorField radial_node() { return field3("x", "y", "z"); }
inline singfield::VectorField anisotropic_node() { return field3("2*x", "y", "0"); }
inline singfield::VectorField saddle() { return field3("x", "-y", "0"); }

inline singfield::SingularField radial(double r, const std::string& f = "x + y + z") {
  return singfield::SingularField(radial_node(), scalar3(f), r);
}

inline singfield::SingularField anisotropic(double r, const std::string& f) {
  return singfield::SingularField(anisotropic_node(), scalar3(f), r);
}

}  // namespace testsupport
