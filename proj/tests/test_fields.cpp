#include <gtest/gtest.h>

#include <random>

#include "fixtures.hpp"
#include "random_expr.hpp"
#include "singfield/fields.hpp"

using namespace singfield;
using namespace testsupport;

namespace {

const std::vector<std::string> kTXP{"t", "x", "p"};

ScalarField lagrangian(const std::string& s) { return ScalarField::from_expression(Expression::parse(s, kTXP)); }

std::vector<Point> points_on_plane(int n, unsigned seed) {
  // samples of x + y + z = 0
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-2, 2);
  std::vector<Point> out;
  for (int i = 0; i < n; ++i) {
    const double a = u(rng), b = u(rng);
    out.push_back({a, b, -a - b});
  }
  return out;
}

std::vector<Point> points_on_parabolic_cylinder(int n, unsigned seed) {
  // samples of x = y^2
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-2, 2);
  std::vector<Point> out;
  for (int i = 0; i < n; ++i) {
    const double y = u(rng);
    out.push_back({y * y, y, u(rng)});
  }
  return out;
}

std::vector<Point> random_points(int n, unsigned seed, double lo = -2, double hi = 2) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(lo, hi);
  std::vector<Point> out;
  for (int i = 0; i < n; ++i) out.push_back({u(rng), u(rng), u(rng)});
  return out;
}

}  // namespace

TEST(SingularField, RejectsNonPositiveExponentByDefault) {
  EXPECT_THROW(radial(0.0), Error);
  EXPECT_THROW(radial(-1.0), Error);
  EXPECT_NO_THROW(SingularField(radial_node(), scalar3("x"), -1.0, true));
}

TEST(EvalW, RadialNodeDivergence) {
  // D_W = (3 - r) f^{-r} with f = 1 at (1, 0, 0)
  const auto e = radial(2).eval_w(std::vector<double>{1, 0, 0});
  EXPECT_NEAR(e.div_w_direct, 1.0, 1e-14);
  EXPECT_NEAR(e.div_w_identity, 1.0, 1e-14);
  EXPECT_NEAR(e.fr_div_w, 1.0, 1e-14);
  EXPECT_LE(e.identity_residual, 1e-14 * e.identity_scale);
  EXPECT_EQ(e.w, (std::vector<double>{1, 0, 0}));
}

TEST(EvalW, AnisotropicNodeCriticalExponent) {
  const auto sf = anisotropic(1.5, "x - y^2");
  for (const Point& x : random_points(20, 3)) {
    if (sf.on_surface(x)) continue;
    EXPECT_NEAR(sf.eval_w(x).fr_div_w, 0.0, 1e-12);
  }
  const auto sf3 = anisotropic(3, "y");
  EXPECT_NEAR(sf3.eval_w(std::vector<double>{0.3, 0.7, -1.1}).fr_div_w, 0.0, 1e-13);
}

TEST(EvalW, OnSurfaceRejected) {
  try {
    (void)radial(2).eval_w(std::vector<double>{1, -1, 0});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::OnSingularSurface);
  }
}

TEST(EvalW, NonIntegerExponentNegativeSide) {
  // |f|^{-r} convention: f^r D_W is still 3 - 2r for the anisotropic node
  const auto sf = anisotropic(1.25, "x - y^2");
  EXPECT_NEAR(sf.eval_w(std::vector<double>{-0.5, 0.2, 0}).fr_div_w, 3 - 2 * 1.25, 1e-13);
  EXPECT_NEAR(sf.eval_w(std::vector<double>{0.5, 0.2, 0}).fr_div_w, 3 - 2 * 1.25, 1e-13);
}

TEST(DivergenceIdentity, RandomFields) {
  std::mt19937_64 rng(21);
  std::uniform_real_distribution<double> u(-1, 1), ru(0.5, 3.5);
  int checked = 0;
  for (int trial = 0; trial < 20; ++trial) {
    const auto v = field3(random_smooth_expr(rng, 2), random_smooth_expr(rng, 2), random_smooth_expr(rng, 2));
    const auto f = scalar3("x + 0.5*y*z - 0.2 + " + random_smooth_expr(rng, 1) + "*0.1");
    const double r = trial % 2 ? std::round(ru(rng)) : ru(rng);
    const SingularField sf(v, f, r);
    for (int k = 0; k < 10; ++k) {
      const Point x{u(rng), u(rng), u(rng)};
      if (std::abs(f.value(x)) < 1e-3) continue;
      const auto e = sf.eval_w(x);
      EXPECT_LE(e.identity_residual, 1e-9 * e.identity_scale);
      ++checked;
    }
  }
  EXPECT_GT(checked, 150);
}

TEST(GammaInvariant, RadialNodePlane) {
  EXPECT_TRUE(radial(2).check_gamma_invariant(points_on_plane(20, 1), 1e-8).passed);
}

TEST(GammaInvariant, AnisotropicNodeParabolicCylinder) {
  EXPECT_TRUE(anisotropic(1.5, "x - y^2").check_gamma_invariant(points_on_parabolic_cylinder(20, 2), 1e-8).passed);
}

TEST(GammaInvariant, TransversalFlowFails) {
  const SingularField sf(field3("1", "0", "0"), scalar3("x"), 1.0);
  EXPECT_FALSE(sf.check_gamma_invariant({{0, 0, 0}, {0, 1, 2}}, 1e-8).passed);
}

TEST(GammaInvariant, DegenerateGradient) {
  const SingularField sf(radial_node(), scalar3("x^2"), 1.0);
  try {
    (void)sf.check_gamma_invariant({{0, 1, 0}}, 1e-8);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::DegenerateGradient);
  }
}

TEST(GammaInvariant, ProjectionLandsOnSurface) {
  const auto f = scalar3("x - y^2 + 0.1*z^3");
  const Point p = project_to_surface(f, {0.7, 0.3, 0.5});
  EXPECT_LE(std::abs(f.value(p)), 1e-13);
}

TEST(FirstIntegral, CenterCoordinate) {
  const auto sf = anisotropic(2, "z");
  const auto rep = sf.check_first_integral(random_points(30, 4), 1e-8);
  EXPECT_TRUE(rep.passed);
  EXPECT_TRUE(rep.tests_agree);
  const auto e = sf.eval_w(std::vector<double>{0.1, 0.2, 0.3});
  EXPECT_NEAR(e.fr_div_w, 3.0, 1e-13);
  EXPECT_NEAR(e.div_v, 3.0, 1e-15);
}

TEST(FirstIntegral, PlaneIsNotAFirstIntegral) {
  const auto rep = radial(2).check_first_integral(random_points(30, 5), 1e-8);
  EXPECT_FALSE(rep.passed);
  EXPECT_FALSE(rep.lie_test);
  EXPECT_FALSE(rep.divergence_test);
  EXPECT_TRUE(rep.tests_agree);
}

TEST(FirstIntegral, ResonantMonomial) {
  for (double r : {0.5, 1.0, 2.5}) {
    const SingularField sf(saddle(), scalar3("x*y"), r);
    const auto rep = sf.check_first_integral(random_points(30, 6), 1e-8);
    EXPECT_TRUE(rep.passed);
    EXPECT_NEAR(sf.eval_w(std::vector<double>{0.4, 0.5, 0}).div_v, 0.0, 1e-15);
  }
}

TEST(Conditions, RadialNodeCriticalExponent) {
  const Point o{0, 0, 0};
  EXPECT_TRUE(radial(3).check_conditions_at_singular_point(o, 1e-8).passed);
  const auto rep = radial(2).check_conditions_at_singular_point(o, 1e-8);
  EXPECT_FALSE(rep.passed);
  EXPECT_NEAR(rep.limits.front().limit, 1.0, 1e-6);  // f^r D_W = 3 - r
}

TEST(Conditions, AnisotropicNode) {
  for (double z : {0.0, 2.5}) {
    const Point xs{0, 0, z};
    EXPECT_TRUE(anisotropic(1.5, "x - y^2").check_conditions_at_singular_point(xs, 1e-8).passed);
    EXPECT_TRUE(anisotropic(3, "y").check_conditions_at_singular_point(xs, 1e-8).passed);
    EXPECT_FALSE(anisotropic(2, "x - y^2").check_conditions_at_singular_point(xs, 1e-8).passed);
  }
  const auto rep = anisotropic(2, "z").check_conditions_at_singular_point(Point{0, 0, 0}, 1e-8);
  EXPECT_FALSE(rep.passed);
  EXPECT_NEAR(rep.limits.front().limit, 3.0, 1e-6);
}

TEST(Conditions, RequiresSingularPoint) {
  EXPECT_THROW(radial(3).check_conditions_at_singular_point(Point{1, -1, 0}, 1e-8), Error);
}

TEST(Conditions, InvariantUnderNonvanishingFactor) {
  const auto phi = scalar3("1 + x^2");
  struct Case {
    VectorField v;
    std::string f;
    double r;
    Point xs;
  };
  const std::vector<Case> cases = {{radial_node(), "x + y + z", 3, {0, 0, 0}},
                                   {radial_node(), "x + y + z", 2, {0, 0, 0}},
                                   {anisotropic_node(), "x - y^2", 1.5, {0, 0, 1}},
                                   {anisotropic_node(), "y", 3, {0, 0, 1}},
                                   {anisotropic_node(), "z", 2, {0, 0, 0}}};
  for (const Case& c : cases) {
    const SingularField plain(c.v, scalar3(c.f), c.r), scaled(c.v.scaled(phi), scalar3(c.f), c.r);
    EXPECT_EQ(plain.check_conditions_at_singular_point(c.xs, 1e-8).passed,
              scaled.check_conditions_at_singular_point(c.xs, 1e-8).passed)
        << c.f << " r=" << c.r;
  }
  EXPECT_EQ(radial(2).check_gamma_invariant(points_on_plane(10, 8), 1e-8).passed,
            SingularField(radial_node().scaled(phi), scalar3("x + y + z"), 2)
                .check_gamma_invariant(points_on_plane(10, 8), 1e-8)
                .passed);
}

TEST(EulerLagrange, FreeParticle) {
  const auto lift = euler_lagrange_lift(lagrangian("p^2/2"));
  const Point x{0.3, -1.0, 0.7};
  const auto w = lift.w.value(x);
  EXPECT_NEAR(w[0], 1.0, 1e-15);
  EXPECT_NEAR(w[1], 0.7, 1e-15);
  EXPECT_NEAR(w[2], 0.0, 1e-15);
  EXPECT_NEAR(lift.divergence_at(x), 0.0, 1e-15);
}

TEST(EulerLagrange, DivergenceFree) {
  std::mt19937_64 rng(9);
  std::uniform_real_distribution<double> u(-2, 2), tpos(0.2, 2);
  const auto arc = euler_lagrange_lift(lagrangian("sqrt(p^2 + 1)"));
  const auto klein = euler_lagrange_lift(lagrangian("sqrt(p^2 + 1)/t"));
  const auto mixed = euler_lagrange_lift(lagrangian("exp(x)*sqrt(p^2 + 1 + t^2) + t*x*p"));
  for (int i = 0; i < 100; ++i) {
    const Point x{tpos(rng), u(rng), u(rng)};
    EXPECT_NEAR(arc.divergence_at(x), 0.0, 1e-12);
    EXPECT_NEAR(klein.divergence_at(x), 0.0, 1e-9);
    const double scale = std::max(1.0, norm2(mixed.w.value(x)));
    EXPECT_NEAR(mixed.divergence_at(x), 0.0, 1e-8 * scale);
  }
}

TEST(EulerLagrange, DomainErrorPropagates) {
  const auto lift = euler_lagrange_lift(lagrangian("ln(t)*p^2"));
  EXPECT_THROW((void)lift.w.value(Point{-1, 0, 0}), Error);
}

TEST(ImplicitLift, ParabolicEquation) {
  const auto v = implicit_ode_lift(lagrangian("p^2 - t"));
  std::mt19937_64 rng(10);
  std::uniform_real_distribution<double> u(-2, 2);
  for (int i = 0; i < 10; ++i) {
    const Point x{u(rng), u(rng), u(rng)};
    const auto w = v.value(x);
    EXPECT_NEAR(w[0], 2 * x[2], 1e-14);
    EXPECT_NEAR(w[1], 2 * x[2] * x[2], 1e-13);
    EXPECT_NEAR(w[2], 1.0, 1e-14);
  }
}

TEST(ImplicitLift, LinearEquationAndSingularPoints) {
  const auto v = implicit_ode_lift(lagrangian("p"));
  const auto w = v.value(Point{1, 2, 3});
  EXPECT_EQ(w, (std::vector<double>{1, 3, 0}));
  // F = p^2 + t^2 - x: F_p = 2p, F_t + pF_x = 2t - p; both vanish at (0, x, 0)
  const auto s = implicit_ode_lift(lagrangian("p^2 + t^2 - x"));
  EXPECT_LE(norm2(s.value(Point{0, 0.7, 0})), 1e-15);
}
