#pragma once

// Singular 2D metrics and their desingularized geodesic fields.
//
// Each model lives on a phase space (q0, q1, p) with p the slope dq1/dq0 and
// exposes the smooth field V, the surface function f of the relation
// W = f^{-r} V, and a Lagrangian form in which W is the Euler-Lagrange lift
// of an explicit Lagrangian.

#include <array>
#include <cmath>
#include <functional>
#include <memory>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "singfield/fields.hpp"
#include "singfield/normalform.hpp"
#include "singfield/spectral.hpp"

namespace singfield {

/// Explicit Lagrangian picture of a model: W is the Euler-Lagrange lift of
/// `lagrangian`, and W = orientation * f^{-r} V on `in_domain`.
struct LagrangianForm {
  std::array<std::string, 3> names;
  ScalarField lagrangian;
  VectorField w;
  VectorField v;
  ScalarField f;
  double r = 1.5;
  double orientation = 1;
  std::function<bool(std::span<const double>)> in_domain;
  std::array<double, 3> box_lo{-1, -1, -1}, box_hi{1, 1, 1};  ///< sampling box
};

class MetricModel {
 public:
  virtual ~MetricModel() = default;
  virtual std::string kind() const = 0;
  virtual std::array<std::string, 3> phase_names() const = 0;
  virtual LagrangianForm lagrangian_form() const = 0;
  /// (mu_0, mu_1, mu_2, mu_3) of M(q, p) at a base point q.
  virtual std::array<double, 4> cubic(std::span<const double> q) const = 0;

  const VectorField& field() const { return v_; }
  const ScalarField& surface() const { return f_; }
  double exponent() const { return r_; }
  SingularField singular_field() const { return SingularField(v_, f_, r_); }

 protected:
  VectorField v_;
  ScalarField f_;
  double r_ = 1.5;
};

namespace geo_detail {

inline const std::vector<std::string> kTX{"t", "x"};
inline const std::vector<std::string> kXY{"x", "y"};

/// Value (order k) and first partials in the two base variables of a
/// coefficient expression composed with order-(k+1) base jets.
struct Coef {
  Jet v, d0, d1;
};

inline Coef coef(const Expression& e, const Jet& q0, const Jet& q1, unsigned k) {
  const Jet args[2] = {q0, q1};
  const Jet j = e.eval(std::span<const Jet>(args, 2));
  return {j.truncated(k), j.partial(0), j.partial(1)};
}

inline void require_base_vars(const Expression& e, const std::vector<std::string>& names, const char* what) {
  if (e.free_vars() != names) {
    fail(Errc::InvalidArgument, std::string(what) + " must be an expression in (" + names[0] + ", " + names[1] + ")");
  }
}

inline Jet cubic_in_p(const std::array<Jet, 4>& mu, const Jet& p) { return ((mu[3] * p + mu[2]) * p + mu[1]) * p + mu[0]; }

inline std::array<double, 4> values(const std::array<Jet, 4>& mu) {
  return {mu[0].value(), mu[1].value(), mu[2].value(), mu[3].value()};
}

}  // namespace geo_detail

// ---------------------------------------------------------------------------
// Pseudo-Riemannian metric a dx^2 + 2 b dx dt + c dt^2 on (t, x).

class PseudoModel : public MetricModel {
 public:
  struct Parts {
    geo_detail::Coef a, b, c;
    Jet p;
    Jet delta() const { return b.v * b.v - a.v * c.v; }
    Jet F() const { return (a.v * p + 2.0 * b.v) * p + c.v; }
    std::array<Jet, 4> mu() const {
      return {c.v * (2.0 * b.d0 - c.d1) - b.v * c.d0, b.v * (2.0 * b.d0 - 3.0 * c.d1) + 2.0 * c.v * a.d0 - a.v * c.d0,
              b.v * (3.0 * a.d0 - 2.0 * b.d1) + c.v * a.d1 - 2.0 * a.v * c.d1, a.v * (a.d0 - 2.0 * b.d1) + b.v * a.d1};
    }
  };

  PseudoModel(Expression a, Expression b, Expression c) : a_(std::move(a)), b_(std::move(b)), c_(std::move(c)) {
    geo_detail::require_base_vars(a_, geo_detail::kTX, "a");
    geo_detail::require_base_vars(b_, geo_detail::kTX, "b");
    geo_detail::require_base_vars(c_, geo_detail::kTX, "c");
    auto self = *this;
    v_ = VectorField(3, [self](std::span<const double> x, unsigned k) {
      const Parts P = self.parts(x, k);
      const Jet d = P.delta();
      return std::vector<Jet>{d, P.p * d, 0.5 * geo_detail::cubic_in_p(P.mu(), P.p)};
    });
    f_ = ScalarField(3, [self](std::span<const double> x, unsigned k) { return self.parts(x, k).F(); });
    r_ = 1.5;
  }

  static PseudoModel parse(const std::string& a, const std::string& b, const std::string& c) {
    return PseudoModel(Expression::parse(a, geo_detail::kTX), Expression::parse(b, geo_detail::kTX),
                       Expression::parse(c, geo_detail::kTX));
  }

  std::string kind() const override { return "pseudo"; }
  std::array<std::string, 3> phase_names() const override { return {"t", "x", "p"}; }

  Parts parts(std::span<const double> x, unsigned k) const {
    const Jet T = Jet::variable(3, k + 1, 0, x[0]), X = Jet::variable(3, k + 1, 1, x[1]);
    return {geo_detail::coef(a_, T, X, k), geo_detail::coef(b_, T, X, k), geo_detail::coef(c_, T, X, k),
            Jet::variable(3, k, 2, x[2])};
  }

  std::array<double, 4> cubic(std::span<const double> q) const override {
    const double x[3] = {q[0], q[1], 0.0};
    return geo_detail::values(parts(x, 0).mu());
  }

  LagrangianForm lagrangian_form() const override {
    auto self = *this;
    LagrangianForm L;
    L.names = {"t", "x", "p"};
    L.lagrangian = ScalarField(3, [self](std::span<const double> x, unsigned k) { return sqrt(self.parts(x, k).F()); });
    L.w = VectorField(3, [self](std::span<const double> x, unsigned k) {
      const Parts P = self.parts(x, k);
      const Jet s = pow(P.F(), -1.5);
      const Jet d = P.delta();
      return std::vector<Jet>{-1.0 * d * s, -1.0 * P.p * d * s, -0.5 * geo_detail::cubic_in_p(P.mu(), P.p) * s};
    });
    L.v = v_;
    L.f = f_;
    L.r = 1.5;
    L.orientation = -1;  // the desingularized field is -F^{3/2} W
    L.in_domain = [self](std::span<const double> x) { return self.parts(x, 0).F().value() > 1e-2; };
    return L;
  }

 private:
  Expression a_, b_, c_;
};

/// Real roots of mu3 p^3 + mu2 p^2 + mu1 p + mu0, lower degree when the
/// leading coefficients vanish relative to the others.
inline std::vector<double> real_roots_of_cubic(const std::array<double, 4>& mu, bool* double_root = nullptr) {
  const double scale = std::max({std::abs(mu[0]), std::abs(mu[1]), std::abs(mu[2]), std::abs(mu[3]), 1e-300});
  std::vector<double> out;
  if (double_root) *double_root = false;
  if (std::abs(mu[3]) > 1e-12 * scale) {
    const auto roots = spectral_detail::cubic_roots(mu[2] / mu[3], mu[1] / mu[3], mu[0] / mu[3]);
    for (cplx z : roots) {
      if (z.imag() == 0.0) out.push_back(z.real());
    }
  } else if (std::abs(mu[2]) > 1e-12 * scale) {
    for (cplx z : spectral_detail::quadratic_roots(mu[1] / mu[2], mu[0] / mu[2])) {
      if (z.imag() == 0.0) out.push_back(z.real());
    }
  } else if (std::abs(mu[1]) > 1e-12 * scale) {
    out.push_back(-mu[0] / mu[1]);
  }
  std::sort(out.begin(), out.end());
  for (std::size_t i = 1; i < out.size(); ++i) {
    if (std::abs(out[i] - out[i - 1]) <= 1e-9 * std::max(1.0, std::abs(out[i])) && double_root) *double_root = true;
  }
  return out;
}

struct SingularBranch {
  std::string label;  ///< "W0" for the isotropic root, "W+" / "W-" otherwise
  Point point;
  std::vector<cplx> eigenvalues;
  double trace_residual = 0;  ///< |lambda_1 + lambda_2| at W+-
  std::optional<double> psi;  ///< resonant saddle coefficient at W+-
  std::optional<double> phi;  ///< node coefficient at W0
  bool sigma_in_spectrum = false;
  bool ratio_two_to_one = false;
};

struct PseudoStructure {
  Point q;
  double p0 = 0;
  double sigma = 0;            ///< Delta_t + p0 Delta_x
  double transversality = 0;   ///< a Delta_t - b Delta_x
  double p0_residual = 0;      ///< |M(q, p0)|
  std::vector<double> roots;   ///< real roots of M(q, .)
  bool degenerate = false;     ///< double root of M(q, .)
  std::vector<SingularBranch> branches;
};

/// Singular points of the pseudo-Riemannian field over a parabolic point q*.
inline PseudoStructure pseudo_singular_structure(const PseudoModel& m, std::span<const double> q,
                                                 double tol = 1e-8) {
  const double x0[3] = {q[0], q[1], 0.0};
  const auto P = m.parts(x0, 1);
  const double a = P.a.v.value(), b = P.b.v.value(), c = P.c.v.value();
  const double scale = std::max({std::abs(a), std::abs(b), std::abs(c), 1.0});
  if (std::abs(a) <= 1e-12 * scale) fail(Errc::DegenerateLeadingCoefficient, "a(q*) vanishes");
  const Jet d = P.delta();
  if (std::abs(d.value()) > tol * scale) fail(Errc::NotParabolic, "Delta(q*) != 0");
  const double dt = d.coeff(MultiIndex{1, 0, 0, 0}), dx = d.coeff(MultiIndex{0, 1, 0, 0});
  PseudoStructure out;
  out.q.assign(q.begin(), q.end());
  out.transversality = a * dt - b * dx;
  if (std::abs(out.transversality) <= 1e-10 * scale * scale) {
    fail(Errc::TangentIsotropicDirection, "isotropic direction is tangent to the parabolic curve");
  }
  out.p0 = -b / a;
  out.sigma = dt + out.p0 * dx;
  const auto mu = m.cubic(q);
  out.p0_residual = std::abs(((mu[3] * out.p0 + mu[2]) * out.p0 + mu[1]) * out.p0 + mu[0]);
  out.roots = real_roots_of_cubic(mu, &out.degenerate);
  if (out.degenerate) return out;

  const VectorField& v = m.field();
  for (double root : out.roots) {
    SingularBranch br;
    // Polish the root on the full field so the point is singular to rounding.
    br.point = {q[0], q[1], root};
    const bool isotropic = std::abs(root - out.p0) <= 1e-7 * std::max(1.0, std::abs(out.p0));
    if (isotropic) br.point[2] = out.p0;
    br.label = isotropic ? "W0" : (root > out.p0 ? "W+" : "W-");
    const SpectralReport rep = linearize(v, br.point, 1e-8);
    br.eigenvalues = rep.eigenvalues;
    const SeriesVectorField s = v.series(br.point, 2);
    std::vector<cplx> nz;
    for (cplx z : rep.eigenvalues) {
      if (z != 0.0) nz.push_back(z);
    }
    const double lscale = std::max(1.0, std::abs(rep.eigenvalues[0]) + std::abs(rep.eigenvalues[2]));
    if (isotropic) {
      for (cplx z : nz) br.sigma_in_spectrum = br.sigma_in_spectrum || std::abs(z - out.sigma) <= 1e-8 * lscale;
      if (nz.size() == 2) {
        const double ratio = std::abs(nz[0]) >= std::abs(nz[1]) ? std::abs(nz[0] / nz[1]) : std::abs(nz[1] / nz[0]);
        br.ratio_two_to_one = std::abs(ratio - 2.0) <= 1e-8;
      }
      try {
        br.phi = node_resonant_coefficient(s, 2);
      } catch (const Error&) {
      }
    } else {
      cplx sum = 0;
      for (cplx z : rep.eigenvalues) sum += z;
      br.trace_residual = std::abs(sum);
      try {
        br.psi = resonant_jet_coefficient(s);
      } catch (const Error&) {
      }
    }
    out.branches.push_back(std::move(br));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Klein-type metric (alpha dx^2 + gamma dt^2) / t^{2n}.

class KleinModel : public MetricModel {
 public:
  struct Parts {
    geo_detail::Coef alpha, gamma;
    Jet t, p;
    unsigned n;
    Jet F() const { return alpha.v * p * p + gamma.v; }
    std::array<Jet, 4> mu() const {
      const double n2 = 2.0 * n;
      return {-1.0 * t * gamma.v * gamma.d1, t * (2.0 * alpha.d0 * gamma.v - alpha.v * gamma.d0) - n2 * alpha.v * gamma.v,
              t * (alpha.d1 * gamma.v - 2.0 * alpha.v * gamma.d1), alpha.v * (t * alpha.d0 - n2 * alpha.v)};
    }
  };

  KleinModel(Expression alpha, Expression gamma, unsigned n) : alpha_(std::move(alpha)), gamma_(std::move(gamma)), n_(n) {
    geo_detail::require_base_vars(alpha_, geo_detail::kTX, "alpha");
    geo_detail::require_base_vars(gamma_, geo_detail::kTX, "gamma");
    if (n_ < 1) fail(Errc::InvalidArgument, "Klein exponent n must be a positive integer");
    auto self = *this;
    v_ = VectorField(3, [self](std::span<const double> x, unsigned k) {
      const Parts P = self.parts(x, k);
      const Jet M = geo_detail::cubic_in_p(P.mu(), P.p);
      return std::vector<Jet>{P.t, P.p * P.t, -1.0 * M / (2.0 * P.alpha.v * P.gamma.v)};
    });
    f_ = ScalarField(3, [self](std::span<const double> x, unsigned k) {
      const Parts P = self.parts(x, k);
      return P.t * pow(self.g(P), 1.0 / (self.n_ + 1.0));
    });
    r_ = n_ + 1.0;
  }

  static KleinModel parse(const std::string& alpha, const std::string& gamma, unsigned n) {
    return KleinModel(Expression::parse(alpha, geo_detail::kTX), Expression::parse(gamma, geo_detail::kTX), n);
  }

  std::string kind() const override { return "klein"; }
  std::array<std::string, 3> phase_names() const override { return {"t", "x", "p"}; }
  unsigned n() const { return n_; }

  Parts parts(std::span<const double> x, unsigned k) const {
    const Jet T = Jet::variable(3, k + 1, 0, x[0]), X = Jet::variable(3, k + 1, 1, x[1]);
    Parts P{geo_detail::coef(alpha_, T, X, k), geo_detail::coef(gamma_, T, X, k), Jet::variable(3, k, 0, x[0]),
            Jet::variable(3, k, 2, x[2]), n_};
    if (!(P.alpha.v.value() > 0) || !(P.gamma.v.value() > 0)) {
      fail(Errc::PositivityViolated, "alpha and gamma must be positive");
    }
    return P;
  }

  /// g = F^{3/2} / (alpha gamma)
  Jet g(const Parts& P) const { return pow(P.F(), 1.5) / (P.alpha.v * P.gamma.v); }

  std::array<double, 4> cubic(std::span<const double> q) const override {
    const double x[3] = {q[0], q[1], 0.0};
    return geo_detail::values(parts(x, 0).mu());
  }

  /// d gamma / dx at (0, x*), the criterion for phi(0) = 0 when n = 1.
  double gamma_x(double xstar) const {
    const double x[3] = {0.0, xstar, 0.0};
    return parts(x, 0).gamma.d1.value();
  }

  LagrangianForm lagrangian_form() const override {
    auto self = *this;
    const double n = n_;
    LagrangianForm L;
    L.names = {"t", "x", "p"};
    L.lagrangian = ScalarField(3, [self, n](std::span<const double> x, unsigned k) {
      const Parts P = self.parts(x, k);
      return sqrt(P.F()) * powi(P.t, -static_cast<long>(n));
    });
    L.w = VectorField(3, [self, n](std::span<const double> x, unsigned k) {
      const Parts P = self.parts(x, k);
      const Jet s = pow(P.F(), -1.5);
      const Jet ag = P.alpha.v * P.gamma.v;
      const Jet tn = powi(P.t, -static_cast<long>(n));
      const Jet M = geo_detail::cubic_in_p(P.mu(), P.p);
      return std::vector<Jet>{ag * tn * s, ag * P.p * tn * s, -0.5 * powi(P.t, -static_cast<long>(n) - 1) * M * s};
    });
    L.v = v_;
    L.f = f_;
    L.r = r_;
    L.orientation = 1;
    L.in_domain = [](std::span<const double> x) { return x[0] > 0.05; };
    L.box_lo = {0.05, -1, -1};
    L.box_hi = {1, 1, 1};
    return L;
  }

 private:
  Expression alpha_, gamma_;
  unsigned n_;
};

// ---------------------------------------------------------------------------
// Almost-Riemannian metric with orthonormal frame d/dx, 2x v^{-1} d/dy.
//
// The field is built on (x, y, p) with p = dy/dt, t = x^2.  Substituting the
// branch x = +sqrt(t) gives v~(t, y) = v(x, y) and t v~_t = x v_x / 2, so the
// cubic coefficients are smooth in x for any smooth v.

class AlmostModel : public MetricModel {
 public:
  struct Parts {
    geo_detail::Coef v;
    Jet x, p;
    std::array<Jet, 4> mu() const {
      const Jet vv = v.v;
      return {Jet(vv.nvars(), vv.order()), vv - 2.0 * x * v.d0, -2.0 * x * x * v.d1, vv * vv * vv - x * vv * vv * v.d0};
    }
  };

  explicit AlmostModel(Expression v) : v_expr_(std::move(v)) {
    geo_detail::require_base_vars(v_expr_, geo_detail::kXY, "v");
    auto self = *this;
    v_ = VectorField(3, [self](std::span<const double> x, unsigned k) {
      const Parts P = self.parts(x, k);
      return std::vector<Jet>{P.x * P.v.v, 2.0 * P.x * P.x * P.v.v * P.p, geo_detail::cubic_in_p(P.mu(), P.p)};
    });
    // Pulling the divergence-free field back through t = x^2 picks up the
    // volume factor 2x: 2x W = f^{-2} V with f = x F^{3/4} / sqrt(v).
    f_ = ScalarField(3, [self](std::span<const double> x, unsigned k) {
      const Parts P = self.parts(x, k);
      return P.x * pow(P.v.v * P.v.v * P.p * P.p + 1.0, 0.75) / sqrt(abs(P.v.v));
    });
    r_ = 2;
  }

  static AlmostModel parse(const std::string& v) { return AlmostModel(Expression::parse(v, geo_detail::kXY)); }

  std::string kind() const override { return "almost"; }
  std::array<std::string, 3> phase_names() const override { return {"x", "y", "p"}; }

  Parts parts(std::span<const double> x, unsigned k) const {
    const Jet X = Jet::variable(3, k + 1, 0, x[0]), Y = Jet::variable(3, k + 1, 1, x[1]);
    Parts P{geo_detail::coef(v_expr_, X, Y, k), Jet::variable(3, k, 0, x[0]), Jet::variable(3, k, 2, x[2])};
    if (std::abs(P.v.v.value()) < 1e-12) fail(Errc::VanishingFrameFactor, "v vanishes");
    return P;
  }

  std::array<double, 4> cubic(std::span<const double> q) const override {
    const double x[3] = {q[0], q[1], 0.0};
    return geo_detail::values(parts(x, 0).mu());
  }

  /// Field in (t, y, p) with v~(t, y) = v(sqrt t, y), valid for t > 0.
  VectorField t_field() const { return t_form(false); }

  LagrangianForm lagrangian_form() const override {
    auto self = *this;
    LagrangianForm L;
    L.names = {"t", "y", "p"};
    L.lagrangian = ScalarField(3, [self](std::span<const double> x, unsigned k) {
      const TParts P = self.t_parts(x, k);
      return sqrt(P.F() / P.t);
    });
    L.w = t_form(true);
    L.v = t_form(false);
    L.f = ScalarField(3, [self](std::span<const double> x, unsigned k) {
      const TParts P = self.t_parts(x, k);
      return P.t * pow(2.0 / P.v.v, 2.0 / 3.0) * P.F();
    });
    L.r = 1.5;
    L.orientation = 1;
    L.in_domain = [](std::span<const double> x) { return x[0] > 0.05; };
    L.box_lo = {0.05, -1, -1};
    L.box_hi = {1, 1, 1};
    return L;
  }

 private:
  struct TParts {
    geo_detail::Coef v;  ///< v~ and its partials in (t, y)
    Jet t, p;
    Jet F() const { return v.v * v.v * p * p + 1.0; }
    std::array<Jet, 4> mu() const {
      const Jet vv = v.v;
      return {Jet(vv.nvars(), vv.order()), vv - 4.0 * t * v.d0, -2.0 * t * v.d1, vv * vv * vv - 2.0 * t * vv * vv * v.d0};
    }
  };

  TParts t_parts(std::span<const double> x, unsigned k) const {
    if (!(x[0] > 0)) fail(Errc::DomainError, "the (t, y, p) form needs t > 0");
    const Jet T = Jet::variable(3, k + 1, 0, x[0]), Y = Jet::variable(3, k + 1, 1, x[1]);
    const Jet args[2] = {sqrt(T), Y};
    const Jet vt = v_expr_.eval(std::span<const Jet>(args, 2));
    if (std::abs(vt.value()) < 1e-12) fail(Errc::VanishingFrameFactor, "v vanishes");
    return {{vt.truncated(k), vt.partial(0), vt.partial(1)}, Jet::variable(3, k, 0, x[0]), Jet::variable(3, k, 2, x[2])};
  }

  VectorField t_form(bool singular) const {
    auto self = *this;
    return VectorField(3, [self, singular](std::span<const double> x, unsigned k) {
      const TParts P = self.t_parts(x, k);
      const Jet M = geo_detail::cubic_in_p(P.mu(), P.p);
      if (!singular) return std::vector<Jet>{2.0 * P.v.v * P.t, 2.0 * P.v.v * P.t * P.p, M};
      const Jet s = pow(P.F(), -1.5);
      const Jet v2 = P.v.v * P.v.v;
      const Jet th = pow(P.t, -0.5);
      return std::vector<Jet>{v2 * th * s, v2 * P.p * th * s, 0.5 * P.v.v * pow(P.t, -1.5) * s * M};
    });
  }

  Expression v_expr_;
};

// ---------------------------------------------------------------------------
// Consistency of a model's explicit W with its Lagrangian.

struct ConsistencyReport {
  bool passed = true;
  std::size_t samples = 0;
  double w_mismatch = 0;     ///< max |W_explicit - W_EulerLagrange| / scale
  double div_w = 0;          ///< max |D_W| / scale
  double defw_mismatch = 0;  ///< max |W_explicit - orientation f^{-r} V| / scale
  std::vector<std::string> violations;
};

inline std::vector<Point> sample_lagrangian_domain(const LagrangianForm& L, std::mt19937_64& rng, std::size_t n) {
  std::vector<Point> out;
  std::size_t attempts = 0;
  while (out.size() < n && attempts < 1000 * n) {
    ++attempts;
    Point x(3);
    for (int i = 0; i < 3; ++i) x[i] = L.box_lo[i] + (L.box_hi[i] - L.box_lo[i]) * ((rng() >> 11) * 0x1.0p-53);
    try {
      if (L.in_domain(x)) out.push_back(std::move(x));
    } catch (const Error&) {
    }
  }
  return out;
}

inline ConsistencyReport verify_lagrangian_consistency(const MetricModel& m, const std::vector<Point>& points,
                                                       double tol = 1e-8) {
  const LagrangianForm L = m.lagrangian_form();
  const LagrangianLift lift = euler_lagrange_lift(L.lagrangian);
  ConsistencyReport rep;
  char buf[160];
  for (const Point& x : points) {
    try {
      const auto w = L.w.value(x);
      const auto wel = lift.w.value(x);
      const auto v = L.v.value(x);
      const double f = L.f.value(x);
      const double scale = std::max(1.0, norm2(w));
      double e1 = 0, e3 = 0;
      const double fr = convention_power(f, -L.r);
      for (int i = 0; i < 3; ++i) {
        e1 = std::max(e1, std::abs(w[i] - wel[i]));
        e3 = std::max(e3, std::abs(w[i] - L.orientation * fr * v[i]));
      }
      const double dw = std::abs(lift.divergence_at(x));
      rep.w_mismatch = std::max(rep.w_mismatch, e1 / scale);
      rep.div_w = std::max(rep.div_w, dw / scale);
      rep.defw_mismatch = std::max(rep.defw_mismatch, e3 / scale);
      if (e1 > tol * scale || dw > tol * scale || e3 > tol * scale) {
        rep.passed = false;
        std::snprintf(buf, sizeof buf, "at (%.6g, %.6g, %.6g): W mismatch %.3g, D_W %.3g, W = f^-r V mismatch %.3g",
                      x[0], x[1], x[2], e1 / scale, dw / scale, e3 / scale);
        rep.violations.emplace_back(buf);
      }
      ++rep.samples;
    } catch (const Error& e) {
      rep.passed = false;
      rep.violations.emplace_back(e.what());
    }
  }
  return rep;
}

// ---------------------------------------------------------------------------
// Closed-form geodesic families.

/// Klein metric alpha = gamma = 1, n = 1: geodesics through (0, x*) are the
/// circles centred on the absolute, (x - x* - R)^2 + t^2 = R^2, and the line x = x*.
struct CircleFit {
  double R = 0;          ///< signed; 0 for the straight line
  bool line = false;
  double max_error = 0;  ///< sup distance from the circle over the compared samples
  std::size_t compared = 0;
};

inline CircleFit fit_klein_circle(const std::vector<Point>& tx, double xstar, double t_max) {
  CircleFit out;
  double best = 0;
  const Point* far = nullptr;
  for (const Point& s : tx) {
    if (std::abs(s[0]) > t_max) continue;
    if (std::abs(s[1] - xstar) > best) {
      best = std::abs(s[1] - xstar);
      far = &s;
    }
  }
  if (!far || best < 1e-9) {
    out.line = true;
  } else {
    const double dx = (*far)[1] - xstar, t = (*far)[0];
    out.R = (dx * dx + t * t) / (2 * dx);
  }
  for (const Point& s : tx) {
    if (std::abs(s[0]) > t_max) continue;
    const double dx = s[1] - xstar;
    const double err = out.line ? std::abs(dx) : std::abs(std::hypot(dx - out.R, s[0]) - std::abs(out.R));
    out.max_error = std::max(out.max_error, err);
    ++out.compared;
  }
  return out;
}

/// Grushin-type geodesic y - y* for constant frame factor v:
/// (1/v) c^{-2} (arcsin(cx) - cx sqrt(1 - c^2 x^2)).
inline double grushin_profile(double c, double x, double v) {
  const double u = c * x;
  if (std::abs(u) < 1e-3) {
    const double u2 = u * u;
    return x * x * x * c / v * (2.0 / 3.0 + u2 / 5.0 + 3.0 * u2 * u2 / 28.0 + 5.0 * u2 * u2 * u2 / 72.0);
  }
  return (std::asin(u) - u * std::sqrt(1.0 - u * u)) / (v * c * c);
}

struct GrushinFit {
  double c = 0;
  double max_error = 0;
  double x_limit = 0;  ///< comparisons use |x| <= x_limit
  std::size_t compared = 0;
};

/// Fits c by least squares of the closed form against samples (x, y) with
/// |c x| <= 0.9, then reports the sup deviation there.
inline GrushinFit fit_grushin(const std::vector<Point>& xy, double ystar, double v, double c_guess, double x_cap = 1.0) {
  auto limit = [&](double c) { return std::min(x_cap, c == 0.0 ? x_cap : 0.9 / std::abs(c)); };
  auto residuals = [&](double c, std::vector<double>& r) {
    r.clear();
    const double lim = limit(c);
    for (const Point& s : xy) {
      if (std::abs(s[0]) <= lim) r.push_back(s[1] - ystar - grushin_profile(c, s[0], v));
    }
  };
  double c = c_guess;
  std::vector<double> r0, r1;
  for (int it = 0; it < 30; ++it) {
    const double h = 1e-6 * std::max(1.0, std::abs(c));
    residuals(c, r0);
    const double lim = limit(c);
    double num = 0, den = 0;
    std::size_t i = 0;
    for (const Point& s : xy) {
      if (std::abs(s[0]) > lim) continue;
      const double J = (grushin_profile(c + h, s[0], v) - grushin_profile(c - h, s[0], v)) / (2 * h);
      num += J * r0[i++];
      den += J * J;
    }
    if (den <= 0) break;
    const double step = num / den;
    c += step;
    if (std::abs(step) <= 1e-14 * std::max(1.0, std::abs(c))) break;
  }
  GrushinFit out;
  out.c = c;
  out.x_limit = limit(c);
  residuals(c, r1);
  for (double e : r1) out.max_error = std::max(out.max_error, std::abs(e));
  out.compared = r1.size();
  return out;
}

}  // namespace singfield
