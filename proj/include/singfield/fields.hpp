#pragma once

// Singular fields W = f^{-r} V with a divide-by-zero singularity on
// Gamma = {f = 0}, their divergence identities, and the checks of the two
// limit conditions
//   f^{r+1} D_W -> 0 on Gamma,
//   f^r D_W -> 0 and f^{r+1} dD_W/dx_i -> 0 at zeros of V on Gamma.
//
// Power convention: for integer r, f^{-r} is the real integer power; for
// non-integer r it is |f|^{-r}.  Every quantity below is expressed through
//   G := f^r D_W = D_V - r L_V f / f,
// which is branch independent, so "f^r D_W" and "f^{r+1} D_W = f G" mean the
// same thing under either convention.

#include <algorithm>
#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include "singfield/field.hpp"

namespace singfield {

inline bool is_integer_exponent(double r) { return r == std::nearbyint(r) && std::abs(r) < 1e9; }

/// f^r under the power convention above.
inline double convention_power(double f, double r) {
  return is_integer_exponent(r) ? std::pow(f, r) : std::pow(std::abs(f), r);
}

inline Jet convention_power(const Jet& f, double r) {
  if (is_integer_exponent(r)) return powi(f, static_cast<long>(r));
  return pow(f.value() < 0 ? -f : f, r);
}

struct WEvaluation {
  std::vector<double> w;
  double f = 0;
  double div_v = 0;
  double lie_v_f = 0;
  double div_w_direct = 0;    ///< divergence of the jet of f^{-r} V
  double div_w_identity = 0;  ///< (f D_V - r L_V f) / f^{r+1}
  double fr_div_w = 0;        ///< f^r D_W
  double identity_residual = 0;  ///< |f^{r+1} D_W(direct) - (f D_V - r L_V f)|
  double identity_scale = 1;
};

struct SampleCheck {
  Point point;
  double residual = 0;
  double scale = 1;
  bool passed = true;
};

struct CheckReport {
  bool passed = true;
  double max_ratio = 0;  ///< max residual / (tol * scale) over samples
  std::vector<SampleCheck> samples;
};

struct FirstIntegralReport {
  bool passed = false;
  bool lie_test = false;
  bool divergence_test = false;
  bool tests_agree = false;
  CheckReport lie;
  CheckReport divergence;
};

struct LimitEstimate {
  std::string quantity;  ///< "f^r*D_W" or "f^(r+1)*dD_W/dx<i>"
  Point direction;
  double limit = 0;
  bool diverges = false;
  std::vector<double> sequence;
};

struct ConditionReport {
  bool passed = false;
  double tol = 0;
  double scale = 1;
  std::vector<LimitEstimate> limits;
};

class SingularField {
 public:
  static constexpr double kSurfaceThreshold = 1e-10;

  SingularField() = default;
  SingularField(VectorField v, ScalarField f, double r, bool allow_negative_r = false)
      : v_(std::move(v)), f_(std::move(f)), r_(r) {
    if (v_.dim() != f_.dim()) fail(Errc::ShapeMismatch, "V and f live on different spaces");
    if (v_.dim() < 2 || v_.dim() > 4) fail(Errc::ShapeMismatch, "singular field dimension must be 2..4");
    if (!std::isfinite(r) || r == 0.0) fail(Errc::InvalidArgument, "exponent r must be finite and nonzero");
    if (r < 0 && !allow_negative_r) fail(Errc::InvalidArgument, "negative r requires explicit opt-in");
  }

  const VectorField& v() const { return v_; }
  const ScalarField& f() const { return f_; }
  double r() const { return r_; }
  unsigned dim() const { return v_.dim(); }

  bool on_surface(std::span<const double> x) const {
    return std::abs(f_.value(x)) <= kSurfaceThreshold * (1.0 + norm2(x));
  }

  /// W(x), D_W two ways, and their discrepancy.
  WEvaluation eval_w(std::span<const double> x) const {
    const Jet fj = f_.jet(x, 1);
    const double f0 = fj.value();
    if (std::abs(f0) <= kSurfaceThreshold * (1.0 + norm2(x))) {
      fail(Errc::OnSingularSurface, "point lies on the singular surface f = 0");
    }
    const SeriesVectorField vs = v_.series(x, 1);
    const Jet s = convention_power(fj, -r_);

    WEvaluation out;
    out.f = f0;
    Jet div_w(dim(), 0);
    for (unsigned i = 0; i < dim(); ++i) {
      out.w.push_back(s.value() * vs[i].value());
      div_w += (s * vs[i]).partial(i);
    }
    out.div_w_direct = div_w.value();
    out.div_v = divergence(vs).value();
    out.lie_v_f = lie_derivative(f_.jet(x, 2), v_.series(x, 2)).value();
    const double rhs = f0 * out.div_v - r_ * out.lie_v_f;
    const double fr1 = f0 * convention_power(f0, r_);
    out.div_w_identity = rhs / fr1;
    out.fr_div_w = out.div_v - r_ * out.lie_v_f / f0;
    const double lhs = fr1 * out.div_w_direct;
    out.identity_residual = std::abs(lhs - rhs);
    out.identity_scale = std::max({1.0, std::abs(lhs), std::abs(f0 * out.div_v), std::abs(r_ * out.lie_v_f)});
    return out;
  }

  /// Invariance of Gamma: |L_V f| <= tol * max(1, |V| |grad f|) at every sample on Gamma.
  CheckReport check_gamma_invariant(const std::vector<Point>& samples, double tol) const {
    CheckReport rep;
    for (const Point& x : samples) {
      if (!on_surface(x)) fail(Errc::InvalidArgument, "gamma-invariance sample is not on f = 0");
      const std::vector<double> g = f_.gradient(x);
      const double gn = norm2(g);
      if (gn <= 1e-12) fail(Errc::DegenerateGradient, "grad f vanishes at a sample on f = 0");
      const std::vector<double> vv = v_.value(x);
      double lie = 0;
      for (unsigned i = 0; i < dim(); ++i) lie += vv[i] * g[i];
      add_sample(rep, x, std::abs(lie), std::max(1.0, norm2(vv) * gn), tol);
    }
    return rep;
  }

  FirstIntegralReport check_first_integral(const std::vector<Point>& samples, double tol) const {
    FirstIntegralReport rep;
    for (const Point& x : samples) {
      const std::vector<double> g = f_.gradient(x);
      const std::vector<double> vv = v_.value(x);
      double lie = 0;
      for (unsigned i = 0; i < dim(); ++i) lie += vv[i] * g[i];
      add_sample(rep.lie, x, std::abs(lie), std::max(1.0, norm2(vv) * norm2(g)), tol);
      if (on_surface(x)) continue;
      const WEvaluation e = eval_w(x);
      add_sample(rep.divergence, x, std::abs(e.fr_div_w - e.div_v),
                 std::max({1.0, std::abs(e.fr_div_w), std::abs(e.div_v)}), tol);
    }
    rep.lie_test = rep.lie.passed;
    rep.divergence_test = rep.divergence.passed;
    rep.tests_agree = rep.lie_test == rep.divergence_test;
    rep.passed = rep.lie_test && rep.divergence_test;
    return rep;
  }

  /// G = f^r D_W as a jet of the given order (V and f expanded one order higher).
  Jet g_jet(std::span<const double> x, unsigned order) const {
    const Jet fj = f_.jet(x, order + 1);
    const SeriesVectorField vs = v_.series(x, order + 1);
    const Jet lie = lie_derivative(fj, vs);
    return divergence(vs) - r_ * lie / fj.truncated(order);
  }

  /// Limits of f^r D_W and f^{r+1} dD_W/dx_i along x* + 2^{-k} d, k = 4..20,
  /// for the normal direction, its opposite, and tilted transversal directions.
  ConditionReport check_conditions_at_singular_point(std::span<const double> xstar, double tol,
                                                     double vanish_tol = 1e-8) const {
    const std::vector<double> v0 = v_.value(xstar);
    const double f0 = f_.value(xstar);
    if (norm2(v0) > vanish_tol * (1.0 + norm2(xstar)) || std::abs(f0) > vanish_tol * (1.0 + norm2(xstar))) {
      fail(Errc::NotASingularPoint, "condition check needs V(x*) = 0 and f(x*) = 0");
    }
    const std::vector<double> grad = f_.gradient(xstar);
    const double gn = norm2(grad);
    if (gn <= 1e-12) fail(Errc::DegenerateGradient, "grad f vanishes at x*");

    std::vector<Point> dirs;
    Point nrm(dim());
    for (unsigned i = 0; i < dim(); ++i) nrm[i] = grad[i] / gn;
    dirs.push_back(nrm);
    Point neg = nrm;
    for (double& c : neg) c = -c;
    dirs.push_back(neg);
    for (unsigned j = 0; j < dim(); ++j) {
      Point d = nrm;
      d[j] += 0.5;
      const double dn = norm2(d);
      for (double& c : d) c /= dn;
      double dot = 0;
      for (unsigned i = 0; i < dim(); ++i) dot += d[i] * nrm[i];
      if (dot > 0.3) dirs.push_back(d);
    }

    ConditionReport rep;
    rep.tol = tol;
    rep.scale = std::max(1.0, std::abs(v_.divergence_at(xstar)));
    rep.passed = true;
    for (const Point& d : dirs) {
      std::vector<std::vector<double>> seqs(dim() + 1);
      for (int k = 4; k <= 20; ++k) {
        const double h = std::ldexp(1.0, -k);
        Point x(dim());
        for (unsigned i = 0; i < dim(); ++i) x[i] = xstar[i] + h * d[i];
        const Jet fj = f_.jet(x, 1);
        const Jet g = g_jet(x, 1);
        seqs[0].push_back(g.value());
        for (unsigned i = 0; i < dim(); ++i) {
          MultiIndex m{};
          m[i] = 1;
          seqs[i + 1].push_back(fj.value() * g.coeff(m) - r_ * g.value() * fj.coeff(m));
        }
      }
      for (unsigned q = 0; q <= dim(); ++q) {
        LimitEstimate est;
        est.quantity = q == 0 ? "f^r*D_W" : "f^(r+1)*dD_W/dx" + std::to_string(q);
        est.direction = d;
        est.sequence = seqs[q];
        extrapolate(est);
        if (est.diverges || std::abs(est.limit) > tol * rep.scale) rep.passed = false;
        rep.limits.push_back(std::move(est));
      }
    }
    return rep;
  }

 private:
  static void add_sample(CheckReport& rep, const Point& x, double residual, double scale, double tol) {
    SampleCheck s{x, residual, scale, residual <= tol * scale};
    rep.passed = rep.passed && s.passed;
    rep.max_ratio = std::max(rep.max_ratio, residual / (tol * scale));
    rep.samples.push_back(std::move(s));
  }

  // Samples are y(h_k) with h_k = 2^{-k}.  Two Richardson sweeps eliminate the
  // O(h) and O(h^2) terms of a smooth expansion; a sequence growing like a
  // negative power of h is reported as divergent.
  static void extrapolate(LimitEstimate& est) {
    const std::vector<double>& y = est.sequence;
    const std::size_t n = y.size();
    double mag = 0;
    for (double v : y) mag = std::max(mag, std::abs(v));
    const double last = std::abs(y[n - 1]), mid = std::abs(y[n - 9]);
    if (last > 1e3 * std::max(mid, 1e-300) && last > 1e-6) {
      est.diverges = true;
      est.limit = y[n - 1];
      return;
    }
    std::vector<double> r1, r2;
    for (std::size_t k = 0; k + 1 < n; ++k) r1.push_back(2 * y[k + 1] - y[k]);
    for (std::size_t k = 0; k + 1 < r1.size(); ++k) r2.push_back((4 * r1[k + 1] - r1[k]) / 3);
    // Late entries are dominated by rounding in f-divisions; take the entry
    // in the middle of the sweep where truncation and rounding balance.
    const double a = r2[r2.size() / 2], b = r2[r2.size() / 2 + 1];
    const double spread = std::abs(a - b);
    if (spread > 1e-4 * std::max(1.0, mag)) {
      fail(Errc::InsufficientDecay, "sampled values of " + est.quantity + " do not stabilize");
    }
    est.limit = b;
  }

  VectorField v_;
  ScalarField f_;
  double r_ = 1;
};

/// Newton projection onto f = 0 along grad f.
inline Point project_to_surface(const ScalarField& f, Point x, int max_iter = 50) {
  for (int it = 0; it < max_iter; ++it) {
    const Jet j = f.jet(x, 1);
    const double v = j.value();
    if (std::abs(v) <= 1e-13 * (1.0 + norm2(x))) return x;
    const std::vector<double> g = f.gradient(x);
    const double g2 = std::inner_product(g.begin(), g.end(), g.begin(), 0.0);
    if (g2 <= 1e-24) fail(Errc::DegenerateGradient, "grad f vanishes during projection");
    for (std::size_t i = 0; i < x.size(); ++i) x[i] -= v * g[i] / g2;
  }
  fail(Errc::NoConvergence, "projection onto f = 0 did not converge");
}

/// Field (L_pp, p L_pp, L_x - L_tp - p L_xp) on (t, x, p) space from a Lagrangian.
struct LagrangianLift {
  ScalarField lagrangian;
  VectorField w;

  double divergence_at(std::span<const double> x) const { return w.divergence_at(x); }
};

inline LagrangianLift euler_lagrange_lift(const ScalarField& L) {
  if (L.dim() != 3) fail(Errc::ShapeMismatch, "Lagrangian must live on (t, x, p) space");
  VectorField w(3, [L](std::span<const double> x, unsigned order) {
    const Jet l = L.jet(x, order + 2);
    const Jet lp = l.partial(2);
    const Jet lpp = lp.partial(2);
    const Jet lx = l.partial(1).truncated(order);
    const Jet ltp = lp.partial(0);
    const Jet lxp = lp.partial(1);
    const Jet p = Jet::variable(3, order, 2, x[2]);
    return std::vector<Jet>{lpp, p * lpp, lx - ltp - p * lxp};
  });
  return {L, w};
}

/// Contact lift (F_p, p F_p, -(F_t + p F_x)) of the implicit equation F(t, x, p) = const.
inline VectorField implicit_ode_lift(const ScalarField& F) {
  if (F.dim() != 3) fail(Errc::ShapeMismatch, "implicit equation must live on (t, x, p) space");
  return VectorField(3, [F](std::span<const double> x, unsigned order) {
    const Jet j = F.jet(x, order + 1);
    const Jet fp = j.partial(2), ft = j.partial(0), fx = j.partial(1);
    const Jet p = Jet::variable(3, order, 2, x[2]);
    return std::vector<Jet>{fp, p * fp, -(ft + p * fx)};
  });
}

}  // namespace singfield
