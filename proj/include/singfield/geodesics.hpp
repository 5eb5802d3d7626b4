#pragma once

// Curves leaving a hyperbolic singular point of a smooth field along its
// invariant eigenplane, integrated with an adaptive Dormand-Prince scheme.

#include <boost/numeric/odeint.hpp>
#include <cmath>
#include <string>
#include <vector>

#include "singfield/field.hpp"
#include "singfield/spectral.hpp"

namespace singfield {

struct ShootingOptions {
  unsigned count = 5;
  double epsilon = 1e-6;
  double horizon = 15;
  double rtol = 1e-10;
  double atol = 1e-12;
  double window = 1.0;   ///< stop when a base coordinate leaves x* +- window
  double p_limit = 1e6;  ///< stop when the slope chart breaks down
  std::size_t max_steps = 200000;
  unsigned p_index = 2;  ///< index of the slope coordinate
  std::vector<unsigned> base_indices{0, 1};
};

struct Curve {
  std::string id;
  double direction = 1;  ///< +1 forward in the field's time, -1 backward
  std::vector<double> s;
  std::vector<Point> points;
  std::string stop_reason;
  std::vector<std::string> diagnostics;
  std::size_t rejected_steps = 0;
};

struct ShootingResult {
  Point singular_point;
  std::vector<cplx> eigenvalues;
  std::string kind;  ///< "node" or "saddle"
  Eigen::Vector3d e1, e2;
  std::vector<Curve> curves;
};

/// Integrates x' = direction * V(x) from `start` until one of the stopping
/// rules fires; every accepted step is recorded.
inline Curve integrate_curve(const VectorField& v, const Point& start, double direction, const ShootingOptions& o,
                             const Point& centre = {}) {
  namespace ode = boost::numeric::odeint;
  using State = std::vector<double>;
  Curve c;
  c.direction = direction;
  State x = start;
  double s = 0;
  c.s.push_back(0);
  c.points.push_back(x);
  auto rhs = [&](const State& y, State& dy, double) {
    const auto val = v.value(y);
    dy.resize(y.size());
    for (std::size_t i = 0; i < y.size(); ++i) dy[i] = direction * val[i];
  };
  auto stepper = ode::make_controlled(o.atol, o.rtol, ode::runge_kutta_dopri5<State>());
  double ds = 1e-3;
  const Point& ref = centre.empty() ? start : centre;
  char buf[160];
  try {
    for (std::size_t step = 0;; ++step) {
      if (step >= o.max_steps) {
        c.stop_reason = "max_steps";
        break;
      }
      if (s >= o.horizon) {
        c.stop_reason = "horizon";
        break;
      }
      ds = std::min(ds, o.horizon - s);
      if (stepper.try_step(rhs, x, s, ds) == ode::fail) {
        ++c.rejected_steps;
        if (ds < 1e-14 * (1 + std::abs(s))) {
          // a slope blowing up in finite time exhausts the step size first
          if (std::abs(x[o.p_index]) > std::sqrt(o.p_limit)) {
            c.stop_reason = "p_chart_overflow";
            std::snprintf(buf, sizeof buf, "PChartOverflow: slope blow-up at |p| = %.3g, s = %.6g",
                          std::abs(x[o.p_index]), s);
            c.diagnostics.emplace_back(buf);
          } else {
            c.stop_reason = "step_underflow";
          }
          break;
        }
        continue;
      }
      bool finite = true;
      for (double xi : x) finite = finite && std::isfinite(xi);
      if (!finite) {
        c.stop_reason = "non_finite";
        break;
      }
      c.s.push_back(s);
      c.points.push_back(x);
      if (std::abs(x[o.p_index]) > o.p_limit) {
        c.stop_reason = "p_chart_overflow";
        std::snprintf(buf, sizeof buf, "PChartOverflow: |p| exceeded %.3g at s = %.6g", o.p_limit, s);
        c.diagnostics.emplace_back(buf);
        break;
      }
      bool inside = true;
      for (unsigned i : o.base_indices) inside = inside && std::abs(x[i] - ref[i]) <= o.window;
      if (!inside) {
        c.stop_reason = "left_window";
        break;
      }
    }
  } catch (const Error& e) {
    c.stop_reason = "domain_error";
    c.diagnostics.emplace_back(e.what());
  }
  return c;
}

namespace geodesic_detail {

inline std::vector<Eigen::Vector3d> real_null_space(const Eigen::MatrixXd& M) {
  std::vector<Eigen::Vector3d> out;
  for (const Eigen::VectorXcd& z : null_space(M.cast<cplx>(), 1e-8)) {
    // real matrices with real null vectors: drop the arbitrary phase
    Eigen::Index k;
    z.cwiseAbs().maxCoeff(&k);
    out.push_back((z / (z[k] / std::abs(z[k]))).real());
  }
  return out;
}

// Orthonormal basis of the invariant plane for the nonzero eigenvalues.
inline std::pair<Eigen::Vector3d, Eigen::Vector3d> eigenplane(const Eigen::MatrixXd& A,
                                                              const std::vector<cplx>& ev, double tol) {
  std::vector<Eigen::Vector3d> span;
  if (std::abs(ev[0] - ev[1]) <= tol) {
    const Eigen::MatrixXd B = A - ev[0].real() * Eigen::MatrixXd::Identity(3, 3);
    span = real_null_space(B * B);
  } else {
    for (int k = 0; k < 2; ++k) {
      const auto N = real_null_space(A - ev[k].real() * Eigen::MatrixXd::Identity(3, 3));
      if (!N.empty()) span.push_back(N[0]);
    }
  }
  if (span.size() != 2) fail(Errc::EigenplaneUndefined, "eigenplane of the nonzero eigenvalues is not two-dimensional");
  Eigen::Vector3d e1 = span[0].normalized();
  Eigen::Vector3d e2 = span[1] - span[1].dot(e1) * e1;
  if (e2.norm() < 1e-10) fail(Errc::EigenplaneUndefined, "eigenplane directions are parallel");
  return {e1, e2.normalized()};
}

}  // namespace geodesic_detail

/// Curves through a singular point whose spectrum is {lambda1, lambda2, 0}
/// with real nonzero lambda1, lambda2.  A node yields `count` curves fanned
/// across the eigenplane; a saddle yields its four separatrix half-branches.
inline ShootingResult shoot_geodesics(const VectorField& v, const Point& xstar, const ShootingOptions& o = {}) {
  if (o.count == 0) fail(Errc::InvalidArgument, "count must be positive");
  if (!(o.epsilon > 0) || !(o.horizon > 0)) fail(Errc::InvalidArgument, "epsilon and horizon must be positive");
  const auto v0 = v.value(xstar);
  if (norm2(v0) > 1e-8 * (1 + norm2(xstar))) fail(Errc::NotASingularPoint, "V(x*) != 0");
  ShootingResult out;
  out.singular_point = xstar;
  const Eigen::MatrixXd A = v.jacobian(xstar);
  out.eigenvalues = eigenvalues(A);
  std::vector<cplx> nz;
  const double scale = std::max(1.0, A.norm());
  for (cplx z : out.eigenvalues) {
    if (std::abs(z.imag()) > 1e-10 * scale) fail(Errc::EigenplaneUndefined, "complex spectrum");
    if (std::abs(z) > 1e-8 * scale) nz.push_back(z);
  }
  if (nz.size() != 2) fail(Errc::EigenplaneUndefined, "need exactly two nonzero eigenvalues");
  auto [e1, e2] = geodesic_detail::eigenplane(A, nz, 1e-8 * scale);
  out.e1 = e1;
  out.e2 = e2;
  const double l1 = nz[0].real(), l2 = nz[1].real();
  auto start = [&](const Eigen::Vector3d& d) {
    Point p = xstar;
    for (int i = 0; i < 3; ++i) p[i] += o.epsilon * d[i];
    return p;
  };
  char id[32];
  if (l1 * l2 > 0) {
    out.kind = "node";
    const double dir = l1 > 0 ? 1.0 : -1.0;
    for (unsigned k = 0; k < o.count; ++k) {
      const double th = -M_PI / 2 + M_PI * (k + 0.5) / o.count;
      const Eigen::Vector3d d = std::cos(th) * e1 + std::sin(th) * e2;
      Curve c = integrate_curve(v, start(d), dir, o, xstar);
      std::snprintf(id, sizeof id, "g%u", k);
      c.id = id;
      out.curves.push_back(std::move(c));
    }
  } else {
    out.kind = "saddle";
    // Eigenvectors individually: unstable branches run forward, stable backward.
    const auto Nu = geodesic_detail::real_null_space(A - std::max(l1, l2) * Eigen::MatrixXd::Identity(3, 3));
    const auto Ns = geodesic_detail::real_null_space(A - std::min(l1, l2) * Eigen::MatrixXd::Identity(3, 3));
    if (Nu.empty() || Ns.empty()) fail(Errc::EigenplaneUndefined, "missing saddle eigenvector");
    const Eigen::Vector3d eu = Nu[0].normalized(), es = Ns[0].normalized();
    const std::array<std::pair<const char*, std::pair<Eigen::Vector3d, double>>, 4> branches = {{
        {"unstable+", {eu, 1.0}}, {"unstable-", {-eu, 1.0}}, {"stable+", {es, -1.0}}, {"stable-", {-es, -1.0}}}};
    for (const auto& [name, dd] : branches) {
      Curve c = integrate_curve(v, start(dd.first), dd.second, o, xstar);
      c.id = name;
      out.curves.push_back(std::move(c));
    }
  }
  return out;
}

}  // namespace singfield
