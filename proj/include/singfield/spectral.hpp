#pragma once

// Singular points, linearization, spectra, and resonance detection.

#include <algorithm>
#include <cmath>
#include <complex>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>

#include "singfield/field.hpp"

namespace singfield {

using cplx = std::complex<double>;

namespace spectral_detail {

inline std::vector<cplx> quadratic_roots(double a1, double a0) {
  // x^2 + a1 x + a0
  const double disc = a1 * a1 - 4 * a0;
  if (disc >= 0) {
    const double s = std::sqrt(disc);
    const double q = -0.5 * (a1 + std::copysign(s, a1));
    if (q == 0.0) return {0.0, 0.0};
    return {q, a0 / q};
  }
  const double s = std::sqrt(-disc);
  return {cplx(-a1 / 2, s / 2), cplx(-a1 / 2, -s / 2)};
}

inline double polish_real_root(double x, double a, double b, double c) {
  for (int i = 0; i < 4; ++i) {
    const double p = ((x + a) * x + b) * x + c;
    const double dp = (3 * x + 2 * a) * x + b;
    if (dp == 0.0) break;
    const double nx = x - p / dp;
    if (!std::isfinite(nx) || std::abs(((nx + a) * nx + b) * nx + c) >= std::abs(p)) break;
    x = nx;
  }
  return x;
}

// x^3 + a x^2 + b x + c, after rescaling x = m z so coefficients are O(1).
inline std::vector<cplx> cubic_roots(double a, double b, double c) {
  const double m = std::max({std::abs(a), std::sqrt(std::abs(b)), std::cbrt(std::abs(c))});
  if (m == 0.0) return {0.0, 0.0, 0.0};
  const double A = a / m, B = b / (m * m), C = c / (m * m * m);
  const double p = B - A * A / 3;
  const double q = 2 * A * A * A / 27 - A * B / 3 + C;
  const double disc = q * q / 4 + p * p * p / 27;
  const double shift = -A / 3;
  std::vector<double> real;
  std::vector<cplx> out;
  constexpr double kMultiple = 1e-12;
  if (std::abs(disc) <= kMultiple) {
    if (std::abs(p) <= 1e-6) {
      real = {shift, shift, shift};
    } else {
      real = {3 * q / p + shift, -1.5 * q / p + shift, -1.5 * q / p + shift};
    }
  } else if (disc < 0) {
    const double rho = 2 * std::sqrt(-p / 3);
    const double arg = std::clamp(3 * q / (p * rho), -1.0, 1.0);
    const double th = std::acos(arg) / 3;
    for (int k = 0; k < 3; ++k) real.push_back(rho * std::cos(th - 2 * M_PI * k / 3) + shift);
  } else {
    const double s = std::sqrt(disc);
    const double y = std::cbrt(-q / 2 + s) + std::cbrt(-q / 2 - s);
    const double x1 = polish_real_root(y + shift, A, B, C);
    // deflate: x^2 + (A + x1) x + (B + (A + x1) x1)
    const double d1 = A + x1, d0 = B + d1 * x1;
    out.push_back(x1 * m);
    for (cplx z : quadratic_roots(d1, d0)) out.push_back(z * m);
    return out;
  }
  const bool distinct = std::abs(disc) > kMultiple;
  for (double x : real) out.push_back((distinct ? polish_real_root(x, A, B, C) : x) * m);
  return out;
}

}  // namespace spectral_detail

/// Sort descending by real part, ties by descending imaginary part.
inline void sort_spectrum(std::vector<cplx>& ev) {
  std::stable_sort(ev.begin(), ev.end(), [](cplx a, cplx b) {
    if (a.real() != b.real()) return a.real() > b.real();
    return a.imag() > b.imag();
  });
}

/// Eigenvalues from the characteristic polynomial (closed form for dim <= 3,
/// Hessenberg-QR for dim 4), snapped and sorted.
inline std::vector<cplx> eigenvalues(const Eigen::MatrixXd& A) {
  const auto n = A.rows();
  if (n != A.cols() || n < 1 || n > 4) fail(Errc::ShapeMismatch, "eigenvalues: square matrix of size 1..4");
  std::vector<cplx> ev;
  if (n == 1) {
    ev = {A(0, 0)};
  } else if (n == 2) {
    ev = spectral_detail::quadratic_roots(-A.trace(), A.determinant());
  } else if (n == 3) {
    const double tr = A.trace();
    const double c2 = A(0, 0) * A(1, 1) - A(0, 1) * A(1, 0) + A(0, 0) * A(2, 2) - A(0, 2) * A(2, 0) +
                      A(1, 1) * A(2, 2) - A(1, 2) * A(2, 1);
    ev = spectral_detail::cubic_roots(-tr, c2, -A.determinant());
  } else {
    Eigen::EigenSolver<Eigen::MatrixXd> es(A, false);
    for (int i = 0; i < 4; ++i) ev.push_back(es.eigenvalues()(i));
  }
  const double scale = std::max(A.norm(), 1e-300);
  for (cplx& z : ev) {
    if (std::abs(z) <= 1e-9 * scale) z = 0.0;
    if (std::abs(z.imag()) <= 1e-13 * scale) z = z.real();
  }
  sort_spectrum(ev);
  return ev;
}

/// Orthonormal-free basis of ker(A - lambda I) by Gaussian elimination with
/// partial pivoting; each vector has unit norm with its largest component real
/// and positive.
inline std::vector<Eigen::VectorXcd> null_space(const Eigen::MatrixXcd& M, double rel_tol = 1e-8) {
  const int n = static_cast<int>(M.rows());
  Eigen::MatrixXcd R = M;
  const double scale = std::max(M.norm(), 1.0);
  std::vector<int> pivot_col;
  int row = 0;
  for (int col = 0; col < n && row < n; ++col) {
    int best = row;
    for (int i = row + 1; i < n; ++i) {
      if (std::abs(R(i, col)) > std::abs(R(best, col))) best = i;
    }
    if (std::abs(R(best, col)) <= rel_tol * scale) continue;
    R.row(row).swap(R.row(best));
    R.row(row) /= R(row, col);
    for (int i = 0; i < n; ++i) {
      if (i != row) R.row(i) -= R(i, col) * R.row(row);
    }
    pivot_col.push_back(col);
    ++row;
  }
  std::vector<Eigen::VectorXcd> basis;
  for (int free = 0; free < n; ++free) {
    if (std::find(pivot_col.begin(), pivot_col.end(), free) != pivot_col.end()) continue;
    Eigen::VectorXcd v = Eigen::VectorXcd::Zero(n);
    v(free) = 1.0;
    for (std::size_t k = 0; k < pivot_col.size(); ++k) v(pivot_col[k]) = -R(static_cast<int>(k), free);
    Eigen::Index big = 0;
    v.cwiseAbs().maxCoeff(&big);
    v *= std::abs(v(big)) / v(big);
    v.normalize();
    basis.push_back(v);
  }
  return basis;
}

struct SpectralReport {
  Point point;
  Eigen::MatrixXd jacobian;
  std::vector<cplx> eigenvalues;
  std::vector<Eigen::VectorXcd> eigenvectors;
  bool defective = false;
  std::vector<double> grad_f;
  std::optional<unsigned> j_index;  ///< 1-based
  double resonance_residual = 0;
  double eigvec_residual = 0;
  bool lambda_j_zero = false;
};

inline SpectralReport linearize(const VectorField& v, std::span<const double> x, double tol = 1e-8) {
  const std::vector<double> val = v.value(x);
  if (norm2(val) > tol * (1.0 + norm2(x))) {
    fail(Errc::SingularPointTolExceeded, "|V(x*)| = " + std::to_string(norm2(val)) + " exceeds tolerance");
  }
  SpectralReport rep;
  rep.point.assign(x.begin(), x.end());
  rep.jacobian = v.jacobian(x);
  rep.eigenvalues = eigenvalues(rep.jacobian);
  const int n = static_cast<int>(rep.jacobian.rows());
  const Eigen::MatrixXcd Ac = rep.jacobian.cast<cplx>();
  for (std::size_t i = 0; i < rep.eigenvalues.size();) {
    std::size_t mult = 1;
    while (i + mult < rep.eigenvalues.size() &&
           std::abs(rep.eigenvalues[i + mult] - rep.eigenvalues[i]) <= 1e-7 * std::max(1.0, std::abs(rep.eigenvalues[i]))) {
      ++mult;
    }
    auto basis = null_space(Ac - rep.eigenvalues[i] * Eigen::MatrixXcd::Identity(n, n));
    if (basis.empty()) basis = null_space(Ac - rep.eigenvalues[i] * Eigen::MatrixXcd::Identity(n, n), 1e-5);
    if (basis.size() < mult) rep.defective = true;
    for (std::size_t k = 0; k < mult; ++k) {
      rep.eigenvectors.push_back(basis.empty() ? Eigen::VectorXcd::Zero(n) : basis[std::min(k, basis.size() - 1)]);
    }
    i += mult;
  }
  return rep;
}

/// Finds j with sum(lambda) = r lambda_j whose eigenvalue also has grad f as a
/// left eigenvector: A^T grad f = lambda_j grad f.  That is the system
/// D_V f_i - r <dV/dx_i, grad f> = 0 obtained from the limit conditions.
inline unsigned check_resonance_relation(SpectralReport& rep, std::span<const double> grad_f, double r,
                                         double tol = 1e-7) {
  const int n = static_cast<int>(rep.jacobian.rows());
  if (static_cast<int>(grad_f.size()) != n) fail(Errc::ShapeMismatch, "gradient dimension mismatch");
  rep.grad_f.assign(grad_f.begin(), grad_f.end());
  cplx sum = 0;
  double mag = 0;
  for (cplx z : rep.eigenvalues) {
    sum += z;
    mag += std::abs(z);
  }
  const double scale = std::max(1.0, mag);
  Eigen::VectorXd e(n);
  for (int i = 0; i < n; ++i) e(i) = grad_f[i];
  const double en = std::max(e.norm(), 1e-300);
  const Eigen::VectorXd ate = rep.jacobian.transpose() * e;

  std::optional<unsigned> best_residual_j;
  double best_residual = INFINITY;
  for (std::size_t j = 0; j < rep.eigenvalues.size(); ++j) {
    const double res = std::abs(sum - r * rep.eigenvalues[j]);
    if (res < best_residual) {
      best_residual = res;
      best_residual_j = static_cast<unsigned>(j);
    }
    if (res > tol * scale) continue;
    const cplx lj = rep.eigenvalues[j];
    if (std::abs(lj.imag()) > tol * scale) continue;
    const double ev_res = (ate - lj.real() * e).norm() / en;
    if (ev_res <= tol * scale) {
      rep.j_index = static_cast<unsigned>(j + 1);
      rep.resonance_residual = res;
      rep.eigvec_residual = ev_res;
      rep.lambda_j_zero = lj == 0.0;
      return *rep.j_index;
    }
  }
  rep.resonance_residual = best_residual;
  if (best_residual_j) {
    rep.eigvec_residual = (ate - rep.eigenvalues[*best_residual_j].real() * e).norm() / en;
  }
  fail(Errc::NoMatchingIndex, "no eigenvalue satisfies both the trace relation and the eigenvector test");
}

struct NewtonFailure {
  Point seed;
  std::string reason;
};

struct SingularPointSearch {
  std::vector<Point> points;
  std::vector<NewtonFailure> failures;
};

namespace spectral_detail {

inline double residual_norm(const std::vector<double>& v) { return norm2(v); }

// Damped Newton on a square or over-determined system with minimum-norm steps.
template <typename Residual, typename Jacobian>
std::optional<Point> damped_newton(Point x, Residual res, Jacobian jac, double tol, std::string& why) {
  std::vector<double> rv = res(x);
  double rn = residual_norm(rv);
  for (int it = 0; it < 100; ++it) {
    if (rn <= tol) return x;
    const Eigen::MatrixXd J = jac(x);
    Eigen::VectorXd b(static_cast<Eigen::Index>(rv.size()));
    for (std::size_t i = 0; i < rv.size(); ++i) b(static_cast<Eigen::Index>(i)) = rv[i];
    Eigen::CompleteOrthogonalDecomposition<Eigen::MatrixXd> cod(J);
    cod.setThreshold(1e-12);
    const Eigen::VectorXd step = cod.solve(b);
    double lambda = 1.0;
    bool improved = false;
    for (int halving = 0; halving <= 30; ++halving) {
      Point trial = x;
      for (std::size_t i = 0; i < x.size(); ++i) trial[i] -= lambda * step(static_cast<Eigen::Index>(i));
      std::vector<double> tv;
      try {
        tv = res(trial);
      } catch (const Error&) {
        lambda *= 0.5;
        continue;
      }
      const double tn = residual_norm(tv);
      if (std::isfinite(tn) && tn < rn) {
        x = std::move(trial);
        rv = std::move(tv);
        rn = tn;
        improved = true;
        break;
      }
      lambda *= 0.5;
    }
    if (!improved) {
      why = "no residual decrease after 30 step halvings (|V| = " + std::to_string(rn) + ")";
      return rn <= tol ? std::optional<Point>(x) : std::nullopt;
    }
  }
  if (rn <= tol) return x;
  why = "iteration limit reached (|V| = " + std::to_string(rn) + ")";
  return std::nullopt;
}

inline void add_unique(std::vector<Point>& pts, const Point& x) {
  for (const Point& p : pts) {
    double d = 0;
    for (std::size_t i = 0; i < x.size(); ++i) d = std::max(d, std::abs(p[i] - x[i]));
    if (d <= 1e-8) return;
  }
  pts.push_back(x);
}

}  // namespace spectral_detail

inline SingularPointSearch find_singular_points(const VectorField& v, const std::vector<Point>& seeds,
                                                double tol = 1e-12) {
  SingularPointSearch out;
  for (const Point& s : seeds) {
    std::string why;
    auto res = [&](const Point& x) { return v.value(x); };
    auto jac = [&](const Point& x) { return v.jacobian(x); };
    auto p = spectral_detail::damped_newton(s, res, jac, tol, why);
    if (p) {
      spectral_detail::add_unique(out.points, *p);
    } else {
      out.failures.push_back({s, "NoConvergence: " + why});
    }
  }
  return out;
}

/// Zeros of V lying on f = 0: Newton on the stacked system (V, f).
inline SingularPointSearch find_singular_points_on_surface(const VectorField& v, const ScalarField& f,
                                                           const std::vector<Point>& seeds, double tol = 1e-12) {
  SingularPointSearch out;
  const unsigned n = v.dim();
  for (const Point& s : seeds) {
    std::string why;
    auto res = [&](const Point& x) {
      std::vector<double> r = v.value(x);
      r.push_back(f.value(x));
      return r;
    };
    auto jac = [&](const Point& x) {
      Eigen::MatrixXd J(n + 1, n);
      J.topRows(n) = v.jacobian(x);
      const std::vector<double> g = f.gradient(x);
      for (unsigned i = 0; i < n; ++i) J(n, i) = g[i];
      return J;
    };
    auto p = spectral_detail::damped_newton(s, res, jac, tol, why);
    if (p) {
      spectral_detail::add_unique(out.points, *p);
    } else {
      out.failures.push_back({s, "NoConvergence: " + why});
    }
  }
  return out;
}

/// Best rational approximation p/q of x with q <= max_den by continued fractions.
struct Rational {
  long num = 0;
  long den = 1;
};

inline std::optional<Rational> rationalize(double x, long max_den, double tol) {
  if (!std::isfinite(x)) return std::nullopt;
  long h0 = 0, h1 = 1, k0 = 1, k1 = 0;
  double v = x;
  std::optional<Rational> best;
  for (int it = 0; it < 64; ++it) {
    const double a = std::floor(v);
    if (std::abs(a) > 1e12) break;
    const long ai = static_cast<long>(a);
    const long h2 = ai * h1 + h0, k2 = ai * k1 + k0;
    if (k2 > max_den) break;
    h0 = h1;
    h1 = h2;
    k0 = k1;
    k1 = k2;
    if (std::abs(x - static_cast<double>(h1) / static_cast<double>(k1)) <= tol * std::max(1.0, std::abs(x))) {
      best = Rational{h1, k1};
      break;
    }
    const double frac = v - a;
    if (frac < 1e-15) break;
    v = 1.0 / frac;
  }
  return best;
}

struct FirstTypeResonance {
  long p1 = 0, p2 = 0;
  long order() const { return p1 + p2; }
};

struct SecondTypeResonance {
  long p1 = 0, p2 = 0;
  unsigned j = 1;
  long order() const { return p1 + p2; }
};

struct ResonanceReport {
  std::optional<FirstTypeResonance> first_type;
  std::optional<SecondTypeResonance> second_type;
  std::optional<cplx> ratio;
  std::optional<long> nk;
  unsigned k = 0;
  double tol = 0;
  bool continued_fraction_agrees = true;
};

/// N(k) = 2 floor((2k+1) max|Re l| / min|Re l|) + 2.
inline std::optional<long> smoothness_order_bound(cplx l1, cplx l2, unsigned k) {
  const double a = std::abs(l1.real()), b = std::abs(l2.real());
  if (a == 0.0 || b == 0.0) return std::nullopt;
  return 2 * static_cast<long>(std::floor((2.0 * k + 1.0) * std::max(a, b) / std::min(a, b))) + 2;
}

inline ResonanceReport detect_resonances(cplx l1, cplx l2, unsigned max_order, unsigned k = 1,
                                         double rel_tol = 1e-7) {
  ResonanceReport rep;
  rep.k = k;
  rep.tol = rel_tol * (std::abs(l1) + std::abs(l2));
  if (l2 != 0.0) rep.ratio = l1 / l2;
  rep.nk = smoothness_order_bound(l1, l2, k);
  const cplx lam[2] = {l1, l2};
  for (long order = 1; order <= static_cast<long>(max_order); ++order) {
    for (long p1 = order; p1 >= 0; --p1) {
      const long p2 = order - p1;
      if (!rep.first_type && std::gcd(p1, p2) == 1 &&
          std::abs(static_cast<double>(p1) * l1 + static_cast<double>(p2) * l2) <= rep.tol) {
        rep.first_type = FirstTypeResonance{p1, p2};
      }
      if (!rep.second_type && order >= 2) {
        for (unsigned j = 0; j < 2; ++j) {
          if (std::abs(static_cast<double>(p1) * l1 + static_cast<double>(p2) * l2 - lam[j]) <= rep.tol) {
            rep.second_type = SecondTypeResonance{p1, p2, j + 1};
            break;
          }
        }
      }
    }
  }
  // Cross-check the first-type scan against a continued-fraction proposal of -l1/l2 = p2/p1.
  if (l2 != 0.0 && std::abs(l1.imag()) <= rep.tol && std::abs(l2.imag()) <= rep.tol) {
    const auto q = rationalize(-l1.real() / l2.real(), static_cast<long>(max_order), 1e-7);
    std::optional<FirstTypeResonance> proposal;
    if (q && q->num > 0 && q->num + q->den <= static_cast<long>(max_order)) {
      proposal = FirstTypeResonance{q->den, q->num};
    }
    if (l1 == 0.0) proposal = FirstTypeResonance{1, 0};
    rep.continued_fraction_agrees =
        proposal.has_value() == rep.first_type.has_value() &&
        (!proposal || (proposal->p1 == rep.first_type->p1 && proposal->p2 == rep.first_type->p2));
  }
  return rep;
}

}  // namespace singfield
