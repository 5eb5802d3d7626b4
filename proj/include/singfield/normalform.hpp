#pragma once

// Normal-form machinery for three-dimensional fields with a line of singular
// points: order-by-order quasi-integrals, resonant quadratic coefficients in
// eigen-coordinates, the rank probe for a double node, and the classification
// of the transversal (xi, eta) block.

#include <Eigen/Dense>
#include <cmath>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "singfield/series_field.hpp"
#include "singfield/spectral.hpp"

namespace singfield {

namespace nf_detail {

inline MultiIndex mono(unsigned a, unsigned b, unsigned c) {
  return MultiIndex{static_cast<std::uint8_t>(a), static_cast<std::uint8_t>(b), static_cast<std::uint8_t>(c), 0};
}

inline Eigen::MatrixXd linear_part(const SeriesVectorField& v) {
  const unsigned n = v.dim();
  Eigen::MatrixXd A(n, n);
  for (unsigned i = 0; i < n; ++i) {
    for (unsigned j = 0; j < n; ++j) {
      MultiIndex m{};
      m[j] = 1;
      A(i, j) = v[i].coeff(m);
    }
  }
  return A;
}

inline double field_scale(const SeriesVectorField& v) {
  double s = 0;
  for (const Jet& c : v.components) s = std::max(s, c.max_abs());
  return std::max(s, 1.0);
}

inline void require_dim3(const SeriesVectorField& v) {
  if (v.dim() != 3) fail(Errc::ShapeMismatch, "normal-form routines need a three-dimensional field");
}

}  // namespace nf_detail

/// The field rewritten in the coordinates y with x - x* = P y.
inline SeriesVectorField in_linear_coordinates(const SeriesVectorField& v, const Eigen::MatrixXd& P) {
  const unsigned n = v.dim(), order = v.order();
  std::vector<Jet> h;
  for (unsigned i = 0; i < n; ++i) {
    Jet hi(n, order);
    for (unsigned j = 0; j < n; ++j) {
      if (order == 0) break;
      MultiIndex m{};
      m[j] = 1;
      hi.set_coeff(m, P(i, j));
    }
    h.push_back(std::move(hi));
  }
  std::vector<Jet> composed;
  for (unsigned i = 0; i < n; ++i) composed.push_back(compose_polynomial(v[i], h));
  const Eigen::MatrixXd Pinv = P.inverse();
  std::vector<Jet> out;
  for (unsigned k = 0; k < n; ++k) {
    Jet c(n, order);
    for (unsigned i = 0; i < n; ++i) c += Pinv(k, i) * composed[i];
    out.push_back(std::move(c));
  }
  std::vector<double> origin(n, 0.0);
  return SeriesVectorField(std::move(origin), std::move(out));
}

/// Splitting of a 3x3 linearization with exactly one zero eigenvalue into
/// (lambda_1, lambda_2, 0) and the matching real frame [e1 e2 e0].
struct EigenFrame {
  cplx lambda1, lambda2;
  Eigen::MatrixXd P;
  bool real = false;
};

inline EigenFrame eigen_frame(const Eigen::MatrixXd& A) {
  if (A.rows() != 3 || A.cols() != 3) fail(Errc::ShapeMismatch, "eigen frame needs a 3x3 matrix");
  std::vector<cplx> ev = eigenvalues(A);
  int zeros = 0, zero_at = -1;
  for (int i = 0; i < 3; ++i) {
    if (ev[i] == 0.0) {
      ++zeros;
      zero_at = i;
    }
  }
  if (zeros != 1) fail(Errc::SpectrumMismatch, "linearization must have exactly one zero eigenvalue");
  std::vector<cplx> nz;
  for (int i = 0; i < 3; ++i) {
    if (i != zero_at) nz.push_back(ev[i]);
  }
  // |lambda_1| >= |lambda_2|
  if (std::abs(nz[0]) < std::abs(nz[1])) std::swap(nz[0], nz[1]);
  EigenFrame fr;
  fr.lambda1 = nz[0];
  fr.lambda2 = nz[1];
  fr.real = nz[0].imag() == 0.0 && nz[1].imag() == 0.0;
  if (!fr.real) return fr;
  const Eigen::MatrixXcd Ac = A.cast<cplx>();
  const Eigen::MatrixXcd I = Eigen::MatrixXcd::Identity(3, 3);
  fr.P.resize(3, 3);
  auto first_vector = [&](cplx l) {
    auto basis = null_space(Ac - l * I);
    if (basis.empty()) fail(Errc::SpectrumMismatch, "no eigenvector found");
    return basis;
  };
  if (nz[0] == nz[1]) {
    auto basis = first_vector(nz[0]);
    if (basis.size() < 2) fail(Errc::NonDiagonalLinearPart, "double eigenvalue with a single eigenvector");
    fr.P.col(0) = basis[0].real();
    fr.P.col(1) = basis[1].real();
  } else {
    fr.P.col(0) = first_vector(nz[0])[0].real();
    fr.P.col(1) = first_vector(nz[1])[0].real();
  }
  fr.P.col(2) = first_vector(0.0)[0].real();
  return fr;
}

struct QuasiIntegral {
  unsigned N = 0;
  unsigned zeta_order = 3;
  std::vector<double> seed;                                   ///< zeta-coefficients of u_00
  std::map<std::pair<unsigned, unsigned>, std::vector<double>> u;  ///< (p1, p2) -> zeta-coefficients
  Jet U;
  double residual = 0;  ///< largest in-range coefficient of L_V U
};

/// Builds U = sum u_{p1 p2}(zeta) xi^p1 eta^p2 with L_V U flat to order N in
/// (xi, eta).  V is read as a polynomial in coordinates (xi, eta, zeta)
/// centred at its base point: coefficients beyond its order are zero.
inline QuasiIntegral flatten(const SeriesVectorField& v, unsigned N, std::vector<double> seed,
                             unsigned zeta_order = 3) {
  using nf_detail::mono;
  nf_detail::require_dim3(v);
  if (N < 1) fail(Errc::InvalidArgument, "flattening order must be at least 1");
  const unsigned K = N + zeta_order + 1;
  if (K > kMaxJetOrder) {
    fail(Errc::InvalidArgument, "N + zeta order + 1 exceeds the jet order limit " + std::to_string(kMaxJetOrder));
  }
  if (seed.size() > zeta_order + 1) fail(Errc::InvalidArgument, "seed has more zeta-coefficients than the truncation");
  seed.resize(zeta_order + 1, 0.0);

  SeriesVectorField w = v;
  for (Jet& c : w.components) c = c.order() >= K ? c.truncated(K) : c.padded(K);

  const double scale = nf_detail::field_scale(w);
  for (const Jet& c : w.components) {
    for (unsigned q = 0; q <= K; ++q) {
      if (std::abs(c.coeff(mono(0, 0, q))) > 1e-12 * scale) {
        fail(Errc::InvalidArgument, "field must vanish on the zeta-axis");
      }
    }
  }
  const double l1 = w[0].coeff(mono(1, 0, 0)), l2 = w[1].coeff(mono(0, 1, 0));
  if (std::abs(w[0].coeff(mono(0, 1, 0))) > 1e-12 * scale || std::abs(w[1].coeff(mono(1, 0, 0))) > 1e-12 * scale) {
    fail(Errc::NonDiagonalLinearPart, "the (xi, eta) block of the linear part is not diagonal");
  }
  if (l1 == 0.0 || l2 == 0.0) fail(Errc::InvalidArgument, "lambda_1 lambda_2 must be nonzero");
  const double rtol = 1e-9 * (std::abs(l1) + std::abs(l2));

  QuasiIntegral out;
  out.N = N;
  out.zeta_order = zeta_order;
  out.seed = seed;
  Jet U(3, K);
  for (unsigned q = 0; q <= zeta_order; ++q) U.set_coeff(mono(0, 0, q), seed[q]);

  for (unsigned n = 1; n <= N; ++n) {
    for (unsigned p1 = n + 1; p1-- > 0;) {
      const unsigned p2 = n - p1;
      if (std::abs(p1 * l1 + p2 * l2) <= rtol) {
        fail(Errc::ResonanceObstruction,
             "d_" + std::to_string(n) + "(0) vanishes: " + std::to_string(p1) + "*lambda1 + " + std::to_string(p2) +
                 "*lambda2 = 0 at order n = " + std::to_string(n));
      }
    }
    for (unsigned q = 0; q <= zeta_order; ++q) {
      for (unsigned p1 = n + 1; p1-- > 0;) {
        const unsigned p2 = n - p1;
        const MultiIndex m = mono(p1, p2, q);
        U.set_coeff(m, 0.0);
        const double R = lie_derivative(U, w).coeff(m);
        U.set_coeff(m, -R / (p1 * l1 + p2 * l2));
      }
    }
  }

  const Jet L = lie_derivative(U, w);
  for (unsigned n = 1; n <= N; ++n) {
    for (unsigned p1 = 0; p1 <= n; ++p1) {
      for (unsigned q = 0; q <= zeta_order; ++q) {
        out.residual = std::max(out.residual, std::abs(L.coeff(mono(p1, n - p1, q))));
      }
    }
  }
  for (unsigned n = 0; n <= N; ++n) {
    for (unsigned p1 = 0; p1 <= n; ++p1) {
      std::vector<double> col;
      for (unsigned q = 0; q <= zeta_order; ++q) col.push_back(U.coeff(mono(p1, n - p1, q)));
      out.u[{p1, n - p1}] = std::move(col);
    }
  }
  out.U = std::move(U);
  return out;
}

/// Coefficient Psi(0,0) of rho = xi*eta in the zeta-component of the 2-jet in
/// eigen-coordinates of a resonant saddle lambda_1 + lambda_2 = 0.  Quadratic
/// changes of variables cannot alter it, so it is the lowest-order invariant
/// deciding whether the saddle normal form with rho-dependence applies.
inline double resonant_jet_coefficient(const SeriesVectorField& v, unsigned n = 1, unsigned m = 1) {
  nf_detail::require_dim3(v);
  if (n != 1 || m != 1) fail(Errc::UnsupportedResonance, "only the resonance lambda_1 + lambda_2 = 0 is supported");
  if (v.order() < 2) fail(Errc::ShapeMismatch, "need at least the 2-jet of the field");
  const SeriesVectorField v2 = v.truncated(2);
  const Eigen::MatrixXd A = nf_detail::linear_part(v2);
  EigenFrame fr;
  try {
    fr = eigen_frame(A);
  } catch (const Error& e) {
    fail(Errc::NotResonant, std::string("spectrum is not of the form (lambda, -lambda, 0): ") + e.what());
  }
  const double tol = 1e-7 * (std::abs(fr.lambda1) + std::abs(fr.lambda2));
  if (!fr.real || std::abs(fr.lambda1 + fr.lambda2) > tol) {
    fail(Errc::NotResonant, "lambda_1 + lambda_2 != 0");
  }
  const SeriesVectorField y = in_linear_coordinates(v2, fr.P);
  return y[2].coeff(nf_detail::mono(1, 1, 0));
}

/// Coefficient of eta^2 in the xi-component for a node with lambda_1 = 2 lambda_2,
/// i.e. phi(0) of the form xi' = 2 xi + phi eta^2 up to a nonzero factor.
inline double node_resonant_coefficient(const SeriesVectorField& v, unsigned n = 2) {
  nf_detail::require_dim3(v);
  if (n != 2) fail(Errc::UnsupportedResonance, "node coefficient implemented for lambda_1 = 2 lambda_2 only");
  if (v.order() < 2) fail(Errc::ShapeMismatch, "need at least the 2-jet of the field");
  const SeriesVectorField v2 = v.truncated(2);
  const EigenFrame fr = eigen_frame(nf_detail::linear_part(v2));
  const double tol = 1e-7 * (std::abs(fr.lambda1) + std::abs(fr.lambda2));
  if (!fr.real || std::abs(fr.lambda1 - 2.0 * fr.lambda2) > tol) fail(Errc::NotResonant, "lambda_1 != 2 lambda_2");
  const SeriesVectorField y = in_linear_coordinates(v2, fr.P);
  return y[0].coeff(nf_detail::mono(0, 2, 0));
}

struct RankProbe {
  bool phi_zero = false;
  int rank = 0;
  double lambda = 0;
  std::vector<double> singular_values;
};

/// For a linearization with spectrum (lambda, lambda, 0): phi(0) = 0 iff
/// rank(Lambda - lambda I) = 1.
inline RankProbe rank_probe_phi(const Eigen::MatrixXd& L) {
  if (L.rows() != 3 || L.cols() != 3) fail(Errc::ShapeMismatch, "rank probe needs a 3x3 matrix");
  const std::vector<cplx> ev = eigenvalues(L);
  std::vector<cplx> nz;
  int zeros = 0;
  for (cplx z : ev) (z == 0.0 ? ++zeros : (nz.push_back(z), 0));
  const double scale = std::max(L.norm(), 1e-300);
  if (zeros != 1 || nz.size() != 2 || nz[0].imag() != 0.0 || std::abs(nz[0] - nz[1]) > 1e-7 * scale) {
    fail(Errc::SpectrumMismatch, "rank probe needs spectrum (lambda, lambda, 0) with lambda real and nonzero");
  }
  RankProbe out;
  out.lambda = 0.5 * (nz[0].real() + nz[1].real());
  const Eigen::MatrixXd M = L - out.lambda * Eigen::MatrixXd::Identity(3, 3);
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(M);
  for (Eigen::Index i = 0; i < svd.singularValues().size(); ++i) {
    const double s = svd.singularValues()(i);
    out.singular_values.push_back(s);
    if (s > 1e-8 * scale) ++out.rank;
  }
  out.phi_zero = out.rank == 1;
  return out;
}

enum class NormalFormKind { Linearizable, NodeResonant, SaddleResonant, Unclassified };

constexpr const char* to_string(NormalFormKind k) {
  switch (k) {
    case NormalFormKind::Linearizable: return "linearizable";
    case NormalFormKind::NodeResonant: return "node_resonant";
    case NormalFormKind::SaddleResonant: return "saddle_resonant";
    case NormalFormKind::Unclassified: return "unclassified";
  }
  return "unclassified";
}

/// Optional probes that settle the resonant branches.
struct ClassifyProbes {
  std::optional<bool> phi_zero;  ///< node: phi(0) = 0
  std::optional<double> psi;     ///< saddle: Psi(0,0)
};

struct Classification {
  NormalFormKind kind = NormalFormKind::Unclassified;
  cplx lambda_ratio = 0;  ///< lambda_1 / lambda_2 with |ratio| >= 1
  std::optional<long> n, m;
  std::optional<bool> phi_zero;
  std::optional<double> psi;
  std::vector<std::pair<unsigned, long>> nk;  ///< (k, N(k)) for k = 1..3
  bool r_consistent = false;                 ///< ratio is r - 1 (or its inverse), or lambda_1 + lambda_2 = 0
  std::string form;
};

inline Classification classify(cplx l1, cplx l2, double r, const ClassifyProbes& probes = {}) {
  if (l1.real() == 0.0 || l2.real() == 0.0) {
    fail(Errc::HyperbolicityViolated, "classification needs Re lambda_1, Re lambda_2 != 0");
  }
  if (std::abs(l1) < std::abs(l2)) std::swap(l1, l2);
  Classification c;
  c.lambda_ratio = l1 / l2;
  for (unsigned k = 1; k <= 3; ++k) {
    if (auto nk = smoothness_order_bound(l1, l2, k)) c.nk.emplace_back(k, *nk);
  }
  constexpr double kRatTol = 1e-7;
  constexpr long kMaxDen = 12;
  const double lam = c.lambda_ratio.real();
  if (r != 1.0) {
    const double rm = r - 1.0;
    c.r_consistent = std::abs(lam - rm) <= kRatTol * std::abs(lam) || std::abs(lam * rm - 1.0) <= kRatTol;
  }
  if (std::abs(lam + 1.0) <= kRatTol) c.r_consistent = true;

  if (std::abs(c.lambda_ratio.imag()) > kRatTol * std::abs(c.lambda_ratio)) {
    c.form = "complex eigenvalues of the transversal block; only real spectra are classified";
    return c;
  }
  const auto q = rationalize(std::abs(lam), kMaxDen, kRatTol);
  if (lam > 0) {
    if (q && q->den == 1) {
      c.kind = NormalFormKind::NodeResonant;
      c.n = q->num;
      c.phi_zero = probes.phi_zero;
      c.form = "xi' = " + std::to_string(q->num) + " xi + phi(zeta) eta^" + std::to_string(q->num) +
               ", eta' = eta, zeta' = 0";
      if (probes.phi_zero) {
        c.form += *probes.phi_zero ? " with phi(0) = 0" : " with phi(0) != 0 (phi normalizes to 1)";
      }
    } else {
      c.kind = NormalFormKind::Linearizable;
      c.form = "xi' = lambda(zeta) xi, eta' = eta, zeta' = 0 (node without resonances)";
    }
    return c;
  }
  if (!q) {
    c.kind = NormalFormKind::Linearizable;
    c.form = "xi' = lambda(zeta) xi, eta' = eta, zeta' = 0 (saddle with irrational ratio)";
    return c;
  }
  // lambda = -n/m: resonance monomial rho = xi^m eta^n
  const long n = q->num, m = q->den;
  if (n == 1 && m == 1 && probes.psi && std::abs(*probes.psi) > 1e-9) {
    c.kind = NormalFormKind::SaddleResonant;
    c.n = n;
    c.m = m;
    c.psi = probes.psi;
    c.form = "xi' = xi, eta' = -eta, zeta' = xi eta";
    return c;
  }
  c.psi = probes.psi;
  c.form = "resonant saddle with ratio -" + std::to_string(n) + "/" + std::to_string(m) +
           (probes.psi ? "; Psi(0,0) vanishes, form not determined by the 2-jet"
                       : "; Psi(0,0) not available for this resonance");
  return c;
}

/// Classification at a singular point of a smooth field with spectrum
/// (lambda1, lambda2, 0), running whichever probe the resonance calls for.
inline Classification classify_singular_point(const VectorField& v, std::span<const double> x, double r) {
  const SpectralReport rep = linearize(v, x);
  std::vector<cplx> nz;
  for (cplx z : rep.eigenvalues) {
    if (z != 0.0) nz.push_back(z);
  }
  if (nz.size() != 2) fail(Errc::SpectrumMismatch, "classification needs exactly one zero eigenvalue");
  if (std::abs(nz[0]) < std::abs(nz[1])) std::swap(nz[0], nz[1]);
  ClassifyProbes probes;
  const cplx ratio = nz[0] / nz[1];
  if (std::abs(ratio.imag()) <= 1e-7 * std::abs(ratio)) {
    const double lam = ratio.real();
    if (std::abs(lam - 1.0) <= 1e-7) {
      probes.phi_zero = rank_probe_phi(rep.jacobian).phi_zero;
    } else if (std::abs(lam - 2.0) <= 1e-7) {
      probes.phi_zero = std::abs(node_resonant_coefficient(v.series(x, 3), 2)) <= 1e-9;
    } else if (std::abs(lam + 1.0) <= 1e-7) {
      probes.psi = resonant_jet_coefficient(v.series(x, 3));
    }
  }
  return classify(nz[0], nz[1], r, probes);
}

}  // namespace singfield
