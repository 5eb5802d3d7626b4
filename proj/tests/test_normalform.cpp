#include <gtest/gtest.h>

#include <random>

#include "fixtures.hpp"
#include "singfield/normalform.hpp"

using namespace singfield;
using namespace testsupport;

namespace {

SeriesVectorField series(const std::string& a, const std::string& b, const std::string& c, unsigned order = 7,
                         std::vector<double> at = {0, 0, 0}) {
  return field3(a, b, c).series(at, order);
}

MultiIndex mono(int a, int b, int c) {
  return MultiIndex{static_cast<std::uint8_t>(a), static_cast<std::uint8_t>(b), static_cast<std::uint8_t>(c), 0};
}

Errc code_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "expected an Error";
  return Errc::ConfigError;
}

// Independent check of the flatness claim: rebuild U from the coefficient
// table and expand L_V U with the jets module.
double flatness_residual(const QuasiIntegral& q, const SeriesVectorField& v) {
  const unsigned K = q.N + q.zeta_order + 1;
  Jet U(3, K);
  for (const auto& [key, col] : q.u) {
    for (unsigned z = 0; z < col.size(); ++z) U.set_coeff(mono(key.first, key.second, z), col[z]);
  }
  SeriesVectorField w = v;
  for (Jet& c : w.components) c = c.order() >= K ? c.truncated(K) : c.padded(K);
  const Jet L = lie_derivative(U, w);
  double worst = 0;
  for (unsigned n = 1; n <= q.N; ++n)
    for (unsigned p1 = 0; p1 <= n; ++p1)
      for (unsigned z = 0; z <= q.zeta_order; ++z) worst = std::max(worst, std::abs(L.coeff(mono(p1, n - p1, z))));
  return worst;
}

}  // namespace

TEST(Flatten, LinearFieldHasTrivialCorrections) {
  const auto q = flatten(series("x", "-3*y", "0"), 3, {0, 1});
  for (const auto& [key, col] : q.u) {
    if (key.first + key.second == 0) continue;
    for (double c : col) EXPECT_EQ(c, 0.0);
  }
  EXPECT_EQ(q.residual, 0.0);
}

TEST(Flatten, HandSolvedOrderOne) {
  const auto v = series("x", "-3*y", "x");
  const auto q = flatten(v, 1, {0, 1});
  EXPECT_NEAR(q.u.at({1, 0})[0], -1.0, 1e-15);
  for (double c : q.u.at({0, 1})) EXPECT_EQ(c, 0.0);
  // U = zeta - xi is an exact first integral
  EXPECT_EQ(lie_derivative(q.U, v).max_abs(), 0.0);
}

TEST(Flatten, OrderThreeIsFlat) {
  const auto v = series("x", "-3*y", "x");
  const auto q = flatten(v, 3, {0, 1});
  EXPECT_LE(q.residual, 1e-9);
  EXPECT_LE(flatness_residual(q, v), 1e-9);
}

TEST(Flatten, NonlinearZetaDependentField) {
  const auto v = series("x*(1 + z) + y^2", "-2.5*y + x*y*z", "x*y + x^2*z");
  const auto q = flatten(v, 3, {0, 1, 0.5});
  EXPECT_LE(q.residual, 1e-9);
  EXPECT_LE(flatness_residual(q, v), 1e-9);
  double second_order = 0;
  for (const auto& [key, col] : q.u) {
    if (key.first + key.second >= 2) second_order = std::max(second_order, std::abs(col[0]) + std::abs(col[1]));
  }
  EXPECT_GT(second_order, 0.1);
}

TEST(Flatten, ScaleInvariant) {
  const auto v = series("x*(1 + z) + y^2", "-2.5*y + x*y*z", "x*y + x^2*z");
  const auto v3 = series("-3*(x*(1 + z) + y^2)", "-3*(-2.5*y + x*y*z)", "-3*(x*y + x^2*z)");
  const auto a = flatten(v, 3, {0, 1}), b = flatten(v3, 3, {0, 1});
  for (const auto& [key, col] : a.u) {
    for (std::size_t i = 0; i < col.size(); ++i) EXPECT_NEAR(col[i], b.u.at(key)[i], 1e-12);
  }
}

TEST(Flatten, ResonanceObstructionAtOrderTwo) {
  try {
    (void)flatten(series("x", "-y", "x"), 2, {0, 1});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::ResonanceObstruction);
    EXPECT_NE(std::string(e.what()).find("n = 2"), std::string::npos);
  }
  EXPECT_NO_THROW((void)flatten(series("x", "-y", "x"), 1, {0, 1}));
}

TEST(Flatten, RejectsNonDiagonalBlock) {
  EXPECT_EQ(code_of([] { (void)flatten(series("x + y", "-2*y", "0"), 2, {0, 1}); }), Errc::NonDiagonalLinearPart);
  EXPECT_EQ(code_of([] { (void)flatten(series("x + z", "-2*y", "0"), 2, {0, 1}); }), Errc::InvalidArgument);
}

TEST(ResonantCoefficient, ExampleFields) {
  EXPECT_NEAR(resonant_jet_coefficient(series("x", "-y*(1 + x*y)", "x*y*z", 3)), 0.0, 1e-12);
  EXPECT_NEAR(resonant_jet_coefficient(series("x", "-y", "x*y", 3)), 1.0, 1e-12);
  EXPECT_NEAR(resonant_jet_coefficient(series("x", "-y", "0", 3)), 0.0, 1e-12);
}

TEST(ResonantCoefficient, Errors) {
  EXPECT_EQ(code_of([] { (void)resonant_jet_coefficient(series("x", "-y", "x*y", 3), 1, 2); }),
            Errc::UnsupportedResonance);
  EXPECT_EQ(code_of([] { (void)resonant_jet_coefficient(series("2*x", "-y", "x*y", 3)); }), Errc::NotResonant);
  EXPECT_EQ(code_of([] { (void)resonant_jet_coefficient(series("x", "y", "z", 3)); }), Errc::NotResonant);
}

TEST(ResonantCoefficient, VerdictInvariantUnderSplittingPreservingMaps) {
  std::mt19937_64 rng(77);
  std::uniform_real_distribution<double> u(0.5, 2.0), sgn(-1, 1);
  const std::vector<std::array<std::string, 3>> fields = {
      {"x", "-y*(1 + x*y)", "x*y*z"}, {"x", "-y", "0"}, {"x", "-y", "x*y"}, {"x + x*z", "-y + y^2", "0.3*x*y + z^2"}};
  for (const auto& f : fields) {
    const auto base = series(f[0], f[1], f[2], 3);
    const double psi = resonant_jet_coefficient(base);
    for (int trial = 0; trial < 5; ++trial) {
      // x = S y with S mapping the eigen-axes to skewed but independent lines
      Eigen::MatrixXd S(3, 3);
      S << u(rng), 0.3 * sgn(rng), 0, 0.2 * sgn(rng), u(rng), 0.1 * sgn(rng), 0.4 * sgn(rng), 0.5 * sgn(rng), u(rng);
      const auto conj = in_linear_coordinates(base, S);
      const double psi2 = resonant_jet_coefficient(conj);
      EXPECT_EQ(std::abs(psi) > 1e-9, std::abs(psi2) > 1e-9);
    }
  }
}

TEST(NodeCoefficient, PseudoDeskModelVanishes) {
  // (-t, -tp, -p/2) on (t, x, p)
  EXPECT_NEAR(node_resonant_coefficient(series("-x", "-x*z", "-z/2", 3, {0, 0.3, 0})), 0.0, 1e-14);
  // xi' = 2 xi + eta^2 keeps its resonant term
  EXPECT_NEAR(std::abs(node_resonant_coefficient(series("2*x + y^2", "y", "x*y", 3))), 1.0, 1e-12);
}

TEST(RankProbe, DiagonalAndJordan) {
  Eigen::MatrixXd L(3, 3);
  L << 1, 0, 0, 0, 1, 0, 0, 0, 0;
  auto rp = rank_probe_phi(L);
  EXPECT_EQ(rp.rank, 1);
  EXPECT_TRUE(rp.phi_zero);
  L << 1, 1, 0, 0, 1, 0, 0, 0, 0;
  rp = rank_probe_phi(L);
  EXPECT_EQ(rp.rank, 2);
  EXPECT_FALSE(rp.phi_zero);
  // coupling into the center direction keeps rank 1
  L << 1, 0, 0, 0, 1, 0, 1, 0, 0;
  EXPECT_TRUE(rank_probe_phi(L).phi_zero);
}

TEST(RankProbe, SpectrumMismatch) {
  Eigen::MatrixXd L(3, 3);
  L << 2, 0, 0, 0, 1, 0, 0, 0, 0;
  EXPECT_EQ(code_of([&] { (void)rank_probe_phi(L); }), Errc::SpectrumMismatch);
}

TEST(Classify, Branches) {
  auto c = classify(-1.0, -0.5, 1.5, ClassifyProbes{true, std::nullopt});
  EXPECT_EQ(c.kind, NormalFormKind::NodeResonant);
  EXPECT_EQ(c.n, 2);
  EXPECT_TRUE(c.r_consistent);
  EXPECT_EQ(c.phi_zero, true);

  c = classify(2.0, 1.0, 3.0);
  EXPECT_EQ(c.kind, NormalFormKind::NodeResonant);
  EXPECT_TRUE(c.r_consistent);

  c = classify(1.0, -1.0, 1.5, ClassifyProbes{std::nullopt, 1.0});
  EXPECT_EQ(c.kind, NormalFormKind::SaddleResonant);
  EXPECT_EQ(c.n, 1);
  EXPECT_EQ(c.m, 1);

  EXPECT_EQ(classify(1.0, -1.0, 1.5, ClassifyProbes{std::nullopt, 0.0}).kind, NormalFormKind::Unclassified);
  EXPECT_EQ(classify(1.5, 1.0, 2.0).kind, NormalFormKind::Linearizable);
  EXPECT_EQ(classify(std::sqrt(2.0), -1.0, 2.0).kind, NormalFormKind::Linearizable);
  EXPECT_EQ(classify(cplx(1, 2), cplx(1, -2), 2.0).kind, NormalFormKind::Unclassified);
  EXPECT_EQ(code_of([] { (void)classify(0.0, 1.0, 2.0); }), Errc::HyperbolicityViolated);
}

TEST(Classify, ScaleInvariant) {
  const std::vector<std::pair<double, double>> pairs = {{2, 1}, {1, -1}, {1.5, 1}, {3, -2}, {std::sqrt(5.0), 1}};
  for (auto [a, b] : pairs) {
    const auto base = classify(a, b, 2.0, ClassifyProbes{std::nullopt, 1.0});
    for (double s : {-4.0, 0.1, 7.0}) {
      const auto sc = classify(a * s, b * s, 2.0, ClassifyProbes{std::nullopt, 1.0});
      EXPECT_EQ(base.kind, sc.kind);
      EXPECT_EQ(base.n, sc.n);
      EXPECT_EQ(base.nk, sc.nk);
    }
  }
}
