#include <cmath>

#include <boost/math/constants/constants.hpp>
#include <boost/multiprecision/cpp_dec_float.hpp>
#include <gtest/gtest.h>

#include "fixtures.hpp"
#include "qcl/dynamics.hpp"
#include "qcl/error.hpp"
#include "qcl/random.hpp"

using namespace qcl;
using qcl::test::kCat;

namespace {

using Dec50 = boost::multiprecision::cpp_dec_float_50;

// T(x) = A (x + a sin(2 pi m.x) v) mod 1 evaluated in 50 significant digits.
std::array<Dec50, 2> shear_cat_reference(Dec50 x1, Dec50 x2, Dec50 a, int m1, int m2, Dec50 v1, Dec50 v2) {
  const Dec50 two_pi = 2 * boost::math::constants::pi<Dec50>();
  const Dec50 s = sin(two_pi * (m1 * x1 + m2 * x2));
  const Dec50 y1 = x1 + a * s * v1;
  const Dec50 y2 = x2 + a * s * v2;
  Dec50 z1 = 2 * y1 + y2;
  Dec50 z2 = y1 + y2;
  z1 -= floor(z1);
  z2 -= floor(z2);
  return {z1, z2};
}

}  // namespace

TEST(ApplyMap, CatFixesOrigin) {
  const auto t = qcl::test::cat_map();
  EXPECT_EQ(apply_map(t, {0.0, 0.0}), (TorusPoint{0.0, 0.0}));
}

TEST(ApplyMap, CatHalfPoint) {
  const auto y = apply_map(qcl::test::cat_map(), {0.5, 0.5});
  EXPECT_DOUBLE_EQ(y.x1, 0.5);
  EXPECT_DOUBLE_EQ(y.x2, 0.0);
}

TEST(ApplyMap, ShearMatchesHighPrecisionReference) {
  const auto t = HyperbolicMap::anosov(kCat, {ShearTerm{{1, 1}, 0.01, {1.0, 0.0}}}, 0.1);
  const auto y = apply_map(t, {0.25, 0.75});
  const auto ref = shear_cat_reference(Dec50("0.25"), Dec50("0.75"), Dec50("0.01"), 1, 1, Dec50(1), Dec50(0));
  EXPECT_NEAR(y.x1, static_cast<double>(ref[0]), 1e-15);
  EXPECT_NEAR(y.x2, static_cast<double>(ref[1]), 1e-15);
}

TEST(ApplyMap, ShearAgreesWithReferenceOnRandomPoints) {
  const auto t = HyperbolicMap::anosov(kCat, {ShearTerm{{2, -1}, 0.02, {0.6, 0.8}}}, 0.1);
  CounterRng rng(99);
  for (int i = 0; i < 200; ++i) {
    const double x1 = rng.uniform(), x2 = rng.uniform();
    const auto y = apply_map(t, {x1, x2});
    const auto ref = shear_cat_reference(Dec50(x1), Dec50(x2), Dec50(0.02), 2, -1, Dec50(0.6), Dec50(0.8));
    // Distances on the circle: a reference of 0.9999... may wrap to 0.
    const auto circ = [](double a, double b) { return std::min(std::abs(a - b), 1.0 - std::abs(a - b)); };
    EXPECT_LT(circ(y.x1, static_cast<double>(ref[0])), 1e-13);
    EXPECT_LT(circ(y.x2, static_cast<double>(ref[1])), 1e-13);
  }
}

TEST(ApplyMap, RejectsNonHyperbolicBase) {
  EXPECT_THROW(HyperbolicMap::anosov(Matrix2i{1, 1, 0, 1}), std::invalid_argument);
  EXPECT_THROW(HyperbolicMap::anosov(Matrix2i{2, 0, 0, 1}), std::invalid_argument);
}

TEST(ApplyMap, RejectsShearAboveDelta) {
  EXPECT_THROW(HyperbolicMap::anosov(kCat, {ShearTerm{{1, 0}, 0.2, {1.0, 0.0}}}, 0.1), std::invalid_argument);
}

TEST(ApplyMap, PiecewiseBoundaryPointRaises) {
  const auto t = HyperbolicMap::piecewise({AffinePiece{{{0, 0}, {0.5, 0}, {0.5, 1}, {0, 1}}, kCat, {0, 0}},
                                           AffinePiece{{{0.5, 0}, {1, 0}, {1, 1}, {0.5, 1}}, kCat, {0, 0}}});
  EXPECT_THROW(apply_map(t, {0.5, 0.3}), BoundaryPointError);
  const auto y = apply_map(t, {0.2, 0.3});
  EXPECT_NEAR(y.x1, 0.7, 1e-15);
  EXPECT_NEAR(y.x2, 0.5, 1e-15);
}

TEST(Jacobian, AutomorphismHasUnitDeterminant) {
  const auto t = HyperbolicMap::anosov(Matrix2i{1, 1, 1, 2});
  CounterRng rng(3);
  for (int i = 0; i < 50; ++i) EXPECT_DOUBLE_EQ(map_jacobian_det(t, {rng.uniform(), rng.uniform()}), 1.0);
}

TEST(Jacobian, VolumePreservingShearHasUnitDeterminant) {
  const auto t = HyperbolicMap::anosov(
      kCat, {ShearTerm{{1, 0}, 0.03, {0.0, 1.0}}, ShearTerm{{0, 1}, 0.02, {1.0, 0.0}}}, 0.1);
  CounterRng rng(4);
  for (int i = 0; i < 50; ++i) EXPECT_NEAR(map_jacobian_det(t, {rng.uniform(), rng.uniform()}), 1.0, 1e-14);
  EXPECT_TRUE(t.preserves_lebesgue());
}

TEST(Jacobian, DissipativeMatchesFiniteDifference) {
  const auto t = qcl::test::dissipative_map(0.03);
  const TorusPoint x{0.1, 0.2};
  const double h = 1e-6;
  const auto unwrap = [](double d) { return d - std::round(d); };
  Mat2 fd{};
  for (int j = 0; j < 2; ++j) {
    TorusPoint p = x, m = x;
    (j == 0 ? p.x1 : p.x2) += h;
    (j == 0 ? m.x1 : m.x2) -= h;
    const auto yp = apply_map(t, p), ym = apply_map(t, m);
    fd[0][j] = unwrap(yp.x1 - ym.x1) / (2 * h);
    fd[1][j] = unwrap(yp.x2 - ym.x2) / (2 * h);
  }
  const double det_fd = fd[0][0] * fd[1][1] - fd[0][1] * fd[1][0];
  EXPECT_NEAR(map_jacobian_det(t, x), det_fd, 1e-4 * std::abs(det_fd));
  const Mat2 jac = t.jacobian(x);
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 2; ++j) EXPECT_NEAR(jac[i][j], fd[i][j], 1e-4 * std::max(1.0, std::abs(fd[i][j])));
  EXPECT_FALSE(t.preserves_lebesgue());
}

TEST(OmegaPath, ShiftByZeroIsIdentity) {
  const OmegaPath w(5, {0.3, 0.7});
  const auto v = w.shifted(0);
  for (int i = -50; i < 50; ++i) EXPECT_EQ(w.symbol(i), v.symbol(i));
}

TEST(OmegaPath, ShiftIsInvertible) {
  const OmegaPath w(5, {0.3, 0.3, 0.4});
  const auto v = w.shifted(3).shifted(-3);
  for (int i = -50; i < 50; ++i) EXPECT_EQ(w.symbol(i), v.symbol(i));
}

TEST(OmegaPath, ShiftByOneReadsNextSymbol) {
  const OmegaPath w(42, {0.5, 0.5});
  const auto v = sigma_shift(w, 1);
  for (int i = 0; i < 1000; ++i) ASSERT_EQ(v.symbol(i), w.symbol(i + 1));
}

TEST(OmegaPath, SymbolFrequenciesFollowDistribution) {
  const OmegaPath w(11, {0.2, 0.8});
  const auto s = w.symbols(0, 100000);
  double ones = 0;
  for (auto a : s) ones += a;
  EXPECT_NEAR(ones / s.size(), 0.8, 4 * std::sqrt(0.16 / s.size()));
}

TEST(Compose, ZeroStepsIsIdentity) {
  const OmegaPath w(1, qcl::test::fair_coin());
  const TorusPoint x{0.3, 0.4};
  EXPECT_EQ(compose(qcl::test::standard_maps(), w, 0, x), x);
}

TEST(Compose, ConstantPathLinearIsMatrixPower) {
  const MapFamily maps{qcl::test::cat_map()};
  const auto w = OmegaPath::constant({1.0});
  const TorusPoint x{0.125, 0.375};
  // A^2 = [[5, 3], [3, 2]]
  const auto y = compose(maps, w, 2, x);
  EXPECT_NEAR(y.x1, std::fmod(5 * 0.125 + 3 * 0.375, 1.0), 1e-15);
  EXPECT_NEAR(y.x2, std::fmod(3 * 0.125 + 2 * 0.375, 1.0), 1e-15);
}

TEST(Compose, MatchesSequentialApplication) {
  const auto maps = qcl::test::standard_maps();
  const OmegaPath w(17, qcl::test::fair_coin());
  TorusPoint x{0.31, 0.77};
  const auto y = compose(maps, w, 5, x);
  for (int i = 0; i < 5; ++i) x = apply_map(maps[w.symbol(i)], x);
  EXPECT_EQ(y, x);
}

TEST(Compose, CocycleProperty) {
  const auto maps = qcl::test::standard_maps();
  const OmegaPath w(23, qcl::test::fair_coin());
  const TorusPoint x{0.61, 0.13};
  for (int m = 0; m <= 20; m += 4) {
    for (int n = 0; n <= 20; n += 5) {
      const auto lhs = compose(maps, w, m + n, x);
      const auto rhs = compose(maps, w.shifted(n), m, compose(maps, w, n, x));
      EXPECT_EQ(lhs, rhs) << "m=" << m << " n=" << n;
    }
  }
}

TEST(BirkhoffSum, EmptyAndZeroObservable) {
  const auto maps = qcl::test::standard_maps();
  const OmegaPath w(7, qcl::test::fair_coin());
  EXPECT_EQ(birkhoff_sum(maps, qcl::test::standard_observable_raw(), w, {0.2, 0.9}, 0), 0.0);
  const auto zero = Observable::zero(2);
  for (int n : {1, 10, 100}) EXPECT_EQ(birkhoff_sum(maps, zero, w, {0.2, 0.9}, n), 0.0);
}

TEST(BirkhoffSum, MatchesUnrolledSum) {
  const auto maps = qcl::test::standard_maps();
  const auto g = qcl::test::standard_observable_raw();
  const OmegaPath w(7, qcl::test::fair_coin());
  const TorusPoint x0{0.2, 0.9};
  const auto x1 = apply_map(maps[w.symbol(0)], x0);
  const auto x2 = apply_map(maps[w.symbol(1)], x1);
  const double expected = g(maps[w.symbol(0)], w.symbol(0), x0) + g(maps[w.symbol(1)], w.symbol(1), x1) +
                          g(maps[w.symbol(2)], w.symbol(2), x2);
  EXPECT_NEAR(birkhoff_sum(maps, g, w, x0, 3), expected, 1e-14);
}

TEST(BirkhoffSum, IsAdditiveAlongTheCocycle) {
  const auto maps = qcl::test::standard_maps();
  const auto g = qcl::test::standard_observable_raw();
  const OmegaPath w(29, qcl::test::fair_coin());
  const TorusPoint x{0.44, 0.21};
  const double lhs = birkhoff_sum(maps, g, w, x, 30);
  const double rhs = birkhoff_sum(maps, g, w, x, 12) + birkhoff_sum(maps, g, w.shifted(12), compose(maps, w, 12, x), 18);
  EXPECT_NEAR(lhs, rhs, 1e-12);
}

TEST(BirkhoffSum, CoboundaryTelescopes) {
  const MapFamily maps{qcl::test::cat_map(), HyperbolicMap::anosov(Matrix2i{1, 1, 1, 2})};
  const Observable g({TrigPolynomial{}, TrigPolynomial{}}, qcl::test::cos_x1());
  const OmegaPath w(31, qcl::test::fair_coin());
  const TorusPoint x{0.37, 0.58};
  const int n = 40;
  const auto r = qcl::test::cos_x1();
  EXPECT_NEAR(birkhoff_sum(maps, g, w, x, n), r(x) - r(compose(maps, w, n, x)), 1e-11);
}

TEST(SkewProduct, FixedPointStaysFixed) {
  const MapFamily maps{qcl::test::cat_map()};
  const SkewState s{OmegaPath::constant({1.0}), {0.0, 0.0}};
  const auto t = skew_step(maps, s);
  EXPECT_EQ(t.x, (TorusPoint{0.0, 0.0}));
  EXPECT_EQ(t.omega.symbol(0), 0u);
}

TEST(SkewProduct, IteratesMatchComposeAndBirkhoff) {
  const auto maps = qcl::test::standard_maps();
  const auto g = qcl::test::standard_observable_raw();
  const OmegaPath w(37, qcl::test::fair_coin());
  SkewState s{w, {0.71, 0.29}};
  double sum = 0.0;
  for (int i = 0; i < 10; ++i) {
    sum += observe(maps, g, s);
    s = skew_step(maps, s);
  }
  EXPECT_EQ(s.x, compose(maps, w, 10, {0.71, 0.29}));
  EXPECT_NEAR(sum, birkhoff_sum(maps, g, w, {0.71, 0.29}, 10), 1e-13);
  EXPECT_EQ(s.omega.symbol(0), w.symbol(10));
}

TEST(Hyperbolicity, CertificatePassesOnStandardFamily) {
  const auto maps = qcl::test::standard_maps();
  const OmegaPath w(41, qcl::test::fair_coin());
  const auto cert = certify_hyperbolicity(maps, w, 1.5, 1000, 50, 5);
  EXPECT_TRUE(cert.pass);
  EXPECT_GE(cert.min_expansion, 1.5);
  EXPECT_EQ(cert.orbits, 1000u);
}
