#include <algorithm>
#include <cmath>

#include <Eigen/Dense>
#include <gtest/gtest.h>

#include "fixtures.hpp"
#include "qcl/random.hpp"
#include "qcl/ulam.hpp"

using namespace qcl;

namespace {

using Polygon = std::vector<Vec2>;

// Sutherland-Hodgman clip of a convex polygon against {p : sign * (p[axis] - bound) <= 0}.
Polygon clip(const Polygon& poly, int axis, double bound, double sign) {
  Polygon out;
  for (std::size_t i = 0; i < poly.size(); ++i) {
    const Vec2& a = poly[i];
    const Vec2& b = poly[(i + 1) % poly.size()];
    const double da = sign * (a[axis] - bound), db = sign * (b[axis] - bound);
    if (da <= 0) out.push_back(a);
    if ((da < 0 && db > 0) || (da > 0 && db < 0)) {
      const double t = da / (da - db);
      out.push_back({a[0] + t * (b[0] - a[0]), a[1] + t * (b[1] - a[1])});
    }
  }
  return out;
}

double area(const Polygon& p) {
  double s = 0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    const auto& a = p[i];
    const auto& b = p[(i + 1) % p.size()];
    s += a[0] * b[1] - a[1] * b[0];
  }
  return 0.5 * std::abs(s);
}

// Leb(cell_i & A^-1 cell_j) / Leb(cell_i) = Leb(A cell_i & cell_j) / Leb(cell_i) for unimodular A,
// summing over the integer translates of cell_j that the unwrapped image meets.
Eigen::MatrixXd exact_linear_ulam(const Matrix2i& a, int k) {
  const UlamGrid grid(k);
  const double s = grid.side();
  Eigen::MatrixXd m = Eigen::MatrixXd::Zero(grid.size(), grid.size());
  for (std::size_t i = 0; i < grid.size(); ++i) {
    const auto o = grid.cell_origin(i);
    Polygon img;
    for (const auto& v : {Vec2{o.x1, o.x2}, Vec2{o.x1 + s, o.x2}, Vec2{o.x1 + s, o.x2 + s}, Vec2{o.x1, o.x2 + s}})
      img.push_back({a.a11 * v[0] + a.a12 * v[1], a.a21 * v[0] + a.a22 * v[1]});
    for (std::size_t j = 0; j < grid.size(); ++j) {
      const auto q = grid.cell_origin(j);
      for (int n1 = -1; n1 <= 4; ++n1) {
        for (int n2 = -1; n2 <= 4; ++n2) {
          Polygon p = img;
          p = clip(p, 0, q.x1 + n1, -1.0);
          p = clip(p, 0, q.x1 + n1 + s, 1.0);
          p = clip(p, 1, q.x2 + n2, -1.0);
          p = clip(p, 1, q.x2 + n2 + s, 1.0);
          if (p.size() >= 3) m(i, j) += area(p) / (s * s);
        }
      }
    }
  }
  return m;
}

}  // namespace

TEST(UlamMatrix, LinearCatMatchesPolygonClipping) {
  const UlamGrid grid(2);
  const auto m = test::dense(build_ulam(test::cat_map(), 0, grid, UlamSampling{7, 256 * 256}));
  const auto exact = exact_linear_ulam(test::kCat, 2);
  for (int i = 0; i < 4; ++i) EXPECT_NEAR(exact.row(i).sum(), 1.0, 1e-12);
  EXPECT_LT((m - exact).cwiseAbs().maxCoeff(), 2e-3) << m << "\n\n" << exact;
}

TEST(UlamMatrix, LinearCatMatchesPolygonClippingAtK4) {
  const auto m = test::dense(build_ulam(HyperbolicMap::anosov(Matrix2i{1, 1, 1, 2}), 0, UlamGrid(4), UlamSampling{3, 128 * 128}));
  const auto exact = exact_linear_ulam(Matrix2i{1, 1, 1, 2}, 4);
  EXPECT_LT((m - exact).cwiseAbs().maxCoeff(), 3e-3);
}

TEST(UlamMatrix, RowsSumToOne) {
  for (const auto& map : {test::cat_map(), test::dissipative_map(), test::volume_preserving_map()}) {
    const auto u = build_ulam(map, 0, UlamGrid(32), UlamSampling{5, 16});
    for (std::size_t i = 0; i < u.entries.rows(); ++i) ASSERT_NEAR(u.entries.row_sum(i), 1.0, 1e-12);
  }
}

TEST(UlamMatrix, VolumePreservingIsDoublyStochastic) {
  const auto u = build_ulam(test::volume_preserving_map(), 1, UlamGrid(16), UlamSampling{5, 16});
  const auto m = test::dense(u);
  EXPECT_LT((m.colwise().sum().array() - 1.0).abs().maxCoeff(), 1e-12);
}

TEST(UlamMatrix, ReproducibleFromSeed) {
  const auto a = build_ulam(test::dissipative_map(), 1, UlamGrid(16), UlamSampling{11, 16});
  const auto b = build_ulam(test::dissipative_map(), 1, UlamGrid(16), UlamSampling{11, 16});
  EXPECT_EQ(test::dense(a), test::dense(b));
}

TEST(TwistedMatrix, ZeroTwistReproducesUntwisted) {
  const auto map = test::dissipative_map();
  const auto g = test::standard_observable_raw();
  const UlamGrid grid(16);
  const UlamSampling sampling{13, 16};
  const auto m0 = test::dense(build_ulam(map, 1, grid, sampling));
  EXPECT_EQ(test::dense(build_twisted_real(map, g, 1, 0.0, grid, sampling)), m0);
  const auto mc = test::dense(build_twisted(map, g, 1, Complex{0.0, 0.0}, grid, sampling));
  EXPECT_EQ(mc.real(), m0);
  EXPECT_EQ(mc.imag().cwiseAbs().maxCoeff(), 0.0);
}

TEST(TwistedMatrix, ImaginaryTwistIsDominated) {
  const auto map = test::volume_preserving_map();
  const auto g = test::standard_observable_raw();
  const UlamGrid grid(16);
  const UlamSampling sampling{13, 16};
  const auto m0 = test::dense(build_ulam(map, 1, grid, sampling));
  for (double t : {0.5, 1.0, 3.0}) {
    const auto mt = test::dense(build_twisted(map, g, 1, Complex{0.0, t}, grid, sampling));
    EXPECT_TRUE((mt.cwiseAbs().array() <= m0.array() * (1.0 + 1e-12) + 1e-15).all()) << "t=" << t;
  }
}

TEST(TwistedMatrix, RowSumsMatchIndependentAccumulation) {
  const auto map = test::dissipative_map();
  const Observable g({test::cos_x1(), test::cos_x1()});
  const UlamGrid grid(8);
  const UlamSampling sampling{17, 16};
  const double theta = 0.1;
  const std::size_t symbol = 1;
  const auto u = build_twisted_real(map, g, symbol, theta, grid, sampling);
  const int m = sampling.samples_per_axis();
  for (std::size_t cell = 0; cell < grid.size(); ++cell) {
    CounterRng rng(stream_key(sampling.seed, symbol, cell));
    const auto o = grid.cell_origin(cell);
    const double step = grid.side() / m;
    double acc = 0;
    // Samples cover the m x m sub-grid row by row; each draws x1 then x2.
    for (int s = 0; s < m * m; ++s) {
      const double x1 = o.x1 + (s % m + rng.uniform()) * step;
      rng.uniform();  // the x2 draw; g reads x1 only
      acc += std::exp(theta * std::cos(2 * M_PI * x1));
    }
    EXPECT_NEAR(u.entries.row_sum(cell), acc / (m * m), 1e-13);
  }
}

TEST(EquivariantDensity, VolumePreservingIsUniform) {
  const auto coc = make_transfer_cocycle(test::volume_preserving_maps(), UlamGrid(32), UlamSampling{19, 16});
  const OmegaPath w(3, test::fair_coin());
  const auto h = equivariant_density(coc, w, 40);
  const auto u = DensityVector::uniform(UlamGrid(32));
  EXPECT_LT(l1_distance(h.weights, u.weights), 1e-10);
  const auto profile = pullback_decay_profile(coc, w, 20);
  for (double gap : profile.gap) EXPECT_LT(gap, 1e-10);
}

TEST(EquivariantDensity, ZeroPullbackIsUniform) {
  const auto coc = make_transfer_cocycle(test::standard_maps(), UlamGrid(16), UlamSampling{19, 16});
  const auto h = equivariant_density(coc, OmegaPath(3, test::fair_coin()), 0);
  EXPECT_EQ(h.weights, DensityVector::uniform(UlamGrid(16)).weights);
}

TEST(EquivariantDensity, NonnegativeUnitMassAndEquivariant) {
  const auto coc = make_transfer_cocycle(test::standard_maps(), UlamGrid(32), UlamSampling{19, 16});
  const OmegaPath w(3, test::fair_coin());
  const auto h = equivariant_density(coc, w, 50);
  EXPECT_NEAR(h.mass(), 1.0, 1e-12);
  EXPECT_GE(*std::min_element(h.weights.begin(), h.weights.end()), 0.0);
  EXPECT_LT(equivariance_defect(coc, w, 50), 1e-10);
}

TEST(EquivariantDensity, DissipativePullbackDecaysGeometrically) {
  const auto coc = make_transfer_cocycle(test::standard_maps(), UlamGrid(64), UlamSampling{19, 16});
  const OmegaPath w(3, test::fair_coin());
  const auto profile = pullback_decay_profile(coc, w, 60);
  EXPECT_LT(profile.fit.slope, -0.05);
  EXPECT_GT(profile.fit.r_squared, 0.95);
  // n = 30 against n = 60 is within the fitted envelope.
  const auto h30 = equivariant_density(coc, w, 30);
  const auto h60 = equivariant_density(coc, w, 60);
  const double envelope = std::exp(profile.fit.intercept + profile.fit.slope * 30) / (1 - std::exp(profile.fit.slope));
  EXPECT_LT(l1_distance(h30.weights, h60.weights), 2 * envelope + 1e-12);
}

TEST(Lyapunov, TopExponentVanishes) {
  const auto coc = make_transfer_cocycle(test::standard_maps(), UlamGrid(32), UlamSampling{23, 16});
  const auto rep = lyapunov_spectrum(coc, OmegaPath(5, test::fair_coin()), 300, 2, 10, 3);
  ASSERT_TRUE(rep.ok);
  EXPECT_NEAR(rep.exponents[0], 0.0, 0.01);
  EXPECT_LT(rep.exponents[1], -0.05);
  for (double d : rep.orthogonality_defects) EXPECT_LT(d, 1e-10);
}

TEST(Lyapunov, ConstantPathMatchesDenseEigenvalues) {
  const MapFamily maps{test::dissipative_map()};
  const UlamGrid grid(16);
  const auto coc = make_transfer_cocycle(maps, grid, UlamSampling{29, 16});
  const auto rep = lyapunov_spectrum(coc, OmegaPath::constant({1.0}), 600, 3, 5, 7);
  ASSERT_TRUE(rep.ok);
  Eigen::EigenSolver<Eigen::MatrixXd> es(test::dense(coc[0]));
  std::vector<double> logs;
  for (int i = 0; i < es.eigenvalues().size(); ++i) logs.push_back(std::log(std::abs(es.eigenvalues()[i])));
  std::sort(logs.rbegin(), logs.rend());
  // Complex pairs share a modulus; the frame exponents follow the moduli in order.
  for (int i = 0; i < 3; ++i) EXPECT_NEAR(rep.exponents[i], logs[i], 0.02) << "i=" << i;
}

TEST(LasotaYorke, TestFunctionsIncludeUniform) {
  const auto fns = lasota_yorke_test_functions(UlamGrid(32));
  ASSERT_FALSE(fns.empty());
  EXPECT_EQ(grid_total_variation<double>(fns.front(), UlamGrid(32)), 0.0);
}

TEST(LasotaYorke, IdentityStepHoldsWithUnitConstant) {
  const auto coc = make_transfer_cocycle(test::standard_maps(), UlamGrid(64), UlamSampling{31, 16});
  const std::vector<int> n_grid{0};
  const auto fit = lasota_yorke_probe(coc, OmegaPath(1, test::fair_coin()), n_grid, 16);
  EXPECT_GE(fit.B, 1.0);
  EXPECT_GE(fit.min_relative_slack, -1e-12);
}

TEST(LasotaYorke, CatMapContractsOscillations) {
  const MapFamily maps{test::cat_map()};
  const auto coc = make_transfer_cocycle(maps, UlamGrid(128), UlamSampling{37, 16});
  const std::vector<int> n_grid{0, 1, 2, 4, 8, 16};
  const auto fit = lasota_yorke_probe(coc, OmegaPath::constant({1.0}), n_grid, 16);
  EXPECT_TRUE(fit.ok);
  EXPECT_LT(fit.a, 1.0);
  // The fitted bound is tight at one (h, n): slack is zero up to rounding.
  EXPECT_GE(fit.min_relative_slack, -1e-12);
}

TEST(Centering, ResidualIsSmall) {
  const auto maps = test::standard_maps();
  const UlamGrid grid(64);
  const UlamSampling sampling{41, 16};
  const auto g = test::centered(maps, test::standard_observable_raw(), test::fair_coin(), grid, sampling);
  const auto coc = make_transfer_cocycle(maps, grid, sampling);
  const auto res = centering_residual(coc, maps, g, sampling, OmegaPath(2, test::fair_coin()), 50, 40);
  // Per-symbol centering leaves the spread of fiber densities within a symbol;
  // |g| <= 1.5 and that spread is at the equivariance scale.
  EXPECT_LT(res.max_abs, 5e-3);
}

TEST(Refinement, EquivariantDensityConvergesUnderGridRefinement) {
  const auto maps = test::standard_maps();
  const OmegaPath w(3, test::fair_coin());
  std::vector<std::vector<double>> coarse;
  for (int k : {16, 32, 64}) {
    const auto coc = make_transfer_cocycle(maps, UlamGrid(k), UlamSampling{43, 16});
    coarse.push_back(aggregate(equivariant_density(coc, w, 50).weights, UlamGrid(k), UlamGrid(8)));
  }
  const double d1 = l1_distance(coarse[0], coarse[1]);
  const double d2 = l1_distance(coarse[1], coarse[2]);
  EXPECT_LT(d2, d1);
}
