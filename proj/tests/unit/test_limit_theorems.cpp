#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "fixtures.hpp"
#include "qcl/error.hpp"
#include "qcl/limit_theorems.hpp"

using namespace qcl;

namespace {

// Synthetic ensemble whose S_n / sqrt(n) is exactly N(0, sigma2) in law.
SumEnsemble gaussian_ensemble(std::vector<int> ns, std::size_t samples, double sigma2, std::uint32_t seed) {
  SumEnsemble e;
  e.checkpoints = ns;
  e.samples = samples;
  e.batches = 10;
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> z(0.0, 1.0);
  for (int n : ns) {
    std::vector<double> s(samples);
    for (auto& v : s) v = z(rng) * std::sqrt(sigma2 * n);
    e.sums.push_back(std::move(s));
    e.raw_means.push_back(0.0);
  }
  return e;
}

AperiodicityReport passing_aperiodicity() {
  AperiodicityReport r;
  r.t = {1.0};
  r.slope = {-0.5};
  r.radius = {0.5};
  r.pass = {true};
  r.all_pass = true;
  return r;
}

}  // namespace

TEST(Clt, GaussianEnsemblePasses) {
  const auto e = gaussian_ensemble({100}, 100000, 0.5, 1);
  const auto r = verify_clt(e, 100, 0.5);
  EXPECT_LT(r.ks, 0.01);
  EXPECT_EQ(r.batch_ks.size(), 10u);
  EXPECT_GT(r.batch_noise, 0.0);
}

TEST(Clt, WrongVarianceIsDetected) {
  const auto e = gaussian_ensemble({100}, 100000, 0.5, 1);
  EXPECT_GT(verify_clt(e, 100, 0.8).ks, 0.05);
}

TEST(Clt, DegenerateVarianceIsRefused) {
  const auto e = gaussian_ensemble({100}, 1000, 0.0, 1);
  try {
    verify_clt(e, 100, 0.0);
    FAIL() << "expected refusal";
  } catch (const VerificationRefused& r) {
    EXPECT_EQ(r.reason(), RefusalReason::degenerate_variance);
  }
}

TEST(Ldp, RequiredSamplesScaleWithRate) {
  EXPECT_NEAR(ldp_required_samples(0.01, 100, 50), 50 * std::exp(1.0), 1e-9);
}

TEST(Ldp, GaussianTailsApproachQuadraticRate) {
  // Gaussian sums: mu(S_n > n eps) = Q(eps sqrt(n) / sigma), whose exponential rate tends to eps^2 / (2 sigma^2).
  const double s2 = 1.0;
  const std::vector<int> ns{50, 100, 200};
  const auto e = gaussian_ensemble(ns, 1000000, s2, 3);
  MomentFunction m;
  for (int i = -20; i <= 20; ++i) {
    const double t = 0.1 * i;
    m.theta.push_back(t);
    m.lambda_hat.push_back(s2 * t * t / 2);
    m.std_err.push_back(0.0);
    m.batches.push_back({s2 * t * t / 2});
  }
  m.theta_max = 2.0;
  const std::vector<double> eps{0.1, 0.2};
  const auto rf = rate_function(m, eps);
  const auto rep = verify_ldp(e, eps, ns, rf, 50);
  ASSERT_EQ(rep.cells.size(), 6u);
  for (std::size_t a = 0; a < eps.size(); ++a) {
    EXPECT_FALSE(rep.cell(a, 2).flagged);
    EXPECT_LT(rep.cell(a, 2).residual, rep.cell(a, 0).residual);
  }
  EXPECT_TRUE(rep.tail_monotone);
}

TEST(Ldp, EmptyTailIsFlaggedNotFabricated) {
  const auto e = gaussian_ensemble({1000}, 1000, 1.0, 5);
  MomentFunction m;
  for (int i = -10; i <= 10; ++i) {
    m.theta.push_back(0.2 * i);
    m.lambda_hat.push_back(0.02 * i * i);
    m.std_err.push_back(0.0);
    m.batches.push_back({0.02 * i * i});
  }
  m.theta_max = 2.0;
  const std::vector<double> eps{1.5};
  const std::vector<int> ns{1000};
  const auto rep = verify_ldp(e, eps, ns, rate_function(m, eps), 50);
  EXPECT_EQ(rep.cells[0].count, 0u);
  EXPECT_TRUE(rep.cells[0].flagged);
  EXPECT_TRUE(std::isnan(rep.cells[0].empirical_rate));
  EXPECT_FALSE(rep.plan_satisfied);
  EXPECT_GT(rep.plan[0].required_samples, 1000.0);
}

TEST(Lclt, GaussianEnsembleMatchesPrediction) {
  const double s2 = 0.5;
  const int n = 400;
  const auto e = gaussian_ensemble({n}, 1000000, s2, 7);
  const double sigma = std::sqrt(s2);
  std::vector<double> s;
  for (double m : {-2.0, -1.0, 0.0, 1.0, 2.0}) s.push_back(m * sigma * std::sqrt(n));
  const auto rep = verify_lclt(e, n, -0.25 * sigma, 0.25 * sigma, s, s2, passing_aperiodicity());
  EXPECT_LT(rep.relative_residual, 0.1);
}

TEST(Lclt, FarTailTermsAreTiny) {
  const double s2 = 0.5;
  const int n = 400;
  const auto e = gaussian_ensemble({n}, 100000, s2, 9);
  const std::vector<double> s{7 * std::sqrt(n * s2)};
  const auto rep = verify_lclt(e, n, -0.1, 0.1, s, s2, passing_aperiodicity());
  EXPECT_LT(rep.empirical[0], 1e-6);
  EXPECT_LT(rep.predicted[0], 1e-6);
}

TEST(Lclt, FailedAperiodicityRefusesWithFailingT) {
  auto ap = passing_aperiodicity();
  ap.pass = {false};
  ap.all_pass = false;
  const auto e = gaussian_ensemble({100}, 1000, 0.5, 1);
  const std::vector<double> s{0.0};
  try {
    verify_lclt(e, 100, -0.1, 0.1, s, 0.5, ap);
    FAIL() << "expected refusal";
  } catch (const VerificationRefused& r) {
    EXPECT_EQ(r.reason(), RefusalReason::aperiodicity_failed);
    EXPECT_EQ(r.failing_t(), std::vector<double>{1.0});
  }
}

TEST(Lclt, DegenerateVarianceIsRefused) {
  const auto e = gaussian_ensemble({100}, 1000, 0.5, 1);
  const std::vector<double> s{0.0};
  EXPECT_THROW(verify_lclt(e, 100, -0.1, 0.1, s, 0.001, passing_aperiodicity()), VerificationRefused);
}
