#pragma once

// Spectral quantities of the twisted cocycle: fiber eigenvalues lambda^theta,
// the moment function Lambda(theta), the variance Sigma^2, the rate function
// and aperiodicity diagnostics.

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "qcl/dynamics.hpp"
#include "qcl/montecarlo.hpp"
#include "qcl/ulam.hpp"

namespace qcl {

/// Everything needed to discretize the twisted cocycle of one configuration.
struct OperatorModel {
  MapFamily maps;
  Observable g;  ///< centered
  UlamGrid grid{64};
  UlamSampling sampling;
  int n_pullback = 50;
};

/// Real segment [-theta_max, theta_max] plus an imaginary segment i t.
struct ThetaGrid {
  std::vector<double> real;
  std::vector<double> imaginary;
  double theta_max = 0.5;

  /// `points` equally spaced real values (odd, so 0 is included) plus the
  /// finite-difference stencil {+-h/2, +-h, +-2h} around 0.
  static ThetaGrid symmetric(double theta_max, int points, double h,
                             std::vector<double> imaginary = {});
  std::vector<Complex> values() const;
};

struct FiberEigen {
  Complex lambda{1.0, 0.0};
  std::vector<Complex> h;  ///< normalized twisted density h^theta_omega
};

/// lambda^theta_omega = mass of M^theta_omega h^theta_omega, where h^theta_omega
/// is the mass-normalized twisted pullback from sigma^-n omega. Throws
/// DegenerateTwistError when a normalizer falls below 1e-12 in modulus.
FiberEigen lambda_fiber_eigen(const OperatorModel& model, const OmegaPath& omega, Complex theta);

struct LambdaEstimate {
  double theta = 0.0;
  double value = 0.0;
  double std_err = 0.0;
  std::vector<double> batch_means;
};

/// Birkhoff average of log|lambda^theta| over n_fibers consecutive fibers,
/// batch-means standard error.
LambdaEstimate lambda_theta_operator(const OperatorModel& model, const OmegaPath& omega,
                                     double theta, int n_fibers, std::size_t batches = 20);

struct MomentFunction {
  std::vector<double> theta;  ///< ascending
  std::vector<double> lambda_hat;
  std::vector<double> std_err;
  /// batches[i][b]: batch b of point i. Batches share fibers across theta, so
  /// paired differences have their own (smaller) errors.
  std::vector<std::vector<double>> batches;
  std::string method;  ///< "operator" or "montecarlo"
  double theta_max = 0.0;
  bool shrunk = false;

  std::optional<std::size_t> index_of(double theta, double tol = 1e-12) const;
  /// Standard error of sum_i w_i Lambda(theta_i) from paired batches.
  double combination_std_err(std::span<const std::size_t> indices,
                             std::span<const double> weights) const;
};

/// Lambda on a real grid. Points at or beyond a degenerate twist are dropped
/// and theta_max shrinks to the largest surviving |theta|.
MomentFunction moment_function_operator(const OperatorModel& model, const OmegaPath& omega,
                                        std::span<const double> thetas, int n_fibers,
                                        std::size_t batches = 20);

/// (1/n) log mean exp(theta S_n) with max shifting.
double lambda_theta_montecarlo(std::span<const double> sums, int n, double theta);

/// Moment function from an ensemble of Birkhoff sums at length n; batch
/// errors from contiguous sample batches.
MomentFunction moment_function_montecarlo(const SumEnsemble& ensemble, int n,
                                          std::span<const double> thetas);

struct ConvexityCertificate {
  bool lambda0_exact = false;
  double derivative_at_0 = 0.0;
  double derivative_std_err = 0.0;
  bool derivative_ok = false;
  std::vector<double> theta;  ///< interior points of the second differences
  std::vector<double> second_differences;
  std::vector<double> tolerances;  ///< 3 * std_err of each second difference
  bool convex = false;
};

/// Lambda(0) == 0, |Lambda'(0)| < 3 std_err and second differences >= -3 std_err.
ConvexityCertificate convexity_certificate(const MomentFunction& moment, double h = 0.02);

struct VarianceSeries {
  std::vector<double> autocovariance;  ///< C(0..n_max)
  std::vector<double> cumulative;      ///< C(0) + 2 sum_{1..m} C(j)
  double sigma2 = 0.0;
  int n_max = 0;
  std::size_t samples = 0;
  int steps = 0;
};

/// Truncated variance series from a cloud of plan.samples mu_omega points
/// pushed plan.n steps; observations are centered by the cloud mean at each
/// time, and autocovariances are averaged over points and times.
VarianceSeries variance_series(const MapFamily& maps, const Observable& g, const OmegaPath& omega,
                               int n_max, const SamplePlan& plan);

struct VarianceFromLambda {
  double h = 0.02;
  double sigma2 = 0.0;
  double std_err = 0.0;
  double sigma2_half_step = 0.0;
  double richardson = 0.0;  ///< (16 v(h/2) - v(h)) / 15
};

/// Five-point second difference of Lambda at 0. Throws std::invalid_argument
/// when the grid lacks 0, +-h or +-2h.
VarianceFromLambda variance_from_lambda(const MomentFunction& moment, double h = 0.02);

struct RateFunction {
  std::vector<double> eps;
  std::vector<double> c;
  std::vector<double> theta_star;
  /// Convex projection of Lambda on theta >= 0 used for the transform.
  std::vector<double> theta;
  std::vector<double> convex_lambda;
};

/// c(eps) = sup_theta (theta eps - Lambda~(theta)) with Lambda~ the convex
/// piecewise-quadratic interpolant of the projected grid values. Throws
/// RateWindowError when eps exceeds Lambda~'(theta_max).
RateFunction rate_function(const MomentFunction& moment, std::span<const double> eps_grid);

/// Spectral radius by power iteration: geometric-mean growth over the second
/// half of `iterations` steps.
double twisted_spectral_radius(const UlamMatrix<Complex>& m, int iterations = 2000);

struct AperiodicityReport {
  std::vector<double> t;
  std::vector<double> slope;   ///< fitted slope of log ||M^{it,(m)} v||_1 in m, max over v
  std::vector<double> radius;  ///< spectral radius at the constant path
  std::vector<bool> pass;
  bool all_pass = false;

  std::vector<double> failing_t() const;
};

AperiodicityReport aperiodicity_diagnostic(const OperatorModel& model, const OmegaPath& omega,
                                           std::span<const double> t_grid, int n,
                                           std::size_t periodic_symbol = 0);

struct TwistedLasotaYorke {
  std::vector<double> t;
  std::vector<double> A;
  std::vector<double> B;
  std::vector<double> gamma;
  std::vector<bool> ok;
  LasotaYorkeFit untwisted;
  double sup_constant = 0.0;  ///< sup_t max(A_t, B_t)
  bool bounded = false;
};

TwistedLasotaYorke twisted_lasota_yorke_probe(const OperatorModel& model, const OmegaPath& omega,
                                              std::span<const double> t_grid,
                                              std::span<const int> n_grid, int k_coarse);

}  // namespace qcl
