#pragma once

// Sampling from the quenched measures mu_omega and ensembles of Birkhoff sums.
// Sample i is a pure function of (seed, i): results do not depend on the
// worker count.

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "qcl/dynamics.hpp"

namespace qcl {

struct SamplePlan {
  std::uint64_t seed = 0;
  std::size_t samples = 100000;
  /// Pushforward length used to draw from mu_omega.
  int burn_in = 30;
  /// Birkhoff length.
  int n = 2000;
  std::size_t batches = 20;
  /// Subtract the ensemble mean of S_n at each checkpoint, which removes the
  /// fiber mean sum_i mu_{sigma^i omega}(g) left by per-symbol centering.
  bool recenter = true;

  /// Throws std::invalid_argument on N < 100, burn_in < 0, n < 0, or a batch
  /// count that does not divide N.
  void validate() const;
};

/// Draws y uniform on the torus and returns T^(burn_in)_{sigma^-burn_in omega}(y).
/// `boundary_resamples`, when given, receives the number of redrawn points.
std::vector<TorusPoint> sample_mu_omega(const MapFamily& maps, const OmegaPath& omega,
                                        const SamplePlan& plan,
                                        std::size_t* boundary_resamples = nullptr);

/// Cell histogram of a point cloud on a k x k grid (row-major, ix along x1),
/// normalized to mass 1.
std::vector<double> cell_histogram(std::span<const TorusPoint> points, int k);

struct SumEnsemble {
  std::vector<int> checkpoints;
  /// sums[c][i] = S_{checkpoints[c]} g(omega, x_i), recentered if requested.
  std::vector<std::vector<double>> sums;
  /// Ensemble means before recentering, one per checkpoint.
  std::vector<double> raw_means;
  std::size_t samples = 0;
  std::size_t batches = 1;
  std::size_t boundary_resamples = 0;
  bool recentered = false;

  /// Index of checkpoint n; throws std::out_of_range if absent.
  std::size_t index_of(int n) const;
  std::span<const double> at(int n) const { return sums[index_of(n)]; }
};

/// Runs plan.samples orbits of length max(checkpoints) from mu_omega samples
/// and records S_n at each checkpoint. plan.n is ignored in favor of the
/// checkpoint list.
SumEnsemble simulate_sums(const MapFamily& maps, const Observable& g, const OmegaPath& omega,
                          const SamplePlan& plan, std::vector<int> checkpoints);

struct EmpiricalVariance {
  int n = 0;
  double value = 0.0;
  double std_err = 0.0;
  std::vector<double> batch_values;
};

/// Sample variance of S_n / sqrt(n) with batch error bars.
EmpiricalVariance empirical_variance(const SumEnsemble& ensemble, int n);

}  // namespace qcl
