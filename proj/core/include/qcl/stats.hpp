#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace qcl::stats {

/// Neumaier-compensated sum in index order.
double compensated_sum(std::span<const double> values) noexcept;
double mean(std::span<const double> values) noexcept;
/// Unbiased sample variance; 0 for fewer than two values.
double variance(std::span<const double> values) noexcept;

/// Means of `batches` equal contiguous slices (the last absorbs the remainder).
std::vector<double> batch_means(std::span<const double> values, std::size_t batches);
/// Standard error of the mean from batch means.
double batch_std_error(std::span<const double> batch_values) noexcept;

struct LinearFit {
  double slope = 0.0;
  double intercept = 0.0;
  double r_squared = 0.0;
  std::size_t points = 0;
};

LinearFit linear_fit(std::span<const double> x, std::span<const double> y);

double normal_cdf(double x) noexcept;

/// Kolmogorov-Smirnov distance between the empirical law of `values` and
/// N(0, variance). `values` need not be sorted.
double ks_normal(std::span<const double> values, double variance);

/// log(mean(exp(values))) with max shift.
double log_mean_exp(std::span<const double> values) noexcept;

}  // namespace qcl::stats
