#include "qcl/stats.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>

namespace qcl::stats {

double compensated_sum(std::span<const double> values) noexcept {
  double sum = 0.0;
  double carry = 0.0;
  for (double v : values) {
    const double t = sum + v;
    if (std::abs(sum) >= std::abs(v))
      carry += (sum - t) + v;
    else
      carry += (v - t) + sum;
    sum = t;
  }
  return sum + carry;
}

double mean(std::span<const double> values) noexcept {
  if (values.empty()) return 0.0;
  return compensated_sum(values) / static_cast<double>(values.size());
}

double variance(std::span<const double> values) noexcept {
  if (values.size() < 2) return 0.0;
  const double m = mean(values);
  double sum = 0.0;
  double carry = 0.0;
  for (double v : values) {
    const double d = (v - m) * (v - m);
    const double t = sum + d;
    carry += (sum >= d) ? (sum - t) + d : (d - t) + sum;
    sum = t;
  }
  return (sum + carry) / static_cast<double>(values.size() - 1);
}

std::vector<double> batch_means(std::span<const double> values, std::size_t batches) {
  if (batches == 0 || batches > values.size())
    throw std::invalid_argument("batch count must be in [1, size]");
  std::vector<double> out(batches);
  const std::size_t size = values.size() / batches;
  for (std::size_t b = 0; b < batches; ++b) {
    const std::size_t begin = b * size;
    const std::size_t end = (b + 1 == batches) ? values.size() : begin + size;
    out[b] = mean(values.subspan(begin, end - begin));
  }
  return out;
}

double batch_std_error(std::span<const double> batch_values) noexcept {
  if (batch_values.size() < 2) return 0.0;
  return std::sqrt(variance(batch_values) / static_cast<double>(batch_values.size()));
}

LinearFit linear_fit(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) throw std::invalid_argument("linear_fit: size mismatch");
  LinearFit fit;
  fit.points = x.size();
  if (x.size() < 2) return fit;
  const double mx = mean(x);
  const double my = mean(y);
  double sxx = 0.0, sxy = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    sxy += (x[i] - mx) * (y[i] - my);
    syy += (y[i] - my) * (y[i] - my);
  }
  if (sxx == 0.0) return fit;
  fit.slope = sxy / sxx;
  fit.intercept = my - fit.slope * mx;
  fit.r_squared = syy == 0.0 ? 1.0 : (sxy * sxy) / (sxx * syy);
  return fit;
}

double normal_cdf(double x) noexcept { return 0.5 * std::erfc(-x / std::numbers::sqrt2); }

double ks_normal(std::span<const double> values, double variance) {
  if (values.empty()) throw std::invalid_argument("ks_normal: no samples");
  if (!(variance > 0.0)) throw std::invalid_argument("ks_normal: variance must be positive");
  std::vector<double> sorted(values.begin(), values.end());
  std::sort(sorted.begin(), sorted.end());
  const double sd = std::sqrt(variance);
  const double n = static_cast<double>(sorted.size());
  double d = 0.0;
  for (std::size_t i = 0; i < sorted.size(); ++i) {
    const double f = normal_cdf(sorted[i] / sd);
    d = std::max({d, static_cast<double>(i + 1) / n - f, f - static_cast<double>(i) / n});
  }
  return d;
}

double log_mean_exp(std::span<const double> values) noexcept {
  if (values.empty()) return -std::numeric_limits<double>::infinity();
  const double peak = *std::max_element(values.begin(), values.end());
  double sum = 0.0;
  for (double v : values) sum += std::exp(v - peak);
  return peak + std::log(sum / static_cast<double>(values.size()));
}

}  // namespace qcl::stats
