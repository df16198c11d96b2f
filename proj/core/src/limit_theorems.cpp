#include "qcl/limit_theorems.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>
#include <string>

#include "qcl/error.hpp"
#include "qcl/stats.hpp"

namespace qcl {
namespace {

void require_variance(double sigma2, double threshold) {
  if (!(sigma2 >= threshold))
    throw VerificationRefused(RefusalReason::degenerate_variance,
                              "degenerate variance: Sigma^2 = " + std::to_string(sigma2) +
                                  " below threshold " + std::to_string(threshold));
}

std::vector<double> scaled_sums(std::span<const double> sums, int n) {
  std::vector<double> out(sums.begin(), sums.end());
  const double root = std::sqrt(static_cast<double>(n));
  for (double& v : out) v /= root;
  return out;
}

}  // namespace

CltReport verify_clt(const SumEnsemble& ensemble, int n, double sigma2, double threshold) {
  require_variance(sigma2, threshold);
  if (n < 1) throw std::invalid_argument("n must be >= 1");
  const auto values = scaled_sums(ensemble.at(n), n);
  CltReport report;
  report.n = n;
  report.samples = values.size();
  report.sigma2 = sigma2;
  report.ks = stats::ks_normal(values, sigma2);
  const std::size_t nb = std::max<std::size_t>(1, ensemble.batches);
  const std::size_t size = values.size() / nb;
  for (std::size_t b = 0; b < nb; ++b)
    report.batch_ks.push_back(
        stats::ks_normal(std::span<const double>(values).subspan(b * size, size), sigma2));
  report.batch_noise = std::sqrt(stats::variance(report.batch_ks));
  return report;
}

double ldp_required_samples(double rate, int n, std::size_t min_count) {
  return static_cast<double>(min_count) * std::exp(rate * n);
}

LdpReport verify_ldp(const SumEnsemble& ensemble, std::span<const double> eps,
                     std::span<const int> ns, const RateFunction& rate, std::size_t min_count) {
  LdpReport report;
  report.eps.assign(eps.begin(), eps.end());
  report.n.assign(ns.begin(), ns.end());
  report.samples = ensemble.samples;
  report.min_count = min_count;
  report.plan_satisfied = true;

  std::vector<double> predicted;
  for (double e : eps) {
    std::size_t j = 0;
    while (j < rate.eps.size() && std::abs(rate.eps[j] - e) > 1e-12 * std::max(1.0, std::abs(e))) ++j;
    if (j == rate.eps.size())
      throw std::invalid_argument("rate function lacks eps = " + std::to_string(e));
    predicted.push_back(rate.c[j]);
  }

  for (std::size_t a = 0; a < eps.size(); ++a) {
    for (int n : ns) {
      const auto sums = ensemble.at(n);
      const double level = n * eps[a];
      LdpCell cell;
      cell.eps = eps[a];
      cell.n = n;
      cell.count = static_cast<std::size_t>(
          std::count_if(sums.begin(), sums.end(), [&](double s) { return s > level; }));
      cell.probability = static_cast<double>(cell.count) / static_cast<double>(sums.size());
      cell.predicted_rate = predicted[a];
      cell.flagged = cell.count < min_count;
      if (cell.count > 0) {
        cell.empirical_rate = -std::log(cell.probability) / n;
        cell.residual = std::abs(cell.empirical_rate - cell.predicted_rate);
      } else {
        cell.empirical_rate = std::numeric_limits<double>::quiet_NaN();
        cell.residual = std::numeric_limits<double>::quiet_NaN();
      }
      report.cells.push_back(cell);

      LdpPlanEntry entry;
      entry.eps = eps[a];
      entry.n = n;
      entry.predicted_probability = std::exp(-predicted[a] * n);
      entry.required_samples = ldp_required_samples(predicted[a], n, min_count);
      entry.satisfied = static_cast<double>(ensemble.samples) >= entry.required_samples;
      report.plan_satisfied = report.plan_satisfied && entry.satisfied;
      report.plan.push_back(entry);
    }
  }

  // Tail counts must not increase with eps at fixed n.
  std::vector<std::size_t> order(eps.size());
  for (std::size_t a = 0; a < order.size(); ++a) order[a] = a;
  std::sort(order.begin(), order.end(), [&](std::size_t x, std::size_t y) { return eps[x] < eps[y]; });
  for (std::size_t k = 0; k < ns.size(); ++k)
    for (std::size_t a = 1; a < order.size(); ++a)
      if (report.cell(order[a], k).count > report.cell(order[a - 1], k).count)
        report.tail_monotone = false;
  return report;
}

LcltReport verify_lclt(const SumEnsemble& ensemble, int n, double j0, double j1,
                       std::span<const double> s_grid, double sigma2,
                       const AperiodicityReport& aperiodicity, double threshold) {
  if (!aperiodicity.all_pass)
    throw VerificationRefused(RefusalReason::aperiodicity_failed,
                              "aperiodicity diagnostic failed", aperiodicity.failing_t());
  require_variance(sigma2, threshold);
  if (!(j1 > j0)) throw std::invalid_argument("interval J must have positive length");
  if (n < 1) throw std::invalid_argument("n must be >= 1");

  std::vector<double> sorted(ensemble.at(n).begin(), ensemble.at(n).end());
  std::sort(sorted.begin(), sorted.end());
  const double count_total = static_cast<double>(sorted.size());
  const double sigma = std::sqrt(sigma2);
  const double scale = sigma * std::sqrt(static_cast<double>(n));
  const double length = j1 - j0;
  const double peak = length / std::sqrt(2.0 * std::numbers::pi);

  LcltReport report;
  report.n = n;
  report.samples = sorted.size();
  report.j0 = j0;
  report.j1 = j1;
  report.sigma2 = sigma2;
  for (double s : s_grid) {
    // s + S_n in [j0, j1]  <=>  S_n in [j0 - s, j1 - s]
    const auto lo = std::lower_bound(sorted.begin(), sorted.end(), j0 - s);
    const auto hi = std::upper_bound(sorted.begin(), sorted.end(), j1 - s);
    const double p = static_cast<double>(hi - lo) / count_total;
    const double empirical = scale * p;
    const double predicted = std::exp(-s * s / (2.0 * n * sigma2)) * peak;
    report.s.push_back(s);
    report.empirical.push_back(empirical);
    report.error_bar.push_back(scale * std::sqrt(p * (1.0 - p) / count_total));
    report.predicted.push_back(predicted);
    report.sup_residual = std::max(report.sup_residual, std::abs(empirical - predicted));
  }
  report.relative_residual = report.sup_residual / peak;
  return report;
}

}  // namespace qcl
