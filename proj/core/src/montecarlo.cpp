#include "qcl/montecarlo.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

#include "qcl/error.hpp"
#include "qcl/parallel.hpp"
#include "qcl/random.hpp"
#include "qcl/stats.hpp"

namespace qcl {
namespace {

constexpr int kMaxAttempts = 64;

TorusPoint uniform_point(std::uint64_t seed, std::size_t index, int attempt) {
  CounterRng rng(stream_key(seed, index, attempt));
  const double a = rng.uniform();
  return {a, rng.uniform()};
}

TorusPoint push(const MapFamily& maps, std::span<const std::uint8_t> symbols, TorusPoint x) {
  for (std::uint8_t s : symbols) x = maps[s](x);
  return x;
}

}  // namespace

void SamplePlan::validate() const {
  if (samples < 100) throw std::invalid_argument("samples must be >= 100");
  if (burn_in < 0) throw std::invalid_argument("burn_in must be >= 0");
  if (n < 0) throw std::invalid_argument("n must be >= 0");
  if (batches == 0 || samples % batches != 0)
    throw std::invalid_argument("batches must evenly divide samples");
}

std::vector<TorusPoint> sample_mu_omega(const MapFamily& maps, const OmegaPath& omega,
                                        const SamplePlan& plan, std::size_t* boundary_resamples) {
  plan.validate();
  const auto burn = omega.symbols(-plan.burn_in, static_cast<std::size_t>(plan.burn_in));
  std::vector<TorusPoint> points(plan.samples);
  std::vector<std::uint8_t> retries(plan.samples, 0);
  parallel_for(plan.samples, [&](std::size_t i) {
    for (int attempt = 0;; ++attempt) {
      try {
        points[i] = push(maps, burn, uniform_point(plan.seed, i, attempt));
        retries[i] = static_cast<std::uint8_t>(attempt);
        return;
      } catch (const BoundaryPointError&) {
        if (attempt + 1 >= kMaxAttempts) throw;
      }
    }
  });
  if (boundary_resamples) {
    std::size_t total = 0;
    for (auto r : retries) total += r;
    *boundary_resamples = total;
  }
  return points;
}

std::vector<double> cell_histogram(std::span<const TorusPoint> points, int k) {
  if (k < 1) throw std::invalid_argument("k must be >= 1");
  std::vector<double> h(static_cast<std::size_t>(k) * k, 0.0);
  if (points.empty()) return h;
  for (const TorusPoint& p : points) {
    const int ix = std::min(k - 1, static_cast<int>(p.x1 * k));
    const int iy = std::min(k - 1, static_cast<int>(p.x2 * k));
    h[static_cast<std::size_t>(iy) * k + ix] += 1.0;
  }
  for (double& v : h) v /= static_cast<double>(points.size());
  return h;
}

std::size_t SumEnsemble::index_of(int n) const {
  const auto it = std::find(checkpoints.begin(), checkpoints.end(), n);
  if (it == checkpoints.end()) throw std::out_of_range("no checkpoint at n = " + std::to_string(n));
  return static_cast<std::size_t>(it - checkpoints.begin());
}

SumEnsemble simulate_sums(const MapFamily& maps, const Observable& g, const OmegaPath& omega,
                          const SamplePlan& plan, std::vector<int> checkpoints) {
  plan.validate();
  if (checkpoints.empty()) throw std::invalid_argument("checkpoints must be non-empty");
  std::sort(checkpoints.begin(), checkpoints.end());
  checkpoints.erase(std::unique(checkpoints.begin(), checkpoints.end()), checkpoints.end());
  if (checkpoints.front() < 0) throw std::invalid_argument("checkpoints must be >= 0");
  const int n_max = checkpoints.back();

  const auto burn = omega.symbols(-plan.burn_in, static_cast<std::size_t>(plan.burn_in));
  const auto path = omega.symbols(0, static_cast<std::size_t>(n_max));

  SumEnsemble out;
  out.checkpoints = checkpoints;
  out.samples = plan.samples;
  out.batches = plan.batches;
  out.sums.assign(checkpoints.size(), std::vector<double>(plan.samples, 0.0));
  std::vector<std::uint8_t> retries(plan.samples, 0);

  parallel_for(plan.samples, [&](std::size_t i) {
    for (int attempt = 0;; ++attempt) {
      try {
        TorusPoint x = push(maps, burn, uniform_point(plan.seed, i, attempt));
        double sum = 0.0;
        std::size_t next = 0;
        for (int t = 0; t <= n_max; ++t) {
          while (next < checkpoints.size() && checkpoints[next] == t) out.sums[next++][i] = sum;
          if (t == n_max) break;
          const std::uint8_t s = path[static_cast<std::size_t>(t)];
          const TorusPoint y = maps[s](x);
          sum += g.evaluate(s, x, y);
          x = y;
        }
        retries[i] = static_cast<std::uint8_t>(attempt);
        return;
      } catch (const BoundaryPointError&) {
        if (attempt + 1 >= kMaxAttempts) throw;
      }
    }
  });

  for (auto r : retries) out.boundary_resamples += r;
  for (auto& column : out.sums) {
    const double m = stats::mean(column);
    out.raw_means.push_back(m);
    if (plan.recenter)
      for (double& v : column) v -= m;
  }
  out.recentered = plan.recenter;
  return out;
}

EmpiricalVariance empirical_variance(const SumEnsemble& ensemble, int n) {
  const auto sums = ensemble.at(n);
  EmpiricalVariance out;
  out.n = n;
  if (n == 0) return out;
  std::vector<double> scaled(sums.begin(), sums.end());
  const double root = std::sqrt(static_cast<double>(n));
  for (double& v : scaled) v /= root;
  out.value = stats::variance(scaled);
  const std::size_t batches = std::max<std::size_t>(1, ensemble.batches);
  const std::size_t size = scaled.size() / batches;
  for (std::size_t b = 0; b < batches; ++b)
    out.batch_values.push_back(
        stats::variance(std::span<const double>(scaled).subspan(b * size, size)));
  out.std_err = stats::batch_std_error(out.batch_values);
  return out;
}

}  // namespace qcl
