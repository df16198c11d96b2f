#include "qcl/spectral.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>

#include "qcl/error.hpp"
#include "qcl/parallel.hpp"
#include "qcl/random.hpp"
#include "qcl/stats.hpp"

namespace qcl {
namespace {

constexpr double kDegenerateMass = 1e-12;

template <class V>
V total_mass(std::span<const V> h) {
  V sum{};
  for (const V& v : h) sum += v;
  return sum;
}

// Mass-normalized twisted pullback along sigma^-n omega, ..., sigma^-1 omega.
template <class Scalar>
std::vector<Scalar> twisted_pullback(const UlamCocycle<Scalar>& cocycle, const OmegaPath& omega,
                                     int n) {
  const std::size_t size = cocycle.grid().size();
  std::vector<Scalar> h(size, Scalar(1.0 / static_cast<double>(size)));
  std::vector<Scalar> next(size);
  const OmegaPath past = omega.shifted(-n);
  for (int i = 0; i < n; ++i) {
    cocycle[past.symbol(i)].entries.template push_forward<Scalar>(h, next);
    const Scalar mass = total_mass<Scalar>(next);
    if (std::abs(mass) < kDegenerateMass)
      throw DegenerateTwistError("twisted pullback normalizer vanished");
    for (Scalar& v : next) v /= mass;
    h.swap(next);
  }
  return h;
}

// log|lambda^theta| along n_fibers consecutive fibers.
std::vector<double> fiber_log_lambdas(const UlamCocycle<double>& cocycle, const OmegaPath& omega,
                                      int n_pullback, int n_fibers) {
  std::vector<double> h = twisted_pullback(cocycle, omega, n_pullback);
  std::vector<double> next(h.size());
  std::vector<double> logs(static_cast<std::size_t>(n_fibers));
  for (int i = 0; i < n_fibers; ++i) {
    cocycle[omega.symbol(i)].entries.push_forward<double>(h, next);
    const double mass = total_mass<double>(next);
    if (std::abs(mass) < kDegenerateMass)
      throw DegenerateTwistError("twisted fiber eigenvalue vanished");
    logs[static_cast<std::size_t>(i)] = std::log(std::abs(mass));
    for (double& v : next) v /= mass;
    h.swap(next);
  }
  return logs;
}

bool is_zero_twist(const Observable& g, Complex theta) { return theta == Complex{} || g.is_zero(); }

std::vector<double> contiguous_batch_means(std::span<const double> values, std::size_t batches) {
  return stats::batch_means(values, std::max<std::size_t>(1, std::min(batches, values.size())));
}

double interpolate_derivative(std::span<const double> knots, std::span<const double> slopes, double x) {
  if (knots.size() == 1) return slopes[0] * x / knots[0];
  if (x <= knots[0]) return slopes[0] * x / knots[0];
  for (std::size_t j = 1; j < knots.size(); ++j) {
    if (x <= knots[j]) {
      const double w = (x - knots[j - 1]) / (knots[j] - knots[j - 1]);
      return slopes[j - 1] + w * (slopes[j] - slopes[j - 1]);
    }
  }
  const std::size_t last = knots.size() - 1;
  const double gradient = (slopes[last] - slopes[last - 1]) / (knots[last] - knots[last - 1]);
  return slopes[last] + gradient * (x - knots[last]);
}

}  // namespace

ThetaGrid ThetaGrid::symmetric(double theta_max, int points, double h, std::vector<double> imaginary) {
  if (!(theta_max > 0.0)) throw std::invalid_argument("theta_max must be > 0");
  if (points < 3 || points % 2 == 0) throw std::invalid_argument("points must be odd and >= 3");
  ThetaGrid grid;
  grid.theta_max = theta_max;
  const int half = points / 2;
  for (int i = -half; i <= half; ++i) grid.real.push_back(theta_max * i / half);
  for (double s : {0.5 * h, h, 2.0 * h}) {
    if (s > 0.0 && s <= theta_max) {
      grid.real.push_back(s);
      grid.real.push_back(-s);
    }
  }
  std::sort(grid.real.begin(), grid.real.end());
  grid.real.erase(std::unique(grid.real.begin(), grid.real.end(),
                              [](double a, double b) { return std::abs(a - b) < 1e-12; }),
                  grid.real.end());
  grid.imaginary = std::move(imaginary);
  return grid;
}

std::vector<Complex> ThetaGrid::values() const {
  std::vector<Complex> out;
  for (double r : real) out.emplace_back(r, 0.0);
  for (double t : imaginary) out.emplace_back(0.0, t);
  return out;
}

FiberEigen lambda_fiber_eigen(const OperatorModel& model, const OmegaPath& omega, Complex theta) {
  if (model.n_pullback < 1) throw std::invalid_argument("n_pullback must be >= 1");
  FiberEigen out;
  if (is_zero_twist(model.g, theta)) {
    const TransferCocycle cocycle = make_transfer_cocycle(model.maps, model.grid, model.sampling);
    const DensityVector h = equivariant_density(cocycle, omega, model.n_pullback);
    out.h.assign(h.weights.begin(), h.weights.end());
    out.lambda = Complex{1.0, 0.0};
    return out;
  }
  const auto cocycle = make_twisted_cocycle(model.maps, model.g, theta, model.grid, model.sampling);
  out.h = twisted_pullback(cocycle, omega, model.n_pullback);
  std::vector<Complex> image(out.h.size());
  cocycle[omega.symbol(0)].entries.push_forward<Complex>(out.h, image);
  out.lambda = total_mass<Complex>(image);
  if (std::abs(out.lambda) < kDegenerateMass)
    throw DegenerateTwistError("twisted fiber eigenvalue vanished");
  return out;
}

LambdaEstimate lambda_theta_operator(const OperatorModel& model, const OmegaPath& omega,
                                     double theta, int n_fibers, std::size_t batches) {
  if (n_fibers < 10) throw std::invalid_argument("n_fibers must be >= 10");
  LambdaEstimate out;
  out.theta = theta;
  if (is_zero_twist(model.g, theta)) {
    out.batch_means.assign(std::max<std::size_t>(1, std::min<std::size_t>(batches, n_fibers)), 0.0);
    return out;
  }
  const auto cocycle = make_twisted_cocycle(model.maps, model.g, theta, model.grid, model.sampling);
  const auto logs = fiber_log_lambdas(cocycle, omega, model.n_pullback, n_fibers);
  out.value = stats::mean(logs);
  out.batch_means = contiguous_batch_means(logs, batches);
  out.std_err = stats::batch_std_error(out.batch_means);
  return out;
}

std::optional<std::size_t> MomentFunction::index_of(double value, double tol) const {
  for (std::size_t i = 0; i < theta.size(); ++i)
    if (std::abs(theta[i] - value) <= tol) return i;
  return std::nullopt;
}

double MomentFunction::combination_std_err(std::span<const std::size_t> indices,
                                           std::span<const double> weights) const {
  if (indices.empty() || batches.empty()) return 0.0;
  const std::size_t nb = batches[indices[0]].size();
  std::vector<double> combo(nb, 0.0);
  for (std::size_t j = 0; j < indices.size(); ++j)
    for (std::size_t b = 0; b < nb; ++b) combo[b] += weights[j] * batches[indices[j]][b];
  return stats::batch_std_error(combo);
}

MomentFunction moment_function_operator(const OperatorModel& model, const OmegaPath& omega,
                                        std::span<const double> thetas, int n_fibers,
                                        std::size_t batches) {
  std::vector<double> sorted(thetas.begin(), thetas.end());
  std::sort(sorted.begin(), sorted.end());
  std::vector<std::optional<LambdaEstimate>> estimates(sorted.size());
  std::vector<char> degenerate(sorted.size(), 0);
  parallel_for(sorted.size(), [&](std::size_t i) {
    try {
      estimates[i] = lambda_theta_operator(model, omega, sorted[i], n_fibers, batches);
    } catch (const DegenerateTwistError&) {
      degenerate[i] = 1;
    }
  });

  double limit = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < sorted.size(); ++i)
    if (degenerate[i]) limit = std::min(limit, std::abs(sorted[i]));

  MomentFunction out;
  out.method = "operator";
  out.shrunk = std::isfinite(limit);
  for (std::size_t i = 0; i < sorted.size(); ++i) {
    if (std::abs(sorted[i]) >= limit || !estimates[i]) continue;
    out.theta.push_back(sorted[i]);
    out.lambda_hat.push_back(estimates[i]->value);
    out.std_err.push_back(estimates[i]->std_err);
    out.batches.push_back(estimates[i]->batch_means);
    out.theta_max = std::max(out.theta_max, std::abs(sorted[i]));
  }
  return out;
}

double lambda_theta_montecarlo(std::span<const double> sums, int n, double theta) {
  if (n < 1) throw std::invalid_argument("n must be >= 1");
  if (sums.size() < 100) throw std::invalid_argument("need at least 100 samples");
  if (theta == 0.0) return 0.0;
  std::vector<double> exponents(sums.size());
  for (std::size_t i = 0; i < sums.size(); ++i) exponents[i] = theta * sums[i];
  return stats::log_mean_exp(exponents) / n;
}

MomentFunction moment_function_montecarlo(const SumEnsemble& ensemble, int n,
                                          std::span<const double> thetas) {
  const auto sums = ensemble.at(n);
  const std::size_t nb = std::max<std::size_t>(1, ensemble.batches);
  const std::size_t size = sums.size() / nb;
  MomentFunction out;
  out.method = "montecarlo";
  std::vector<double> sorted(thetas.begin(), thetas.end());
  std::sort(sorted.begin(), sorted.end());
  for (double theta : sorted) {
    std::vector<double> per_batch(nb);
    for (std::size_t b = 0; b < nb; ++b)
      per_batch[b] = theta == 0.0 ? 0.0 : lambda_theta_montecarlo(sums.subspan(b * size, size), n, theta);
    out.theta.push_back(theta);
    out.lambda_hat.push_back(lambda_theta_montecarlo(sums, n, theta));
    out.std_err.push_back(stats::batch_std_error(per_batch));
    out.batches.push_back(std::move(per_batch));
    out.theta_max = std::max(out.theta_max, std::abs(theta));
  }
  return out;
}

ConvexityCertificate convexity_certificate(const MomentFunction& moment, double h) {
  ConvexityCertificate cert;
  const auto zero = moment.index_of(0.0);
  cert.lambda0_exact = zero && moment.lambda_hat[*zero] == 0.0;
  const auto plus = moment.index_of(h);
  const auto minus = moment.index_of(-h);
  if (plus && minus) {
    cert.derivative_at_0 = (moment.lambda_hat[*plus] - moment.lambda_hat[*minus]) / (2.0 * h);
    const std::array<std::size_t, 2> idx{*plus, *minus};
    const std::array<double, 2> w{1.0 / (2.0 * h), -1.0 / (2.0 * h)};
    cert.derivative_std_err = moment.combination_std_err(idx, w);
    cert.derivative_ok = std::abs(cert.derivative_at_0) <= 3.0 * cert.derivative_std_err ||
                         std::abs(cert.derivative_at_0) == 0.0;
  }
  cert.convex = true;
  for (std::size_t i = 1; i + 1 < moment.theta.size(); ++i) {
    const double t0 = moment.theta[i - 1], t1 = moment.theta[i], t2 = moment.theta[i + 1];
    const double a = 2.0 / ((t1 - t0) * (t2 - t0));
    const double b = -2.0 / ((t1 - t0) * (t2 - t1));
    const double c = 2.0 / ((t2 - t1) * (t2 - t0));
    const double d2 = a * moment.lambda_hat[i - 1] + b * moment.lambda_hat[i] + c * moment.lambda_hat[i + 1];
    const std::array<std::size_t, 3> idx{i - 1, i, i + 1};
    const std::array<double, 3> w{a, b, c};
    const double tol = 3.0 * moment.combination_std_err(idx, w);
    cert.theta.push_back(t1);
    cert.second_differences.push_back(d2);
    cert.tolerances.push_back(tol);
    if (d2 < -tol) cert.convex = false;
  }
  return cert;
}

VarianceSeries variance_series(const MapFamily& maps, const Observable& g, const OmegaPath& omega,
                               int n_max, const SamplePlan& plan) {
  if (n_max < 1) throw std::invalid_argument("n_max must be >= 1");
  plan.validate();
  if (plan.n <= n_max) throw std::invalid_argument("plan.n must exceed n_max");
  const int steps = plan.n;
  const std::vector<TorusPoint> cloud = sample_mu_omega(maps, omega, plan);
  const auto path = omega.symbols(0, static_cast<std::size_t>(steps));

  // Fixed-size blocks keep the reduction order independent of the worker count.
  constexpr std::size_t kBlock = 256;
  const std::size_t blocks = (cloud.size() + kBlock - 1) / kBlock;
  auto orbit = [&](std::size_t i, auto&& visit) {
    TorusPoint x = cloud[i];
    for (int t = 0; t < steps; ++t) {
      const std::uint8_t s = path[static_cast<std::size_t>(t)];
      const TorusPoint y = maps[s](x);
      visit(t, g.evaluate(s, x, y));
      x = y;
    }
  };

  std::vector<std::vector<double>> block_means(blocks, std::vector<double>(steps, 0.0));
  parallel_for(blocks, [&](std::size_t b) {
    auto& acc = block_means[b];
    for (std::size_t i = b * kBlock; i < std::min(cloud.size(), (b + 1) * kBlock); ++i)
      orbit(i, [&](int t, double v) { acc[static_cast<std::size_t>(t)] += v; });
  });
  std::vector<double> time_mean(static_cast<std::size_t>(steps), 0.0);
  for (const auto& acc : block_means)
    for (int t = 0; t < steps; ++t) time_mean[t] += acc[t];
  for (double& m : time_mean) m /= static_cast<double>(cloud.size());

  const int window = steps - n_max;
  std::vector<std::vector<double>> block_cov(blocks, std::vector<double>(n_max + 1, 0.0));
  parallel_for(blocks, [&](std::size_t b) {
    auto& acc = block_cov[b];
    std::vector<double> ring(static_cast<std::size_t>(n_max) + 1);
    for (std::size_t i = b * kBlock; i < std::min(cloud.size(), (b + 1) * kBlock); ++i) {
      orbit(i, [&](int t, double v) {
        const double centered = v - time_mean[static_cast<std::size_t>(t)];
        ring[static_cast<std::size_t>(t % (n_max + 1))] = centered;
        // Pair (t - lag, t) contributes when the earlier time lies in the window.
        for (int lag = 0; lag <= n_max; ++lag) {
          const int s = t - lag;
          if (s < 0) break;
          if (s >= window) continue;
          acc[lag] += ring[static_cast<std::size_t>(s % (n_max + 1))] * centered;
        }
      });
    }
  });

  VarianceSeries out;
  out.n_max = n_max;
  out.samples = cloud.size();
  out.steps = steps;
  out.autocovariance.assign(n_max + 1, 0.0);
  for (const auto& acc : block_cov)
    for (int lag = 0; lag <= n_max; ++lag) out.autocovariance[lag] += acc[lag];
  const double norm = static_cast<double>(cloud.size()) * window;
  for (double& c : out.autocovariance) c /= norm;
  double cumulative = out.autocovariance[0];
  out.cumulative.push_back(cumulative);
  for (int lag = 1; lag <= n_max; ++lag) {
    cumulative += 2.0 * out.autocovariance[lag];
    out.cumulative.push_back(cumulative);
  }
  out.sigma2 = cumulative;
  return out;
}

VarianceFromLambda variance_from_lambda(const MomentFunction& moment, double h) {
  if (!(h > 0.0)) throw std::invalid_argument("finite-difference step must be > 0");
  auto stencil = [&](double step, double& se) -> std::optional<double> {
    const std::array<double, 5> offsets{-2.0 * step, -step, 0.0, step, 2.0 * step};
    const std::array<double, 5> coeff{-1.0, 16.0, -30.0, 16.0, -1.0};
    std::array<std::size_t, 5> idx{};
    for (std::size_t j = 0; j < 5; ++j) {
      const auto i = moment.index_of(offsets[j], 1e-9 * std::max(1.0, step));
      if (!i) return std::nullopt;
      idx[j] = *i;
    }
    std::array<double, 5> w{};
    double value = 0.0;
    for (std::size_t j = 0; j < 5; ++j) {
      w[j] = coeff[j] / (12.0 * step * step);
      value += w[j] * moment.lambda_hat[idx[j]];
    }
    se = moment.combination_std_err(idx, w);
    return value;
  };
  VarianceFromLambda out;
  out.h = h;
  const auto full = stencil(h, out.std_err);
  if (!full) throw std::invalid_argument("theta grid lacks the five-point stencil 0, +-h, +-2h");
  out.sigma2 = *full;
  double se_half = 0.0;
  const auto half = stencil(0.5 * h, se_half);
  out.sigma2_half_step = half.value_or(out.sigma2);
  out.richardson = half ? (16.0 * *half - out.sigma2) / 15.0 : out.sigma2;
  return out;
}

RateFunction rate_function(const MomentFunction& moment, std::span<const double> eps_grid) {
  RateFunction out;
  // Nonnegative half of the grid, anchored at Lambda(0) = 0.
  std::vector<double> theta{0.0};
  std::vector<double> value{0.0};
  for (std::size_t i = 0; i < moment.theta.size(); ++i) {
    if (moment.theta[i] > 0.0) {
      theta.push_back(moment.theta[i]);
      value.push_back(moment.lambda_hat[i]);
    }
  }
  if (theta.size() < 2) throw std::invalid_argument("rate function needs positive theta values");

  // Pool-adjacent-violators on the secant slopes, weighted by interval length,
  // then clamp at 0 (Lambda'(0) = 0 and convexity force nonnegative slopes).
  const std::size_t m = theta.size() - 1;
  struct Block {
    double slope, weight;
    std::size_t count;
  };
  std::vector<Block> stack;
  for (std::size_t j = 0; j < m; ++j) {
    const double dt = theta[j + 1] - theta[j];
    Block blk{(value[j + 1] - value[j]) / dt, dt, 1};
    while (!stack.empty() && stack.back().slope > blk.slope) {
      const Block prev = stack.back();
      stack.pop_back();
      const double w = prev.weight + blk.weight;
      blk = {(prev.slope * prev.weight + blk.slope * blk.weight) / w, w, prev.count + blk.count};
    }
    stack.push_back(blk);
  }
  std::vector<double> slopes;
  for (const Block& blk : stack)
    for (std::size_t c = 0; c < blk.count; ++c) slopes.push_back(std::max(0.0, blk.slope));

  // Derivative interpolant: slope s_j at the interval midpoint, linear between
  // midpoints, through the origin on the left and extended linearly on the
  // right. Exact for quadratics.
  std::vector<double> knots(m);
  for (std::size_t j = 0; j < m; ++j) knots[j] = 0.5 * (theta[j] + theta[j + 1]);
  const double theta_max = theta.back();
  auto derivative = [&](double x) { return interpolate_derivative(knots, slopes, x); };
  // Lambda~(x) = integral_0^x derivative, exact for the piecewise-linear derivative.
  std::vector<double> breaks{0.0};
  for (double k : knots)
    if (k > 0.0) breaks.push_back(k);
  auto integral = [&](double x) {
    double total = 0.0;
    double left = 0.0;
    for (std::size_t j = 1; j <= breaks.size(); ++j) {
      const double right = j < breaks.size() ? std::min(breaks[j], x) : x;
      if (right <= left) break;
      total += 0.5 * (derivative(left) + derivative(right)) * (right - left);
      left = right;
      if (left >= x) break;
    }
    return total;
  };

  out.theta = theta;
  for (double t : theta) out.convex_lambda.push_back(integral(t));
  const double d_max = derivative(theta_max);

  for (double eps : eps_grid) {
    if (eps > d_max)
      throw RateWindowError("eps = " + std::to_string(eps) + " exceeds Lambda'(theta_max) = " +
                            std::to_string(d_max));
    double star = 0.0;
    if (eps > 0.0) {
      // Smallest x with derivative(x) >= eps; derivative is nondecreasing.
      double lo = 0.0, hi = theta_max;
      for (int it = 0; it < 200; ++it) {
        const double mid = 0.5 * (lo + hi);
        if (derivative(mid) >= eps) hi = mid;
        else lo = mid;
      }
      star = hi;
    }
    out.eps.push_back(eps);
    out.theta_star.push_back(star);
    out.c.push_back(std::max(0.0, star * eps - integral(star)));
  }
  return out;
}

double twisted_spectral_radius(const UlamMatrix<Complex>& m, int iterations) {
  if (iterations < 2) throw std::invalid_argument("iterations must be >= 2");
  const std::size_t n = m.entries.rows();
  std::vector<Complex> v(n), next(n);
  CounterRng rng(stream_key(0x5052u, n));
  for (auto& x : v) x = Complex(rng.uniform() + 0.5, rng.uniform() - 0.5);
  double log_growth = 0.0;
  int counted = 0;
  auto norm1 = [](std::span<const Complex> x) {
    double s = 0.0;
    for (const Complex& c : x) s += std::abs(c);
    return s;
  };
  double current = norm1(v);
  for (auto& x : v) x /= current;
  for (int it = 0; it < iterations; ++it) {
    m.entries.push_forward<Complex>(v, next);
    const double growth = norm1(next);
    if (growth == 0.0) return 0.0;
    for (auto& x : next) x /= growth;
    v.swap(next);
    if (it >= iterations / 2) {
      log_growth += std::log(growth);
      ++counted;
    }
  }
  return std::exp(log_growth / counted);
}

std::vector<double> AperiodicityReport::failing_t() const {
  std::vector<double> out;
  for (std::size_t i = 0; i < t.size(); ++i)
    if (!pass[i]) out.push_back(t[i]);
  return out;
}

AperiodicityReport aperiodicity_diagnostic(const OperatorModel& model, const OmegaPath& omega,
                                           std::span<const double> t_grid, int n,
                                           std::size_t periodic_symbol) {
  if (n < 20) throw std::invalid_argument("aperiodicity horizon n must be >= 20");
  for (double t : t_grid)
    if (t == 0.0) throw std::invalid_argument("t grid must exclude 0");
  const UlamGrid grid = model.grid;
  const std::size_t size = grid.size();

  // Start vectors: uniform, a few Fourier modes, and one random vector.
  std::vector<std::vector<Complex>> starts;
  starts.emplace_back(size, Complex(1.0, 0.0));
  for (const auto& mode : std::vector<std::array<int, 2>>{{1, 0}, {0, 1}, {1, 1}, {3, -2}}) {
    std::vector<Complex> v(size);
    for (std::size_t c = 0; c < size; ++c) {
      const TorusPoint x = grid.cell_center(c);
      v[c] = std::polar(1.0, 2.0 * std::numbers::pi * (mode[0] * x.x1 + mode[1] * x.x2));
    }
    starts.push_back(std::move(v));
  }
  {
    CounterRng rng(stream_key(model.sampling.seed, 0x41504552u));
    std::vector<Complex> v(size);
    for (auto& x : v) x = Complex(rng.uniform() - 0.5, rng.uniform() - 0.5);
    starts.push_back(std::move(v));
  }

  AperiodicityReport report;
  report.t.assign(t_grid.begin(), t_grid.end());
  report.slope.assign(t_grid.size(), 0.0);
  report.radius.assign(t_grid.size(), 0.0);
  report.pass.assign(t_grid.size(), false);
  std::vector<char> pass(t_grid.size(), 0);

  parallel_for(t_grid.size(), [&](std::size_t k) {
    const Complex theta(0.0, t_grid[k]);
    const auto cocycle = make_twisted_cocycle(model.maps, model.g, theta, grid, model.sampling);
    double worst = -std::numeric_limits<double>::infinity();
    std::vector<Complex> next(size);
    for (const auto& start : starts) {
      std::vector<Complex> v = start;
      double norm = 0.0;
      for (const auto& x : v) norm += std::abs(x);
      for (auto& x : v) x /= norm;
      double log_norm = 0.0;
      std::vector<double> ms, logs;
      for (int m = 1; m <= n; ++m) {
        cocycle[omega.symbol(m - 1)].entries.push_forward<Complex>(v, next);
        double s = 0.0;
        for (const auto& x : next) s += std::abs(x);
        if (s == 0.0) {
          log_norm = -std::numeric_limits<double>::infinity();
          break;
        }
        log_norm += std::log(s);
        for (auto& x : next) x /= s;
        v.swap(next);
        ms.push_back(m);
        logs.push_back(log_norm);
      }
      if (!std::isfinite(log_norm)) continue;
      worst = std::max(worst, stats::linear_fit(ms, logs).slope);
    }
    report.slope[k] = worst;
    report.radius[k] = twisted_spectral_radius(cocycle[periodic_symbol]);
    pass[k] = report.slope[k] < -1e-3 && report.radius[k] < 1.0 - 1e-3;
  });
  report.all_pass = !t_grid.empty();
  for (std::size_t k = 0; k < t_grid.size(); ++k) {
    report.pass[k] = pass[k] != 0;
    report.all_pass = report.all_pass && report.pass[k];
  }
  return report;
}

TwistedLasotaYorke twisted_lasota_yorke_probe(const OperatorModel& model, const OmegaPath& omega,
                                              std::span<const double> t_grid,
                                              std::span<const int> n_grid, int k_coarse) {
  TwistedLasotaYorke out;
  const TransferCocycle base = make_transfer_cocycle(model.maps, model.grid, model.sampling);
  out.untwisted = lasota_yorke_probe(base, omega, n_grid, k_coarse);
  out.t.assign(t_grid.begin(), t_grid.end());
  out.A.assign(t_grid.size(), 0.0);
  out.B.assign(t_grid.size(), 0.0);
  out.gamma.assign(t_grid.size(), 0.0);
  std::vector<char> ok(t_grid.size(), 0);
  parallel_for(t_grid.size(), [&](std::size_t k) {
    LasotaYorkeFit fit;
    if (t_grid[k] == 0.0) {
      fit = out.untwisted;
    } else {
      const auto cocycle = make_twisted_cocycle(model.maps, model.g, Complex(0.0, t_grid[k]),
                                                model.grid, model.sampling);
      fit = lasota_yorke_probe(cocycle, omega, n_grid, k_coarse);
    }
    out.A[k] = fit.B;
    out.B[k] = fit.B;
    out.gamma[k] = fit.a;
    ok[k] = fit.ok;
  });
  out.bounded = true;
  for (std::size_t k = 0; k < t_grid.size(); ++k) {
    out.ok.push_back(ok[k] != 0);
    out.sup_constant = std::max({out.sup_constant, out.A[k], out.B[k]});
    out.bounded = out.bounded && std::isfinite(out.A[k]) && std::isfinite(out.B[k]);
  }
  return out;
}

}  // namespace qcl
