#include "qcl/ulam.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <array>
#include <cmath>
#include <functional>
#include <limits>
#include <numbers>
#include <ostream>
#include <stdexcept>
#include <utility>

#include "qcl/error.hpp"
#include "qcl/format.hpp"
#include "qcl/parallel.hpp"
#include "qcl/random.hpp"

namespace qcl {
namespace {

constexpr int kMaxResample = 64;
constexpr int kSinkhornMaxIterations = 20000;
constexpr double kSinkhornTolerance = 1e-15;

// Visits the stratified sample stream of one cell: m x m strata, one jittered
// point each. Points that hit a partition boundary are redrawn from the same
// counter stream.
template <class Visit>
void for_each_sample(const HyperbolicMap& map, std::size_t symbol, const UlamGrid& grid,
                     const UlamSampling& sampling, std::size_t cell, Visit&& visit) {
  const int m = sampling.samples_per_axis();
  CounterRng rng(stream_key(sampling.seed, symbol, cell));
  const TorusPoint origin = grid.cell_origin(cell);
  const double step = grid.side() / m;
  for (int p = 0; p < m; ++p) {
    for (int q = 0; q < m; ++q) {
      for (int attempt = 0;; ++attempt) {
        const TorusPoint x{origin.x1 + (q + rng.uniform()) * step,
                           origin.x2 + (p + rng.uniform()) * step};
        try {
          const TorusPoint y = map(x);
          visit(x, y);
          break;
        } catch (const BoundaryPointError&) {
          if (attempt >= kMaxResample) throw;
        }
      }
    }
  }
}

struct RowData {
  std::vector<std::uint32_t> cols;
  std::vector<double> counts;  // untwisted sample counts per column
};

// Sinkhorn balancing of a nonnegative sparse matrix with unit row sums into a
// doubly stochastic one: entry_ij * r_i * c_j. Returns false when some column
// is empty (no balancing possible).
bool sinkhorn(const std::vector<std::size_t>& row_ptr, const std::vector<std::uint32_t>& cols,
              const std::vector<double>& counts, std::size_t n, std::vector<double>& r,
              std::vector<double>& c) {
  r.assign(n, 1.0);
  c.assign(n, 1.0);
  std::vector<double> colsum(n);
  for (int it = 0; it < kSinkhornMaxIterations; ++it) {
    std::fill(colsum.begin(), colsum.end(), 0.0);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t k = row_ptr[i]; k < row_ptr[i + 1]; ++k) colsum[cols[k]] += counts[k] * r[i];
    for (std::size_t j = 0; j < n; ++j) {
      if (colsum[j] <= 0.0) return false;
      c[j] = 1.0 / colsum[j];
    }
    for (std::size_t i = 0; i < n; ++i) {
      double s = 0.0;
      for (std::size_t k = row_ptr[i]; k < row_ptr[i + 1]; ++k) s += counts[k] * c[cols[k]];
      r[i] = 1.0 / s;
    }
    std::fill(colsum.begin(), colsum.end(), 0.0);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t k = row_ptr[i]; k < row_ptr[i + 1]; ++k)
        colsum[cols[k]] += counts[k] * r[i] * c[cols[k]];
    double worst = 0.0;
    for (double s : colsum) worst = std::max(worst, std::abs(s - 1.0));
    if (worst < kSinkhornTolerance) break;
  }
  return true;
}

// Shared builder: untwisted counts drive normalization and balancing, the
// weight functor supplies the stored value of each sample.
template <class Scalar, class Weight>
UlamMatrix<Scalar> build_matrix(const HyperbolicMap& map, std::size_t symbol, UlamGrid grid,
                                UlamSampling sampling, Complex theta, Weight&& weight) {
  if (sampling.samples_per_cell < 1) throw std::invalid_argument("samples_per_cell must be >= 1");
  const std::size_t n = grid.size();
  std::vector<RowData> rows(n);
  std::vector<std::vector<Scalar>> row_weights(n);

  parallel_for(n, [&](std::size_t cell) {
    std::vector<std::pair<std::uint32_t, Scalar>> samples;
    samples.reserve(static_cast<std::size_t>(sampling.samples_per_axis()) * sampling.samples_per_axis());
    for_each_sample(map, symbol, grid, sampling, cell, [&](TorusPoint x, TorusPoint y) {
      samples.emplace_back(static_cast<std::uint32_t>(grid.cell_of(y)), weight(x, y));
    });
    std::stable_sort(samples.begin(), samples.end(),
                     [](const auto& a, const auto& b) { return a.first < b.first; });
    const double total = static_cast<double>(samples.size());
    RowData& row = rows[cell];
    auto& w = row_weights[cell];
    for (std::size_t s = 0; s < samples.size();) {
      const std::uint32_t col = samples[s].first;
      Scalar acc{};
      double count = 0.0;
      for (; s < samples.size() && samples[s].first == col; ++s) {
        acc += samples[s].second;
        count += 1.0;
      }
      row.cols.push_back(col);
      row.counts.push_back(count / total);
      w.push_back(acc / total);
    }
  });

  std::vector<std::size_t> row_ptr(n + 1, 0);
  for (std::size_t i = 0; i < n; ++i) row_ptr[i + 1] = row_ptr[i] + rows[i].cols.size();
  std::vector<std::uint32_t> cols;
  std::vector<double> counts;
  std::vector<Scalar> values;
  cols.reserve(row_ptr[n]);
  counts.reserve(row_ptr[n]);
  values.reserve(row_ptr[n]);
  for (std::size_t i = 0; i < n; ++i) {
    cols.insert(cols.end(), rows[i].cols.begin(), rows[i].cols.end());
    counts.insert(counts.end(), rows[i].counts.begin(), rows[i].counts.end());
    values.insert(values.end(), row_weights[i].begin(), row_weights[i].end());
  }

  std::vector<double> r, c;
  const bool balanced = map.preserves_lebesgue() && sinkhorn(row_ptr, cols, counts, n, r, c);
  for (std::size_t i = 0; i < n; ++i) {
    double rho = 0.0;
    for (std::size_t k = row_ptr[i]; k < row_ptr[i + 1]; ++k)
      rho += balanced ? counts[k] * r[i] * c[cols[k]] : counts[k];
    for (std::size_t k = row_ptr[i]; k < row_ptr[i + 1]; ++k) {
      const double scale = balanced ? r[i] * c[cols[k]] / rho : 1.0 / rho;
      values[k] *= scale;
    }
  }

  UlamMatrix<Scalar> out;
  out.grid = grid;
  out.symbol = symbol;
  out.theta = theta;
  out.entries = SparseRows<Scalar>(n, n, std::move(row_ptr), std::move(cols), std::move(values));
  return out;
}

double modulus(double v) noexcept { return std::abs(v); }
double modulus(const Complex& v) noexcept { return std::abs(v); }

}  // namespace

UlamGrid::UlamGrid(int k) : k_(k) {
  if (k < 2) throw std::invalid_argument("grid k must be >= 2");
  if (k > 4096) throw std::invalid_argument("grid k must be <= 4096");
}

std::size_t UlamGrid::cell_of(TorusPoint x) const noexcept {
  auto ix = static_cast<std::size_t>(x.x1 * k_);
  auto iy = static_cast<std::size_t>(x.x2 * k_);
  const auto top = static_cast<std::size_t>(k_ - 1);
  ix = std::min(ix, top);
  iy = std::min(iy, top);
  return iy * static_cast<std::size_t>(k_) + ix;
}

TorusPoint UlamGrid::cell_origin(std::size_t cell) const noexcept {
  const auto k = static_cast<std::size_t>(k_);
  return {static_cast<double>(cell % k) / k_, static_cast<double>(cell / k) / k_};
}

TorusPoint UlamGrid::cell_center(std::size_t cell) const noexcept {
  const TorusPoint o = cell_origin(cell);
  return {o.x1 + 0.5 * side(), o.x2 + 0.5 * side()};
}

int UlamSampling::samples_per_axis() const noexcept {
  int m = static_cast<int>(std::sqrt(static_cast<double>(std::max(1, samples_per_cell))));
  while (m * m < samples_per_cell) ++m;
  return m;
}

TransferMatrix build_ulam(const HyperbolicMap& map, std::size_t symbol, UlamGrid grid,
                          UlamSampling sampling) {
  return build_matrix<double>(map, symbol, grid, sampling, Complex{},
                              [](TorusPoint, TorusPoint) { return 1.0; });
}

TwistedMatrix build_twisted(const HyperbolicMap& map, const Observable& g, std::size_t symbol,
                            Complex theta, UlamGrid grid, UlamSampling sampling) {
  return build_matrix<Complex>(map, symbol, grid, sampling, theta,
                               [&](TorusPoint x, TorusPoint y) {
                                 return std::exp(theta * g.evaluate(symbol, x, y));
                               });
}

TransferMatrix build_twisted_real(const HyperbolicMap& map, const Observable& g, std::size_t symbol,
                                  double theta, UlamGrid grid, UlamSampling sampling) {
  return build_matrix<double>(map, symbol, grid, sampling, Complex{theta, 0.0},
                              [&](TorusPoint x, TorusPoint y) {
                                return std::exp(theta * g.evaluate(symbol, x, y));
                              });
}

std::vector<double> cell_observable_means(const HyperbolicMap& map, const Observable& g,
                                          std::size_t symbol, UlamGrid grid, UlamSampling sampling) {
  std::vector<double> means(grid.size());
  parallel_for(grid.size(), [&](std::size_t cell) {
    double sum = 0.0;
    std::size_t count = 0;
    for_each_sample(map, symbol, grid, sampling, cell, [&](TorusPoint x, TorusPoint y) {
      sum += g.raw(symbol, x, y);
      ++count;
    });
    means[cell] = sum / static_cast<double>(count);
  });
  return means;
}

TransferCocycle make_transfer_cocycle(const MapFamily& maps, UlamGrid grid, UlamSampling sampling) {
  TransferCocycle cocycle;
  for (std::size_t a = 0; a < maps.size(); ++a)
    cocycle.matrices.push_back(build_ulam(maps[a], a, grid, sampling));
  return cocycle;
}

UlamCocycle<double> make_twisted_cocycle(const MapFamily& maps, const Observable& g, double theta,
                                         UlamGrid grid, UlamSampling sampling) {
  UlamCocycle<double> cocycle;
  for (std::size_t a = 0; a < maps.size(); ++a)
    cocycle.matrices.push_back(build_twisted_real(maps[a], g, a, theta, grid, sampling));
  return cocycle;
}

UlamCocycle<Complex> make_twisted_cocycle(const MapFamily& maps, const Observable& g, Complex theta,
                                          UlamGrid grid, UlamSampling sampling) {
  UlamCocycle<Complex> cocycle;
  for (std::size_t a = 0; a < maps.size(); ++a)
    cocycle.matrices.push_back(build_twisted(maps[a], g, a, theta, grid, sampling));
  return cocycle;
}

// ---------------------------------------------------------------------------

double DensityVector::mass() const noexcept { return stats::compensated_sum(weights); }

DensityVector DensityVector::uniform(UlamGrid grid) {
  return {grid, std::vector<double>(grid.size(), 1.0 / static_cast<double>(grid.size()))};
}

double l1_distance(std::span<const double> a, std::span<const double> b) noexcept {
  double d = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) d += std::abs(a[i] - b[i]);
  return d;
}

std::vector<double> aggregate(std::span<const double> fine, UlamGrid fine_grid, UlamGrid coarse_grid) {
  if (fine_grid.k() % coarse_grid.k() != 0)
    throw std::invalid_argument("coarse grid must divide the fine grid");
  const auto kf = static_cast<std::size_t>(fine_grid.k());
  const auto kc = static_cast<std::size_t>(coarse_grid.k());
  const std::size_t ratio = kf / kc;
  std::vector<double> out(coarse_grid.size(), 0.0);
  for (std::size_t iy = 0; iy < kf; ++iy)
    for (std::size_t ix = 0; ix < kf; ++ix) out[(iy / ratio) * kc + ix / ratio] += fine[iy * kf + ix];
  return out;
}

void push_along(const TransferCocycle& cocycle, const OmegaPath& omega, int steps,
                std::vector<double>& h) {
  std::vector<double> next(h.size());
  for (int i = 0; i < steps; ++i) {
    cocycle[omega.symbol(i)].entries.push_forward<double>(h, next);
    h.swap(next);
  }
}

DensityVector equivariant_density(const TransferCocycle& cocycle, const OmegaPath& omega,
                                  int n_pullback) {
  if (n_pullback < 0) throw std::invalid_argument("n_pullback must be >= 0");
  DensityVector h = DensityVector::uniform(cocycle.grid());
  push_along(cocycle, omega.shifted(-n_pullback), n_pullback, h.weights);
  const double mass = h.mass();
  for (double& w : h.weights) w /= mass;
  return h;
}

double equivariance_defect(const TransferCocycle& cocycle, const OmegaPath& omega, int n_pullback) {
  DensityVector h = equivariant_density(cocycle, omega, n_pullback);
  push_along(cocycle, omega, 1, h.weights);
  const DensityVector next = equivariant_density(cocycle, omega.shifted(1), n_pullback);
  return l1_distance(h.weights, next.weights);
}

DecayProfile pullback_decay_profile(const TransferCocycle& cocycle, const OmegaPath& omega,
                                    int n_max, double floor) {
  if (n_max < 2) throw std::invalid_argument("n_max must be >= 2");
  DecayProfile profile;
  profile.floor = floor;
  std::vector<double> previous = equivariant_density(cocycle, omega, 0).weights;
  std::vector<double> xs, ys;
  for (int n = 0; n < n_max; ++n) {
    std::vector<double> current = equivariant_density(cocycle, omega, n + 1).weights;
    const double gap = l1_distance(previous, current);
    profile.n.push_back(n);
    profile.gap.push_back(gap);
    if (gap > floor) {
      xs.push_back(n);
      ys.push_back(std::log(gap));
    }
    previous.swap(current);
  }
  profile.fit = stats::linear_fit(xs, ys);
  return profile;
}

LyapunovReport lyapunov_spectrum(const TransferCocycle& cocycle, const OmegaPath& omega,
                                 int n_steps, int r, int reorth_period, std::uint64_t seed) {
  const std::size_t n = cocycle.grid().size();
  if (r < 1 || static_cast<std::size_t>(r) > n) throw std::invalid_argument("frame size out of range");
  if (n_steps < 1) throw std::invalid_argument("n_steps must be >= 1");
  if (reorth_period < 1) throw std::invalid_argument("reorth_period must be >= 1");

  LyapunovReport report;
  report.n_steps = n_steps;
  report.reorth_period = reorth_period;
  Eigen::MatrixXd frame(n, r);
  CounterRng rng(stream_key(seed, 0x4c59u));
  for (Eigen::Index j = 0; j < r; ++j)
    for (Eigen::Index i = 0; i < static_cast<Eigen::Index>(n); ++i) frame(i, j) = rng.uniform() - 0.5;
  frame.col(0).setConstant(1.0);

  std::vector<double> log_growth(r, 0.0);
  std::vector<double> column(n), image(n);
  int since = 0;
  auto orthonormalize = [&](int step) {
    Eigen::HouseholderQR<Eigen::MatrixXd> qr(frame);
    const Eigen::MatrixXd R = qr.matrixQR().triangularView<Eigen::Upper>();
    Eigen::MatrixXd Q = qr.householderQ() * Eigen::MatrixXd::Identity(n, r);
    for (Eigen::Index j = 0; j < r; ++j) {
      const double diag = std::abs(R(j, j));
      const double col_norm = R.col(j).norm();
      if (col_norm == 0.0 || diag / col_norm < 1e-13) {
        report.ok = false;
        if (!report.failure_step) report.failure_step = step;
      }
      log_growth[j] += std::log(std::max(diag, std::numeric_limits<double>::min()));
      if (R(j, j) < 0.0) Q.col(j) *= -1.0;
    }
    const Eigen::MatrixXd defect = Q.transpose() * Q - Eigen::MatrixXd::Identity(r, r);
    report.orthogonality_defects.push_back(defect.cwiseAbs().maxCoeff());
    frame = std::move(Q);
  };
  orthonormalize(0);
  std::fill(log_growth.begin(), log_growth.end(), 0.0);

  for (int step = 0; step < n_steps; ++step) {
    const auto& m = cocycle[omega.symbol(step)].entries;
    for (Eigen::Index j = 0; j < r; ++j) {
      Eigen::Map<Eigen::VectorXd>(column.data(), n) = frame.col(j);
      m.push_forward<double>(column, image);
      frame.col(j) = Eigen::Map<const Eigen::VectorXd>(image.data(), n);
    }
    if (++since == reorth_period || step + 1 == n_steps) {
      orthonormalize(step + 1);
      since = 0;
    }
  }
  for (double lg : log_growth) report.exponents.push_back(lg / n_steps);
  std::sort(report.exponents.begin(), report.exponents.end(), std::greater<>());
  return report;
}

// ---------------------------------------------------------------------------

template <class V>
double grid_total_variation(std::span<const V> h, UlamGrid grid) {
  const auto k = static_cast<std::size_t>(grid.k());
  double tv = 0.0;
  for (std::size_t iy = 0; iy < k; ++iy) {
    for (std::size_t ix = 0; ix < k; ++ix) {
      const V here = h[iy * k + ix];
      tv += modulus(h[iy * k + (ix + 1) % k] - here);
      tv += modulus(h[((iy + 1) % k) * k + ix] - here);
    }
  }
  return tv;
}

template <class V>
double coarse_l1(std::span<const V> h, UlamGrid fine, UlamGrid coarse) {
  if (fine.k() % coarse.k() != 0) throw std::invalid_argument("coarse grid must divide the fine grid");
  const auto kf = static_cast<std::size_t>(fine.k());
  const auto kc = static_cast<std::size_t>(coarse.k());
  const std::size_t ratio = kf / kc;
  std::vector<V> sums(coarse.size(), V{});
  for (std::size_t iy = 0; iy < kf; ++iy)
    for (std::size_t ix = 0; ix < kf; ++ix) sums[(iy / ratio) * kc + ix / ratio] += h[iy * kf + ix];
  double total = 0.0;
  for (const V& s : sums) total += modulus(s);
  return total;
}

template double grid_total_variation<double>(std::span<const double>, UlamGrid);
template double grid_total_variation<Complex>(std::span<const Complex>, UlamGrid);
template double coarse_l1<double>(std::span<const double>, UlamGrid, UlamGrid);
template double coarse_l1<Complex>(std::span<const Complex>, UlamGrid, UlamGrid);

std::vector<std::vector<double>> lasota_yorke_test_functions(UlamGrid grid) {
  const int k = grid.k();
  const std::vector<std::array<int, 2>> smooth{{1, 0}, {0, 1}, {1, 1}};
  const std::vector<std::array<int, 2>> oscillatory{
      {1, 0}, {2, 3}, {5, -4}, {std::max(1, k / 8), 0}, {0, std::max(1, k / 4)},
      {std::max(1, k / 4), std::max(1, k / 8)}};
  std::vector<std::vector<double>> out;
  auto normalized = [&](auto&& f) {
    std::vector<double> h(grid.size());
    for (std::size_t c = 0; c < grid.size(); ++c) h[c] = f(grid.cell_center(c));
    double l1 = 0.0;
    for (double v : h) l1 += std::abs(v);
    for (double& v : h) v /= l1;
    return h;
  };
  out.push_back(normalized([](TorusPoint) { return 1.0; }));
  for (const auto& m : smooth)
    out.push_back(normalized([&](TorusPoint x) {
      return 1.0 + 0.5 * std::cos(2.0 * std::numbers::pi * (m[0] * x.x1 + m[1] * x.x2));
    }));
  for (const auto& m : oscillatory)
    out.push_back(normalized([&](TorusPoint x) {
      return std::cos(2.0 * std::numbers::pi * (m[0] * x.x1 + m[1] * x.x2));
    }));
  return out;
}

template <class Scalar>
LasotaYorkeFit lasota_yorke_probe(const UlamCocycle<Scalar>& cocycle, const OmegaPath& omega,
                                  std::span<const int> n_grid, int k_coarse) {
  const UlamGrid fine = cocycle.grid();
  const UlamGrid coarse(k_coarse);
  if (k_coarse >= fine.k()) throw std::invalid_argument("k_fine must exceed k_coarse");
  if (n_grid.empty()) throw std::invalid_argument("n_grid must be non-empty");
  std::vector<int> ns(n_grid.begin(), n_grid.end());
  std::sort(ns.begin(), ns.end());
  if (ns.front() < 0) throw std::invalid_argument("n_grid entries must be >= 0");

  LasotaYorkeFit fit;
  fit.n_grid = ns;
  const auto tests = lasota_yorke_test_functions(fine);
  for (const auto& t : tests) {
    std::vector<Scalar> h(t.begin(), t.end());
    std::vector<Scalar> next(h.size());
    fit.initial_strong.push_back(grid_total_variation<Scalar>(h, fine));
    fit.initial_weak.push_back(coarse_l1<Scalar>(h, fine, coarse));
    std::vector<double> strong;
    int done = 0;
    for (int n : ns) {
      for (; done < n; ++done) {
        cocycle[omega.symbol(done)].entries.template push_forward<Scalar>(h, next);
        h.swap(next);
      }
      strong.push_back(grid_total_variation<Scalar>(h, fine));
    }
    fit.strong_norms.push_back(std::move(strong));
  }

  const double horizon = std::max(1, ns.back());
  auto constant_for = [&](double a) {
    double B = 1.0;
    for (std::size_t h = 0; h < tests.size(); ++h) {
      for (std::size_t i = 0; i < ns.size(); ++i) {
        const double denom = std::pow(a, ns[i]) * fit.initial_strong[h] + fit.initial_weak[h];
        if (denom > 0.0) B = std::max(B, fit.strong_norms[h][i] / denom);
      }
    }
    return B;
  };
  // B(a) decreases in a. The fit is the smallest grid a whose constant stays
  // within twice the tightest one, B(0.99).
  const double tightest = constant_for(0.99);
  for (int step = 1; step <= 99; ++step) {
    const double a = step / 100.0;
    const double B = constant_for(a);
    if (B <= 2.0 * tightest) {
      fit.a = a;
      fit.B = B;
      break;
    }
  }
  fit.effective_rate = std::pow(fit.B, 1.0 / horizon) * fit.a;
  fit.ok = fit.effective_rate < 1.0;
  double slack = std::numeric_limits<double>::infinity();
  for (std::size_t h = 0; h < tests.size(); ++h) {
    for (std::size_t i = 0; i < ns.size(); ++i) {
      const double bound =
          fit.B * (std::pow(fit.a, ns[i]) * fit.initial_strong[h] + fit.initial_weak[h]);
      if (bound > 0.0) slack = std::min(slack, (bound - fit.strong_norms[h][i]) / bound);
    }
  }
  fit.min_relative_slack = slack;
  return fit;
}

template LasotaYorkeFit lasota_yorke_probe<double>(const UlamCocycle<double>&, const OmegaPath&,
                                                   std::span<const int>, int);
template LasotaYorkeFit lasota_yorke_probe<Complex>(const UlamCocycle<Complex>&, const OmegaPath&,
                                                    std::span<const int>, int);

// ---------------------------------------------------------------------------

DensityVector annealed_stationary_density(const TransferCocycle& cocycle,
                                          std::span<const double> distribution, int max_iterations,
                                          double tolerance) {
  if (distribution.size() != cocycle.alphabet_size())
    throw std::invalid_argument("distribution size must match the alphabet");
  DensityVector h = DensityVector::uniform(cocycle.grid());
  std::vector<double> next(h.weights.size());
  std::vector<double> part(h.weights.size());
  for (int it = 0; it < max_iterations; ++it) {
    std::fill(next.begin(), next.end(), 0.0);
    for (std::size_t a = 0; a < cocycle.alphabet_size(); ++a) {
      cocycle[a].entries.push_forward<double>(h.weights, part);
      for (std::size_t j = 0; j < next.size(); ++j) next[j] += distribution[a] * part[j];
    }
    const double mass = stats::compensated_sum(next);
    for (double& v : next) v /= mass;
    const double change = l1_distance(next, h.weights);
    h.weights.swap(next);
    if (change < tolerance) break;
  }
  return h;
}

std::vector<double> equivariant_centering(const MapFamily& maps, const Observable& g,
                                          std::span<const double> distribution, UlamGrid grid,
                                          UlamSampling sampling) {
  if (g.alphabet_size() != maps.size())
    throw std::invalid_argument("observable alphabet must match the map family");
  const TransferCocycle cocycle = make_transfer_cocycle(maps, grid, sampling);
  const DensityVector bar = annealed_stationary_density(cocycle, distribution);
  std::vector<double> offsets(maps.size());
  for (std::size_t a = 0; a < maps.size(); ++a) {
    const auto means = cell_observable_means(maps[a], g, a, grid, sampling);
    double acc = 0.0;
    for (std::size_t c = 0; c < means.size(); ++c) acc += bar.weights[c] * means[c];
    offsets[a] = acc;
  }
  return offsets;
}

CenteringResidual centering_residual(const TransferCocycle& cocycle, const MapFamily& maps,
                                     const Observable& g, UlamSampling sampling,
                                     const OmegaPath& omega, int n_pullback, int fibers) {
  std::vector<std::vector<double>> means;
  for (std::size_t a = 0; a < maps.size(); ++a)
    means.push_back(cell_observable_means(maps[a], g, a, cocycle.grid(), sampling));
  DensityVector h = equivariant_density(cocycle, omega, n_pullback);
  CenteringResidual res;
  double total = 0.0;
  for (int i = 0; i < fibers; ++i) {
    const std::size_t a = omega.symbol(i);
    double m = 0.0;
    for (std::size_t c = 0; c < h.weights.size(); ++c) m += h.weights[c] * means[a][c];
    m -= g.offsets()[a];
    res.max_abs = std::max(res.max_abs, std::abs(m));
    total += std::abs(m);
    push_along(cocycle, omega.shifted(i), 1, h.weights);
  }
  res.fibers = static_cast<std::size_t>(fibers);
  res.mean_abs = fibers > 0 ? total / fibers : 0.0;
  return res;
}

template <class Scalar>
void write_coordinate(std::ostream& out, const UlamMatrix<Scalar>& m) {
  for (std::size_t i = 0; i < m.entries.rows(); ++i) {
    const auto cols = m.entries.row_columns(i);
    const auto vals = m.entries.row_values(i);
    for (std::size_t k = 0; k < cols.size(); ++k) {
      const Complex v(vals[k]);
      out << i << ' ' << cols[k] << ' ' << format_double(v.real()) << ' ' << format_double(v.imag())
          << '\n';
    }
  }
}

template void write_coordinate<double>(std::ostream&, const UlamMatrix<double>&);
template void write_coordinate<Complex>(std::ostream&, const UlamMatrix<Complex>&);

void write_density_csv(std::ostream& out, const DensityVector& h) {
  out << "cell_index,weight\n";
  for (std::size_t c = 0; c < h.weights.size(); ++c) out << c << ',' << format_double(h.weights[c]) << '\n';
}

}  // namespace qcl
