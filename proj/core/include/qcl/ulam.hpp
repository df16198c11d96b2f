#pragma once

// Ulam discretization of the transfer-operator cocycle. A k x k grid of
// square cells replaces the anisotropic function spaces; matrix rows are
// source cells and entry (i, j) estimates Leb(cell_i & T^-1 cell_j)/Leb(cell_i).
// Densities are pushed forward as row vectors: (M h)_j = sum_i h_i M_ij.

#include <algorithm>
#include <complex>
#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <vector>

#include "qcl/dynamics.hpp"
#include "qcl/stats.hpp"

namespace qcl {

using Complex = std::complex<double>;

class UlamGrid {
 public:
  explicit UlamGrid(int k);

  int k() const noexcept { return k_; }
  std::size_t size() const noexcept { return static_cast<std::size_t>(k_) * k_; }
  double side() const noexcept { return 1.0 / k_; }
  /// Row-major index: cell (ix, iy) -> iy * k + ix, with ix along x1.
  std::size_t cell_of(TorusPoint x) const noexcept;
  TorusPoint cell_origin(std::size_t cell) const noexcept;
  TorusPoint cell_center(std::size_t cell) const noexcept;

  friend bool operator==(const UlamGrid&, const UlamGrid&) = default;

 private:
  int k_;
};

struct UlamSampling {
  std::uint64_t seed = 0;
  /// Rounded up to the next perfect square: cells are stratified m x m.
  int samples_per_cell = 16;

  int samples_per_axis() const noexcept;
};

/// Compressed sparse rows.
template <class Scalar>
class SparseRows {
 public:
  SparseRows() = default;
  SparseRows(std::size_t rows, std::size_t cols, std::vector<std::size_t> row_ptr,
             std::vector<std::uint32_t> col_index, std::vector<Scalar> values);

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  std::size_t nnz() const noexcept { return values_.size(); }

  std::span<const std::uint32_t> row_columns(std::size_t row) const noexcept {
    return {col_index_.data() + row_ptr_[row], row_ptr_[row + 1] - row_ptr_[row]};
  }
  std::span<const Scalar> row_values(std::size_t row) const noexcept {
    return {values_.data() + row_ptr_[row], row_ptr_[row + 1] - row_ptr_[row]};
  }
  Scalar row_sum(std::size_t row) const noexcept;
  /// Entry (i, j), zero if absent.
  Scalar at(std::size_t row, std::size_t col) const noexcept;

  /// out = M^T h, i.e. out_j = sum_i h_i M_ij. `out` must not alias `h`.
  template <class V>
  void push_forward(std::span<const V> h, std::span<V> out) const;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<std::size_t> row_ptr_{0};
  std::vector<std::uint32_t> col_index_;
  std::vector<Scalar> values_;
};

template <class Scalar>
struct UlamMatrix {
  UlamGrid grid{2};
  std::size_t symbol = 0;
  Complex theta{0.0, 0.0};
  SparseRows<Scalar> entries;
};

using TransferMatrix = UlamMatrix<double>;
using TwistedMatrix = UlamMatrix<Complex>;

/// Untwisted Ulam matrix. Rows are renormalized to sum to 1; for maps that
/// certifiably preserve Lebesgue the sampled matrix is first balanced to be
/// doubly stochastic.
TransferMatrix build_ulam(const HyperbolicMap& map, std::size_t symbol, UlamGrid grid,
                          UlamSampling sampling);

/// Twisted matrix for L(e^{theta g} h): each sample carries e^{theta g(x)} at
/// its source point. Uses the sample stream and normalization of build_ulam,
/// so theta = 0 reproduces it bit for bit.
TwistedMatrix build_twisted(const HyperbolicMap& map, const Observable& g, std::size_t symbol,
                            Complex theta, UlamGrid grid, UlamSampling sampling);
/// Real-theta variant with real storage.
TransferMatrix build_twisted_real(const HyperbolicMap& map, const Observable& g,
                                  std::size_t symbol, double theta, UlamGrid grid,
                                  UlamSampling sampling);

/// Per-cell average of the uncentered observable over the Ulam samples.
std::vector<double> cell_observable_means(const HyperbolicMap& map, const Observable& g,
                                          std::size_t symbol, UlamGrid grid,
                                          UlamSampling sampling);

/// Matrices for every symbol of a family.
template <class Scalar>
struct UlamCocycle {
  std::vector<UlamMatrix<Scalar>> matrices;

  const UlamMatrix<Scalar>& operator[](std::size_t symbol) const { return matrices.at(symbol); }
  const UlamGrid& grid() const { return matrices.front().grid; }
  std::size_t alphabet_size() const noexcept { return matrices.size(); }
};

using TransferCocycle = UlamCocycle<double>;

TransferCocycle make_transfer_cocycle(const MapFamily& maps, UlamGrid grid, UlamSampling sampling);
UlamCocycle<double> make_twisted_cocycle(const MapFamily& maps, const Observable& g, double theta,
                                         UlamGrid grid, UlamSampling sampling);
UlamCocycle<Complex> make_twisted_cocycle(const MapFamily& maps, const Observable& g,
                                          Complex theta, UlamGrid grid, UlamSampling sampling);

struct DensityVector {
  UlamGrid grid{2};
  std::vector<double> weights;

  double mass() const noexcept;
  static DensityVector uniform(UlamGrid grid);
};

double l1_distance(std::span<const double> a, std::span<const double> b) noexcept;

/// Sums fine-grid weights into the cells of a coarser grid (k_fine % k_coarse == 0).
std::vector<double> aggregate(std::span<const double> fine, UlamGrid fine_grid, UlamGrid coarse_grid);

/// Pushes `h` forward along omega for `steps` matrices, symbols 0..steps-1.
void push_along(const TransferCocycle& cocycle, const OmegaPath& omega, int steps,
                std::vector<double>& h);

/// Discrete h^0_omega: M_{sigma^-1 omega} ... M_{sigma^-n omega} applied to
/// the uniform density, renormalized to mass 1.
DensityVector equivariant_density(const TransferCocycle& cocycle, const OmegaPath& omega,
                                  int n_pullback);

/// || M_omega h^0_omega - h^0_{sigma omega} ||_1.
double equivariance_defect(const TransferCocycle& cocycle, const OmegaPath& omega, int n_pullback);

struct DecayProfile {
  std::vector<int> n;
  std::vector<double> gap;  ///< || pullback_n - pullback_{n+1} ||_1
  /// Fit of log gap against n over gaps above `floor`.
  stats::LinearFit fit;
  double floor = 1e-12;
};

DecayProfile pullback_decay_profile(const TransferCocycle& cocycle, const OmegaPath& omega,
                                    int n_max, double floor = 1e-12);

struct LyapunovReport {
  std::vector<double> exponents;  ///< descending
  int n_steps = 0;
  int reorth_period = 0;
  std::vector<double> orthogonality_defects;  ///< max |Q^T Q - I| after each re-orthonormalization
  bool ok = true;
  std::optional<int> failure_step;  ///< set when the frame lost rank
};

/// Lyapunov exponents of the cocycle acting on densities, from an r-frame
/// re-orthonormalized by QR every `reorth_period` steps.
LyapunovReport lyapunov_spectrum(const TransferCocycle& cocycle, const OmegaPath& omega,
                                 int n_steps, int r, int reorth_period, std::uint64_t seed = 1);

/// Total variation of a grid function (sum of moduli of adjacent differences,
/// periodic, both axes). Strong-norm surrogate.
template <class V>
double grid_total_variation(std::span<const V> h, UlamGrid grid);
/// L1 norm after aggregation to a coarse grid. Weak-norm surrogate.
template <class V>
double coarse_l1(std::span<const V> h, UlamGrid fine, UlamGrid coarse);

struct LasotaYorkeFit {
  double B = 1.0;
  double a = 1.0;
  /// (B a^N)^(1/N) at the largest probed N; < 1 means strong-norm contraction.
  double effective_rate = 1.0;
  /// min over (h, n) of bound - ||L^n h||_strong, normalized by the bound.
  double min_relative_slack = 0.0;
  bool ok = false;
  std::vector<int> n_grid;
  /// strong_norms[h][i] = ||L^{n_grid[i]} h||_strong
  std::vector<std::vector<double>> strong_norms;
  std::vector<double> initial_strong;
  std::vector<double> initial_weak;
};

/// Test densities for the Lasota-Yorke probes: the uniform density plus
/// positive and zero-mass Fourier modes on the fine grid.
std::vector<std::vector<double>> lasota_yorke_test_functions(UlamGrid grid);

/// Fits ||L^(n) h||_s <= B a^n ||h||_s + B ||h||_w over the test functions,
/// with ||.||_s the fine-grid total variation and ||.||_w the L1 norm on a
/// grid of k_coarse cells per axis.
template <class Scalar>
LasotaYorkeFit lasota_yorke_probe(const UlamCocycle<Scalar>& cocycle, const OmegaPath& omega,
                                  std::span<const int> n_grid, int k_coarse);

/// Stationary density of the averaged operator sum_a p_a M_a (power iteration).
DensityVector annealed_stationary_density(const TransferCocycle& cocycle,
                                          std::span<const double> distribution,
                                          int max_iterations = 10000, double tolerance = 1e-14);

/// Per-symbol centering offsets c_a = <h_bar, g_a> with h_bar the annealed
/// stationary density. With i.i.d. driving, h^0_omega does not depend on
/// omega_0, so c_a is the symbol-conditional mean of g_a under mu_omega.
std::vector<double> equivariant_centering(const MapFamily& maps, const Observable& g,
                                          std::span<const double> distribution, UlamGrid grid,
                                          UlamSampling sampling);

struct CenteringResidual {
  double max_abs = 0.0;
  double mean_abs = 0.0;
  std::size_t fibers = 0;
};

/// |<h^0_{sigma^i omega}, g_{omega_i}>| over `fibers` consecutive fibers,
/// using the centered observable.
CenteringResidual centering_residual(const TransferCocycle& cocycle, const MapFamily& maps,
                                     const Observable& g, UlamSampling sampling,
                                     const OmegaPath& omega, int n_pullback, int fibers);

/// Coordinate text: one "row col re im" line per stored entry.
template <class Scalar>
void write_coordinate(std::ostream& out, const UlamMatrix<Scalar>& m);
/// CSV "cell_index,weight".
void write_density_csv(std::ostream& out, const DensityVector& h);

// ---------------------------------------------------------------------------
// SparseRows implementation

template <class Scalar>
SparseRows<Scalar>::SparseRows(std::size_t rows, std::size_t cols, std::vector<std::size_t> row_ptr,
                               std::vector<std::uint32_t> col_index, std::vector<Scalar> values)
    : rows_(rows),
      cols_(cols),
      row_ptr_(std::move(row_ptr)),
      col_index_(std::move(col_index)),
      values_(std::move(values)) {}

template <class Scalar>
Scalar SparseRows<Scalar>::row_sum(std::size_t row) const noexcept {
  Scalar sum{};
  for (const Scalar& v : row_values(row)) sum += v;
  return sum;
}

template <class Scalar>
Scalar SparseRows<Scalar>::at(std::size_t row, std::size_t col) const noexcept {
  const auto cols = row_columns(row);
  for (std::size_t k = 0; k < cols.size(); ++k)
    if (cols[k] == col) return row_values(row)[k];
  return Scalar{};
}

template <class Scalar>
template <class V>
void SparseRows<Scalar>::push_forward(std::span<const V> h, std::span<V> out) const {
  std::fill(out.begin(), out.end(), V{});
  for (std::size_t i = 0; i < rows_; ++i) {
    const V hi = h[i];
    if (hi == V{}) continue;
    for (std::size_t k = row_ptr_[i]; k < row_ptr_[i + 1]; ++k) out[col_index_[k]] += hi * values_[k];
  }
}

}  // namespace qcl
