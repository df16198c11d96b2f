#pragma once

// Random hyperbolic dynamics on the 2-torus: fiber maps, the driving shift,
// observables and Birkhoff sums along the skew product.

#include <array>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <memory>
#include <optional>
#include <span>
#include <vector>

namespace qcl {

struct TorusPoint {
  double x1 = 0.0;
  double x2 = 0.0;

  friend bool operator==(const TorusPoint&, const TorusPoint&) = default;
};

using Vec2 = std::array<double, 2>;
using Mat2 = std::array<std::array<double, 2>, 2>;

/// Reduces a real number into [0, 1).
inline double wrap_unit(double v) noexcept {
  double w = v - static_cast<double>(static_cast<std::int64_t>(v));
  if (w < 0.0) w += 1.0;
  return w >= 1.0 ? 0.0 : w;
}

/// Integer 2x2 matrix [[a11, a12], [a21, a22]].
struct Matrix2i {
  std::int64_t a11 = 1, a12 = 0, a21 = 0, a22 = 1;

  std::int64_t det() const noexcept { return a11 * a22 - a12 * a21; }
  std::int64_t trace() const noexcept { return a11 + a22; }

  /// True when det = +-1 and the eigenvalues split as |l_s| < 1 < |l_u|.
  bool is_hyperbolic() const noexcept;
  /// Modulus of the expanding eigenvalue (requires is_hyperbolic()).
  double unstable_eigenvalue() const;
  /// Unit eigenvector for the expanding eigenvalue.
  Vec2 unstable_direction() const;

  friend bool operator==(const Matrix2i&, const Matrix2i&) = default;
};

/// x -> x + amplitude * sin(2 pi m.x) * direction. Area preserving exactly
/// when m.direction = 0; otherwise the Jacobian is 1 + 2 pi a cos(2 pi m.x) m.v.
struct ShearTerm {
  std::array<int, 2> frequency{1, 0};
  double amplitude = 0.0;
  Vec2 direction{0.0, 1.0};

  double divergence_coupling() const noexcept {
    return frequency[0] * direction[0] + frequency[1] * direction[1];
  }
  bool area_preserving() const noexcept { return divergence_coupling() == 0.0; }
};

/// One branch of a piecewise toral automorphism: x -> A x + offset on the
/// interior of a convex polygon (vertices counter-clockwise, in [0,1]^2).
struct AffinePiece {
  std::vector<Vec2> vertices;
  Matrix2i matrix;
  Vec2 offset{0.0, 0.0};

  double area() const noexcept;
};

enum class MapKind { anosov_perturbed_cat, piecewise_toral };

class HyperbolicMap {
 public:
  /// Base automorphism followed by shears: T(x) = A (S_K o ... o S_1)(x) mod 1.
  /// Throws std::invalid_argument if the base is not hyperbolic, a shear is
  /// not invertible, or the total shear size exceeds `delta`.
  static HyperbolicMap anosov(Matrix2i base, std::vector<ShearTerm> shears = {},
                              double delta = std::numeric_limits<double>::infinity());

  /// Piecewise toral automorphism. Pieces must be pairwise disjoint with
  /// total area 1, and every piece matrix hyperbolic.
  static HyperbolicMap piecewise(std::vector<AffinePiece> pieces);

  MapKind kind() const noexcept { return kind_; }
  const Matrix2i& base_matrix() const noexcept { return base_; }
  std::span<const ShearTerm> shears() const noexcept { return shears_; }
  std::span<const AffinePiece> pieces() const noexcept { return pieces_; }

  /// Certified Lebesgue-preserving: linear or divergence-free shears only.
  /// Piecewise maps are not certified.
  bool preserves_lebesgue() const noexcept;
  /// Sum of |amplitude| * |direction| over the shear terms.
  double perturbation_size() const noexcept;

  /// Throws BoundaryPointError on a piece boundary (piecewise kind).
  TorusPoint operator()(TorusPoint x) const;
  Mat2 jacobian(TorusPoint x) const;
  /// Index of the piece whose interior contains x.
  std::size_t piece_index(TorusPoint x) const;

 private:
  HyperbolicMap() = default;

  MapKind kind_ = MapKind::anosov_perturbed_cat;
  Matrix2i base_;
  std::vector<ShearTerm> shears_;
  std::vector<AffinePiece> pieces_;
};

using MapFamily = std::vector<HyperbolicMap>;

TorusPoint apply_map(const HyperbolicMap& map, TorusPoint x);
double map_jacobian_det(const HyperbolicMap& map, TorusPoint x);

/// A realization of the i.i.d. driving shift over a finite alphabet. The
/// symbol at time i is a pure function of (seed, cursor + i).
class OmegaPath {
 public:
  OmegaPath(std::uint64_t seed, std::vector<double> distribution);

  /// The constant path (..., s, s, s, ...), a fixed point of the shift.
  static OmegaPath constant(std::vector<double> distribution, std::size_t symbol = 0);

  std::size_t symbol(std::int64_t i) const noexcept;
  std::size_t alphabet_size() const noexcept { return cumulative_->size(); }
  std::span<const double> distribution() const noexcept { return *probabilities_; }
  std::uint64_t seed() const noexcept { return seed_; }
  std::int64_t cursor() const noexcept { return cursor_; }
  bool is_constant() const noexcept { return constant_.has_value(); }

  /// symbol'(i) = symbol(i + k).
  OmegaPath shifted(std::int64_t k) const noexcept;

  /// Symbols for times first, first + 1, ..., first + count - 1.
  std::vector<std::uint8_t> symbols(std::int64_t first, std::size_t count) const;

 private:
  std::uint64_t seed_ = 0;
  std::int64_t cursor_ = 0;
  std::optional<std::size_t> constant_;
  std::shared_ptr<const std::vector<double>> probabilities_;
  std::shared_ptr<const std::vector<double>> cumulative_;
};

OmegaPath sigma_shift(const OmegaPath& omega, std::int64_t k);

/// c cos(2 pi m.x) + s sin(2 pi m.x).
struct TrigTerm {
  std::array<int, 2> frequency{0, 0};
  double cos_coeff = 0.0;
  double sin_coeff = 0.0;
};

class TrigPolynomial {
 public:
  TrigPolynomial() = default;
  explicit TrigPolynomial(std::vector<TrigTerm> terms);

  double operator()(TorusPoint x) const noexcept;
  std::span<const TrigTerm> terms() const noexcept { return terms_; }
  bool empty() const noexcept { return terms_.empty(); }
  /// sup|f| + sup|grad f| bound from the coefficients.
  double c1_bound() const noexcept;

 private:
  std::vector<TrigTerm> terms_;
};

/// Per-symbol observable g(omega, x) = g_{omega_0}(x) - offset_{omega_0},
/// optionally plus a transfer-function coboundary r(x) - r(T_{omega_0} x).
class Observable {
 public:
  Observable() = default;
  explicit Observable(std::vector<TrigPolynomial> per_symbol,
                      std::optional<TrigPolynomial> coboundary = std::nullopt);

  static Observable zero(std::size_t alphabet_size);

  std::size_t alphabet_size() const noexcept { return per_symbol_.size(); }
  bool is_zero() const noexcept;
  bool uses_image() const noexcept { return coboundary_.has_value(); }
  const std::optional<TrigPolynomial>& coboundary() const noexcept { return coboundary_; }
  const TrigPolynomial& symbol_part(std::size_t symbol) const { return per_symbol_.at(symbol); }
  std::span<const double> offsets() const noexcept { return offsets_; }

  Observable with_offsets(std::vector<double> offsets) const;

  /// Centered value, given the image T_symbol(x) for the coboundary part.
  double evaluate(std::size_t symbol, TorusPoint x, TorusPoint image) const noexcept;
  /// Uncentered value (offsets not subtracted).
  double raw(std::size_t symbol, TorusPoint x, TorusPoint image) const noexcept;
  /// Centered value, computing the image with `map` when needed.
  double operator()(const HyperbolicMap& map, std::size_t symbol, TorusPoint x) const;

  double c1_bound() const noexcept;

 private:
  std::vector<TrigPolynomial> per_symbol_;
  std::optional<TrigPolynomial> coboundary_;
  std::vector<double> offsets_;
};

/// T^{(n)}_omega x = T_{sigma^{n-1} omega} o ... o T_omega (x).
TorusPoint compose(const MapFamily& maps, const OmegaPath& omega, int n, TorusPoint x);

/// S_n g(omega, x) = sum_{i<n} g(sigma^i omega, T^{(i)}_omega x).
double birkhoff_sum(const MapFamily& maps, const Observable& g, const OmegaPath& omega,
                    TorusPoint x, int n);

struct SkewState {
  OmegaPath omega;
  TorusPoint x;
};

/// tau(omega, x) = (sigma omega, T_omega x).
SkewState skew_step(const MapFamily& maps, const SkewState& state);
/// g read at the current skew-product state.
double observe(const MapFamily& maps, const Observable& g, const SkewState& state);

struct HyperbolicityCertificate {
  double min_expansion = 0.0;   ///< smallest one-step growth of a tracked unstable vector
  double max_cone_angle = 0.0;  ///< radians between tracked vector and base unstable axis
  std::size_t orbits = 0;
  int length = 0;
  bool pass = false;
};

/// Tracks unstable tangent vectors along random orbits and checks that every
/// one-step growth factor is at least `lambda_min` and the vectors stay in
/// the cone of half-angle pi/4 around the base unstable direction.
HyperbolicityCertificate certify_hyperbolicity(const MapFamily& maps, const OmegaPath& omega,
                                               double lambda_min, std::size_t orbits = 1000,
                                               int length = 50, std::uint64_t seed = 1);

}  // namespace qcl
