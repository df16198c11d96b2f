#include "qcl/dynamics.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <stdexcept>
#include <string>

#include "qcl/error.hpp"
#include "qcl/random.hpp"

namespace qcl {
namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;
// Relative tolerance for "on the edge" in polygon membership.
constexpr double kEdgeTolerance = 1e-13;

double cross(const Vec2& a, const Vec2& b) noexcept { return a[0] * b[1] - a[1] * b[0]; }

Mat2 multiply(const Mat2& a, const Mat2& b) noexcept {
  Mat2 c{};
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 2; ++j) c[i][j] = a[i][0] * b[0][j] + a[i][1] * b[1][j];
  return c;
}

Mat2 to_real(const Matrix2i& m) noexcept {
  return {{{static_cast<double>(m.a11), static_cast<double>(m.a12)},
           {static_cast<double>(m.a21), static_cast<double>(m.a22)}}};
}

TorusPoint affine(const Matrix2i& m, TorusPoint x, const Vec2& offset) noexcept {
  const double y1 = static_cast<double>(m.a11) * x.x1 + static_cast<double>(m.a12) * x.x2;
  const double y2 = static_cast<double>(m.a21) * x.x1 + static_cast<double>(m.a22) * x.x2;
  return {wrap_unit(y1 + offset[0]), wrap_unit(y2 + offset[1])};
}

enum class Side { inside, boundary, outside };

Side locate(const AffinePiece& piece, TorusPoint x) noexcept {
  const auto& v = piece.vertices;
  bool on_edge = false;
  for (std::size_t i = 0; i < v.size(); ++i) {
    const Vec2& p = v[i];
    const Vec2& q = v[(i + 1) % v.size()];
    const Vec2 edge{q[0] - p[0], q[1] - p[1]};
    const double c = cross(edge, Vec2{x.x1 - p[0], x.x2 - p[1]});
    const double scale = std::hypot(edge[0], edge[1]);
    if (c < -kEdgeTolerance * scale) return Side::outside;
    if (c <= kEdgeTolerance * scale) on_edge = true;
  }
  return on_edge ? Side::boundary : Side::inside;
}

}  // namespace

bool Matrix2i::is_hyperbolic() const noexcept {
  const auto d = det();
  if (d != 1 && d != -1) return false;
  const double tr = static_cast<double>(trace());
  const double disc = tr * tr - 4.0 * static_cast<double>(d);
  if (disc <= 0.0) return false;
  const double big = (std::abs(tr) + std::sqrt(disc)) / 2.0;
  return big > 1.0 + 1e-12;
}

double Matrix2i::unstable_eigenvalue() const {
  if (!is_hyperbolic()) throw std::invalid_argument("matrix is not hyperbolic");
  const double tr = static_cast<double>(trace());
  const double disc = tr * tr - 4.0 * static_cast<double>(det());
  return (std::abs(tr) + std::sqrt(disc)) / 2.0;
}

Vec2 Matrix2i::unstable_direction() const {
  const double lu = unstable_eigenvalue() * (trace() >= 0 ? 1.0 : -1.0);
  // (A - lu I) v = 0 -> v = (a12, lu - a11), or (lu - a22, a21).
  Vec2 v{static_cast<double>(a12), lu - static_cast<double>(a11)};
  if (std::hypot(v[0], v[1]) < 1e-12) v = {lu - static_cast<double>(a22), static_cast<double>(a21)};
  const double n = std::hypot(v[0], v[1]);
  v[0] /= n;
  v[1] /= n;
  if (v[0] < 0.0) v = {-v[0], -v[1]};
  return v;
}

double AffinePiece::area() const noexcept {
  double twice = 0.0;
  for (std::size_t i = 0; i < vertices.size(); ++i)
    twice += cross(vertices[i], vertices[(i + 1) % vertices.size()]);
  return 0.5 * twice;
}

HyperbolicMap HyperbolicMap::anosov(Matrix2i base, std::vector<ShearTerm> shears, double delta) {
  if (!base.is_hyperbolic())
    throw std::invalid_argument("base_matrix must have det +-1 and an expanding eigenvalue");
  double size = 0.0;
  for (const auto& s : shears) {
    if (s.frequency[0] == 0 && s.frequency[1] == 0)
      throw std::invalid_argument("shear frequency must be nonzero");
    const double dnorm = std::hypot(s.direction[0], s.direction[1]);
    if (dnorm == 0.0) throw std::invalid_argument("shear direction must be nonzero");
    if (kTwoPi * std::abs(s.amplitude * s.divergence_coupling()) >= 1.0)
      throw std::invalid_argument("shear is not invertible: 2 pi |a (m.v)| must be < 1");
    size += std::abs(s.amplitude) * dnorm;
  }
  if (size > delta)
    throw std::invalid_argument("perturbation size " + std::to_string(size) +
                                " exceeds delta " + std::to_string(delta));
  HyperbolicMap map;
  map.kind_ = MapKind::anosov_perturbed_cat;
  map.base_ = base;
  map.shears_ = std::move(shears);
  return map;
}

HyperbolicMap HyperbolicMap::piecewise(std::vector<AffinePiece> pieces) {
  if (pieces.empty()) throw std::invalid_argument("piecewise map needs at least one piece");
  double total = 0.0;
  for (const auto& p : pieces) {
    if (p.vertices.size() < 3) throw std::invalid_argument("piece needs at least 3 vertices");
    if (!p.matrix.is_hyperbolic()) throw std::invalid_argument("piece matrix is not hyperbolic");
    const double a = p.area();
    if (a <= 0.0) throw std::invalid_argument("piece vertices must be counter-clockwise");
    total += a;
  }
  if (std::abs(total - 1.0) > 1e-12)
    throw std::invalid_argument("pieces must cover the torus (total area " +
                                std::to_string(total) + ")");
  // Disjointness: a probe lattice must hit every interior point exactly once.
  constexpr int kProbe = 97;
  for (int i = 0; i < kProbe; ++i) {
    for (int j = 0; j < kProbe; ++j) {
      const TorusPoint x{(i + 0.5) / kProbe, (j + 0.5) / kProbe};
      int inside = 0;
      for (const auto& p : pieces) inside += locate(p, x) == Side::inside ? 1 : 0;
      if (inside > 1) throw std::invalid_argument("pieces overlap");
    }
  }
  HyperbolicMap map;
  map.kind_ = MapKind::piecewise_toral;
  map.base_ = pieces.front().matrix;
  map.pieces_ = std::move(pieces);
  return map;
}

bool HyperbolicMap::preserves_lebesgue() const noexcept {
  if (kind_ == MapKind::piecewise_toral) return false;
  return std::all_of(shears_.begin(), shears_.end(),
                     [](const ShearTerm& s) { return s.area_preserving(); });
}

double HyperbolicMap::perturbation_size() const noexcept {
  double size = 0.0;
  for (const auto& s : shears_)
    size += std::abs(s.amplitude) * std::hypot(s.direction[0], s.direction[1]);
  return size;
}

std::size_t HyperbolicMap::piece_index(TorusPoint x) const {
  for (std::size_t i = 0; i < pieces_.size(); ++i) {
    switch (locate(pieces_[i], x)) {
      case Side::inside: return i;
      case Side::boundary:
        throw BoundaryPointError("point (" + std::to_string(x.x1) + ", " + std::to_string(x.x2) +
                                 ") lies on a partition boundary");
      case Side::outside: break;
    }
  }
  throw BoundaryPointError("point is not interior to any piece");
}

TorusPoint HyperbolicMap::operator()(TorusPoint x) const {
  if (kind_ == MapKind::piecewise_toral) {
    const auto& piece = pieces_[piece_index(x)];
    return affine(piece.matrix, x, piece.offset);
  }
  double y1 = x.x1;
  double y2 = x.x2;
  for (const auto& s : shears_) {
    const double phase = kTwoPi * (s.frequency[0] * y1 + s.frequency[1] * y2);
    const double amp = s.amplitude * std::sin(phase);
    y1 += amp * s.direction[0];
    y2 += amp * s.direction[1];
  }
  const double z1 = static_cast<double>(base_.a11) * y1 + static_cast<double>(base_.a12) * y2;
  const double z2 = static_cast<double>(base_.a21) * y1 + static_cast<double>(base_.a22) * y2;
  return {wrap_unit(z1), wrap_unit(z2)};
}

Mat2 HyperbolicMap::jacobian(TorusPoint x) const {
  if (kind_ == MapKind::piecewise_toral) return to_real(pieces_[piece_index(x)].matrix);
  Mat2 d{{{1.0, 0.0}, {0.0, 1.0}}};
  double y1 = x.x1;
  double y2 = x.x2;
  for (const auto& s : shears_) {
    const double phase = kTwoPi * (s.frequency[0] * y1 + s.frequency[1] * y2);
    const double slope = kTwoPi * s.amplitude * std::cos(phase);
    // I + slope * v m^T
    const Mat2 step{{{1.0 + slope * s.direction[0] * s.frequency[0], slope * s.direction[0] * s.frequency[1]},
                     {slope * s.direction[1] * s.frequency[0], 1.0 + slope * s.direction[1] * s.frequency[1]}}};
    d = multiply(step, d);
    const double amp = s.amplitude * std::sin(phase);
    y1 += amp * s.direction[0];
    y2 += amp * s.direction[1];
  }
  return multiply(to_real(base_), d);
}

TorusPoint apply_map(const HyperbolicMap& map, TorusPoint x) { return map(x); }

double map_jacobian_det(const HyperbolicMap& map, TorusPoint x) {
  const Mat2 j = map.jacobian(x);
  return std::abs(j[0][0] * j[1][1] - j[0][1] * j[1][0]);
}

// ---------------------------------------------------------------------------

OmegaPath::OmegaPath(std::uint64_t seed, std::vector<double> distribution) : seed_(seed) {
  if (distribution.empty()) throw std::invalid_argument("distribution must be non-empty");
  if (distribution.size() > 255) throw std::invalid_argument("alphabet larger than 255 symbols");
  double total = 0.0;
  for (double p : distribution) {
    if (!(p > 0.0)) throw std::invalid_argument("every symbol needs positive probability");
    total += p;
  }
  if (std::abs(total - 1.0) > 1e-9) throw std::invalid_argument("distribution must sum to 1");
  std::vector<double> cumulative(distribution.size());
  std::partial_sum(distribution.begin(), distribution.end(), cumulative.begin());
  cumulative.back() = 1.0;
  probabilities_ = std::make_shared<const std::vector<double>>(std::move(distribution));
  cumulative_ = std::make_shared<const std::vector<double>>(std::move(cumulative));
}

OmegaPath OmegaPath::constant(std::vector<double> distribution, std::size_t symbol) {
  OmegaPath path(0, std::move(distribution));
  if (symbol >= path.alphabet_size()) throw std::invalid_argument("constant symbol out of range");
  path.constant_ = symbol;
  return path;
}

std::size_t OmegaPath::symbol(std::int64_t i) const noexcept {
  if (constant_) return *constant_;
  const double u = unit_interval(stream_key(seed_, static_cast<std::uint64_t>(cursor_ + i)));
  const auto& c = *cumulative_;
  const auto it = std::upper_bound(c.begin(), c.end() - 1, u);
  return static_cast<std::size_t>(it - c.begin());
}

OmegaPath OmegaPath::shifted(std::int64_t k) const noexcept {
  OmegaPath copy = *this;
  copy.cursor_ += k;
  return copy;
}

std::vector<std::uint8_t> OmegaPath::symbols(std::int64_t first, std::size_t count) const {
  std::vector<std::uint8_t> out(count);
  for (std::size_t i = 0; i < count; ++i)
    out[i] = static_cast<std::uint8_t>(symbol(first + static_cast<std::int64_t>(i)));
  return out;
}

OmegaPath sigma_shift(const OmegaPath& omega, std::int64_t k) { return omega.shifted(k); }

// ---------------------------------------------------------------------------

TrigPolynomial::TrigPolynomial(std::vector<TrigTerm> terms) : terms_(std::move(terms)) {}

double TrigPolynomial::operator()(TorusPoint x) const noexcept {
  double value = 0.0;
  for (const auto& t : terms_) {
    const double phase = kTwoPi * (t.frequency[0] * x.x1 + t.frequency[1] * x.x2);
    if (t.cos_coeff != 0.0) value += t.cos_coeff * std::cos(phase);
    if (t.sin_coeff != 0.0) value += t.sin_coeff * std::sin(phase);
  }
  return value;
}

double TrigPolynomial::c1_bound() const noexcept {
  double bound = 0.0;
  for (const auto& t : terms_) {
    const double coeff = std::abs(t.cos_coeff) + std::abs(t.sin_coeff);
    bound += coeff * (1.0 + kTwoPi * std::hypot(t.frequency[0], t.frequency[1]));
  }
  return bound;
}

Observable::Observable(std::vector<TrigPolynomial> per_symbol, std::optional<TrigPolynomial> coboundary)
    : per_symbol_(std::move(per_symbol)),
      coboundary_(std::move(coboundary)),
      offsets_(per_symbol_.size(), 0.0) {
  if (per_symbol_.empty()) throw std::invalid_argument("observable needs at least one symbol");
}

Observable Observable::zero(std::size_t alphabet_size) {
  return Observable(std::vector<TrigPolynomial>(alphabet_size));
}

bool Observable::is_zero() const noexcept {
  const bool parts_empty = std::all_of(per_symbol_.begin(), per_symbol_.end(),
                                       [](const TrigPolynomial& p) { return p.empty(); });
  const bool offsets_zero =
      std::all_of(offsets_.begin(), offsets_.end(), [](double o) { return o == 0.0; });
  return parts_empty && offsets_zero && (!coboundary_ || coboundary_->empty());
}

Observable Observable::with_offsets(std::vector<double> offsets) const {
  if (offsets.size() != per_symbol_.size())
    throw std::invalid_argument("one offset per symbol required");
  Observable copy = *this;
  copy.offsets_ = std::move(offsets);
  return copy;
}

double Observable::raw(std::size_t symbol, TorusPoint x, TorusPoint image) const noexcept {
  double value = per_symbol_[symbol](x);
  if (coboundary_) value += (*coboundary_)(x) - (*coboundary_)(image);
  return value;
}

double Observable::evaluate(std::size_t symbol, TorusPoint x, TorusPoint image) const noexcept {
  return raw(symbol, x, image) - offsets_[symbol];
}

double Observable::operator()(const HyperbolicMap& map, std::size_t symbol, TorusPoint x) const {
  const TorusPoint image = coboundary_ ? map(x) : x;
  return evaluate(symbol, x, image);
}

double Observable::c1_bound() const noexcept {
  double bound = 0.0;
  const double extra = coboundary_ ? 2.0 * coboundary_->c1_bound() : 0.0;
  for (std::size_t a = 0; a < per_symbol_.size(); ++a)
    bound = std::max(bound, per_symbol_[a].c1_bound() + std::abs(offsets_[a]) + extra);
  return bound;
}

// ---------------------------------------------------------------------------

TorusPoint compose(const MapFamily& maps, const OmegaPath& omega, int n, TorusPoint x) {
  if (n < 0) throw std::invalid_argument("compose: n must be >= 0");
  for (int i = 0; i < n; ++i) x = maps[omega.symbol(i)](x);
  return x;
}

double birkhoff_sum(const MapFamily& maps, const Observable& g, const OmegaPath& omega,
                    TorusPoint x, int n) {
  if (n < 0) throw std::invalid_argument("birkhoff_sum: n must be >= 0");
  double sum = 0.0;
  for (int i = 0; i < n; ++i) {
    const std::size_t a = omega.symbol(i);
    const TorusPoint next = maps[a](x);
    sum += g.evaluate(a, x, next);
    x = next;
  }
  return sum;
}

SkewState skew_step(const MapFamily& maps, const SkewState& state) {
  return {state.omega.shifted(1), maps[state.omega.symbol(0)](state.x)};
}

double observe(const MapFamily& maps, const Observable& g, const SkewState& state) {
  const std::size_t a = state.omega.symbol(0);
  return g(maps[a], a, state.x);
}

HyperbolicityCertificate certify_hyperbolicity(const MapFamily& maps, const OmegaPath& omega,
                                               double lambda_min, std::size_t orbits, int length,
                                               std::uint64_t seed) {
  if (maps.empty()) throw std::invalid_argument("empty map family");
  const Vec2 axis = maps.front().base_matrix().unstable_direction();
  HyperbolicityCertificate cert;
  cert.orbits = orbits;
  cert.length = length;
  cert.min_expansion = std::numeric_limits<double>::infinity();
  for (std::size_t o = 0; o < orbits; ++o) {
    CounterRng rng(stream_key(seed, o));
    TorusPoint x{rng.uniform(), rng.uniform()};
    Vec2 v = axis;
    const OmegaPath path = omega.shifted(static_cast<std::int64_t>(o) * length);
    for (int i = 0; i < length; ++i) {
      const auto& map = maps[path.symbol(i)];
      Mat2 d;
      try {
        d = map.jacobian(x);
        x = map(x);
      } catch (const BoundaryPointError&) {
        x = {rng.uniform(), rng.uniform()};
        continue;
      }
      const Vec2 w{d[0][0] * v[0] + d[0][1] * v[1], d[1][0] * v[0] + d[1][1] * v[1]};
      const double growth = std::hypot(w[0], w[1]);
      cert.min_expansion = std::min(cert.min_expansion, growth);
      v = {w[0] / growth, w[1] / growth};
      const double cosang = std::abs(v[0] * axis[0] + v[1] * axis[1]);
      cert.max_cone_angle = std::max(cert.max_cone_angle, std::acos(std::min(1.0, cosang)));
    }
  }
  cert.pass = cert.min_expansion >= lambda_min && cert.max_cone_angle <= std::numbers::pi / 4;
  return cert;
}

}  // namespace qcl
