#pragma once

#include <cmath>
#include <vector>

#include <Eigen/Dense>

#include "qcl/dynamics.hpp"
#include "qcl/ulam.hpp"

namespace qcl::test {

inline constexpr Matrix2i kCat{2, 1, 1, 1};

inline HyperbolicMap cat_map() { return HyperbolicMap::anosov(kCat); }

/// x1 -> x1 + a sin(2 pi x1): Jacobian 1 + 2 pi a cos(2 pi x1), not area preserving.
inline HyperbolicMap dissipative_map(double amplitude = 0.03) {
  return HyperbolicMap::anosov(kCat, {ShearTerm{{1, 0}, amplitude, {1.0, 0.0}}}, 0.1);
}

/// x2 -> x2 + a sin(2 pi x1): area preserving.
inline HyperbolicMap volume_preserving_map(double amplitude = 0.03) {
  return HyperbolicMap::anosov(kCat, {ShearTerm{{1, 0}, amplitude, {0.0, 1.0}}}, 0.1);
}

inline MapFamily standard_maps() { return {cat_map(), dissipative_map()}; }
inline MapFamily volume_preserving_maps() { return {cat_map(), volume_preserving_map()}; }

inline TrigPolynomial cos_x1(double c = 1.0) { return TrigPolynomial({TrigTerm{{1, 0}, c, 0.0}}); }

/// g_a = cos(2 pi x1) + 0.5 a sin(2 pi x2), uncentered.
inline Observable standard_observable_raw() {
  return Observable({cos_x1(), TrigPolynomial({TrigTerm{{1, 0}, 1.0, 0.0}, TrigTerm{{0, 1}, 0.0, 0.5}})});
}

inline Observable centered(const MapFamily& maps, const Observable& g, const std::vector<double>& p,
                           UlamGrid grid, UlamSampling sampling) {
  return g.with_offsets(equivariant_centering(maps, g, p, grid, sampling));
}

inline std::vector<double> fair_coin() { return {0.5, 0.5}; }

template <class Scalar>
Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic> dense(const UlamMatrix<Scalar>& u) {
  const auto n = u.entries.rows();
  Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic> m =
      Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>::Zero(n, n);
  for (std::size_t i = 0; i < n; ++i) {
    const auto cols = u.entries.row_columns(i);
    const auto vals = u.entries.row_values(i);
    for (std::size_t k = 0; k < cols.size(); ++k) m(i, cols[k]) = vals[k];
  }
  return m;
}

}  // namespace qcl::test
