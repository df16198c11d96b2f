#pragma once

// LAPACK eigenvalues of dense matrices, used as the oracle for the cocycle
// eigenvalue pipeline. Real input goes through dgeev, complex through zgeev.

#include <complex>
#include <stdexcept>
#include <vector>

#include <Eigen/Dense>
#include <lapacke.h>

namespace qcl::test {

inline std::vector<std::complex<double>> dense_eigenvalues(const Eigen::MatrixXcd& m) {
  const lapack_int n = static_cast<lapack_int>(m.rows());
  std::vector<std::complex<double>> values(static_cast<std::size_t>(n));
  lapack_int info = 0;
  if (m.imag().isZero(0.0)) {
    Eigen::MatrixXd a = m.real();
    std::vector<double> wr(values.size()), wi(values.size());
    info = LAPACKE_dgeev(LAPACK_COL_MAJOR, 'N', 'N', n, a.data(), n, wr.data(), wi.data(), nullptr, 1, nullptr, 1);
    for (std::size_t i = 0; i < values.size(); ++i) values[i] = {wr[i], wi[i]};
  } else {
    Eigen::MatrixXcd a = m;
    info = LAPACKE_zgeev(LAPACK_COL_MAJOR, 'N', 'N', n, reinterpret_cast<lapack_complex_double*>(a.data()), n,
                         reinterpret_cast<lapack_complex_double*>(values.data()), nullptr, 1, nullptr, 1);
  }
  if (info != 0) throw std::runtime_error("LAPACK eigenvalue solver did not converge");
  return values;
}

/// Eigenvalue of largest modulus.
inline std::complex<double> dense_leading_eigenvalue(const Eigen::MatrixXcd& m) {
  std::complex<double> best{};
  for (const auto& v : dense_eigenvalues(m))
    if (std::abs(v) > std::abs(best)) best = v;
  return best;
}

}  // namespace qcl::test
