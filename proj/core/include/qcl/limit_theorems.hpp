#pragma once

// Empirical checks of the quenched CLT, large deviations and local CLT
// against the spectral predictions.

#include <cstddef>
#include <span>
#include <vector>

#include "qcl/montecarlo.hpp"
#include "qcl/spectral.hpp"

namespace qcl {

struct CltReport {
  int n = 0;
  std::size_t samples = 0;
  double sigma2 = 0.0;  ///< spectral variance the law is tested against
  double ks = 0.0;
  std::vector<double> batch_ks;
  double batch_noise = 0.0;  ///< standard deviation of batch_ks
};

/// KS distance of S_n / sqrt(n) against N(0, sigma2). Throws
/// VerificationRefused(degenerate_variance) when sigma2 < threshold.
CltReport verify_clt(const SumEnsemble& ensemble, int n, double sigma2, double threshold = 0.01);

struct LdpCell {
  double eps = 0.0;
  int n = 0;
  std::size_t count = 0;
  double probability = 0.0;
  double empirical_rate = 0.0;  ///< -(1/n) log probability; meaningless when flagged
  double predicted_rate = 0.0;
  double residual = 0.0;  ///< |empirical - predicted|
  bool flagged = false;   ///< fewer than min_count tail samples
};

struct LdpPlanEntry {
  double eps = 0.0;
  int n = 0;
  double predicted_probability = 0.0;
  double required_samples = 0.0;  ///< min_count / predicted_probability
  bool satisfied = false;
};

struct LdpReport {
  std::vector<double> eps;
  std::vector<int> n;
  std::size_t samples = 0;
  std::size_t min_count = 50;
  std::vector<LdpCell> cells;  ///< eps-major
  std::vector<LdpPlanEntry> plan;
  bool plan_satisfied = false;
  bool tail_monotone = true;

  const LdpCell& cell(std::size_t eps_index, std::size_t n_index) const {
    return cells[eps_index * n.size() + n_index];
  }
};

/// Sample size needed for `min_count` expected tail hits at rate c and length n.
double ldp_required_samples(double rate, int n, std::size_t min_count = 50);

/// Empirical -(1/n) log mu(S_n > n eps) on every (eps, n) pair, against c(eps)
/// from `rate` (whose eps grid must contain `eps`). Cells with fewer than
/// min_count hits are flagged.
LdpReport verify_ldp(const SumEnsemble& ensemble, std::span<const double> eps,
                     std::span<const int> ns, const RateFunction& rate, std::size_t min_count = 50);

struct LcltReport {
  int n = 0;
  std::size_t samples = 0;
  double j0 = 0.0;
  double j1 = 0.0;
  double sigma2 = 0.0;
  std::vector<double> s;
  std::vector<double> empirical;  ///< Sigma sqrt(n) mu(s + S_n in J)
  std::vector<double> error_bar;  ///< binomial standard error of `empirical`
  std::vector<double> predicted;  ///< e^{-s^2/(2 n Sigma^2)} |J| / sqrt(2 pi)
  double sup_residual = 0.0;
  /// sup residual divided by the peak prediction |J| / sqrt(2 pi).
  double relative_residual = 0.0;
};

/// Local CLT on J = [j0, j1]. Refuses with aperiodicity_failed when the
/// diagnostic does not pass, and with degenerate_variance when sigma2 is below
/// the threshold.
LcltReport verify_lclt(const SumEnsemble& ensemble, int n, double j0, double j1,
                       std::span<const double> s_grid, double sigma2,
                       const AperiodicityReport& aperiodicity, double threshold = 0.01);

}  // namespace qcl
