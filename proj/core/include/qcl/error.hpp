#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace qcl {

/// Raised when a point sits on a discontinuity of a piecewise map.
class BoundaryPointError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// Raised when the twisted pullback normalizer collapses (|mass| < 1e-12).
class DegenerateTwistError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Raised when a requested deviation level lies beyond the slope of the
/// moment function at the largest computed parameter.
class RateWindowError : public std::out_of_range {
 public:
  using std::out_of_range::out_of_range;
};

enum class RefusalReason { degenerate_variance, aperiodicity_failed };

/// A verification gate refused to run. Carries the failing parameters so the
/// caller can still emit a verdict.
class VerificationRefused : public std::runtime_error {
 public:
  VerificationRefused(RefusalReason reason, const std::string& what,
                      std::vector<double> failing_t = {})
      : std::runtime_error(what), reason_(reason), failing_t_(std::move(failing_t)) {}

  RefusalReason reason() const noexcept { return reason_; }
  const std::vector<double>& failing_t() const noexcept { return failing_t_; }

 private:
  RefusalReason reason_;
  std::vector<double> failing_t_;
};

}  // namespace qcl
