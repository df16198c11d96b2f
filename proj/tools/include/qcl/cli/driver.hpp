#pragma once

// Subcommand driver: runs pipeline stages for one configuration, writes CSV
// and JSON reports plus a verdict, and writes the manifest last.

#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "qcl/cli/config.hpp"

namespace qcl::cli {

enum class Subcommand {
  density,
  spectrum,
  lambda,
  rate,
  variance,
  aperiodicity,
  verify_clt,
  verify_ldp,
  verify_lclt,
  all,
};

std::optional<Subcommand> parse_subcommand(std::string_view name);
std::string_view subcommand_name(Subcommand s);
std::vector<std::string> subcommand_names();

inline constexpr int kExitOk = 0;
inline constexpr int kExitCheckFailed = 1;
inline constexpr int kExitInvalidConfig = 2;
inline constexpr int kExitRefused = 3;

struct Check {
  std::string stage;
  std::string name;
  bool pass = false;
  double value = 0.0;
  double threshold = 0.0;
  std::string detail;
};

struct Refusal {
  std::string stage;
  std::string reason;  ///< "degenerate_variance" or "aperiodicity_failed"
  std::string message;
  std::vector<double> failing_t;
};

struct RunResult {
  int exit_code = kExitOk;
  std::vector<Check> checks;
  std::vector<Refusal> refusals;
  std::vector<std::string> files;  ///< relative to the output directory, manifest last
};

/// Runs `subcommand` and writes everything under `out_dir` (created if
/// needed). Progress goes to `log`.
RunResult run(Subcommand subcommand, const ExperimentConfig& config, const std::string& out_dir,
              std::ostream& log);

/// Full command-line entry point; returns the process exit code.
int main_entry(int argc, char** argv);

}  // namespace qcl::cli
