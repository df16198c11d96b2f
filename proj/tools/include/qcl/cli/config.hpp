#pragma once

// Experiment configuration: YAML (or JSON, parsed by the same reader),
// validated field by field, with dotted-path overrides and a content hash that
// does not depend on key order.

#include <cstddef>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "qcl/dynamics.hpp"

namespace qcl::cli {

/// Invalid configuration. `field` is a dotted path such as
/// "observable.per_symbol[1].terms[0].frequency"; `line` is 1-based when known.
class ConfigError : public std::runtime_error {
 public:
  ConfigError(std::string field, int line, const std::string& message);
  const std::string& field() const noexcept { return field_; }
  int line() const noexcept { return line_; }

 private:
  std::string field_;
  int line_;
};

struct MapSpec {
  MapKind kind = MapKind::anosov_perturbed_cat;
  Matrix2i base{2, 1, 1, 1};
  std::vector<ShearTerm> shears;
  std::vector<AffinePiece> pieces;
};

enum class Centering { equivariant, none };

struct ExperimentConfig {
  std::uint64_t seed = 1;

  double delta = 0.1;
  std::vector<MapSpec> maps;
  std::vector<double> distribution;

  std::vector<TrigPolynomial> observable;
  std::optional<TrigPolynomial> coboundary;
  Centering centering = Centering::equivariant;

  int k = 64;
  int samples_per_cell = 16;
  int n_pullback = 50;

  int decay_n_max = 60;
  int ly_k_coarse = 16;
  std::vector<int> ly_n_grid{0, 1, 2, 4, 8, 16, 32};

  int lyapunov_steps = 500;
  int lyapunov_r = 2;
  int lyapunov_reorth = 10;

  double theta_max = 1.0;
  int theta_points = 21;
  double fd_step = 0.02;
  int n_fibers = 4000;
  std::size_t fiber_batches = 20;

  std::vector<double> eps_sigma{0.02, 0.05, 0.1, 0.2, 0.3, 0.5};
  double quadratic_regime = 0.1;

  int lambda_mc_n = 200;
  std::size_t lambda_mc_samples = 100000;
  std::vector<double> agreement_thetas{-0.1, -0.05, 0.05, 0.1};

  std::vector<double> t_grid{0.5, 0.75, 1.0, 1.25, 1.5, 1.75, 2.0};
  int aperiodicity_n = 100;
  std::size_t periodic_symbol = 0;

  int series_n_max = 30;
  std::size_t series_samples = 10000;
  int series_steps = 2000;

  int burn_in = 30;
  std::size_t batches = 20;

  std::vector<int> clt_n{200, 2000};
  std::size_t clt_samples = 100000;
  int clt_seeds = 5;

  std::vector<double> ldp_eps_sigma{0.2, 0.5};
  std::vector<int> ldp_n{200, 400, 800};
  std::size_t ldp_samples = 1000000;
  std::size_t ldp_min_count = 50;

  int lclt_n = 2000;
  std::size_t lclt_samples = 1000000;
  double lclt_j_sigma = 0.5;
  std::vector<double> lclt_s_sigma{-3.0, -2.0, -1.5, -1.0, -0.5, 0.0, 0.5, 1.0, 1.5, 2.0, 3.0};

  double degenerate_variance = 0.01;
  double agreement = 0.10;
  double clt_ks = 0.02;
  double ldp_relative = 0.25;
  double lclt_relative = 0.15;
  double equivariance = 5e-3;
  double spectral_gap = -0.05;
  double lyapunov_top = 0.01;

  std::string out_dir = "out";

  /// Effective configuration (after overrides), keys sorted.
  nlohmann::json canonical;
  /// 16 hex digits of FNV-1a over canonical.dump().
  std::string hash;
};

/// Parses and validates configuration text. `overrides` are "dotted.key=value"
/// strings whose value is read as YAML (so lists and numbers work).
ExperimentConfig parse_config(const std::string& text, const std::vector<std::string>& overrides = {});
ExperimentConfig load_config(const std::string& path, const std::vector<std::string>& overrides = {});

/// FNV-1a 64-bit digest as 16 lowercase hex digits.
std::string content_hash(const std::string& bytes);

MapFamily build_maps(const ExperimentConfig& config);
/// Observable with offsets: per-symbol equivariant centering or none.
Observable build_observable(const ExperimentConfig& config, const MapFamily& maps);

}  // namespace qcl::cli
