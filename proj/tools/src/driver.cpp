#include "qcl/cli/driver.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

#include "qcl/error.hpp"
#include "qcl/format.hpp"
#include "qcl/limit_theorems.hpp"
#include "qcl/montecarlo.hpp"
#include "qcl/parallel.hpp"
#include "qcl/random.hpp"
#include "qcl/spectral.hpp"
#include "qcl/ulam.hpp"

#ifndef QCL_VERSION
#define QCL_VERSION "0.0.0"
#endif

namespace qcl::cli {
namespace {

namespace fs = std::filesystem;
using nlohmann::json;

constexpr std::string_view kNames[] = {"density",      "spectrum",   "lambda",     "rate",        "variance",
                                       "aperiodicity", "verify-clt", "verify-ldp", "verify-lclt", "all"};

std::string tool_version() { return std::string("qcl ") + QCL_VERSION; }

class CsvTable {
 public:
  explicit CsvTable(std::initializer_list<std::string_view> header) {
    bool first = true;
    for (auto h : header) {
      if (!first) out_ << ',';
      out_ << h;
      first = false;
    }
    out_ << '\n';
  }
  template <class... Cells>
  void row(const Cells&... cells) {
    bool first = true;
    ((out_ << (first ? "" : ","), put(cells), first = false), ...);
    out_ << '\n';
  }
  std::string str() const { return out_.str(); }

 private:
  void put(double v) { out_ << format_double(v); }
  void put(int v) { out_ << v; }
  void put(std::size_t v) { out_ << v; }
  void put(bool v) { out_ << (v ? "true" : "false"); }
  void put(const std::string& v) { out_ << v; }
  void put(const char* v) { out_ << v; }
  std::ostringstream out_;
};

class Output {
 public:
  explicit Output(fs::path dir) : dir_(std::move(dir)) { fs::create_directories(dir_); }

  void write(const std::string& name, const std::string& body) {
    std::ofstream f(dir_ / name, std::ios::binary | std::ios::trunc);
    if (!f) throw std::runtime_error("cannot write " + (dir_ / name).string());
    f << body;
    if (std::find(files_.begin(), files_.end(), name) == files_.end()) files_.push_back(name);
  }
  void write_json(const std::string& name, const json& j) { write(name, j.dump(2) + "\n"); }

  const fs::path& dir() const { return dir_; }
  const std::vector<std::string>& files() const { return files_; }

 private:
  fs::path dir_;
  std::vector<std::string> files_;
};

std::string read_file(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  std::stringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

json finite_or_null(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

class Pipeline {
 public:
  Pipeline(const ExperimentConfig& config, Output& out, std::ostream& log)
      : c_(config),
        out_(out),
        log_(log),
        maps_(build_maps(config)),
        g_(build_observable(config, maps_)),
        omega_(derive_seed(config.seed, "driving"), config.distribution),
        sampling_{derive_seed(config.seed, "ulam"), config.samples_per_cell},
        model_{maps_, g_, UlamGrid(config.k), sampling_, config.n_pullback} {}

  RunResult result;
  std::map<std::string, double> timings;
  std::set<int> tail_checkpoints;

  template <class Fn>
  void stage(const std::string& name, Fn&& fn) {
    log_ << "[qcl] " << name << " ..." << std::endl;
    const auto start = std::chrono::steady_clock::now();
    try {
      fn();
    } catch (const VerificationRefused& e) {
      Refusal r;
      r.stage = name;
      r.reason = e.reason() == RefusalReason::degenerate_variance ? "degenerate_variance" : "aperiodicity_failed";
      r.message = e.what();
      r.failing_t = e.failing_t();
      result.refusals.push_back(r);
      log_ << "[qcl] " << name << " refused: " << e.what() << std::endl;
    }
    timings[name] = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  }

  void density() {
    const auto& coc = cocycle();
    const DensityVector h = equivariant_density(coc, omega_, c_.n_pullback);
    const DecayProfile decay = pullback_decay_profile(coc, omega_, c_.decay_n_max);
    const double defect = equivariance_defect(coc, omega_, c_.n_pullback);
    const auto residual = centering_residual(coc, maps_, g_, sampling_, omega_, c_.n_pullback, 50);
    const auto ly = lasota_yorke_probe(coc, omega_, c_.ly_n_grid, c_.ly_k_coarse);

    std::ostringstream dens;
    write_density_csv(dens, h);
    out_.write("density.csv", dens.str());
    CsvTable gaps({"n", "gap"});
    for (std::size_t i = 0; i < decay.n.size(); ++i) gaps.row(decay.n[i], decay.gap[i]);
    out_.write("decay.csv", gaps.str());

    const double mass = h.mass();
    const double min_weight = *std::min_element(h.weights.begin(), h.weights.end());
    bool converged = false;
    double max_gap = 0.0;
    for (double gp : decay.gap) max_gap = std::max(max_gap, gp);
    if (max_gap < 1e-10) converged = true;  // fixed point reached at n = 0
    else converged = decay.fit.points >= 3 && decay.fit.slope < 0.0;

    check("density", "density_mass", std::abs(mass - 1.0) <= 1e-12, mass, 1.0);
    check("density", "density_nonnegative", min_weight >= 0.0, min_weight, 0.0);
    check("density", "equivariance_defect", defect < c_.equivariance, defect, c_.equivariance);
    check("density", "pullback_decay", converged, decay.fit.slope, 0.0,
          "R^2 = " + format_double(decay.fit.r_squared));

    out_.write_json("density.json",
                    header("density", {{"mass", mass},
                                       {"min_weight", min_weight},
                                       {"equivariance_defect", defect},
                                       {"decay_fit",
                                        {{"slope", decay.fit.slope},
                                         {"intercept", decay.fit.intercept},
                                         {"r_squared", decay.fit.r_squared},
                                         {"points", decay.fit.points},
                                         {"floor", decay.floor},
                                         {"max_gap", max_gap}}},
                                       {"centering_offsets", std::vector<double>(g_.offsets().begin(), g_.offsets().end())},
                                       {"centering_residual",
                                        {{"max_abs", residual.max_abs}, {"mean_abs", residual.mean_abs}, {"fibers", residual.fibers}}},
                                       {"lasota_yorke", ly_json(ly)}}));
  }

  void spectrum() {
    const auto report = lyapunov_spectrum(cocycle(), omega_, c_.lyapunov_steps, c_.lyapunov_r, c_.lyapunov_reorth,
                                          derive_seed(c_.seed, "lyapunov"));
    CsvTable t({"index", "exponent"});
    for (std::size_t i = 0; i < report.exponents.size(); ++i) t.row(i + 1, report.exponents[i]);
    out_.write("lyapunov.csv", t.str());
    double max_defect = 0.0;
    for (double d : report.orthogonality_defects) max_defect = std::max(max_defect, d);
    check("spectrum", "frame_rank", report.ok, report.failure_step.value_or(-1), 0.0);
    check("spectrum", "top_exponent_zero", std::abs(report.exponents[0]) <= c_.lyapunov_top, report.exponents[0],
          c_.lyapunov_top);
    if (report.exponents.size() >= 2)
      check("spectrum", "spectral_gap", report.exponents[1] < c_.spectral_gap, report.exponents[1], c_.spectral_gap);
    out_.write_json("spectrum.json",
                    header("spectrum", {{"exponents", report.exponents},
                                        {"n_steps", report.n_steps},
                                        {"reorth_period", report.reorth_period},
                                        {"max_orthogonality_defect", max_defect},
                                        {"ok", report.ok},
                                        {"failure_step", report.failure_step ? json(*report.failure_step) : json(nullptr)}}));
  }

  void lambda() {
    const MomentFunction& op = moment();
    std::vector<double> mc_thetas = c_.agreement_thetas;
    mc_thetas.push_back(0.0);
    std::sort(mc_thetas.begin(), mc_thetas.end());
    mc_thetas.erase(std::unique(mc_thetas.begin(), mc_thetas.end()), mc_thetas.end());
    const SumEnsemble& ens = ensemble("montecarlo/lambda", c_.lambda_mc_samples, {c_.lambda_mc_n});
    const MomentFunction mc = moment_function_montecarlo(ens, c_.lambda_mc_n, mc_thetas);

    CsvTable t({"theta", "lambda", "std_err", "method"});
    for (std::size_t i = 0; i < op.theta.size(); ++i) t.row(op.theta[i], op.lambda_hat[i], op.std_err[i], "operator");
    for (std::size_t i = 0; i < mc.theta.size(); ++i) t.row(mc.theta[i], mc.lambda_hat[i], mc.std_err[i], "montecarlo");
    out_.write("lambda.csv", t.str());

    const auto cert = convexity_certificate(op, c_.fd_step);
    const auto zero = op.index_of(0.0);
    check("lambda", "lambda_zero_exact", cert.lambda0_exact, zero ? op.lambda_hat[*zero] : NAN, 0.0);
    check("lambda", "derivative_at_zero", cert.derivative_ok, cert.derivative_at_0, 3.0 * cert.derivative_std_err);
    double worst_slack = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < cert.second_differences.size(); ++i)
      worst_slack = std::min(worst_slack, cert.second_differences[i] + cert.tolerances[i]);
    check("lambda", "convexity", cert.convex, worst_slack, 0.0);

    json agreement = json::array();
    for (double theta : c_.agreement_thetas) {
      const auto i = op.index_of(theta, 1e-9);
      const auto j = mc.index_of(theta, 1e-9);
      if (!i || !j) {
        check("lambda", "estimator_agreement", false, theta, 0.0, "theta missing from the operator grid");
        continue;
      }
      const double diff = std::abs(op.lambda_hat[*i] - mc.lambda_hat[*j]);
      const double tol = std::max(3.0 * std::hypot(op.std_err[*i], mc.std_err[*j]), 0.01);
      check("lambda", "estimator_agreement", diff <= tol, diff, tol, "theta = " + format_double(theta));
      agreement.push_back({{"theta", theta},
                           {"operator", op.lambda_hat[*i]},
                           {"montecarlo", mc.lambda_hat[*j]},
                           {"difference", diff},
                           {"tolerance", tol}});
    }
    out_.write_json("lambda.json",
                    header("lambda", {{"theta_max", op.theta_max},
                                      {"theta_shrunk", op.shrunk},
                                      {"n_fibers", c_.n_fibers},
                                      {"montecarlo_n", c_.lambda_mc_n},
                                      {"montecarlo_samples", c_.lambda_mc_samples},
                                      {"convexity",
                                       {{"lambda0_exact", cert.lambda0_exact},
                                        {"derivative_at_0", cert.derivative_at_0},
                                        {"derivative_std_err", cert.derivative_std_err},
                                        {"theta", cert.theta},
                                        {"second_differences", cert.second_differences},
                                        {"tolerances", cert.tolerances},
                                        {"convex", cert.convex}}},
                                      {"agreement", agreement}}));
  }

  void variance() {
    const VarianceFromLambda& vfl = lambda_variance();
    SamplePlan plan = base_plan(derive_seed(c_.seed, "montecarlo/series"), c_.series_samples);
    plan.n = c_.series_steps;
    const VarianceSeries series = variance_series(maps_, g_, omega_, c_.series_n_max, plan);
    const int n = *std::max_element(c_.clt_n.begin(), c_.clt_n.end());
    const EmpiricalVariance emp = empirical_variance(clt_ensemble(0), n);

    CsvTable t({"lag", "autocovariance", "cumulative"});
    for (std::size_t i = 0; i < series.autocovariance.size(); ++i)
      t.row(i, series.autocovariance[i], series.cumulative[i]);
    out_.write("variance_series.csv", t.str());

    const std::array<std::pair<const char*, double>, 3> est{
        {{"series", series.sigma2}, {"lambda", vfl.sigma2}, {"empirical", emp.value}}};
    bool degenerate = true;
    for (const auto& e : est) degenerate = degenerate && std::abs(e.second) < c_.degenerate_variance;
    json pairs = json::array();
    for (std::size_t a = 0; a < est.size(); ++a) {
      for (std::size_t b = a + 1; b < est.size(); ++b) {
        const double scale = std::max(std::abs(est[a].second), std::abs(est[b].second));
        const double rel = scale > 0.0 ? std::abs(est[a].second - est[b].second) / scale : 0.0;
        const std::string name = std::string(est[a].first) + "_vs_" + est[b].first;
        check("variance", "agreement_" + name, rel <= c_.agreement || degenerate, rel, c_.agreement,
              degenerate ? "all estimators below the degeneracy threshold" : "");
        pairs.push_back({{"pair", name}, {"relative_difference", rel}});
      }
    }
    out_.write_json("variance.json",
                    header("variance", {{"series", {{"sigma2", series.sigma2},
                                                    {"n_max", series.n_max},
                                                    {"samples", series.samples},
                                                    {"steps", series.steps}}},
                                        {"lambda", {{"sigma2", vfl.sigma2},
                                                    {"std_err", vfl.std_err},
                                                    {"h", vfl.h},
                                                    {"sigma2_half_step", vfl.sigma2_half_step},
                                                    {"richardson", vfl.richardson}}},
                                        {"empirical", {{"sigma2", emp.value}, {"std_err", emp.std_err}, {"n", emp.n}}},
                                        {"degenerate", degenerate},
                                        {"degeneracy_threshold", c_.degenerate_variance},
                                        {"pairs", pairs}}));
  }

  void rate() {
    const double s2 = sigma2_gate();
    const double sigma = std::sqrt(s2);
    std::vector<double> eps;
    for (double m : c_.eps_sigma) eps.push_back(m * sigma);
    std::sort(eps.begin(), eps.end());
    RateFunction rf;
    try {
      rf = rate_function(moment(), eps);
    } catch (const RateWindowError& e) {
      check("rate", "rate_window", false, 0.0, 0.0, e.what());
      out_.write_json("rate.json", header("rate", {{"error", e.what()}}));
      return;
    }
    CsvTable t({"eps", "c", "theta_star"});
    for (std::size_t i = 0; i < rf.eps.size(); ++i) t.row(rf.eps[i], rf.c[i], rf.theta_star[i]);
    out_.write("rate.csv", t.str());

    bool nonneg = true, increasing = true, argmax_monotone = true, convex = true;
    for (std::size_t i = 0; i < rf.c.size(); ++i) {
      nonneg = nonneg && rf.c[i] >= 0.0;
      if (i > 0) {
        increasing = increasing && rf.c[i] > rf.c[i - 1];
        argmax_monotone = argmax_monotone && rf.theta_star[i] >= rf.theta_star[i - 1];
      }
    }
    // Convexity as nondecreasing secant slopes including the origin.
    std::vector<double> xs{0.0}, ys{0.0};
    xs.insert(xs.end(), rf.eps.begin(), rf.eps.end());
    ys.insert(ys.end(), rf.c.begin(), rf.c.end());
    for (std::size_t i = 2; i < xs.size(); ++i) {
      const double s0 = (ys[i - 1] - ys[i - 2]) / (xs[i - 1] - xs[i - 2]);
      const double s1 = (ys[i] - ys[i - 1]) / (xs[i] - xs[i - 1]);
      if (s1 < s0 - 1e-12 * std::max(1.0, std::abs(s0))) convex = false;
    }
    json ratios = json::array();
    bool quadratic = true;
    for (std::size_t i = 0; i < rf.eps.size(); ++i) {
      if (rf.eps[i] > c_.quadratic_regime * sigma * (1.0 + 1e-12)) continue;
      const double ratio = rf.c[i] / (rf.eps[i] * rf.eps[i] / (2.0 * s2));
      quadratic = quadratic && ratio >= 0.8 && ratio <= 1.2;
      ratios.push_back({{"eps", rf.eps[i]}, {"ratio", ratio}});
    }
    // Vanishing at 0: c(eps_min) / eps_min stays below the quadratic slope at eps_min.
    const double vanish = rf.c.front() / rf.eps.front();
    check("rate", "rate_nonnegative", nonneg, rf.c.front(), 0.0);
    check("rate", "rate_increasing", increasing, rf.c.back(), 0.0);
    check("rate", "argmax_nondecreasing", argmax_monotone, rf.theta_star.back(), 0.0);
    check("rate", "rate_convex", convex, 0.0, 0.0);
    check("rate", "rate_vanishes_at_zero", vanish <= rf.eps.front() / s2, vanish, rf.eps.front() / s2);
    check("rate", "quadratic_regime", quadratic && !ratios.empty(), ratios.empty() ? NAN : ratios.back()["ratio"].get<double>(),
          0.2);
    out_.write_json("rate.json", header("rate", {{"sigma2", s2},
                                                 {"eps_sigma", c_.eps_sigma},
                                                 {"theta", rf.theta},
                                                 {"convex_lambda", rf.convex_lambda},
                                                 {"quadratic_ratios", ratios}}));
  }

  void aperiodicity() {
    const AperiodicityReport& report = aperiodicity_report();
    CsvTable t({"t", "slope", "radius", "verdict"});
    for (std::size_t i = 0; i < report.t.size(); ++i)
      t.row(report.t[i], report.slope[i], report.radius[i], report.pass[i] ? "pass" : "fail");
    out_.write("aperiodicity.csv", t.str());
    const auto ly = twisted_lasota_yorke_probe(model_, omega_, c_.t_grid, c_.ly_n_grid, c_.ly_k_coarse);
    CsvTable lyt({"t", "A", "B", "gamma", "ok"});
    for (std::size_t i = 0; i < ly.t.size(); ++i) lyt.row(ly.t[i], ly.A[i], ly.B[i], ly.gamma[i], static_cast<bool>(ly.ok[i]));
    out_.write("twisted_lasota_yorke.csv", lyt.str());
    double worst_slope = -std::numeric_limits<double>::infinity(), worst_radius = 0.0;
    for (std::size_t i = 0; i < report.t.size(); ++i) {
      worst_slope = std::max(worst_slope, report.slope[i]);
      worst_radius = std::max(worst_radius, report.radius[i]);
    }
    check("aperiodicity", "condition_L_slope", worst_slope < -1e-3, worst_slope, -1e-3);
    check("aperiodicity", "periodic_radius", worst_radius < 1.0 - 1e-3, worst_radius, 1.0 - 1e-3);
    check("aperiodicity", "twisted_ly_bounded", ly.bounded, ly.sup_constant, 0.0);
    out_.write_json("aperiodicity.json",
                    header("aperiodicity", {{"t", report.t},
                                            {"slope", report.slope},
                                            {"radius", report.radius},
                                            {"all_pass", report.all_pass},
                                            {"failing_t", report.failing_t()},
                                            {"horizon", c_.aperiodicity_n},
                                            {"periodic_symbol", c_.periodic_symbol},
                                            {"twisted_lasota_yorke",
                                             {{"sup_constant", ly.sup_constant},
                                              {"bounded", ly.bounded},
                                              {"untwisted", ly_json(ly.untwisted)}}}}));
  }

  void clt() {
    const double s2 = sigma2_gate();
    const int n_lo = *std::min_element(c_.clt_n.begin(), c_.clt_n.end());
    const int n_hi = *std::max_element(c_.clt_n.begin(), c_.clt_n.end());
    CsvTable t({"omega_index", "n", "ks", "batch_noise"});
    json seeds = json::array();
    std::vector<double> ks_hi;
    double noise_sum = 0.0;
    for (int k = 0; k < c_.clt_seeds; ++k) {
      const SumEnsemble& ens = clt_ensemble(k);
      json per_n = json::array();
      CltReport lo, hi;
      for (int n : c_.clt_n) {
        const CltReport r = verify_clt(ens, n, s2, c_.degenerate_variance);
        t.row(k, n, r.ks, r.batch_noise);
        per_n.push_back({{"n", n}, {"ks", r.ks}, {"batch_ks", r.batch_ks}, {"batch_noise", r.batch_noise}});
        if (n == n_lo) lo = r;
        if (n == n_hi) hi = r;
      }
      ks_hi.push_back(hi.ks);
      noise_sum += hi.batch_noise;
      check("verify-clt", "ks_at_n_max", hi.ks < c_.clt_ks, hi.ks, c_.clt_ks, "omega " + std::to_string(k));
      check("verify-clt", "ks_nonincreasing", hi.ks <= lo.ks + hi.batch_noise, hi.ks - lo.ks, hi.batch_noise,
            "omega " + std::to_string(k));
      seeds.push_back({{"omega_index", k}, {"omega_seed", clt_omega(k).seed()}, {"reports", per_n},
                       {"raw_mean_at_n_max", ens.raw_means[ens.index_of(n_hi)]}});
    }
    const double spread = *std::max_element(ks_hi.begin(), ks_hi.end()) - *std::min_element(ks_hi.begin(), ks_hi.end());
    const double noise = noise_sum / c_.clt_seeds;
    check("verify-clt", "omega_robustness", spread <= 2.0 * noise, spread, 2.0 * noise);
    out_.write("clt.csv", t.str());
    out_.write_json("clt.json", header("verify-clt", {{"sigma2", s2},
                                                      {"samples", c_.clt_samples},
                                                      {"n", c_.clt_n},
                                                      {"omegas", seeds},
                                                      {"ks_spread", spread},
                                                      {"mean_batch_noise", noise}}));
  }

  void ldp() {
    const double s2 = sigma2_gate();
    const double sigma = std::sqrt(s2);
    std::vector<double> eps;
    for (double m : c_.ldp_eps_sigma) eps.push_back(m * sigma);
    RateFunction rf;
    try {
      rf = rate_function(moment(), eps);
    } catch (const RateWindowError& e) {
      check("verify-ldp", "rate_window", false, 0.0, 0.0, e.what());
      out_.write_json("ldp.json", header("verify-ldp", {{"error", e.what()}}));
      return;
    }
    const SumEnsemble& ens = tail_ensemble(c_.ldp_samples, c_.ldp_n);
    const LdpReport report = verify_ldp(ens, eps, c_.ldp_n, rf, c_.ldp_min_count);

    CsvTable t({"eps", "n", "count", "probability", "empirical_rate", "predicted_rate", "residual", "flagged"});
    for (const auto& cell : report.cells)
      t.row(cell.eps, cell.n, cell.count, cell.probability, cell.empirical_rate, cell.predicted_rate, cell.residual,
            cell.flagged);
    out_.write("ldp.csv", t.str());

    std::vector<std::size_t> order(c_.ldp_n.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::sort(order.begin(), order.end(), [&](auto a, auto b) { return c_.ldp_n[a] < c_.ldp_n[b]; });
    json cells = json::array();
    for (std::size_t a = 0; a < eps.size(); ++a) {
      const std::string tag = "eps = " + format_double(c_.ldp_eps_sigma[a]) + " sigma";
      std::size_t flagged = 0;
      bool decreasing = true;
      for (std::size_t k = 0; k < order.size(); ++k) {
        const auto& cell = report.cell(a, order[k]);
        flagged += cell.flagged;
        if (k > 0) {
          const auto& prev = report.cell(a, order[k - 1]);
          if (cell.flagged || prev.flagged || !(cell.residual < prev.residual)) decreasing = false;
        }
      }
      const auto& last = report.cell(a, order.back());
      const double rel = last.flagged ? NAN : last.residual / last.predicted_rate;
      check("verify-ldp", "tail_counts_sufficient", flagged == 0, static_cast<double>(flagged), 0.0,
            tag + ", cells below " + std::to_string(c_.ldp_min_count) + " hits");
      check("verify-ldp", "residual_decreasing", decreasing, last.residual, 0.0, tag);
      check("verify-ldp", "final_relative_error", std::isfinite(rel) && rel < c_.ldp_relative, rel, c_.ldp_relative,
            tag);
    }
    check("verify-ldp", "tail_monotone", report.tail_monotone, 0.0, 0.0);
    for (const auto& cell : report.cells)
      cells.push_back({{"eps", cell.eps}, {"n", cell.n}, {"count", cell.count}, {"probability", cell.probability},
                       {"empirical_rate", finite_or_null(cell.empirical_rate)}, {"predicted_rate", cell.predicted_rate},
                       {"residual", finite_or_null(cell.residual)}, {"flagged", cell.flagged}});
    json plan = json::array();
    for (const auto& p : report.plan)
      plan.push_back({{"eps", p.eps}, {"n", p.n}, {"predicted_probability", p.predicted_probability},
                      {"required_samples", p.required_samples}, {"satisfied", p.satisfied}});
    out_.write_json("ldp.json", header("verify-ldp", {{"sigma2", s2},
                                                      {"samples", report.samples},
                                                      {"min_count", report.min_count},
                                                      {"cells", cells},
                                                      {"plan", plan},
                                                      {"plan_satisfied", report.plan_satisfied},
                                                      {"tail_monotone", report.tail_monotone}}));
  }

  void lclt() {
    const AperiodicityReport& ap = aperiodicity_report();
    if (!ap.all_pass) {
      out_.write_json("lclt.json", header("verify-lclt", {{"refused", "aperiodicity_failed"},
                                                          {"failing_t", ap.failing_t()}}));
      throw VerificationRefused(RefusalReason::aperiodicity_failed, "aperiodicity diagnostic failed", ap.failing_t());
    }
    const double s2 = sigma2_gate();
    const double sigma = std::sqrt(s2);
    const double half = 0.5 * c_.lclt_j_sigma * sigma;
    std::vector<double> s_grid;
    for (double m : c_.lclt_s_sigma) s_grid.push_back(m * sigma * std::sqrt(static_cast<double>(c_.lclt_n)));
    const SumEnsemble& ens = tail_ensemble(c_.lclt_samples, {c_.lclt_n});
    const LcltReport report = verify_lclt(ens, c_.lclt_n, -half, half, s_grid, s2, ap, c_.degenerate_variance);
    CsvTable t({"s", "empirical", "error_bar", "predicted"});
    for (std::size_t i = 0; i < report.s.size(); ++i)
      t.row(report.s[i], report.empirical[i], report.error_bar[i], report.predicted[i]);
    out_.write("lclt.csv", t.str());
    check("verify-lclt", "lclt_relative_residual", report.relative_residual < c_.lclt_relative,
          report.relative_residual, c_.lclt_relative);
    out_.write_json("lclt.json", header("verify-lclt", {{"sigma2", s2},
                                                        {"n", report.n},
                                                        {"samples", report.samples},
                                                        {"J", {report.j0, report.j1}},
                                                        {"sup_residual", report.sup_residual},
                                                        {"relative_residual", report.relative_residual}}));
  }

  void write_gate_verdict(const std::string& stage, const std::string& file) {
    for (const auto& r : result.refusals) {
      if (r.stage != stage) continue;
      out_.write_json(file, header(stage, {{"refused", r.reason}, {"message", r.message}, {"failing_t", r.failing_t}}));
    }
  }

 private:
  json header(const std::string& stage, json body) const {
    body["stage"] = stage;
    body["config_hash"] = c_.hash;
    body["tool_version"] = tool_version();
    body["seeds"] = {{"root", c_.seed},
                     {"driving", omega_.seed()},
                     {"ulam", sampling_.seed}};
    return body;
  }

  static json ly_json(const LasotaYorkeFit& ly) {
    return {{"B", ly.B},
            {"a", ly.a},
            {"effective_rate", ly.effective_rate},
            {"min_relative_slack", ly.min_relative_slack},
            {"ok", ly.ok},
            {"n_grid", ly.n_grid}};
  }

  void check(const std::string& stage, const std::string& name, bool pass, double value, double threshold,
             const std::string& detail = "") {
    result.checks.push_back({stage, name, pass, value, threshold, detail});
    log_ << "[qcl]   " << (pass ? "PASS " : "FAIL ") << stage << '/' << name << " value=" << format_double(value)
         << (detail.empty() ? "" : " (" + detail + ")") << std::endl;
  }

  const TransferCocycle& cocycle() {
    if (!cocycle_) cocycle_ = make_transfer_cocycle(maps_, model_.grid, sampling_);
    return *cocycle_;
  }

  const MomentFunction& moment() {
    if (!moment_) {
      const auto grid = ThetaGrid::symmetric(c_.theta_max, c_.theta_points, c_.fd_step);
      std::vector<double> thetas = grid.real;
      for (double t : c_.agreement_thetas)
        if (std::abs(t) <= c_.theta_max) thetas.push_back(t);
      std::sort(thetas.begin(), thetas.end());
      thetas.erase(std::unique(thetas.begin(), thetas.end(), [](double a, double b) { return std::abs(a - b) < 1e-12; }),
                   thetas.end());
      moment_ = moment_function_operator(model_, omega_, thetas, c_.n_fibers, c_.fiber_batches);
    }
    return *moment_;
  }

  const VarianceFromLambda& lambda_variance() {
    if (!vfl_) vfl_ = variance_from_lambda(moment(), c_.fd_step);
    return *vfl_;
  }

  double sigma2_gate() {
    const double s2 = lambda_variance().sigma2;
    if (!(s2 >= c_.degenerate_variance))
      throw VerificationRefused(RefusalReason::degenerate_variance,
                                "degenerate variance: Sigma^2 = " + format_double(s2) + " below threshold " +
                                    format_double(c_.degenerate_variance));
    return s2;
  }

  const AperiodicityReport& aperiodicity_report() {
    if (!aperiodicity_)
      aperiodicity_ = aperiodicity_diagnostic(model_, omega_, c_.t_grid, c_.aperiodicity_n, c_.periodic_symbol);
    return *aperiodicity_;
  }

  SamplePlan base_plan(std::uint64_t seed, std::size_t samples) const {
    SamplePlan plan;
    plan.seed = seed;
    plan.samples = samples;
    plan.burn_in = c_.burn_in;
    plan.batches = c_.batches;
    plan.recenter = true;
    return plan;
  }

  OmegaPath clt_omega(int k) const {
    if (k == 0) return omega_;
    return OmegaPath(derive_seed(c_.seed, "driving/" + std::to_string(k)), c_.distribution);
  }

  const SumEnsemble& ensemble(const std::string& label, std::size_t samples, std::vector<int> checkpoints,
                              std::optional<OmegaPath> omega = std::nullopt) {
    auto it = ensembles_.find(label);
    if (it != ensembles_.end()) {
      bool covers = it->second.samples == samples;
      for (int n : checkpoints)
        covers = covers && std::find(it->second.checkpoints.begin(), it->second.checkpoints.end(), n) !=
                               it->second.checkpoints.end();
      if (covers) return it->second;
    }
    SamplePlan plan = base_plan(derive_seed(c_.seed, label), samples);
    plan.n = *std::max_element(checkpoints.begin(), checkpoints.end());
    log_ << "[qcl]   simulating " << samples << " orbits to n = " << plan.n << " (" << label << ")" << std::endl;
    auto result_it = ensembles_.insert_or_assign(
        label, simulate_sums(maps_, g_, omega.value_or(omega_), plan, std::move(checkpoints)));
    return result_it.first->second;
  }

  const SumEnsemble& clt_ensemble(int k) {
    return ensemble("montecarlo/clt/" + std::to_string(k), c_.clt_samples, c_.clt_n, clt_omega(k));
  }

  const SumEnsemble& tail_ensemble(std::size_t samples, const std::vector<int>& needed) {
    std::vector<int> cps(needed.begin(), needed.end());
    for (int n : tail_checkpoints) cps.push_back(n);
    return ensemble("montecarlo/tail/" + std::to_string(samples), samples, cps);
  }

  const ExperimentConfig& c_;
  Output& out_;
  std::ostream& log_;
  MapFamily maps_;
  Observable g_;
  OmegaPath omega_;
  UlamSampling sampling_;
  OperatorModel model_;
  std::optional<TransferCocycle> cocycle_;
  std::optional<MomentFunction> moment_;
  std::optional<VarianceFromLambda> vfl_;
  std::optional<AperiodicityReport> aperiodicity_;
  std::map<std::string, SumEnsemble> ensembles_;
};

json checks_json(const RunResult& r) {
  json checks = json::array();
  for (const auto& c : r.checks)
    checks.push_back({{"stage", c.stage},
                      {"name", c.name},
                      {"pass", c.pass},
                      {"value", finite_or_null(c.value)},
                      {"threshold", finite_or_null(c.threshold)},
                      {"detail", c.detail}});
  return checks;
}

json refusals_json(const RunResult& r) {
  json out = json::array();
  for (const auto& x : r.refusals)
    out.push_back({{"stage", x.stage}, {"reason", x.reason}, {"message", x.message}, {"failing_t", x.failing_t}});
  return out;
}

}  // namespace

std::optional<Subcommand> parse_subcommand(std::string_view name) {
  for (std::size_t i = 0; i < std::size(kNames); ++i)
    if (kNames[i] == name) return static_cast<Subcommand>(i);
  return std::nullopt;
}

std::string_view subcommand_name(Subcommand s) { return kNames[static_cast<std::size_t>(s)]; }

std::vector<std::string> subcommand_names() { return {std::begin(kNames), std::end(kNames)}; }

RunResult run(Subcommand subcommand, const ExperimentConfig& config, const std::string& out_dir, std::ostream& log) {
  Output out{fs::path(out_dir)};
  out.write_json("config.resolved.json", config.canonical);
  Pipeline p(config, out, log);

  auto density = [&] { p.stage("density", [&] { p.density(); }); };
  auto spectrum = [&] { p.stage("spectrum", [&] { p.spectrum(); }); };
  auto lambda = [&] { p.stage("lambda", [&] { p.lambda(); }); };
  auto rate = [&] { p.stage("rate", [&] { p.rate(); }); p.write_gate_verdict("rate", "rate.json"); };
  auto variance = [&] { p.stage("variance", [&] { p.variance(); }); };
  auto aperiodicity = [&] { p.stage("aperiodicity", [&] { p.aperiodicity(); }); };
  auto clt = [&] { p.stage("verify-clt", [&] { p.clt(); }); p.write_gate_verdict("verify-clt", "clt.json"); };
  auto ldp = [&] { p.stage("verify-ldp", [&] { p.ldp(); }); p.write_gate_verdict("verify-ldp", "ldp.json"); };
  auto lclt = [&] { p.stage("verify-lclt", [&] { p.lclt(); }); p.write_gate_verdict("verify-lclt", "lclt.json"); };

  switch (subcommand) {
    case Subcommand::density: density(); break;
    case Subcommand::spectrum: spectrum(); break;
    case Subcommand::lambda: lambda(); break;
    case Subcommand::rate: rate(); break;
    case Subcommand::variance: variance(); break;
    case Subcommand::aperiodicity: aperiodicity(); break;
    case Subcommand::verify_clt: clt(); break;
    case Subcommand::verify_ldp: ldp(); break;
    case Subcommand::verify_lclt: lclt(); break;
    case Subcommand::all:
      if (config.ldp_samples == config.lclt_samples) {
        p.tail_checkpoints.insert(config.ldp_n.begin(), config.ldp_n.end());
        p.tail_checkpoints.insert(config.lclt_n);
      }
      density();
      spectrum();
      lambda();
      variance();
      rate();
      aperiodicity();
      clt();
      ldp();
      lclt();
      break;
  }

  RunResult result = std::move(p.result);
  bool failed = false;
  for (const auto& c : result.checks) failed = failed || !c.pass;
  result.exit_code = !result.refusals.empty() ? kExitRefused : failed ? kExitCheckFailed : kExitOk;

  std::size_t passed = 0;
  for (const auto& c : result.checks) passed += c.pass;
  out.write_json("verdict.json", {{"subcommand", std::string(subcommand_name(subcommand))},
                                  {"config_hash", config.hash},
                                  {"tool_version", tool_version()},
                                  {"checks", checks_json(result)},
                                  {"refusals", refusals_json(result)},
                                  {"exit_code", result.exit_code}});

  json files = json::array();
  for (const auto& name : out.files()) {
    const std::string body = read_file(out.dir() / name);
    files.push_back({{"path", name}, {"hash", content_hash(body)}, {"bytes", body.size()}});
  }
  json timings = json::object();
  for (const auto& [stage, seconds] : p.timings) timings[stage] = seconds;
  out.write_json("manifest.json", {{"config_hash", config.hash},
                                   {"tool_version", tool_version()},
                                   {"subcommand", std::string(subcommand_name(subcommand))},
                                   {"files", files},
                                   {"timings_seconds", timings},
                                   {"workers", worker_count()},
                                   {"summary",
                                    {{"checks_passed", passed},
                                     {"checks_failed", result.checks.size() - passed},
                                     {"refusals", result.refusals.size()},
                                     {"exit_code", result.exit_code}}}});
  result.files = out.files();
  return result;
}

}  // namespace qcl::cli
