#include <cstdlib>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "qcl/cli/driver.hpp"
#include "qcl/parallel.hpp"

namespace qcl::cli {

int main_entry(int argc, char** argv) {
  CLI::App app{"Quenched limit theorems for random hyperbolic torus maps"};
  app.require_subcommand(1, 1);

  std::string config_path;
  std::vector<std::string> overrides;
  unsigned workers = 0;
  std::string out_dir;

  for (const auto& name : subcommand_names()) {
    CLI::App* sub = app.add_subcommand(name, "Run the " + name + " stage");
    sub->add_option("--config", config_path, "YAML or JSON configuration")->required();
    sub->add_option("--set", overrides, "Override a field: dotted.key=value");
    sub->add_option("--workers", workers, "Worker threads (0 = all cores)");
    sub->add_option("--out", out_dir, "Output directory (default: output.dir)");
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitInvalidConfig;
  }

  // QCL_SEED replaces the root seed after every other override.
  if (const char* env = std::getenv("QCL_SEED"); env && *env) overrides.push_back(std::string("seed=") + env);

  const auto subcommand = parse_subcommand(app.get_subcommands().front()->get_name());
  ExperimentConfig config;
  try {
    config = load_config(config_path, overrides);
  } catch (const ConfigError& e) {
    std::cerr << "qcl: invalid configuration: " << e.what() << '\n';
    return kExitInvalidConfig;
  }
  set_worker_count(workers);

  try {
    const RunResult result = run(*subcommand, config, out_dir.empty() ? config.out_dir : out_dir, std::clog);
    for (const auto& r : result.refusals) std::cerr << "qcl: " << r.stage << " refused: " << r.message << '\n';
    return result.exit_code;
  } catch (const std::exception& e) {
    std::cerr << "qcl: error: " << e.what() << '\n';
    return kExitCheckFailed;
  }
}

}  // namespace qcl::cli
