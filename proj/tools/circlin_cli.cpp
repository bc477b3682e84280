// circlin: experiment driver.
//
//   circlin <angles|strings|run|conjugacy|all> --config PATH [--out DIR]
//           [--precision BITS] [--depth N] [--budget N] [--threads N]
//
// Exit codes: 0 success, 2 validation, 3 budget exhausted, 4 certification.

#include <iostream>
#include <map>

#include "CLI11.hpp"

#include "circlin/error.hpp"
#include "circlin/experiment.hpp"

namespace ex = circlin::experiment;

int main(int argc, char** argv) {
  CLI::App app{"circlin: linearization experiments for commuting circle diffeomorphisms"};
  app.require_subcommand(1);

  std::string config_path;
  ex::Overrides ov;
  long precision = 0;
  int depth = -1, threads = 0;
  std::int64_t budget = 0;
  std::string out;

  const std::map<std::string, ex::CommandResult (*)(const ex::ExperimentConfig&)> commands = {
      {"angles", &ex::cmd_angles},       {"strings", &ex::cmd_strings}, {"run", &ex::cmd_run},
      {"conjugacy", &ex::cmd_conjugacy}, {"all", &ex::cmd_all},
  };
  const std::map<std::string, std::string> help = {
      {"angles", "convergent tables and joint D-set report"},
      {"strings", "alternated configuration of Diophantine strings"},
      {"run", "dynamics traces with transfer, exponent and local-criterion reports"},
      {"conjugacy", "Cesaro conjugacy estimate, Delta norms and regularity gate"},
      {"all", "every stage in order"},
  };
  for (const auto& [name, fn] : commands) {
    CLI::App* sub = app.add_subcommand(name, help.at(name));
    sub->add_option("--config", config_path, "experiment config (JSON)")->required();
    sub->add_option("--out", out, "output directory");
    sub->add_option("--precision", precision, "working precision in bits");
    sub->add_option("--depth", depth, "convergent depth for every stage");
    sub->add_option("--budget", budget, "evaluation budget");
    sub->add_option("--threads", threads, "worker threads");
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }

  try {
    ex::ExperimentConfig cfg = ex::load_config(config_path);
    if (precision != 0) ov.precision_bits = precision;
    if (depth >= 0) ov.depth = depth;
    if (budget != 0) ov.budget = budget;
    if (threads != 0) ov.threads = threads;
    if (!out.empty()) ov.out_dir = out;
    ex::apply_overrides(cfg, ov);

    const std::string name = app.get_subcommands().front()->get_name();
    const ex::CommandResult res = commands.at(name)(cfg);
    for (const auto& w : res.warnings) std::cerr << "warning: " << w << "\n";
    for (const auto& f : res.files) std::cout << f << "\n";
    std::cout << res.summary.dump() << "\n";
    return 0;
  } catch (const circlin::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return circlin::exit_code(e.kind());
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
