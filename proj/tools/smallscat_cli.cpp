// Command-line driver over the smallscat C API.
//
// Subcommands select the pipeline family; the scenario config carries the
// details. Exit codes: 0 success, 1 validation/input error, 2 numerical
// failure.

#include <cstdio>
#include <memory>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "smallscat.h"

namespace {

struct CommonArgs {
  std::string config;
  long long seed = -1;
  std::string out_dir;
  int threads = 0;
};

void add_common(CLI::App* cmd, CommonArgs& args) {
  cmd->add_option("--config", args.config, "Scenario config file (JSON)")
      ->required();
  cmd->add_option("--seed", args.seed, "Override the ensemble seed");
  cmd->add_option("--out", args.out_dir, "Override the output directory");
  cmd->add_option("--threads", args.threads,
                  "Worker threads (0 = hardware default)");
}

int run_command(const CommonArgs& args,
                const std::vector<std::string>& allowed_modes,
                bool needs_plot_spec) {
  if (args.threads > 0) sscat_set_threads(args.threads);

  using ScenarioPtr =
      std::unique_ptr<sscat_scenario, decltype(&sscat_scenario_free)>;
  ScenarioPtr scenario(sscat_scenario_load(args.config.c_str()),
                       &sscat_scenario_free);
  if (!scenario) {
    std::fprintf(stderr, "error: %s\n", sscat_last_error());
    return 1;
  }

  char mode[64] = {0};
  sscat_scenario_mode(scenario.get(), mode, sizeof mode);
  bool mode_ok = false;
  for (const auto& m : allowed_modes) mode_ok = mode_ok || m == mode;
  if (!mode_ok) {
    std::fprintf(stderr,
                 "error: config mode '%s' does not match this subcommand\n",
                 mode);
    return 1;
  }
  if (needs_plot_spec && !sscat_scenario_has_plot_spec(scenario.get())) {
    std::fprintf(stderr,
                 "error: emit needs an output.line or output.plane spec\n");
    return 1;
  }

  if (args.seed >= 0)
    sscat_scenario_set_seed(scenario.get(),
                            static_cast<unsigned long long>(args.seed));
  if (!args.out_dir.empty())
    sscat_scenario_set_output_dir(scenario.get(), args.out_dir.c_str());

  std::string summary(1 << 16, '\0');
  const int status =
      sscat_scenario_run(scenario.get(), summary.data(), summary.size());
  std::fputs(summary.c_str(), stdout);
  if (status != SSCAT_OK) {
    std::fprintf(stderr, "error: %s\n", sscat_last_error());
    return status == SSCAT_ERROR_NUMERICAL ? 2 : 1;
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"smallscat: wave scattering by ensembles of small bodies"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(sscat_version()));

  CommonArgs polar_args, solve_args, compare_args, emit_args;

  CLI::App* polar = app.add_subcommand(
      "polarizability",
      "Capacitance and polarizability tensors of one body shape");
  add_common(polar, polar_args);

  CLI::App* solve = app.add_subcommand(
      "solve", "Self-consistent field of a body ensemble (acoustic or EM)");
  add_common(solve, solve_args);

  CLI::App* compare = app.add_subcommand(
      "compare", "Discrete ensembles against the continuum limit");
  add_common(compare, compare_args);

  CLI::App* emit = app.add_subcommand(
      "emit", "Solve and emit plot data along a line or plane");
  add_common(emit, emit_args);

  CLI11_PARSE(app, argc, argv);

  const std::vector<std::string> solver_modes = {
      "acoustic-discrete", "acoustic-continuum", "em-discrete", "em-continuum"};

  if (polar->parsed())
    return run_command(polar_args, {"polarizability"}, false);
  if (solve->parsed()) return run_command(solve_args, solver_modes, false);
  if (compare->parsed()) return run_command(compare_args, {"compare"}, false);
  if (emit->parsed()) return run_command(emit_args, solver_modes, true);
  return 1;
}
