#include <iostream>

#include <CLI11.hpp>

#include "nehari/cli/commands.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Nehari manifold solvers: fibering analysis, branch levels, prescribed energy, affine sweeps"};
  app.require_subcommand(1, 1);

  nehari::cli::RunOptions opts;
  std::string config, out;
  std::uint64_t seed = 0;
  app.add_option("--config", config, "configuration file (INI-style or JSON)");
  app.add_option("--out", out, "output directory (overrides [output] dir)");
  auto* seed_opt = app.add_option("--seed", seed, "RNG seed (overrides the config)");
  app.add_option("--threads", opts.threads, "worker threads, 0 = hardware concurrency");
  app.add_flag("--strict", opts.strict, "treat warnings as failures");

  const char* help[] = {"single-ray fibering analysis from explicit coefficients",
                        "branch levels of a configured problem",
                        "prescribed-energy sweep with h0, levels and gap diagnostics",
                        "affine lambda-sweep with the qualitative sweep checks",
                        "full oracle and invariant suite"};
  std::size_t k = 0;
  for (const auto& name : nehari::cli::subcommands()) {
    app.add_subcommand(name, help[k++])->fallthrough();
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return nehari::cli::kConfigError;
  }

  if (!config.empty()) opts.config = config;
  if (!out.empty()) opts.out = out;
  if (seed_opt->count() > 0) opts.seed = seed;
  const std::string command = app.get_subcommands().front()->get_name();
  return nehari::cli::run(command, opts, std::cout, std::cerr);
}
