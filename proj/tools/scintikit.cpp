#include <cstdint>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "scintikit/commands.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Scintillation carrier dynamics: simulation, stationary states and decay bounds"};
  app.set_version_flag("--version", std::string(scintikit::kVersion));
  app.require_subcommand(1);

  std::vector<std::string> configs;
  std::string out;
  std::uint64_t seed = 0;

  const std::vector<std::pair<std::string, std::string>> commands{
      {"validate", "check the model hypotheses and print a checklist"},
      {"simulate", "integrate in time and write diagnostics"},
      {"stationary", "solve for the stationary state"},
      {"bound", "evaluate the decay constants and verify the estimate on a run"},
      {"yield", "light yields from a quenching-free run, with the yield bound"},
      {"fit-decay", "fit exponential decay to a diagnostics column"},
  };
  std::vector<CLI::App*> subs;
  std::vector<CLI::Option*> out_opts, seed_opts;
  for (const auto& [name, help] : commands) {
    CLI::App* sub = app.add_subcommand(name, help);
    sub->add_option("--config", configs, "configuration file (repeat for a sweep)")
        ->required()
        ->check(CLI::ExistingFile);
    out_opts.push_back(sub->add_option("--out", out, "output directory"));
    seed_opts.push_back(sub->add_option("--seed", seed, "seed for the state samplers"));
    subs.push_back(sub);
  }

  CLI11_PARSE(app, argc, argv);

  for (std::size_t i = 0; i < subs.size(); ++i) {
    if (!subs[i]->parsed()) continue;
    std::optional<std::string> out_dir;
    std::optional<std::uint64_t> seed_value;
    if (out_opts[i]->count() > 0) out_dir = out;
    if (seed_opts[i]->count() > 0) seed_value = seed;
    return scintikit::run_commands(subs[i]->get_name(), configs, out_dir, seed_value,
                                   std::cout);
  }
  return scintikit::exit_config;
}
