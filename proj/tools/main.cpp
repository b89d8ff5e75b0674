#include "aploc/cli.hpp"

#include <CLI11.hpp>

#include <iostream>

int main(int argc, char** argv) {
  CLI::App app{"aploc: MEG/EEG multi-dipole localization by alternating "
               "projection, with recursive MUSIC/beamformer baselines and a "
               "Monte-Carlo benchmark harness"};
  app.require_subcommand(1);

  aploc::CliOptions opts;
  std::uint64_t seed_value = 0;

  auto add_common = [&](CLI::App* sub, bool needs_data) {
    sub->add_option("--config", opts.config_path, "JSON configuration file")
        ->required();
    if (needs_data)
      sub->add_option("--data", opts.data_path, "recording CSV to localize")
          ->required();
    sub->add_option("--out-dir", opts.out_dir, "output directory")
        ->capture_default_str();
    sub->add_option("--workers", opts.workers,
                    "parallel trial workers (0 = all cores)")
        ->capture_default_str();
    sub->add_option("--seed", seed_value, "override the config master seed");
  };

  CLI::App* simulate =
      app.add_subcommand("simulate", "synthesize a dataset from a config");
  add_common(simulate, false);
  CLI::App* localize =
      app.add_subcommand("localize", "run the configured localizers on data");
  add_common(localize, true);
  CLI::App* benchmark =
      app.add_subcommand("benchmark", "run the Monte-Carlo sweep");
  add_common(benchmark, false);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);  // --help
    app.exit(e);
    return aploc::kExitConfig;
  }

  for (CLI::App* sub : {simulate, localize, benchmark})
    if (sub->parsed() && sub->count("--seed") > 0)
      opts.seed_override = seed_value;

  if (simulate->parsed()) return aploc::cmd_simulate(opts);
  if (localize->parsed()) return aploc::cmd_localize(opts);
  if (benchmark->parsed()) return aploc::cmd_benchmark(opts);
  std::cerr << "no subcommand\n";
  return aploc::kExitConfig;
}
